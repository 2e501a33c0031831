//! Evaluation: global and segmental MAE per task, per-launch-power
//! breakdown, CSV and SVG artifacts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::LabelWindows;
use crate::dataset::Dataset;
use crate::nn::TASK_NAMES;
use crate::train::Model;
use crate::{Error, Result};

pub const N_SEG_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEval {
    pub name: String,
    pub unit: String,
    pub mae: f64,
    pub segmental: Vec<SegBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMeta {
    pub model: String,
    pub n_test: usize,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tasks: Vec<TaskEval>,
    /// (launch power dBm, per-task MAE) rows.
    pub per_power: Vec<(f64, [f64; 4])>,
    pub meta: EvalMeta,
}

pub const TASK_UNITS: [&str; 4] = ["dB", "dB", "ps/nm", "ps"];

/// Build the report from physical-unit truths and predictions.
/// `powers[i]` is the launch power of sample i.
pub fn evaluate_predictions(
    truths: &[[f64; 4]],
    preds: &[[f64; 4]],
    powers: &[f64],
    windows: &LabelWindows,
    meta: EvalMeta,
) -> Result<EvalReport> {
    if truths.is_empty() || truths.len() != preds.len() || truths.len() != powers.len() {
        return Err(Error::invalid_argument("evaluate: empty or mismatched inputs"));
    }
    let win = windows.as_array();
    let mut tasks = Vec::with_capacity(4);
    for t in 0..4 {
        let (lo, hi) = win[t];
        let width = (hi - lo) / N_SEG_BINS as f64;
        let mut bins: Vec<(usize, f64)> = vec![(0, 0.0); N_SEG_BINS];
        let mut total_abs = 0.0;
        for (truth, pred) in truths.iter().zip(preds.iter()) {
            let err = (truth[t] - pred[t]).abs();
            total_abs += err;
            let mut b = ((truth[t] - lo) / width).floor() as isize;
            b = b.clamp(0, N_SEG_BINS as isize - 1);
            bins[b as usize].0 += 1;
            bins[b as usize].1 += err;
        }
        let segmental: Vec<SegBin> = bins
            .iter()
            .enumerate()
            .map(|(i, &(count, sum))| SegBin {
                lo: lo + i as f64 * width,
                hi: lo + (i + 1) as f64 * width,
                count,
                mae: if count > 0 { sum / count as f64 } else { 0.0 },
            })
            .collect();
        tasks.push(TaskEval {
            name: TASK_NAMES[t].to_string(),
            unit: TASK_UNITS[t].to_string(),
            mae: total_abs / truths.len() as f64,
            segmental,
        });
    }

    let mut power_levels: Vec<f64> = powers.to_vec();
    power_levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    power_levels.dedup();
    let mut per_power = Vec::with_capacity(power_levels.len());
    for p in power_levels {
        let mut sums = [0.0; 4];
        let mut count = 0usize;
        for ((truth, pred), &pw) in truths.iter().zip(preds.iter()).zip(powers.iter()) {
            if pw == p {
                for t in 0..4 {
                    sums[t] += (truth[t] - pred[t]).abs();
                }
                count += 1;
            }
        }
        if count > 0 {
            per_power.push((p, sums.map(|s| s / count as f64)));
        }
    }
    Ok(EvalReport { tasks, per_power, meta })
}

/// Run the model over the test split and report in physical units.
pub fn evaluate(dataset: &Dataset, model: &Model, threads: usize) -> Result<EvalReport> {
    let test = &dataset.manifest.split.test;
    if test.is_empty() {
        return Err(Error::invalid_argument("evaluate: test split is empty"));
    }
    let windows = dataset.manifest.config.dataset.windows;
    let preds = predict_indices(dataset, model, test, threads)?;
    let truths: Vec<[f64; 4]> = test.iter().map(|&i| dataset.labels(i as usize)).collect();
    let powers: Vec<f64> = test
        .iter()
        .map(|&i| dataset.manifest.records[i as usize].launch_power_dbm)
        .collect();
    let meta = EvalMeta { model: model.kind().to_string(), n_test: test.len(), threads };
    evaluate_predictions(&truths, &preds, &powers, &windows, meta)
}

/// De-normalized model predictions for a set of sample indices.
pub fn predict_indices(
    dataset: &Dataset,
    model: &Model,
    indices: &[u32],
    threads: usize,
) -> Result<Vec<[f64; 4]>> {
    let windows = dataset.manifest.config.dataset.windows;
    let t = threads.max(1).min(indices.len().max(1));
    let chunk = indices.len().div_ceil(t);
    let results: Vec<Result<Vec<[f64; 4]>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = indices
            .chunks(chunk.max(1))
            .map(|ids| {
                scope.spawn(move || -> Result<Vec<[f64; 4]>> {
                    ids.iter()
                        .map(|&i| {
                            let input = model.prepare(dataset, i as usize)?;
                            let norm = model.predict(input)?;
                            Ok(windows.denormalize(norm))
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("predict worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(indices.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Machine-readable report: one global row per task, then segmental rows.
pub fn write_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut s = String::from("section,task,unit,lo,hi,count,mae\n");
    for t in &report.tasks {
        s.push_str(&format!("global,{},{},,,{},{:.9e}\n", t.name, t.unit, report.meta.n_test, t.mae));
    }
    for t in &report.tasks {
        for b in &t.segmental {
            s.push_str(&format!(
                "segmental,{},{},{:.6},{:.6},{},{:.9e}\n",
                t.name, t.unit, b.lo, b.hi, b.count, b.mae
            ));
        }
    }
    for (p, maes) in &report.per_power {
        for (t, mae) in report.tasks.iter().zip(maes.iter()) {
            s.push_str(&format!("power_{p},{},{},,,,{:.9e}\n", t.name, t.unit, mae));
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Predictions dump for downstream plotting: truth and estimate per task.
pub fn write_predictions_csv(
    truths: &[[f64; 4]],
    preds: &[[f64; 4]],
    powers: &[f64],
    path: &Path,
) -> Result<()> {
    let mut s = String::from(
        "snr_nl_true,osnr_true,cd_true,dgd_true,snr_nl_est,osnr_est,cd_est,dgd_est,power_dbm\n",
    );
    for ((t, p), pw) in truths.iter().zip(preds.iter()).zip(powers.iter()) {
        s.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.1}\n",
            t[0], t[1], t[2], t[3], p[0], p[1], p[2], p[3], pw
        ));
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Scatter of estimates vs truth with the segmental-MAE overlay, one SVG
/// per task.
pub fn write_svg(
    report: &EvalReport,
    truths: &[[f64; 4]],
    preds: &[[f64; 4]],
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (t, task) in report.tasks.iter().enumerate() {
        let lo = task.segmental.first().map(|b| b.lo).unwrap_or(0.0);
        let hi = task.segmental.last().map(|b| b.hi).unwrap_or(1.0);
        let span = (hi - lo).max(1e-12);
        let (w, h, m) = (640.0, 480.0, 60.0);
        let sx = |v: f64| m + (v - lo) / span * (w - 2.0 * m);
        let sy = |v: f64| h - m - (v - lo) / span * (h - 2.0 * m);
        let max_seg = task.segmental.iter().map(|b| b.mae).fold(1e-12, f64::max);
        let sy_mae = |v: f64| h - m - v / (1.3 * max_seg) * (h - 2.0 * m);
        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        ));
        svg.push_str(&format!(
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{} estimation ({})  MAE {:.4}</text>\n",
            w / 2.0, task.name, task.unit, task.mae
        ));
        // axes + identity line
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{3}\" stroke=\"black\"/>\n",
            m, h - m, w - m, m
        ));
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-dasharray=\"4\"/>\n",
            sx(lo), sy(lo), sx(hi), sy(hi)
        ));
        for (truth, pred) in truths.iter().zip(preds.iter()) {
            let cx = sx(truth[t].clamp(lo, hi));
            let cy = sy(pred[t].clamp(lo, hi));
            svg.push_str(&format!(
                "<circle cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"2\" fill=\"steelblue\" fill-opacity=\"0.5\"/>\n"
            ));
        }
        // segmental MAE polyline on the secondary scale
        let pts: Vec<String> = task
            .segmental
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| format!("{:.1},{:.1}", sx((b.lo + b.hi) / 2.0), sy_mae(b.mae)))
            .collect();
        if pts.len() > 1 {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"crimson\" stroke-width=\"2\"/>\n",
                pts.join(" ")
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">truth ({})</text>\n<text x=\"14\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 14 {})\">estimate / segmental MAE</text>\n",
            w / 2.0 - 30.0,
            h - 24.0,
            task.unit,
            h / 2.0,
            h / 2.0
        ));
        svg.push_str("</svg>\n");
        std::fs::write(dir.join(format!("eval_{}.svg", task.name)), svg)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> EvalMeta {
        EvalMeta { model: "stub".into(), n_test: 0, threads: 1 }
    }

    #[test]
    fn perfect_predictor_zero_mae() {
        let truths = vec![[10.0, 20.0, 1700.0, 30.0], [5.0, 15.0, 3400.0, 10.0]];
        let powers = vec![0.0, 2.0];
        let r = evaluate_predictions(
            &truths,
            &truths.clone(),
            &powers,
            &LabelWindows::default(),
            meta(),
        )
        .unwrap();
        for t in &r.tasks {
            assert_eq!(t.mae, 0.0);
        }
    }

    #[test]
    fn predict_mean_matches_mad_and_identity() {
        // predict-mean stub: per-task MAE equals the mean absolute
        // deviation of the labels; weighted segmental mean equals global
        let truths: Vec<[f64; 4]> = (0..50)
            .map(|i| {
                let v = i as f64;
                [v * 0.4, 10.0 + v * 0.4, v * 1000.0, v * 2.0]
            })
            .collect();
        let mut mean = [0.0; 4];
        for t in &truths {
            for k in 0..4 {
                mean[k] += t[k] / truths.len() as f64;
            }
        }
        let preds = vec![mean; truths.len()];
        let powers = vec![2.0; truths.len()];
        let r = evaluate_predictions(&truths, &preds, &powers, &LabelWindows::default(), meta())
            .unwrap();
        for (k, task) in r.tasks.iter().enumerate() {
            let mad: f64 = truths.iter().map(|t| (t[k] - mean[k]).abs()).sum::<f64>()
                / truths.len() as f64;
            assert!((task.mae - mad).abs() < 1e-12);
            // count-weighted segmental mean reproduces the global MAE
            let total: usize = task.segmental.iter().map(|b| b.count).sum();
            let weighted: f64 =
                task.segmental.iter().map(|b| b.mae * b.count as f64).sum::<f64>() / total as f64;
            assert!((weighted - task.mae).abs() < 1e-9, "task {k}");
        }
    }

    #[test]
    fn per_power_rows() {
        let truths = vec![[1.0, 1.0, 1.0, 1.0]; 4];
        let preds = vec![
            [2.0, 1.0, 1.0, 1.0],
            [1.0, 1.0, 1.0, 1.0],
            [3.0, 1.0, 1.0, 1.0],
            [1.0, 1.0, 1.0, 1.0],
        ];
        let powers = vec![0.0, 0.0, 2.0, 2.0];
        let r = evaluate_predictions(&truths, &preds, &powers, &LabelWindows::default(), meta())
            .unwrap();
        assert_eq!(r.per_power.len(), 2);
        assert_eq!(r.per_power[0].0, 0.0);
        assert!((r.per_power[0].1[0] - 0.5).abs() < 1e-12);
        assert!((r.per_power[1].1[0] - 1.0).abs() < 1e-12);
    }
}
