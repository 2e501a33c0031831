//! `fropm` — coherent-link impairment estimation pipeline.
//!
//! Exit codes: 0 success, 1 invalid configuration or usage, 2 runtime
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fropm_core::config::{Config, ModelKind};
use fropm_core::dataset::{generate_dataset, recompute_features, Dataset};
use fropm_core::error::Error;
use fropm_core::eval::{evaluate, write_csv, write_predictions_csv, write_svg, EvalReport};
use fropm_core::frft::frft;
use fropm_core::train::{load_model, train};
use fropm_core::C64;

#[derive(Parser)]
#[command(name = "fropm", version, about = "FrFT time-frequency impairment estimation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset (channel simulation + feature images).
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Use the desk-scale profile as the base configuration.
        #[arg(long, default_value_t = false)]
        desk: bool,
    },
    /// Recompute feature images from stored received training sequences.
    Features {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-shot fractional Fourier transform of a complex f32 LE file.
    Frft {
        #[arg(long)]
        order: f64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a generated dataset.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Render SVG plots from an eval output directory.
    Report {
        #[arg(long = "eval")]
        eval_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(e: &Error) -> ExitCode {
    match e {
        Error::InvalidConfig(_) | Error::InvalidArgument(_) => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn load_config(path: &Option<PathBuf>, desk: bool) -> Result<Config, Error> {
    match path {
        Some(p) => Config::from_file(p),
        None if desk => Ok(Config::desk()),
        None => Ok(Config::paper()),
    }
}

fn read_complex_f32(path: &PathBuf) -> Result<Vec<C64>, Error> {
    let raw = std::fs::read(path)?;
    if raw.len() % 8 != 0 {
        return Err(Error::invalid_argument("input must be interleaved complex f32 pairs"));
    }
    Ok(raw
        .chunks_exact(8)
        .map(|c| {
            C64::new(
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64,
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64,
            )
        })
        .collect())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { config, samples, seed, out, threads, desk } => {
            let mut cfg = load_config(&config, desk)?;
            if let Some(n) = samples {
                cfg.dataset.n_samples = n;
            }
            let n = cfg.dataset.n_samples;
            let manifest = generate_dataset(&cfg, n, seed, &out, threads)?;
            println!(
                "wrote {} samples to {} ({} regenerated)",
                manifest.n_samples,
                out.display(),
                manifest.rejected_total
            );
            Ok(())
        }
        Command::Features { config, data, out } => {
            let dataset = Dataset::load(&data)?;
            let feature = match config {
                Some(p) => Config::from_file(&p)?.feature,
                None => dataset.manifest.config.feature.clone(),
            };
            let manifest = recompute_features(&dataset, &feature, &out)?;
            println!("recomputed {} feature images into {}", manifest.n_samples, out.display());
            Ok(())
        }
        Command::Frft { order, input, out } => {
            let x = read_complex_f32(&input)?;
            let y = frft(&x, order)?;
            let mut bytes = Vec::with_capacity(y.len() * 8);
            for v in &y {
                bytes.extend_from_slice(&(v.re as f32).to_le_bytes());
                bytes.extend_from_slice(&(v.im as f32).to_le_bytes());
            }
            std::fs::write(&out, bytes)?;
            println!("transformed {} samples at order {order}", y.len());
            Ok(())
        }
        Command::Train { config, data, out, model, epochs, seed, threads } => {
            let dataset = Dataset::load(&data)?;
            let mut cfg = match config {
                Some(p) => Config::from_file(&p)?,
                None => dataset.manifest.config.clone(),
            };
            if let Some(m) = model {
                cfg.train.model = match m.as_str() {
                    "vit" => ModelKind::Vit,
                    "dnn" => ModelKind::Dnn,
                    other => {
                        return Err(Error::invalid_argument(format!("unknown model '{other}'")))
                    }
                };
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            if let Some(t) = threads {
                cfg.train.threads = t;
            }
            let tcfg = cfg.train.clone();
            let result = train(&dataset, &cfg, &tcfg, &out)?;
            println!(
                "trained {} for {} epochs; best val loss {:.6} at epoch {}; checkpoint {}",
                tcfg.model,
                result.curves.len(),
                result.best_val_loss,
                result.best_epoch,
                result.checkpoint_prefix.display()
            );
            Ok(())
        }
        Command::Eval { config, data, checkpoint, out, threads } => {
            let dataset = Dataset::load(&data)?;
            let cfg = match config {
                Some(p) => Config::from_file(&p)?,
                None => dataset.manifest.config.clone(),
            };
            let model = load_model(&cfg, &checkpoint)?;
            let report = evaluate(&dataset, &model, threads)?;
            std::fs::create_dir_all(&out)?;
            write_csv(&report, &out.join("eval.csv"))?;
            std::fs::write(out.join("eval.json"), serde_json::to_vec_pretty(&report)?)?;
            let test = &dataset.manifest.split.test;
            let preds =
                fropm_core::eval::predict_indices(&dataset, &model, test, threads)?;
            let truths: Vec<[f64; 4]> =
                test.iter().map(|&i| dataset.labels(i as usize)).collect();
            let powers: Vec<f64> = test
                .iter()
                .map(|&i| dataset.manifest.records[i as usize].launch_power_dbm)
                .collect();
            write_predictions_csv(&truths, &preds, &powers, &out.join("predictions.csv"))?;
            write_svg(&report, &truths, &preds, &out)?;
            for t in &report.tasks {
                println!("{:>7} MAE: {:.4} {}", t.name, t.mae, t.unit);
            }
            Ok(())
        }
        Command::Report { eval_dir, out } => {
            let report: EvalReport =
                serde_json::from_slice(&std::fs::read(eval_dir.join("eval.json"))?)?;
            let preds_csv = std::fs::read_to_string(eval_dir.join("predictions.csv"))?;
            let mut truths = Vec::new();
            let mut preds = Vec::new();
            for line in preds_csv.lines().skip(1) {
                let f: Vec<f64> =
                    line.split(',').filter_map(|v| v.parse().ok()).collect();
                if f.len() >= 8 {
                    truths.push([f[0], f[1], f[2], f[3]]);
                    preds.push([f[4], f[5], f[6], f[7]]);
                }
            }
            let target = out.unwrap_or(eval_dir);
            write_svg(&report, &truths, &preds, &target)?;
            println!("report written to {}", target.display());
            for t in &report.tasks {
                println!("{:>7} MAE: {:.4} {}", t.name, t.mae, t.unit);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                // unknown flags and bad values are usage errors
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
