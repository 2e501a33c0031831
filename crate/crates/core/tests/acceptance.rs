//! Acceptance suite: one test per criterion, printing a pass line with
//! the measured quantities (visible with `--nocapture`).
//!
//! Criteria 8 and 9 share one desk-scale dataset and two trained models
//! behind a `OnceLock`, so whichever test runs first pays the cost once.

use std::sync::OnceLock;

use fropm_core::channel::{
    add_ase, apply_cd, apply_jones, build_pmd_cascade, compute_dgd, maxwellian_cdf, mix_seed,
    multiplex, run_link, ssfm_propagate, LinkConfig, PmdConfig, B_REF_HZ, DGD_FD_STEP,
};
use fropm_core::config::{Config, ModelKind, TrainConfig};
use fropm_core::dataset::{generate_dataset, Dataset};
use fropm_core::eval::{evaluate_predictions, predict_indices, write_csv, EvalMeta};
use fropm_core::frame::{
    assemble_frame, generate_qpsk_symbols, generate_ts, rrc_shape, FrameLayout,
};
use fropm_core::frft::{frft, frft_oracle};
use fropm_core::nn::{
    image_to_patches, image_to_row, multitask_loss, DnnConfig, GradBuffer, MultiTaskDnn,
    MultiTaskViT, ParamSet, Tape, TaskWeights, VitConfig,
};
use fropm_core::rxdsp::{combine_gsnr, derive_snr_nl, osnr_to_snr_ase, recover_payload, CmaConfig};
use fropm_core::signal::{ComplexSignal, DualPolSignal};
use fropm_core::testkit;
use fropm_core::train::{train, Model};
use fropm_core::C64;
use ndarray::Array2;

fn rel_l2(a: &[C64], b: &[C64]) -> f64 {
    testkit::rel_l2(a, b)
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn criterion_01_frft_correctness() {
    let t0 = std::time::Instant::now();
    // fast path vs the literal kernel-summation oracle on white noise;
    // orders sampled across [-1, 1] away from the oracle's identity
    // fallback at |a| <= 0.05
    let sizes = [64usize, 128, 256];
    let mut checked = 0;
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let n = sizes[(i % 3) as usize];
        let x = testkit::white_signal(1000 + i, n);
        let a = {
            let raw = -1.0 + 2.0 * ((i as f64) * 0.61803398875).fract();
            if raw.abs() <= 0.08 {
                raw + 0.3
            } else {
                raw
            }
        };
        let fast = frft(&x, a).unwrap();
        let slow = frft_oracle(&x, a).unwrap();
        let err = rel_l2(&fast, &slow);
        worst = worst.max(err);
        assert!(err < 1e-4, "N={n} a={a}: fast vs oracle rel L2 {err}");
        checked += 1;
    }
    assert_eq!(checked, 50);

    // order +/-1 against the direct centered DFT
    let mut worst_dft = 0.0f64;
    for n in sizes {
        let x = testkit::white_signal(7, n);
        let err = rel_l2(&frft(&x, 1.0).unwrap(), &testkit::centered_dft_direct(&x, false));
        let err_inv = rel_l2(&frft(&x, -1.0).unwrap(), &testkit::centered_dft_direct(&x, true));
        worst_dft = worst_dft.max(err).max(err_inv);
        assert!(err < 1e-6 && err_inv < 1e-6, "N={n}: DFT boundary {err} / {err_inv}");
        // order 2 is the grid reversal
        let rev = frft(&x, 2.0).unwrap();
        for k in 0..n {
            assert_eq!(rev[k], x[(n - k) % n]);
        }
    }

    // unitarity and additivity on time-frequency concentrated signals
    let mut worst_unit = 0.0f64;
    let mut worst_add = 0.0f64;
    for seed in 0..5u64 {
        let x = testkit::gaussian_chirp(seed, 128 + 64 * (seed as usize % 2), 0.2, 0.25);
        let nx = norm(&x);
        for k in 0..9 {
            let a = -1.0 + 0.25 * k as f64;
            if a == 0.0 {
                continue;
            }
            let y = frft(&x, a).unwrap();
            worst_unit = worst_unit.max((norm(&y) / nx - 1.0).abs());
        }
        for (a, b) in [(0.3, 0.4), (0.5, 0.5), (-0.3, 0.8), (0.25, -0.6), (-0.45, -0.45)] {
            let lhs = frft(&frft(&x, a).unwrap(), b).unwrap();
            let rhs = frft(&x, a + b).unwrap();
            worst_add = worst_add.max(rel_l2(&lhs, &rhs));
        }
    }
    assert!(worst_unit < 1e-6, "unitarity {worst_unit}");
    assert!(worst_add < 1e-3, "additivity {worst_add}");
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 30.0, "runtime {dt:.1}s exceeds 30s");
    println!(
        "[AC-01] PASS frft: oracle {worst:.2e}, dft {worst_dft:.2e}, unitarity {worst_unit:.2e}, additivity {worst_add:.2e}, {dt:.1}s"
    );
}

#[test]
fn criterion_02_pmd_statistics() {
    let t0 = std::time::Instant::now();
    let n_runs = 10_000usize;
    let mean_target = 30.0;
    let mut dgds = Vec::with_capacity(n_runs);
    let mut rel_err_sum = 0.0;
    for seed in 0..n_runs as u64 {
        let u = build_pmd_cascade(&PmdConfig { n_segments: 20, mean_dgd_ps: mean_target, seed })
            .unwrap();
        let dgd = compute_dgd(&u, 0.0, DGD_FD_STEP);
        let oracle = testkit::dgd_eigen_oracle(&u, 0.0, DGD_FD_STEP);
        rel_err_sum += (dgd - oracle).abs() / oracle;
        dgds.push(dgd);
    }
    let mean: f64 = dgds.iter().sum::<f64>() / n_runs as f64;
    assert!(
        (mean - mean_target).abs() <= 0.02 * mean_target,
        "ensemble mean {mean} outside 2% of {mean_target}"
    );
    let ks = testkit::ks_statistic(&dgds, |x| maxwellian_cdf(x, mean_target).unwrap());
    let crit = testkit::ks_critical(n_runs, 0.01);
    assert!(ks < crit, "KS statistic {ks} >= critical {crit}");
    let mean_rel = rel_err_sum / n_runs as f64;
    assert!(mean_rel < 5e-3, "derivative formula vs eigen-oracle mean rel err {mean_rel}");
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 120.0, "runtime {dt:.1}s exceeds 2min");
    println!(
        "[AC-02] PASS pmd: mean {mean:.3} ps, KS {ks:.4} < {crit:.4}, dgd-formula-vs-oracle {mean_rel:.2e}, {dt:.1}s"
    );
}

fn ase_only_cfg() -> (LinkConfig, FrameLayout) {
    let layout = FrameLayout { payload_symbols: 4096, ..FrameLayout::default() };
    let link = LinkConfig {
        n_channels: 1,
        spans: 1,
        gamma_w_km: 0.0,
        pmd: PmdConfig { n_segments: 20, mean_dgd_ps: 0.0, seed: 0 },
        ssfm_steps_per_span: 8,
        ..LinkConfig::default()
    };
    (link, layout)
}

#[test]
fn criterion_03_label_algebra() {
    // ASE-only link: measured GSNR must reproduce the bandwidth-converted SNR_ASE
    let (mut link, layout) = ase_only_cfg();
    let ts =
        generate_ts::<f64>(layout.ts_order, layout.ts_symbols, layout.sps, layout.symbol_rate)
            .unwrap();
    let mut worst = 0.0f64;
    for (i, osnr) in [12.0, 20.0, 28.0].into_iter().enumerate() {
        link.target_osnr_db = Some(osnr);
        let [sx, sy] = generate_qpsk_symbols::<f64>(40 + i as u64, layout.payload_symbols).unwrap();
        let payload =
            DualPolSignal::new(rrc_shape(&sx, &layout).unwrap(), rrc_shape(&sy, &layout).unwrap())
                .unwrap();
        let frame = assemble_frame(&ts, &payload, link.launch_power_dbm).unwrap();
        let mut realization = run_link(&link, std::slice::from_ref(&frame), 77 + i as u64).unwrap();
        let rec = recover_payload(
            &realization,
            &layout,
            &sx,
            &sy,
            &CmaConfig::default(),
            link.carrier_wavelength_nm,
        )
        .unwrap();
        realization.labels.snr_nl_db = rec.snr.snr_nl_db;
        let want = osnr_to_snr_ase(osnr, layout.symbol_rate, B_REF_HZ);
        let err = (rec.snr.gsnr_db - want).abs();
        worst = worst.max(err);
        assert!(err < 0.5, "OSNR {osnr}: measured GSNR {} vs SNR_ASE {want}", rec.snr.gsnr_db);
        // decomposition closure on the generated sample
        let closure = (combine_gsnr(rec.snr.snr_nl_db, rec.snr.snr_ase_db) - rec.snr.gsnr_db).abs();
        if !rec.snr.clamped {
            assert!(closure < 1e-9, "closure {closure}");
        }
    }
    // algebraic closure across the plane
    for (nl, ase) in [(5.0, 18.0), (14.0, 14.0), (19.0, 25.0), (2.5, 11.0)] {
        let g = combine_gsnr(nl, ase);
        let (back, flag) = derive_snr_nl(g, ase);
        assert!(!flag && (back - nl).abs() < 1e-9, "closure at ({nl},{ase})");
    }
    println!("[AC-03] PASS label algebra: worst ASE-only GSNR error {worst:.3} dB");
}

#[test]
fn criterion_04_cd_chain() {
    let sig = testkit::dual_pol_ts_like(3, 512);
    let mut worst = 0.0f64;
    for d in [1700.0, 25_500.0, 51_000.0] {
        let rt = apply_cd(&apply_cd(&sig, d, 1550.0), -d, 1550.0);
        let err = rel_l2(&rt.x_pol.samples, &sig.x_pol.samples)
            .max(rel_l2(&rt.y_pol.samples, &sig.y_pol.samples));
        worst = worst.max(err);
        assert!(err < 1e-9, "D={d}: roundtrip {err}");
    }
    // linear-limit SSFM equals the closed-form dispersion filter
    let link = LinkConfig {
        n_channels: 1,
        spans: 2,
        gamma_w_km: 0.0,
        target_osnr_db: None,
        pmd: PmdConfig::default(),
        ..LinkConfig::default()
    };
    let mut field = testkit::dual_pol_ts_like(5, 1024);
    field.x_pol.sample_rate = 100e9;
    field.y_pol.sample_rate = 100e9;
    let out = ssfm_propagate(&field, &link).unwrap();
    let want = apply_cd(&field, link.total_cd_ps_nm(), link.carrier_wavelength_nm);
    let err = rel_l2(&out.x_pol.samples, &want.x_pol.samples);
    assert!(err < 1e-6, "ssfm linear limit {err}");
    println!("[AC-04] PASS cd chain: roundtrip {worst:.2e}, linear-limit {err:.2e}");
}

#[test]
fn criterion_05_ssfm_physics() {
    // CW SPM phase, exact effective length
    let link = LinkConfig {
        n_channels: 1,
        spans: 2,
        dispersion_ps_nm_km: 0.0,
        target_osnr_db: None,
        pmd: PmdConfig::default(),
        ..LinkConfig::default()
    };
    let n = 128;
    let p_total = 3.16e-3; // ~5 dBm combined
    let amp = (p_total / 2.0_f64).sqrt();
    let field = DualPolSignal::new(
        ComplexSignal::new(vec![C64::new(amp, 0.0); n], 100e9).unwrap(),
        ComplexSignal::new(vec![C64::new(amp, 0.0); n], 100e9).unwrap(),
    )
    .unwrap();
    let out = ssfm_propagate(&field, &link).unwrap();
    let alpha_np = link.attenuation_db_per_km * std::f64::consts::LN_10 / 10.0;
    let l_eff = (1.0 - (-alpha_np * link.span_length_km).exp()) / alpha_np;
    let want = link.manakov_factor * link.gamma_w_km * p_total * l_eff * link.spans as f64;
    let got = (out.x_pol.samples[11] / field.x_pol.samples[11]).arg();
    let rel = ((got - want) / want).abs();
    assert!(rel < 1e-3, "CW SPM phase {got} vs {want} (rel {rel})");

    // step-halving convergence at default settings
    let link16 = LinkConfig {
        n_channels: 1,
        spans: 1,
        target_osnr_db: None,
        pmd: PmdConfig::default(),
        launch_power_dbm: 6.0,
        ..LinkConfig::default()
    };
    let mut sig = testkit::dual_pol_ts_like(8, 2048);
    sig.x_pol.sample_rate = 100e9;
    sig.y_pol.sample_rate = 100e9;
    let scale = (3.98e-3 / sig.mean_power()).sqrt();
    sig.scale(scale);
    let out16 = ssfm_propagate(&sig, &link16).unwrap();
    let link32 = LinkConfig { ssfm_steps_per_span: 32, ..link16 };
    let out32 = ssfm_propagate(&sig, &link32).unwrap();
    let conv = rel_l2(&out16.x_pol.samples, &out32.x_pol.samples);
    assert!(conv < 1e-3, "step halving change {conv}");
    println!("[AC-05] PASS ssfm: CW SPM rel err {rel:.2e}, step-halving {conv:.2e}");
}

#[test]
fn criterion_06_tomography() {
    use fropm_core::frft::default_scan_orders;
    use fropm_core::tfimage::{inverse_radon, Sinogram};

    let size = 100usize;
    let nb = 100usize;
    let disk: Vec<(usize, usize)> = (0..size)
        .flat_map(|r| (0..size).map(move |c| (r, c)))
        .filter(|&(r, c)| {
            let x = -1.0 + 2.0 * c as f64 / 99.0;
            let y = -1.0 + 2.0 * r as f64 / 99.0;
            x * x + y * y <= 1.0
        })
        .collect();

    // random anisotropic Gaussian-mixture phantoms with analytic
    // projections (the same object class the scan produces)
    let mut errs = [0.0f64; 3];
    let mut min_corr = f64::MAX;
    let angle_counts = [11usize, 21, 41];
    for trial in 0..20u64 {
        let mut rng = {
            use rand::SeedableRng;
            rand_chacha::ChaCha8Rng::seed_from_u64(500 + trial)
        };
        use rand::Rng;
        let blobs: Vec<(f64, f64, [[f64; 2]; 2], f64)> = (0..3)
            .map(|_| {
                let cx: f64 = rng.gen_range(-0.35..0.35);
                let cy: f64 = rng.gen_range(-0.35..0.35);
                let sx: f64 = rng.gen_range(0.06..0.2);
                let sy: f64 = rng.gen_range(0.06..0.2);
                let rot: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                let (s, c) = rot.sin_cos();
                let cov = [
                    [c * c * sx * sx + s * s * sy * sy, s * c * (sx * sx - sy * sy)],
                    [s * c * (sx * sx - sy * sy), s * s * sx * sx + c * c * sy * sy],
                ];
                (cx, cy, cov, rng.gen_range(0.5..1.0))
            })
            .collect();
        let truth: Vec<f64> = (0..size * size)
            .map(|i| {
                let (r, c) = (i / size, i % size);
                let x = -1.0 + 2.0 * c as f64 / 99.0;
                let y = -1.0 + 2.0 * r as f64 / 99.0;
                blobs
                    .iter()
                    .map(|&(cx, cy, cov, amp)| {
                        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
                        let inv = [
                            [cov[1][1] / det, -cov[0][1] / det],
                            [-cov[1][0] / det, cov[0][0] / det],
                        ];
                        let (dx, dy) = (x - cx, y - cy);
                        let q = inv[0][0] * dx * dx + 2.0 * inv[0][1] * dx * dy + inv[1][1] * dy * dy;
                        amp * (-q / 2.0).exp()
                    })
                    .sum()
            })
            .collect();
        let tmax = truth.iter().cloned().fold(0.0, f64::max);

        for (ai, &n_ang) in angle_counts.iter().enumerate() {
            // analytic projections at uniform angles via the scan's
            // order -> angle mapping (orders -1..1 exclusive of +1)
            let orders: Vec<f64> =
                (0..n_ang).map(|k| -1.0 + 2.0 * k as f64 / n_ang as f64).collect();
            let mut plane = Array2::<f64>::zeros((n_ang, nb));
            for (row, &a) in orders.iter().enumerate() {
                let theta = a * std::f64::consts::FRAC_PI_2;
                let (s, c) = theta.sin_cos();
                for b in 0..nb {
                    let sv = -1.0 + 2.0 * b as f64 / (nb - 1) as f64;
                    let mut acc = 0.0;
                    for &(cx, cy, cov, amp) in &blobs {
                        let var = c * c * cov[0][0] + 2.0 * s * c * cov[0][1] + s * s * cov[1][1];
                        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
                        let mu = cx * c + cy * s;
                        acc += amp * (2.0 * std::f64::consts::PI * det / var).sqrt()
                            * (-(sv - mu) * (sv - mu) / (2.0 * var)).exp();
                    }
                    plane[(row, b)] = acc;
                }
            }
            let sino = Sinogram::new(orders, plane.clone(), plane).unwrap();
            let img = inverse_radon(&sino, size, false).unwrap();
            let mut se = 0.0;
            let mut st = 0.0;
            let mut pairs = Vec::with_capacity(disk.len());
            for &(r, c) in &disk {
                let t = truth[r * size + c] / tmax;
                let v = img.x_plane[(r, c)];
                se += (t - v) * (t - v);
                st += t * t;
                pairs.push((t, v));
            }
            errs[ai] += (se / st).sqrt() / 20.0;
            if n_ang == 41 {
                let n = pairs.len() as f64;
                let mt = pairs.iter().map(|p| p.0).sum::<f64>() / n;
                let mr = pairs.iter().map(|p| p.1).sum::<f64>() / n;
                let mut num = 0.0;
                let mut dt = 0.0;
                let mut dr = 0.0;
                for (t, r) in pairs {
                    num += (t - mt) * (r - mr);
                    dt += (t - mt) * (t - mt);
                    dr += (r - mr) * (r - mr);
                }
                min_corr = min_corr.min(num / (dt * dr).sqrt());
            }
        }
    }
    assert!(min_corr >= 0.95, "worst 41-angle correlation {min_corr}");
    assert!(
        errs[0] > errs[1] && errs[1] > errs[2],
        "mean error not monotone in angle count: {errs:?}"
    );
    // the default 41-order scan grid reconstructs the centered Gaussian
    let orders = default_scan_orders();
    let row: Vec<f64> = (0..nb)
        .map(|b| {
            let s = -1.0 + 2.0 * b as f64 / (nb - 1) as f64;
            (-s * s / (2.0 * 0.18 * 0.18)).exp()
        })
        .collect();
    let mut plane = Array2::<f64>::zeros((orders.len(), nb));
    for r in 0..orders.len() {
        for b in 0..nb {
            plane[(r, b)] = row[b];
        }
    }
    let sino = Sinogram::new(orders, plane.clone(), plane).unwrap();
    let img = inverse_radon(&sino, size, false).unwrap();
    let mut num = 0.0;
    let mut dt = 0.0;
    let mut dr = 0.0;
    let (mut mt, mut mr) = (0.0, 0.0);
    for &(r, c) in &disk {
        let x = -1.0 + 2.0 * c as f64 / 99.0;
        let y = -1.0 + 2.0 * r as f64 / 99.0;
        mt += (-(x * x + y * y) / (2.0 * 0.18 * 0.18)).exp();
        mr += img.x_plane[(r, c)];
    }
    mt /= disk.len() as f64;
    mr /= disk.len() as f64;
    for &(r, c) in &disk {
        let x = -1.0 + 2.0 * c as f64 / 99.0;
        let y = -1.0 + 2.0 * r as f64 / 99.0;
        let t = (-(x * x + y * y) / (2.0 * 0.18 * 0.18)).exp() - mt;
        let v = img.x_plane[(r, c)] - mr;
        num += t * v;
        dt += t * t;
        dr += v * v;
    }
    let corr = num / (dt * dr).sqrt();
    assert!(corr >= 0.95, "centered phantom correlation {corr}");
    println!(
        "[AC-06] PASS tomography: min corr {min_corr:.4}, errors 11/21/41 = {:.4}/{:.4}/{:.4}",
        errs[0], errs[1], errs[2]
    );
}

fn gradcheck_model<F>(params: &ParamSet<f64>, analytic: &GradBuffer<f64>, forward: F) -> f64
where
    F: Fn(&ParamSet<f64>) -> f64,
{
    let eps = 1e-5;
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for i in 0..probe.len() {
        let dim = probe.value(i).dim();
        for r in 0..dim.0 {
            for c in 0..dim.1 {
                let orig = probe.value(i)[(r, c)];
                probe.value_mut(i)[(r, c)] = orig + eps;
                let up = forward(&probe);
                probe.value_mut(i)[(r, c)] = orig - eps;
                let dn = forward(&probe);
                probe.value_mut(i)[(r, c)] = orig;
                let num = (up - dn) / (2.0 * eps);
                let ana = analytic.get(i)[(r, c)];
                let rel = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-7);
                if rel > worst {
                    worst = rel;
                }
            }
        }
    }
    worst
}

#[test]
fn criterion_07_nn_gradients() {
    let t0 = std::time::Instant::now();
    let weights = TaskWeights { cd: 0.9, dgd: 1.2, osnr: 0.7, snr_nl: 1.0 };
    let targets = [0.31, 0.62, 0.48, 0.17];

    // tiny ViT
    let vit = MultiTaskViT::<f64>::new(VitConfig::tiny(), 11).unwrap();
    let patches = {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        Array2::from_shape_fn((vit.cfg.n_tokens(), vit.cfg.patch_dim()), |_| {
            rng.gen_range(0.0..1.0)
        })
    };
    let mut grads = GradBuffer::zeros_like(&vit.params);
    {
        let mut tape = Tape::new(&vit.params);
        let fwd = vit.forward(&mut tape, patches.clone(), None).unwrap();
        let (_, total) = multitask_loss(&mut tape, &fwd, &targets, &weights).unwrap();
        tape.backward(total, &mut grads).unwrap();
    }
    let vit_forward = |p: &ParamSet<f64>| -> f64 {
        let stand_in = MultiTaskViT::<f64>::new(VitConfig::tiny(), 11).unwrap();
        let mut model = stand_in;
        model.params = p.clone();
        let mut tape = Tape::new(&model.params);
        let fwd = model.forward(&mut tape, patches.clone(), None).unwrap();
        let mut t2 = tape;
        let (_, total) = multitask_loss(&mut t2, &fwd, &targets, &weights).unwrap();
        t2.scalar(total)
    };
    let worst_vit = gradcheck_model(&vit.params, &grads, vit_forward);
    assert!(worst_vit < 1e-4, "vit gradcheck worst rel err {worst_vit}");

    // narrowed DNN
    let dnn = MultiTaskDnn::<f64>::new(DnnConfig::tiny(), 13).unwrap();
    let input = {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        Array2::from_shape_fn((1, dnn.cfg.input_dim), |_| rng.gen_range(0.0..1.0))
    };
    let mut dgrads = GradBuffer::zeros_like(&dnn.params);
    {
        let mut tape = Tape::new(&dnn.params);
        let fwd = dnn.forward(&mut tape, input.clone()).unwrap();
        let (_, total) = multitask_loss(&mut tape, &fwd, &targets, &weights).unwrap();
        tape.backward(total, &mut dgrads).unwrap();
    }
    let dnn_forward = |p: &ParamSet<f64>| -> f64 {
        let mut model = MultiTaskDnn::<f64>::new(DnnConfig::tiny(), 13).unwrap();
        model.params = p.clone();
        let mut tape = Tape::new(&model.params);
        let fwd = model.forward(&mut tape, input.clone()).unwrap();
        let mut t2 = tape;
        let (_, total) = multitask_loss(&mut t2, &fwd, &targets, &weights).unwrap();
        t2.scalar(total)
    };
    let worst_dnn = gradcheck_model(&dnn.params, &dgrads, dnn_forward);
    assert!(worst_dnn < 1e-4, "dnn gradcheck worst rel err {worst_dnn}");
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 300.0, "runtime {dt:.1}s exceeds 5min");
    println!("[AC-07] PASS gradients: vit {worst_vit:.2e}, dnn {worst_dnn:.2e}, {dt:.1}s");
}

// ---------------------------------------------------------------------
// shared desk-scale artifacts for criteria 8 and 9

struct SmokeArtifacts {
    vit_mae: [f64; 4],
    mean_mae: [f64; 4],
    vit_val: f64,
    dnn_val: f64,
    snr_nl_mae: f64,
}

static SMOKE: OnceLock<SmokeArtifacts> = OnceLock::new();

fn smoke_config() -> Config {
    let mut cfg = Config::desk();
    cfg.dataset.n_samples = 512;
    cfg.train = TrainConfig {
        model: ModelKind::Vit,
        epochs: 24,
        batch_size: 32,
        adam: fropm_core::nn::AdamConfig { lr: 3e-4, ..Default::default() },
        weights: TaskWeights::default(),
        patience: 0,
        seed: 7,
        threads: 2,
    };
    cfg
}

fn smoke_artifacts() -> &'static SmokeArtifacts {
    SMOKE.get_or_init(|| {
        let base = std::env::temp_dir().join("fropm_acceptance_smoke");
        let data_dir = base.join("data");
        let cfg = smoke_config();
        let manifest_path = data_dir.join("manifest.json");
        if !manifest_path.exists() {
            generate_dataset(&cfg, cfg.dataset.n_samples, 20_260_811, &data_dir, 2).unwrap();
        }
        let dataset = Dataset::load(&data_dir).unwrap();

        // ViT
        let vit_out = base.join("vit");
        let vit_res = train(&dataset, &cfg, &cfg.train, &vit_out).unwrap();
        let vit_model =
            fropm_core::train::load_model(&cfg, &vit_res.checkpoint_prefix.with_extension("json"))
                .unwrap();
        let test = dataset.manifest.split.test.clone();
        let preds = predict_indices(&dataset, &vit_model, &test, 2).unwrap();
        let truths: Vec<[f64; 4]> = test.iter().map(|&i| dataset.labels(i as usize)).collect();
        let powers: Vec<f64> = test
            .iter()
            .map(|&i| dataset.manifest.records[i as usize].launch_power_dbm)
            .collect();
        let windows = dataset.manifest.config.dataset.windows;
        let report = evaluate_predictions(
            &truths,
            &preds,
            &powers,
            &windows,
            EvalMeta { model: "vit".into(), n_test: test.len(), threads: 2 },
        )
        .unwrap();
        write_csv(&report, &base.join("eval_vit.csv")).unwrap();

        // predict-train-mean baseline
        let train_idx = &dataset.manifest.split.train;
        let mut mean = [0.0f64; 4];
        for &i in train_idx {
            let l = dataset.labels(i as usize);
            for k in 0..4 {
                mean[k] += l[k] / train_idx.len() as f64;
            }
        }
        let mean_preds = vec![mean; test.len()];
        let mean_report = evaluate_predictions(
            &truths,
            &mean_preds,
            &powers,
            &windows,
            EvalMeta { model: "predict-mean".into(), n_test: test.len(), threads: 1 },
        )
        .unwrap();

        // DNN baseline on the same dataset and epoch budget
        let mut dnn_cfg = cfg.clone();
        dnn_cfg.train.model = ModelKind::Dnn;
        let dnn_out = base.join("dnn");
        let dnn_res = train(&dataset, &dnn_cfg, &dnn_cfg.train, &dnn_out).unwrap();

        let vit_mae = [
            report.tasks[0].mae,
            report.tasks[1].mae,
            report.tasks[2].mae,
            report.tasks[3].mae,
        ];
        let mean_mae = [
            mean_report.tasks[0].mae,
            mean_report.tasks[1].mae,
            mean_report.tasks[2].mae,
            mean_report.tasks[3].mae,
        ];
        SmokeArtifacts {
            vit_mae,
            mean_mae,
            vit_val: vit_res.best_val_loss,
            dnn_val: dnn_res.best_val_loss,
            snr_nl_mae: report.tasks[0].mae,
        }
    })
}

#[test]
fn criterion_08_end_to_end_smoke_learning() {
    let a = smoke_artifacts();
    // CD and OSNR at least 2x better than predict-mean; DGD 1.5x
    let cd_gain = a.mean_mae[2] / a.vit_mae[2];
    let osnr_gain = a.mean_mae[1] / a.vit_mae[1];
    let dgd_gain = a.mean_mae[3] / a.vit_mae[3];
    assert!(
        cd_gain >= 2.0,
        "CD gain {cd_gain:.2} (model {:.1} vs mean {:.1} ps/nm)",
        a.vit_mae[2],
        a.mean_mae[2]
    );
    assert!(
        osnr_gain >= 2.0,
        "OSNR gain {osnr_gain:.2} (model {:.3} vs mean {:.3} dB)",
        a.vit_mae[1],
        a.mean_mae[1]
    );
    assert!(
        dgd_gain >= 1.5,
        "DGD gain {dgd_gain:.2} (model {:.2} vs mean {:.2} ps)",
        a.vit_mae[3],
        a.mean_mae[3]
    );
    println!(
        "[AC-08] PASS smoke learning: gains cd {cd_gain:.2}x osnr {osnr_gain:.2}x dgd {dgd_gain:.2}x; snr_nl MAE {:.3} dB (reported, ungated; mean baseline {:.3} dB)",
        a.snr_nl_mae, a.mean_mae[0]
    );
}

#[test]
fn criterion_09_comparative_sanity() {
    let a = smoke_artifacts();
    if a.vit_val <= a.dnn_val {
        println!(
            "[AC-09] PASS comparative: vit val loss {:.4} <= dnn val loss {:.4}",
            a.vit_val, a.dnn_val
        );
    } else if a.vit_val <= 1.05 * a.dnn_val {
        println!(
            "[AC-09] PASS (waiver) comparative: vit val loss {:.4} within 5% of dnn {:.4}",
            a.vit_val, a.dnn_val
        );
    } else {
        panic!("vit val loss {} worse than dnn {} beyond the 5% waiver", a.vit_val, a.dnn_val);
    }
}

#[test]
fn criterion_10_reproducibility() {
    // byte-identical regeneration of a dataset, training run, and report
    // (single-threaded mode)
    let base = std::env::temp_dir().join(format!("fropm_ac10_{}", std::process::id()));
    let mut cfg = Config::desk();
    cfg.layout.payload_symbols = 2048;
    cfg.link.ssfm_steps_per_span = 8;
    cfg.dataset.n_samples = 24;
    cfg.dataset.channel_range = (1, 2);
    cfg.dataset.span_range = (1, 3);
    cfg.vit = VitConfig {
        d_model: 32,
        n_heads: 4,
        n_layers: 1,
        ffn_hidden: 64,
        head_hidden: 16,
        ..VitConfig::default()
    };
    cfg.train = TrainConfig {
        epochs: 2,
        batch_size: 8,
        threads: 1,
        seed: 11,
        ..TrainConfig::default()
    };

    let d1 = base.join("d1");
    let d2 = base.join("d2");
    generate_dataset(&cfg, 24, 99, &d1, 1).unwrap();
    generate_dataset(&cfg, 24, 99, &d2, 2).unwrap();
    for f in ["images.bin", "labels.bin", "frames.bin", "manifest.json"] {
        assert_eq!(
            std::fs::read(d1.join(f)).unwrap(),
            std::fs::read(d2.join(f)).unwrap(),
            "{f} differs between reruns"
        );
    }

    let ds = Dataset::load(&d1).unwrap();
    let r1 = train(&ds, &cfg, &cfg.train, &base.join("t1")).unwrap();
    let r2 = train(&ds, &cfg, &cfg.train, &base.join("t2")).unwrap();
    assert_eq!(r1.curves, r2.curves);
    for f in ["checkpoint-vit.bin", "checkpoint-vit.json", "curves.csv"] {
        assert_eq!(
            std::fs::read(base.join("t1").join(f)).unwrap(),
            std::fs::read(base.join("t2").join(f)).unwrap(),
            "{f} differs between reruns"
        );
    }

    // evaluation artifacts are byte-identical too
    let model = fropm_core::train::load_model(
        &cfg,
        &r1.checkpoint_prefix.with_extension("json"),
    )
    .unwrap();
    let report1 = fropm_core::eval::evaluate(&ds, &model, 1).unwrap();
    let report2 = fropm_core::eval::evaluate(&ds, &model, 1).unwrap();
    write_csv(&report1, &base.join("e1.csv")).unwrap();
    write_csv(&report2, &base.join("e2.csv")).unwrap();
    assert_eq!(
        std::fs::read(base.join("e1.csv")).unwrap(),
        std::fs::read(base.join("e2.csv")).unwrap()
    );
    std::fs::remove_dir_all(&base).ok();
    println!("[AC-10] PASS reproducibility: dataset, training, and report byte-identical");
}

// keep heavier helpers exercised: multiplex sanity used by AC-08 path
#[test]
fn wdm_multiplex_occupies_expected_grid() {
    let cfg = LinkConfig { n_channels: 3, ..LinkConfig::default() };
    let mk = |seed: u64| {
        let mut s = testkit::dual_pol_ts_like(seed, 256);
        s.x_pol.sample_rate = 100e9;
        s.y_pol.sample_rate = 100e9;
        s
    };
    let wdm = multiplex(&[mk(1), mk(2), mk(3)], &cfg).unwrap();
    assert_eq!(wdm.sample_rate(), 300e9);
    assert_eq!(wdm.len(), 256 * 3);
    // ASE loading leaves a disabled-OSNR field untouched
    let mut rng = {
        use rand::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(1, 2))
    };
    let same = add_ase(&wdm, f64::INFINITY, B_REF_HZ, &mut rng);
    assert_eq!(same, wdm);
    // jones application on the mux grid conserves energy
    let u = build_pmd_cascade(&PmdConfig { n_segments: 20, mean_dgd_ps: 25.0, seed: 3 }).unwrap();
    let out = apply_jones(&wdm, &u).unwrap();
    assert!(((out.energy() - wdm.energy()) / wdm.energy()).abs() < 1e-9);
}

#[test]
fn feature_path_is_label_blind() {
    // perturbing labels after generation cannot change images: the
    // feature path never reads label fields
    let mut cfg = Config::desk();
    cfg.layout.payload_symbols = 2048;
    cfg.link.ssfm_steps_per_span = 8;
    cfg.dataset.channel_range = (1, 1);
    let layout = cfg.layout.clone();
    let ts = generate_ts::<f64>(layout.ts_order, layout.ts_symbols, layout.sps, layout.symbol_rate)
        .unwrap();
    let [sx, sy] = generate_qpsk_symbols::<f64>(91, layout.payload_symbols).unwrap();
    let payload =
        DualPolSignal::new(rrc_shape(&sx, &layout).unwrap(), rrc_shape(&sy, &layout).unwrap())
            .unwrap();
    let frame = assemble_frame(&ts, &payload, 2.0).unwrap();
    let link = LinkConfig {
        n_channels: 1,
        spans: 2,
        pmd: PmdConfig { n_segments: 20, mean_dgd_ps: 15.0, seed: 0 },
        ..cfg.link.clone()
    };
    let mut realization = run_link(&link, std::slice::from_ref(&frame), 5).unwrap();
    let img1 = fropm_core::tfimage::make_feature(&realization, &layout, &cfg.feature).unwrap();
    realization.labels.cd_ps_per_nm = 99_999.0;
    realization.labels.osnr_db = -5.0;
    realization.labels.snr_nl_db = 3.3;
    realization.labels.dgd_ps = 77.0;
    let img2 = fropm_core::tfimage::make_feature(&realization, &layout, &cfg.feature).unwrap();
    assert_eq!(img1, img2);

    // models consume both encodings of the same image identically sized
    let p = image_to_patches(&img1, 10).unwrap();
    assert_eq!(p.dim(), (100, 200));
    let r = image_to_row(&img1);
    assert_eq!(r.dim(), (1, 20000));
    let _ = Model::new(ModelKind::Vit, &cfg, 1).unwrap();
}
