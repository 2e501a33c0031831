//! Independent oracles and signal constructors used by tests and the
//! acceptance suite. Nothing here is called by the production paths it
//! checks.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::signal::{ComplexSignal, DualPolSignal};

/// Unit-variance circular complex white noise, deterministic per seed.
pub fn white_signal(seed: u64, n: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x57a7_u64);
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            Complex64::new(re, im) / 2f64.sqrt()
        })
        .collect()
}

/// Random time-frequency-concentrated test signal: a few Gaussian chirp
/// atoms with randomized widths, centers, chirp rates and amplitudes.
///
/// This is the signal class for which the refined-quadrature transform is
/// a faithful rotation (energy away from the grid corners); broadband
/// content is deliberately absent.
pub fn gaussian_chirp(seed: u64, n: usize, sigma_rel: f64, chirp: f64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc41b_u64);
    let delta = (2.0 * PI / n as f64).sqrt();
    let extent = (PI * n as f64 / 2.0).sqrt();
    // keep 4-sigma tails and chirp bandwidth well inside the grid
    let sigma = (sigma_rel * extent).clamp(0.7, 1.8);
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for _atom in 0..3 {
        let s = sigma * rng.gen_range(0.7..1.3);
        let rate = chirp + 0.2 * rng.gen_range(-1.0..1.0);
        let center: f64 = rng.gen_range(-0.06..0.06) * extent;
        let amp = Complex64::from_polar(
            rng.gen_range(0.4..1.0),
            rng.gen_range(0.0..std::f64::consts::TAU),
        );
        for (k, slot) in v.iter_mut().enumerate() {
            let t = (k as f64 - n as f64 / 2.0) * delta - center;
            let env = (-t * t / (2.0 * s * s)).exp();
            let ph = rate * t * t / 2.0;
            *slot += amp * Complex64::from_polar(env, ph);
        }
    }
    let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
    v
}

/// Dual-polarization wrapper around two independent concentrated signals.
pub fn dual_pol_ts_like(seed: u64, n: usize) -> DualPolSignal<f64> {
    let x = gaussian_chirp(seed, n, 0.25, 0.15);
    let y = gaussian_chirp(seed + 1, n, 0.25, -0.1);
    DualPolSignal::new(
        ComplexSignal::new(x, 2.0).unwrap(),
        ComplexSignal::new(y, 2.0).unwrap(),
    )
    .unwrap()
}

/// O(N^2) centered unitary DFT straight from the definition.
pub fn centered_dft_direct(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    let c = n as f64 / 2.0;
    let sgn = if inverse { 1.0 } else { -1.0 };
    (0..n)
        .map(|m| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, v) in x.iter().enumerate() {
                let arg = sgn * 2.0 * PI * (k as f64 - c) * (m as f64 - c) / n as f64;
                acc += v * Complex64::from_polar(1.0, arg);
            }
            acc / (n as f64).sqrt()
        })
        .collect()
}

/// Two-sided Kolmogorov-Smirnov statistic of samples against a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Asymptotic two-sided KS critical value at significance `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    // c(alpha) = sqrt(-ln(alpha/2)/2); c(0.01) = 1.6276
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c / (n as f64).sqrt()
}

/// Relative L2 distance between complex vectors.
pub fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// DGD oracle independent of the Cayley-Klein route: eigenvalue spread
/// |tau_+ - tau_-| of the group-delay operator `j U_w U^dagger`.
pub fn dgd_eigen_oracle(
    u: &crate::channel::pmd::JonesTransfer,
    omega0: f64,
    domega: f64,
) -> f64 {
    let up = u.eval(omega0 + domega);
    let um = u.eval(omega0 - domega);
    let u0 = u.eval(omega0);
    let j = Complex64::new(0.0, 1.0);
    let mut uw = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            uw[i][k] = (up[i][k] - um[i][k]) / (2.0 * domega);
        }
    }
    // H = j * U_w * U0^dagger, then take the Hermitian part
    let mut h = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..2 {
                acc += uw[i][m] * u0[k][m].conj();
            }
            h[i][k] = j * acc;
        }
    }
    let a = (h[0][0] + h[0][0].conj()).re / 2.0;
    let d = (h[1][1] + h[1][1].conj()).re / 2.0;
    let b = (h[0][1] + h[1][0].conj()) / 2.0;
    2.0 * (((a - d) / 2.0).powi(2) + b.norm_sqr()).sqrt()
}
