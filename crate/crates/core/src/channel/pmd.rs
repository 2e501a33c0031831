//! First-order PMD emulator: a cascade of birefringent waveplates with
//! randomly oriented axes, plus the Cayley-Klein DGD extraction and the
//! Maxwellian statistics of the realized DGD.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fft::{fft_freqs, fft_in_place, ifft_in_place};
use crate::num::{erf, Real, C};
use crate::signal::DualPolSignal;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmdConfig {
    /// Number of waveplate segments (20).
    pub n_segments: usize,
    /// Target Maxwellian mean of the total DGD, in ps.
    pub mean_dgd_ps: f64,
    /// RNG seed for axis orientations.
    pub seed: u64,
}

impl Default for PmdConfig {
    fn default() -> Self {
        PmdConfig { n_segments: 20, mean_dgd_ps: 0.0, seed: 0 }
    }
}

/// One birefringent segment: axis angles and its DGD contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmdSegment {
    pub alpha: f64,
    pub gamma: f64,
    pub dtau_ps: f64,
}

/// Frequency-dependent 2x2 unitary Jones transfer of the whole cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct JonesTransfer {
    pub segments: Vec<PmdSegment>,
}

type M2 = [[Complex64; 2]; 2];

fn matmul(a: &M2, b: &M2) -> M2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn rotation(alpha: f64, gamma: f64) -> M2 {
    let (sa, ca) = alpha.sin_cos();
    [
        [Complex64::new(ca, 0.0), -Complex64::from_polar(sa, -gamma)],
        [Complex64::from_polar(sa, gamma), Complex64::new(ca, 0.0)],
    ]
}

fn dagger(m: &M2) -> M2 {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

impl JonesTransfer {
    /// Evaluate the cascade at angular frequency offset `omega` (rad/ps).
    pub fn eval(&self, omega_rad_per_ps: f64) -> M2 {
        let mut u = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
        for seg in &self.segments {
            let r = rotation(seg.alpha, seg.gamma);
            let half = omega_rad_per_ps * seg.dtau_ps / 2.0;
            let d: M2 = [
                [Complex64::from_polar(1.0, half), Complex64::new(0.0, 0.0)],
                [Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, -half)],
            ];
            let seg_u = matmul(&matmul(&r, &d), &dagger(&r));
            u = matmul(&u, &seg_u);
        }
        u
    }
}

/// Mean segment DGD for a fiber piece of length `l_km` with PMD parameter
/// `d_pmd` (ps/sqrt(km)): `sqrt(3 pi l / 8) * D_PMD`.
pub fn segment_dgd(l_km: f64, d_pmd: f64) -> f64 {
    (3.0 * std::f64::consts::PI * l_km / 8.0).sqrt() * d_pmd
}

/// Build the seeded waveplate cascade.
///
/// Axes are drawn isotropically on the Stokes sphere (cos 2a uniform on
/// [-1, 1], phase uniform on [0, 2pi)); every segment carries the equal
/// delay `mean_dgd * sqrt(3 pi / (8 N))`, which makes the Maxwellian mean
/// of the realized total DGD equal `mean_dgd`.
pub fn build_pmd_cascade(cfg: &PmdConfig) -> Result<JonesTransfer> {
    if cfg.n_segments == 0 {
        return Err(Error::invalid_argument("pmd: n_segments must be >= 1"));
    }
    if cfg.mean_dgd_ps < 0.0 {
        return Err(Error::invalid_argument("pmd: mean_dgd_ps must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dtau =
        cfg.mean_dgd_ps * (3.0 * std::f64::consts::PI / (8.0 * cfg.n_segments as f64)).sqrt();
    let segments = (0..cfg.n_segments)
        .map(|_| {
            let c2a: f64 = rng.gen_range(-1.0..=1.0);
            let alpha = c2a.acos() / 2.0;
            let gamma: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            PmdSegment { alpha, gamma, dtau_ps: dtau }
        })
        .collect();
    Ok(JonesTransfer { segments })
}

/// Total DGD in ps from the frequency derivative of the Cayley-Klein
/// entries: `2 sqrt(|du1/dw|^2 + |du2/dw|^2)`, central differences.
pub fn compute_dgd(u: &JonesTransfer, omega0_rad_per_ps: f64, domega: f64) -> f64 {
    let up = u.eval(omega0_rad_per_ps + domega);
    let um = u.eval(omega0_rad_per_ps - domega);
    let u1w = (up[0][0] - um[0][0]) / (2.0 * domega);
    let u2w = (up[0][1] - um[0][1]) / (2.0 * domega);
    2.0 * (u1w.norm_sqr() + u2w.norm_sqr()).sqrt()
}

/// Default finite-difference step for [`compute_dgd`], rad/ps.
pub const DGD_FD_STEP: f64 = 1e-4;

/// Maxwellian density with mean `mean`:
/// `32 x^2 / (pi^2 mean^3) * exp(-4 x^2 / (pi mean^2))`.
pub fn maxwellian_pdf(x: f64, mean: f64) -> Result<f64> {
    if mean <= 0.0 {
        return Err(Error::invalid_argument("maxwellian_pdf: mean must be > 0"));
    }
    if x < 0.0 {
        return Ok(0.0);
    }
    let pi = std::f64::consts::PI;
    Ok(32.0 * x * x / (pi * pi * mean.powi(3)) * (-4.0 * x * x / (pi * mean * mean)).exp())
}

/// CDF of the same Maxwellian.
pub fn maxwellian_cdf(x: f64, mean: f64) -> Result<f64> {
    if mean <= 0.0 {
        return Err(Error::invalid_argument("maxwellian_cdf: mean must be > 0"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    // scale a with mean = 2 a sqrt(2/pi)
    let a = mean * (std::f64::consts::PI / 8.0).sqrt();
    let z = x / a;
    let cdf = erf(z / 2f64.sqrt())
        - z * (2.0 / std::f64::consts::PI).sqrt() * (-z * z / 2.0).exp();
    Ok(cdf.clamp(0.0, 1.0))
}

/// Apply the cascade per FFT frequency to both polarizations.
/// Unitary: total energy is preserved to rounding.
pub fn apply_jones<T: Real>(sig: &DualPolSignal<T>, u: &JonesTransfer) -> Result<DualPolSignal<T>> {
    let n = sig.len();
    let freqs = fft_freqs(n, sig.sample_rate().to_f64c());
    let mut x = sig.x_pol.samples.clone();
    let mut y = sig.y_pol.samples.clone();
    fft_in_place(&mut x);
    fft_in_place(&mut y);
    for (k, &f) in freqs.iter().enumerate() {
        let omega = std::f64::consts::TAU * f * 1e-12; // rad/ps
        let m = u.eval(omega);
        let xv = Complex64::new(x[k].re.to_f64c(), x[k].im.to_f64c());
        let yv = Complex64::new(y[k].re.to_f64c(), y[k].im.to_f64c());
        let xo = m[0][0] * xv + m[0][1] * yv;
        let yo = m[1][0] * xv + m[1][1] * yv;
        x[k] = C::new(T::from_f64c(xo.re), T::from_f64c(xo.im));
        y[k] = C::new(T::from_f64c(yo.re), T::from_f64c(yo.im));
    }
    ifft_in_place(&mut x);
    ifft_in_place(&mut y);
    let mut out = sig.clone();
    out.x_pol.samples = x;
    out.y_pol.samples = y;
    Ok(out)
}
