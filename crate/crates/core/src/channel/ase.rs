//! End-of-link ASE loading to a target OSNR.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::num::{db_to_linear, Real, C};
use crate::signal::DualPolSignal;

/// Standard 0.1 nm reference bandwidth at 1550 nm.
pub const B_REF_HZ: f64 = 12.5e9;

/// Add circular complex Gaussian noise, split equally across the
/// polarizations, such that `P_sig / P_ASE(b_ref)` equals the target
/// OSNR. `target_osnr_db = +inf` (or None upstream) leaves the signal
/// unchanged.
pub fn add_ase<T: Real>(
    sig: &DualPolSignal<T>,
    target_osnr_db: f64,
    b_ref_hz: f64,
    rng: &mut ChaCha8Rng,
) -> DualPolSignal<T> {
    if !target_osnr_db.is_finite() {
        return sig.clone();
    }
    let p_sig = sig.mean_power().to_f64c(); // W, both pols combined
    let p_ase_ref = p_sig / db_to_linear(target_osnr_db); // W in b_ref
    let psd = p_ase_ref / b_ref_hz; // W/Hz, both pols combined
    let fs = sig.sample_rate().to_f64c();
    // per-pol per-sample complex variance; each quadrature gets half
    let var_pol = psd * fs / 2.0;
    let sigma_q = (var_pol / 2.0).sqrt();
    let mut out = sig.clone();
    out.map_pols(|samples| {
        for s in samples.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *s += C::new(T::from_f64c(re * sigma_q), T::from_f64c(im * sigma_q));
        }
    });
    out
}
