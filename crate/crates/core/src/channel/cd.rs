//! Chromatic dispersion as an all-pass quadratic spectral phase.

use crate::fft::{fft_freqs, fft_in_place, ifft_in_place};
use crate::num::{Real, C};
use crate::signal::DualPolSignal;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0; // m/s

/// Quadratic phase in radians at frequency offset `f_hz` for a total
/// accumulated dispersion `d_ps_nm` (ps/nm) at the given carrier.
pub fn cd_phase(f_hz: f64, d_ps_nm: f64, carrier_wavelength_nm: f64) -> f64 {
    let lambda_m = carrier_wavelength_nm * 1e-9;
    let d_si = d_ps_nm * 1e-3; // s/m
    -std::f64::consts::PI * lambda_m * lambda_m * d_si * f_hz * f_hz / SPEED_OF_LIGHT
}

/// Apply accumulated dispersion `d_ps_nm` to both polarizations.
/// |H(f)| = 1 exactly; d = 0 is the identity.
pub fn apply_cd<T: Real>(
    sig: &DualPolSignal<T>,
    d_ps_nm: f64,
    carrier_wavelength_nm: f64,
) -> DualPolSignal<T> {
    if d_ps_nm == 0.0 {
        return sig.clone();
    }
    let n = sig.len();
    let freqs = fft_freqs(n, sig.sample_rate().to_f64c());
    let h: Vec<C<T>> = freqs
        .iter()
        .map(|&f| {
            let ph = cd_phase(f, d_ps_nm, carrier_wavelength_nm);
            C::new(T::from_f64c(ph.cos()), T::from_f64c(ph.sin()))
        })
        .collect();
    let mut out = sig.clone();
    out.map_pols(|samples| {
        fft_in_place(samples);
        for (s, hh) in samples.iter_mut().zip(h.iter()) {
            *s *= *hh;
        }
        ifft_in_place(samples);
    });
    out
}
