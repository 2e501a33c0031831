//! Symmetric split-step Fourier propagation with the Manakov dual-pol
//! nonlinearity, plus WDM multiplexing and the receive-side band-pass
//! demultiplexer.

use crate::channel::cd::cd_phase;
use crate::channel::LinkConfig;
use crate::fft::{fft_freqs, fft_in_place, ifft_in_place};
use crate::num::{Real, C};
use crate::signal::{ComplexSignal, DualPolSignal};
use crate::{Error, Result};

/// Smallest even samples-per-symbol that fits the WDM comb plus one
/// symbol-rate guard band.
pub fn wdm_sps(n_channels: usize, channel_spacing: f64, symbol_rate: f64) -> usize {
    let need = (n_channels - 1) as f64 * channel_spacing / symbol_rate + 2.0;
    let mut sps = need.ceil() as usize;
    if sps % 2 == 1 {
        sps += 1;
    }
    sps.max(2)
}

/// Channel center offsets on the spacing grid, centered on zero.
pub fn channel_offsets(n_channels: usize, spacing: f64) -> Vec<f64> {
    (0..n_channels)
        .map(|i| (i as f64 - (n_channels - 1) as f64 / 2.0) * spacing)
        .collect()
}

/// Combine per-channel frames (all at the same rate and length) onto the
/// WDM grid: resample to the combined rate, shift to each channel offset,
/// and sum.
pub fn multiplex<T: Real>(
    channels: &[DualPolSignal<T>],
    cfg: &LinkConfig,
) -> Result<DualPolSignal<T>> {
    if channels.is_empty() {
        return Err(Error::invalid_argument("multiplex: no channels"));
    }
    let n_ch = channels.len();
    let rate = channels[0].sample_rate();
    let len = channels[0].len();
    if channels.iter().any(|c| c.sample_rate() != rate || c.len() != len) {
        return Err(Error::invalid_argument("multiplex: channels must share rate and length"));
    }
    let sps = wdm_sps(n_ch, cfg.channel_spacing, cfg.symbol_rate);
    let wdm_rate = T::from_f64c(sps as f64 * cfg.symbol_rate);
    let offsets = channel_offsets(n_ch, cfg.channel_spacing);

    let mut acc: Option<DualPolSignal<T>> = None;
    for (ch, off) in channels.iter().zip(offsets.iter()) {
        let mut up = ch.resample_to(wdm_rate)?;
        let fs = wdm_rate.to_f64c();
        up.map_pols(|samples| {
            for (k, s) in samples.iter_mut().enumerate() {
                let ph = std::f64::consts::TAU * off * k as f64 / fs;
                *s *= C::new(T::from_f64c(ph.cos()), T::from_f64c(ph.sin()));
            }
        });
        acc = Some(match acc {
            None => up,
            Some(mut total) => {
                for (a, b) in total.x_pol.samples.iter_mut().zip(up.x_pol.samples.iter()) {
                    *a += *b;
                }
                for (a, b) in total.y_pol.samples.iter_mut().zip(up.y_pol.samples.iter()) {
                    *a += *b;
                }
                total
            }
        });
    }
    Ok(acc.expect("at least one channel"))
}

/// Down-convert the channel at `center_offset_hz`, brick-wall band-pass
/// of width `bandwidth_hz`, then resample to `out_rate`.
pub fn demux_center<T: Real>(
    field: &DualPolSignal<T>,
    center_offset_hz: f64,
    bandwidth_hz: f64,
    out_rate: f64,
) -> Result<DualPolSignal<T>> {
    let n = field.len();
    let fs = field.sample_rate().to_f64c();
    let freqs = fft_freqs(n, fs);
    let mut out = field.clone();
    out.map_pols(|samples| {
        if center_offset_hz != 0.0 {
            for (k, s) in samples.iter_mut().enumerate() {
                let ph = -std::f64::consts::TAU * center_offset_hz * k as f64 / fs;
                *s *= C::new(T::from_f64c(ph.cos()), T::from_f64c(ph.sin()));
            }
        }
        fft_in_place(samples);
        for (s, &f) in samples.iter_mut().zip(freqs.iter()) {
            if f.abs() > bandwidth_hz / 2.0 {
                *s = C::new(T::zero(), T::zero());
            }
        }
        ifft_in_place(samples);
    });
    out.resample_to(T::from_f64c(out_rate))
}

/// Symmetric split-step propagation over `cfg.spans` amplified spans.
///
/// Each step applies a linear half (dispersion + loss), the Manakov
/// nonlinear rotation `exp(j (8/9) gamma P l_eff)` on the combined
/// dual-pol power with the exact in-step effective length, and the second
/// linear half. Span loss is exactly cancelled by a noiseless EDFA.
pub fn ssfm_propagate<T: Real>(
    field: &DualPolSignal<T>,
    cfg: &LinkConfig,
) -> Result<DualPolSignal<T>> {
    if cfg.ssfm_steps_per_span < 8 {
        return Err(Error::invalid_argument("ssfm: steps_per_span must be >= 8"));
    }
    let fs = field.sample_rate().to_f64c();
    let occupied = (cfg.n_channels - 1) as f64 * cfg.channel_spacing + 2.0 * cfg.symbol_rate;
    if fs + 1e-3 < occupied {
        return Err(Error::invalid_argument(format!(
            "ssfm: field sampled at {fs} Hz but WDM band occupies {occupied} Hz"
        )));
    }

    let n = field.len();
    let steps = cfg.ssfm_steps_per_span;
    let dz = cfg.span_length_km / steps as f64;
    let alpha_np = cfg.attenuation_db_per_km * std::f64::consts::LN_10 / 10.0; // power nepers/km
    let freqs = fft_freqs(n, fs);

    // half- and full-step linear operators (dispersion phase + loss)
    let lin = |z_km: f64| -> Vec<C<T>> {
        let amp = (-alpha_np * z_km / 2.0).exp();
        freqs
            .iter()
            .map(|&f| {
                let ph = cd_phase(f, cfg.dispersion_ps_nm_km * z_km, cfg.carrier_wavelength_nm);
                C::new(T::from_f64c(ph.cos()), T::from_f64c(ph.sin())).scale(T::from_f64c(amp))
            })
            .collect()
    };
    let half = lin(dz / 2.0);
    let full = lin(dz);

    // exact effective length of one step referenced to the mid-step power
    let l_eff_mid = if alpha_np > 0.0 {
        (alpha_np * dz / 2.0).exp() * (1.0 - (-alpha_np * dz).exp()) / alpha_np
    } else {
        dz
    };
    let nl_coef = T::from_f64c(cfg.manakov_factor * cfg.gamma_w_km * l_eff_mid);
    let gain = T::from_f64c((alpha_np * cfg.span_length_km / 2.0).exp()); // amplitude

    let apply_spectral = |x: &mut Vec<C<T>>, y: &mut Vec<C<T>>, h: &[C<T>]| {
        fft_in_place(x);
        fft_in_place(y);
        for k in 0..h.len() {
            x[k] *= h[k];
            y[k] *= h[k];
        }
        ifft_in_place(x);
        ifft_in_place(y);
    };

    let mut x = field.x_pol.samples.clone();
    let mut y = field.y_pol.samples.clone();
    for _span in 0..cfg.spans {
        apply_spectral(&mut x, &mut y, &half);
        for step in 0..steps {
            // nonlinear rotation at the step midpoint
            for k in 0..n {
                let p = x[k].norm_sqr() + y[k].norm_sqr();
                let ph = nl_coef * p;
                let rot = C::new(ph.cos(), ph.sin());
                x[k] *= rot;
                y[k] *= rot;
            }
            let h = if step + 1 == steps { &half } else { &full };
            apply_spectral(&mut x, &mut y, h);
        }
        for k in 0..n {
            x[k] = x[k].scale(gain);
            y[k] = y[k].scale(gain);
        }
    }
    DualPolSignal::new(
        ComplexSignal::new(x, field.sample_rate())?,
        ComplexSignal::new(y, field.sample_rate())?,
    )
}
