//! Receiver DSP: CD compensation, matched filtering, CMA butterfly
//! equalization, carrier-phase removal, and the GSNR / SNR_ASE / SNR_NL
//! label algebra.

use serde::{Deserialize, Serialize};

use crate::channel::{apply_cd, ChannelRealization};
use crate::frame::{matched_filter, FrameLayout};
use crate::num::{db_to_linear, Real, C};
use crate::signal::{ComplexSignal, DualPolSignal};
use crate::{Error, Result};

/// Reported GSNR for numerically perfect links.
pub const GSNR_SATURATION_DB: f64 = 60.0;
/// SNR_NL label ceiling before window clamping.
pub const SNR_NL_CEILING_DB: f64 = 40.0;
/// Viterbi-Viterbi block length in symbols.
const VV_BLOCK: usize = 128;

/// Exact inverse of the channel's dispersion filter.
pub fn cd_compensate<T: Real>(
    sig: &DualPolSignal<T>,
    d_ps_nm: f64,
    carrier_wavelength_nm: f64,
) -> DualPolSignal<T> {
    apply_cd(sig, -d_ps_nm, carrier_wavelength_nm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaConfig {
    pub taps: usize,
    pub mu: f64,
    pub passes: usize,
}

impl Default for CmaConfig {
    fn default() -> Self {
        CmaConfig { taps: 13, mu: 5e-4, passes: 3 }
    }
}

/// 2x2 butterfly CMA equalizer: T/2-spaced input, symbol-spaced output.
///
/// Center-spike initialization on the diagonal; the constant-modulus
/// error `(|y|^2 - 1) y` drives all four FIR branches. Inputs are
/// internally normalized to unit per-polarization power.
pub fn cma_equalize<T: Real>(
    sig: &DualPolSignal<T>,
    cfg: &CmaConfig,
) -> Result<DualPolSignal<T>> {
    let taps = cfg.taps;
    if taps.is_multiple_of(2) || taps < 3 {
        return Err(Error::invalid_argument("cma: taps must be odd and >= 3"));
    }
    let n = sig.len();
    if n < 4 * taps {
        return Err(Error::invalid_argument("cma: signal too short"));
    }
    let mu = T::from_f64c(cfg.mu);
    let pol_power = sig.mean_power().to_f64c() / 2.0;
    let norm = T::from_f64c(1.0 / pol_power.sqrt());
    let x: Vec<C<T>> = sig.x_pol.samples.iter().map(|s| s.scale(norm)).collect();
    let y: Vec<C<T>> = sig.y_pol.samples.iter().map(|s| s.scale(norm)).collect();

    let zero = C::new(T::zero(), T::zero());
    let mut hxx = vec![zero; taps];
    let mut hxy = vec![zero; taps];
    let mut hyx = vec![zero; taps];
    let mut hyy = vec![zero; taps];
    hxx[taps / 2] = C::new(T::one(), T::zero());
    hyy[taps / 2] = C::new(T::one(), T::zero());

    let n_out = (n - taps) / 2 + 1;
    let mut out_x = vec![zero; n_out];
    let mut out_y = vec![zero; n_out];
    let one = T::one();
    let ten = T::from_f64c(10.0);

    for pass in 0..cfg.passes.max(1) {
        let emit = pass + 1 == cfg.passes.max(1);
        // gear shift: the final (emitting) pass adapts at mu/5 to cut
        // steady-state misadjustment
        let mu = if emit && cfg.passes > 1 { mu / T::from_f64c(5.0) } else { mu };
        let mut power_acc = T::zero();
        for m in 0..n_out {
            let base = 2 * m;
            let ux = &x[base..base + taps];
            let uy = &y[base..base + taps];
            let mut ox = zero;
            let mut oy = zero;
            for k in 0..taps {
                ox = ox + hxx[k] * ux[k] + hxy[k] * uy[k];
                oy = oy + hyx[k] * ux[k] + hyy[k] * uy[k];
            }
            let ex = ox.scale(ox.norm_sqr() - one);
            let ey = oy.scale(oy.norm_sqr() - one);
            for k in 0..taps {
                hxx[k] -= ex * ux[k].conj() * mu;
                hxy[k] -= ex * uy[k].conj() * mu;
                hyx[k] -= ey * ux[k].conj() * mu;
                hyy[k] -= ey * uy[k].conj() * mu;
            }
            if emit {
                out_x[m] = ox;
                out_y[m] = oy;
            }
            power_acc += ox.norm_sqr() + oy.norm_sqr();
        }
        let mean_out = power_acc / T::from_f64c(2.0 * n_out as f64);
        if mean_out > ten {
            return Err(Error::NonConvergence(format!(
                "cma: output power {} exceeds 10x input",
                mean_out.to_f64c()
            )));
        }
    }
    let sym_rate = sig.sample_rate() / T::from_f64c(2.0);
    DualPolSignal::new(
        ComplexSignal::new(out_x, sym_rate)?,
        ComplexSignal::new(out_y, sym_rate)?,
    )
}

/// Blockwise Viterbi-Viterbi 4th-power carrier-phase removal with branch
/// unwrapping, then data-aided resolution of the residual 90-degree
/// ambiguity against the transmitted sequence.
pub fn phase_derotate<T: Real>(rx: &[C<T>], tx: &[C<T>]) -> Vec<C<T>> {
    let n = rx.len().min(tx.len());
    let mut out = rx[..n].to_vec();
    let mut prev_theta = 0.0f64;
    let mut start = 0;
    while start < n {
        let end = (start + VV_BLOCK).min(n);
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        for s in &out[start..end] {
            let z = num_complex::Complex64::new(s.re.to_f64c(), s.im.to_f64c());
            acc += (z / z.norm().max(1e-30)).powu(4);
        }
        // QPSK at 45 deg: s^4 = -exp(4 j theta)
        let mut theta = (-acc).arg() / 4.0;
        // unwrap to the branch nearest the previous block
        while theta - prev_theta > std::f64::consts::FRAC_PI_4 {
            theta -= std::f64::consts::FRAC_PI_2;
        }
        while theta - prev_theta < -std::f64::consts::FRAC_PI_4 {
            theta += std::f64::consts::FRAC_PI_2;
        }
        let rot = C::new(T::from_f64c((-theta).cos()), T::from_f64c((-theta).sin()));
        for s in out[start..end].iter_mut() {
            *s *= rot;
        }
        prev_theta = theta;
        start = end;
    }
    // global 90-degree ambiguity, data-aided
    let mut best = (f64::MIN, 0usize);
    for k in 0..4 {
        let rot = num_complex::Complex64::from_polar(1.0, k as f64 * std::f64::consts::FRAC_PI_2);
        let mut corr = num_complex::Complex64::new(0.0, 0.0);
        for (r, t) in out.iter().zip(tx.iter()) {
            let z = num_complex::Complex64::new(r.re.to_f64c(), r.im.to_f64c()) * rot;
            let tz = num_complex::Complex64::new(t.re.to_f64c(), t.im.to_f64c());
            corr += tz.conj() * z;
        }
        if corr.re > best.0 {
            best = (corr.re, k);
        }
    }
    let rot = C::new(
        T::from_f64c((best.1 as f64 * std::f64::consts::FRAC_PI_2).cos()),
        T::from_f64c((best.1 as f64 * std::f64::consts::FRAC_PI_2).sin()),
    );
    for s in out.iter_mut() {
        *s *= rot;
    }
    out
}

/// Data-aided GSNR: after least-squares complex scaling of `rx` onto
/// `tx`, `10 log10(E|tx|^2 / E|tx - c rx|^2)`. Saturates at
/// [`GSNR_SATURATION_DB`] for numerically perfect links.
pub fn measure_gsnr<T: Real>(tx: &[C<T>], rx: &[C<T>]) -> Result<f64> {
    if tx.len() != rx.len() {
        return Err(Error::invalid_argument("measure_gsnr: length mismatch"));
    }
    if tx.len() < 1000 {
        return Err(Error::invalid_argument("measure_gsnr: need >= 1000 symbols"));
    }
    let mut rxtx = num_complex::Complex64::new(0.0, 0.0);
    let mut rxrx = 0.0f64;
    let mut txtx = 0.0f64;
    for (t, r) in tx.iter().zip(rx.iter()) {
        let tz = num_complex::Complex64::new(t.re.to_f64c(), t.im.to_f64c());
        let rz = num_complex::Complex64::new(r.re.to_f64c(), r.im.to_f64c());
        rxtx += rz.conj() * tz;
        rxrx += rz.norm_sqr();
        txtx += tz.norm_sqr();
    }
    if rxrx == 0.0 {
        return Ok(-f64::INFINITY);
    }
    let c = rxtx / rxrx;
    let mut err = 0.0f64;
    for (t, r) in tx.iter().zip(rx.iter()) {
        let tz = num_complex::Complex64::new(t.re.to_f64c(), t.im.to_f64c());
        let rz = num_complex::Complex64::new(r.re.to_f64c(), r.im.to_f64c());
        err += (tz - c * rz).norm_sqr();
    }
    if err <= txtx * 1e-30 {
        return Ok(GSNR_SATURATION_DB);
    }
    Ok((10.0 * (txtx / err).log10()).min(GSNR_SATURATION_DB))
}

/// Bandwidth conversion: SNR_ASE = OSNR * (B_ref / R_s), in dB.
pub fn osnr_to_snr_ase(osnr_db: f64, symbol_rate: f64, b_ref: f64) -> f64 {
    osnr_db + 10.0 * (b_ref / symbol_rate).log10()
}

/// Invert the GSNR decomposition: `SNR_NL^-1 = GSNR^-1 - SNR_ASE^-1`.
/// Returns the label and whether it was clamped to the ceiling.
pub fn derive_snr_nl(gsnr_db: f64, snr_ase_db: f64) -> (f64, bool) {
    if !snr_ase_db.is_finite() {
        return (gsnr_db.min(SNR_NL_CEILING_DB), gsnr_db > SNR_NL_CEILING_DB);
    }
    let inv = db_to_linear(-gsnr_db) - db_to_linear(-snr_ase_db);
    if inv <= 0.0 {
        return (SNR_NL_CEILING_DB, true);
    }
    let db = -10.0 * inv.log10();
    if db > SNR_NL_CEILING_DB {
        (SNR_NL_CEILING_DB, true)
    } else {
        (db, false)
    }
}

/// Forward SNR composition GSNR^-1 = SNR_NL^-1 + SNR_ASE^-1, for closure tests.
pub fn combine_gsnr(snr_nl_db: f64, snr_ase_db: f64) -> f64 {
    -10.0 * (db_to_linear(-snr_nl_db) + db_to_linear(-snr_ase_db)).log10()
}

/// The complete SNR ledger of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrBreakdown {
    pub gsnr_db: f64,
    pub snr_ase_db: f64,
    pub snr_nl_db: f64,
    pub osnr_db: f64,
    pub clamped: bool,
}

impl SnrBreakdown {
    pub fn from_measurement(gsnr_db: f64, osnr_db: f64, symbol_rate: f64, b_ref: f64) -> Self {
        let snr_ase_db = if osnr_db.is_finite() {
            osnr_to_snr_ase(osnr_db, symbol_rate, b_ref)
        } else {
            f64::INFINITY
        };
        let (snr_nl_db, clamped) = derive_snr_nl(gsnr_db, snr_ase_db);
        SnrBreakdown { gsnr_db, snr_ase_db, snr_nl_db, osnr_db, clamped }
    }
}

/// Result of the data-aided payload recovery chain.
#[derive(Debug, Clone)]
pub struct PayloadRecovery<T: Real> {
    pub rx_x: Vec<C<T>>,
    pub rx_y: Vec<C<T>>,
    pub tx_x: Vec<C<T>>,
    pub tx_y: Vec<C<T>>,
    pub snr: SnrBreakdown,
}

/// Align an equalized stream to a reference by signed integer shift,
/// maximizing correlation magnitude: `out[i + shift] ~ tx[i]`.
/// Returns (shift, |corr|).
fn best_shift<T: Real>(out: &[C<T>], tx: &[C<T>], max_shift: usize) -> (i64, f64) {
    let m = max_shift as i64;
    let mut best = (0i64, -1.0f64);
    for shift in -m..=m {
        let o_start = shift.max(0) as usize;
        let t_start = (-shift).max(0) as usize;
        let probe = (out.len() - o_start).min(tx.len() - t_start).min(2048);
        if probe < 64 {
            continue;
        }
        let mut corr = num_complex::Complex64::new(0.0, 0.0);
        for i in 0..probe {
            let o = &out[o_start + i];
            let t = &tx[t_start + i];
            corr += num_complex::Complex64::new(t.re.to_f64c(), t.im.to_f64c()).conj()
                * num_complex::Complex64::new(o.re.to_f64c(), o.im.to_f64c());
        }
        let mag = corr.norm() / probe as f64;
        if mag > best.1 {
            best = (shift, mag);
        }
    }
    best
}

/// Full receive chain for label generation: CD compensation with the
/// known accumulated dispersion, matched filter, CMA, data-aided
/// polarization assignment and lag alignment, carrier-phase removal, and
/// the GSNR measurement and its SNR_ASE / SNR_NL decomposition.
pub fn recover_payload<T: Real>(
    realization: &ChannelRealization<T>,
    layout: &FrameLayout,
    tx_x: &[C<T>],
    tx_y: &[C<T>],
    cma: &CmaConfig,
    carrier_wavelength_nm: f64,
) -> Result<PayloadRecovery<T>> {
    let rx = cd_compensate(&realization.received, realization.labels.cd_ps_per_nm, carrier_wavelength_nm);
    let rx = matched_filter(&rx, layout);
    let ts_samples = layout.ts_samples();
    if rx.len() <= ts_samples + 4 * cma.taps {
        return Err(Error::invalid_argument("recover_payload: frame too short"));
    }
    let payload = DualPolSignal::new(
        ComplexSignal::new(rx.x_pol.samples[ts_samples..].to_vec(), rx.sample_rate())?,
        ComplexSignal::new(rx.y_pol.samples[ts_samples..].to_vec(), rx.sample_rate())?,
    )?;
    let eq = cma_equalize(&payload, cma)?;

    // polarization assignment: straight or swapped, by total correlation
    let max_shift = cma.taps + 8;
    let (sh_xx, s_xx) = best_shift(&eq.x_pol.samples, tx_x, max_shift);
    let (sh_xy, s_xy) = best_shift(&eq.x_pol.samples, tx_y, max_shift);
    let (sh_yx, s_yx) = best_shift(&eq.y_pol.samples, tx_x, max_shift);
    let (sh_yy, s_yy) = best_shift(&eq.y_pol.samples, tx_y, max_shift);
    let straight = s_xx + s_yy >= s_xy + s_yx;
    let (ox, oy, sh_x, sh_y) = if straight {
        (&eq.x_pol.samples, &eq.y_pol.samples, sh_xx, sh_yy)
    } else {
        (&eq.y_pol.samples, &eq.x_pol.samples, sh_yx, sh_xy)
    };

    // overlap windows per stream, skipping the equalizer's edge symbols
    let margin = cma.taps;
    let align = |out: &[C<T>], tx: &[C<T>], shift: i64| -> (usize, usize, usize) {
        let o_start = shift.max(0) as usize + margin;
        let t_start = (-shift).max(0) as usize + margin;
        let n = (out.len() - o_start).min(tx.len() - t_start);
        (o_start, t_start, n)
    };
    let (oxs, txs, nx) = align(ox, tx_x, sh_x);
    let (oys, tys, ny) = align(oy, tx_y, sh_y);
    let n_sym = nx.min(ny);
    if n_sym < 500 {
        return Err(Error::invalid_argument("recover_payload: too few usable symbols"));
    }
    let rx_x = phase_derotate(&ox[oxs..oxs + n_sym], &tx_x[txs..txs + n_sym]);
    let rx_y = phase_derotate(&oy[oys..oys + n_sym], &tx_y[tys..tys + n_sym]);
    let txx = tx_x[txs..txs + n_sym].to_vec();
    let txy = tx_y[tys..tys + n_sym].to_vec();

    // joint GSNR over both polarizations
    let mut tx_all = txx.clone();
    tx_all.extend_from_slice(&txy);
    let mut rx_all = rx_x.clone();
    rx_all.extend_from_slice(&rx_y);
    let gsnr = measure_gsnr(&tx_all, &rx_all)?;
    let snr = SnrBreakdown::from_measurement(
        gsnr,
        realization.labels.osnr_db,
        layout.symbol_rate,
        crate::channel::B_REF_HZ,
    );
    Ok(PayloadRecovery { rx_x, rx_y, tx_x: txx, tx_y: txy, snr })
}
