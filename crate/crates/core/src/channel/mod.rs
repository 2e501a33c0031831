//! Link-level simulation: configuration, the span loop, and per-sample
//! ground-truth labels.

pub mod ase;
pub mod cd;
pub mod pmd;
pub mod ssfm;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::num::Real;
use crate::signal::DualPolSignal;
use crate::{Error, Result};

pub use ase::{add_ase, B_REF_HZ};
pub use cd::apply_cd;
pub use pmd::{
    apply_jones, build_pmd_cascade, compute_dgd, maxwellian_cdf, maxwellian_pdf, segment_dgd,
    JonesTransfer, PmdConfig, PmdSegment, DGD_FD_STEP,
};
pub use ssfm::{demux_center, multiplex, ssfm_propagate, wdm_sps};

/// Physical and numerical parameters of one WDM link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub n_channels: usize,
    pub symbol_rate: f64,
    pub channel_spacing: f64,
    pub spans: usize,
    pub span_length_km: f64,
    pub attenuation_db_per_km: f64,
    pub dispersion_ps_nm_km: f64,
    /// Nonlinear coefficient, 1/(W km).
    pub gamma_w_km: f64,
    pub launch_power_dbm: f64,
    /// `None` disables ASE loading.
    pub target_osnr_db: Option<f64>,
    pub pmd: PmdConfig,
    pub ssfm_steps_per_span: usize,
    pub carrier_wavelength_nm: f64,
    pub obpf_bandwidth_hz: f64,
    /// Dual-polarization nonlinearity reduction factor (8/9).
    pub manakov_factor: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            n_channels: 5,
            symbol_rate: 50e9,
            channel_spacing: 75e9,
            spans: 1,
            span_length_km: 100.0,
            attenuation_db_per_km: 0.2,
            dispersion_ps_nm_km: 17.0,
            gamma_w_km: 2.6,
            launch_power_dbm: 2.0,
            target_osnr_db: Some(20.0),
            pmd: PmdConfig::default(),
            ssfm_steps_per_span: 16,
            carrier_wavelength_nm: 1550.0,
            obpf_bandwidth_hz: 75e9,
            manakov_factor: 8.0 / 9.0,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(Error::invalid_config("n_channels must be >= 1"));
        }
        if self.spans == 0 {
            return Err(Error::invalid_config("spans must be >= 1"));
        }
        for (name, v) in [
            ("symbol_rate", self.symbol_rate),
            ("channel_spacing", self.channel_spacing),
            ("span_length_km", self.span_length_km),
            ("carrier_wavelength_nm", self.carrier_wavelength_nm),
            ("obpf_bandwidth_hz", self.obpf_bandwidth_hz),
        ] {
            if v <= 0.0 || v.is_nan() {
                return Err(Error::invalid_config(format!("{name} must be > 0")));
            }
        }
        for (name, v) in [
            ("attenuation_db_per_km", self.attenuation_db_per_km),
            ("dispersion_ps_nm_km", self.dispersion_ps_nm_km),
            ("gamma_w_km", self.gamma_w_km),
            ("manakov_factor", self.manakov_factor),
        ] {
            if v < 0.0 {
                return Err(Error::invalid_config(format!("{name} must be >= 0")));
            }
        }
        if self.ssfm_steps_per_span < 8 {
            return Err(Error::invalid_config("ssfm_steps_per_span must be >= 8"));
        }
        Ok(())
    }

    /// Total accumulated dispersion over the link, ps/nm.
    pub fn total_cd_ps_nm(&self) -> f64 {
        self.spans as f64 * self.span_length_km * self.dispersion_ps_nm_km
    }
}

/// Ground-truth labels of one realization, physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub snr_nl_db: f64,
    pub osnr_db: f64,
    pub cd_ps_per_nm: f64,
    pub dgd_ps: f64,
}

impl Labels {
    pub fn as_array(&self) -> [f64; 4] {
        [self.snr_nl_db, self.osnr_db, self.cd_ps_per_nm, self.dgd_ps]
    }
}

/// One simulated link instance: the received frame plus its labels.
#[derive(Debug, Clone)]
pub struct ChannelRealization<T: Real> {
    pub received: DualPolSignal<T>,
    pub labels: Labels,
    pub seed: u64,
}

/// splitmix64 step, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Run one link realization: multiplex -> span loop -> center-channel
/// band-pass -> lumped PMD -> ASE. Returns the received 2-sps frame and
/// the labels (SNR_NL is filled downstream by the receiver DSP).
///
/// The lumped PMD emulator commutes with the scalar band-pass filter, so
/// it is applied to the filtered center channel.
pub fn run_link<T: Real>(
    cfg: &LinkConfig,
    frames: &[DualPolSignal<T>],
    seed: u64,
) -> Result<ChannelRealization<T>> {
    cfg.validate()?;
    if frames.len() != cfg.n_channels {
        return Err(Error::invalid_argument(format!(
            "run_link: got {} frames for {} channels",
            frames.len(),
            cfg.n_channels
        )));
    }
    let frame_rate = 2.0 * cfg.symbol_rate;
    if frames.iter().any(|f| (f.sample_rate().to_f64c() - frame_rate).abs() > 1.0) {
        return Err(Error::invalid_argument("run_link: frames must be at 2 samples/symbol"));
    }

    let wdm = multiplex(frames, cfg)?;
    let propagated = ssfm_propagate(&wdm, cfg)?;
    let center = ssfm::channel_offsets(cfg.n_channels, cfg.channel_spacing)[cfg.n_channels / 2];
    let rx = demux_center(&propagated, center, cfg.obpf_bandwidth_hz, frame_rate)?;

    let pmd_cfg = PmdConfig { seed: mix_seed(seed, 0xA5), ..cfg.pmd.clone() };
    let cascade = build_pmd_cascade(&pmd_cfg)?;
    let rx = apply_jones(&rx, &cascade)?;

    let mut ase_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5E));
    let osnr = cfg.target_osnr_db.unwrap_or(f64::INFINITY);
    let rx = add_ase(&rx, osnr, B_REF_HZ, &mut ase_rng);

    let labels = Labels {
        snr_nl_db: f64::NAN,
        osnr_db: osnr,
        cd_ps_per_nm: cfg.total_cd_ps_nm(),
        dgd_ps: compute_dgd(&cascade, 0.0, DGD_FD_STEP),
    };
    Ok(ChannelRealization { received: rx, labels, seed })
}
