//! Central JSON-backed configuration: link physics, frame layout,
//! feature extraction, models, training, and dataset sampling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{Labels, LinkConfig};
use crate::frame::FrameLayout;
use crate::nn::{AdamConfig, DnnConfig, TaskWeights, VitConfig};
use crate::tfimage::FeatureConfig;
use crate::{Error, Result};

/// Label monitoring windows, physical units. Labels are normalized to
/// [0, 1] over these ranges for training and samples outside them are
/// rejected during generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelWindows {
    pub snr_nl_db: (f64, f64),
    pub osnr_db: (f64, f64),
    pub cd_ps_per_nm: (f64, f64),
    pub dgd_ps: (f64, f64),
}

impl Default for LabelWindows {
    fn default() -> Self {
        LabelWindows {
            snr_nl_db: (0.0, 20.0),
            osnr_db: (10.0, 30.0),
            cd_ps_per_nm: (0.0, 51_000.0),
            dgd_ps: (0.0, 100.0),
        }
    }
}

impl LabelWindows {
    pub fn as_array(&self) -> [(f64, f64); 4] {
        [self.snr_nl_db, self.osnr_db, self.cd_ps_per_nm, self.dgd_ps]
    }

    pub fn contains(&self, labels: &Labels) -> bool {
        let l = labels.as_array();
        self.as_array().iter().zip(l.iter()).all(|(&(lo, hi), &v)| v >= lo && v <= hi)
    }

    /// Normalize to [0, 1] per task, clamped.
    pub fn normalize(&self, labels: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, (&(lo, hi), &v)) in self.as_array().iter().zip(labels.iter()).enumerate() {
            out[i] = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        }
        out
    }

    pub fn denormalize(&self, norm: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, (&(lo, hi), &v)) in self.as_array().iter().zip(norm.iter()).enumerate() {
            out[i] = lo + v * (hi - lo);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in self.as_array() {
            if hi <= lo || hi.is_nan() || lo.is_nan() {
                return Err(Error::invalid_config("label window must have hi > lo"));
            }
        }
        Ok(())
    }
}

/// Per-sample impairment sampling ranges for dataset generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_samples: usize,
    /// Inclusive span count range; CD = spans * span_length * D.
    pub span_range: (usize, usize),
    pub mean_dgd_range_ps: (f64, f64),
    pub osnr_range_db: (f64, f64),
    pub launch_powers_dbm: Vec<f64>,
    /// Inclusive channel count range.
    pub channel_range: (usize, usize),
    pub windows: LabelWindows,
    /// Regeneration cap for out-of-window samples.
    pub max_attempts: usize,
    /// Persist received training-sequence slices for feature recompute.
    pub store_frames: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_samples: 2000,
            span_range: (1, 30),
            mean_dgd_range_ps: (0.0, 100.0),
            osnr_range_db: (10.0, 30.0),
            launch_powers_dbm: vec![0.0, 2.0, 4.0, 6.0],
            channel_range: (1, 3),
            windows: LabelWindows::default(),
            max_attempts: 20,
            store_frames: true,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 10 {
            return Err(Error::invalid_config("n_samples must be >= 10"));
        }
        if self.span_range.0 == 0 || self.span_range.0 > self.span_range.1 {
            return Err(Error::invalid_config("bad span_range"));
        }
        if self.channel_range.0 == 0 || self.channel_range.0 > self.channel_range.1 {
            return Err(Error::invalid_config("bad channel_range"));
        }
        if self.launch_powers_dbm.is_empty() {
            return Err(Error::invalid_config("launch_powers_dbm must be non-empty"));
        }
        if self.max_attempts == 0 {
            return Err(Error::invalid_config("max_attempts must be >= 1"));
        }
        self.windows.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Vit,
    Dnn,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Vit => write!(f, "vit"),
            ModelKind::Dnn => write!(f, "dnn"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub weights: TaskWeights,
    /// Early-stop patience in epochs; 0 disables.
    pub patience: usize,
    pub seed: u64,
    /// Worker threads for batch-parallel gradients. Results are
    /// deterministic for a fixed thread count; 1 is the reference mode.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::Vit,
            epochs: 30,
            batch_size: 32,
            adam: AdamConfig { lr: 3e-4, ..AdamConfig::default() },
            weights: TaskWeights::default(),
            patience: 0,
            seed: 7,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid_config("epochs and batch_size must be >= 1"));
        }
        if self.threads == 0 {
            return Err(Error::invalid_config("threads must be >= 1"));
        }
        self.weights.validate()
    }
}

/// Top-level configuration; all sections have paper defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Config {
    pub link: LinkConfig,
    pub layout: FrameLayout,
    pub feature: FeatureConfig,
    pub vit: VitConfig,
    pub dnn: DnnConfig,
    pub train: TrainConfig,
    pub dataset: DatasetConfig,
}

impl Config {
    /// Paper-scale configuration (5 channels, 2^14-symbol payload,
    /// 1-30 spans).
    pub fn paper() -> Self {
        Config::default()
    }

    /// Desk-scale configuration: 1-3 channels, 2^12-symbol payload,
    /// 1-5 spans (CD up to 8500 ps/nm), mean DGD up to 50 ps.
    pub fn desk() -> Self {
        let mut c = Config::default();
        c.layout.payload_symbols = 1 << 12;
        c.dataset.n_samples = 512;
        c.dataset.span_range = (1, 5);
        c.dataset.mean_dgd_range_ps = (0.0, 50.0);
        c.dataset.windows.cd_ps_per_nm = (0.0, 8500.0);
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.layout.validate()?;
        self.vit.validate()?;
        self.dnn.validate()?;
        self.train.validate()?;
        self.dataset.validate()?;
        if self.feature.orders.len() < 8 {
            return Err(Error::invalid_config("feature.orders too short"));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let cfg: Config = serde_json::from_slice(&std::fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}
