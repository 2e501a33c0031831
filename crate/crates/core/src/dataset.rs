//! Dataset generation and persistence.
//!
//! On-disk layout under one directory:
//! * `manifest.json` — configuration snapshot, per-sample records
//!   (seed, labels, image offset, checksum), and the split assignment.
//! * `images.bin` — contiguous little-endian f32 feature images,
//!   `100*100*2` floats per sample.
//! * `labels.bin` — 4 little-endian f32 per sample, order
//!   (SNR_NL dB, OSNR dB, CD ps/nm, DGD ps), physical units.
//! * `frames.bin` (optional) — received training-sequence slices at 2
//!   samples/symbol, per sample: x then y polarization, each sample as
//!   (re, im) f32 pairs; enables feature recomputation.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{mix_seed, run_link, Labels, LinkConfig, PmdConfig};
use crate::config::Config;
use crate::frame::{assemble_frame, generate_qpsk_symbols, generate_ts, rrc_shape};
use crate::num::C;
use crate::rxdsp::{recover_payload, CmaConfig};
use crate::signal::{ComplexSignal, DualPolSignal};
use crate::tfimage::{make_feature, FeatureConfig, TfImage};
use crate::{Error, Result};

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: u32,
    pub seed: u64,
    pub attempts: u32,
    pub labels: Labels,
    pub launch_power_dbm: f64,
    pub spans: usize,
    pub n_channels: usize,
    pub mean_dgd_ps: f64,
    /// Offset into images.bin, in f32 elements; strictly increasing.
    pub image_offset: u64,
    /// SHA-256 of the sample's image bytes.
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub master_seed: u64,
    pub n_samples: usize,
    pub image_floats_per_sample: usize,
    pub ts_samples_per_pol: usize,
    pub rejected_total: u32,
    pub config: Config,
    pub split: SplitIndices,
    pub records: Vec<SampleRecord>,
}

/// One generated sample before serialization.
struct GeneratedSample {
    record: SampleRecord,
    image: Vec<u8>,
    labels: [f32; 4],
    frame: Vec<u8>,
}

fn draw_from_range(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..range.1)
    }
}

/// Simulate one labeled realization + feature image.
fn generate_sample(cfg: &Config, index: u32, master_seed: u64) -> Result<GeneratedSample> {
    let ds = &cfg.dataset;
    let layout = &cfg.layout;
    let mut last_err: Option<Error> = None;
    for attempt in 0..ds.max_attempts as u32 {
        let seed = mix_seed(mix_seed(master_seed, 0x701 + index as u64), attempt as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let spans = rng.gen_range(ds.span_range.0..=ds.span_range.1);
        let mean_dgd = draw_from_range(&mut rng, ds.mean_dgd_range_ps);
        let osnr = draw_from_range(&mut rng, ds.osnr_range_db);
        let power = ds.launch_powers_dbm[rng.gen_range(0..ds.launch_powers_dbm.len())];
        let n_channels = rng.gen_range(ds.channel_range.0..=ds.channel_range.1);

        let link = LinkConfig {
            n_channels,
            spans,
            launch_power_dbm: power,
            target_osnr_db: Some(osnr),
            pmd: PmdConfig { mean_dgd_ps: mean_dgd, ..cfg.link.pmd.clone() },
            ..cfg.link.clone()
        };

        let ts = generate_ts::<f64>(
            layout.ts_order,
            layout.ts_symbols,
            layout.sps,
            layout.symbol_rate,
        )?;
        let mut frames = Vec::with_capacity(n_channels);
        let mut center_tx: Option<[Vec<C<f64>>; 2]> = None;
        let center = n_channels / 2;
        for ch in 0..n_channels {
            let sym_seed = mix_seed(seed, 0x900 + ch as u64);
            let [sx, sy] = generate_qpsk_symbols::<f64>(sym_seed, layout.payload_symbols)?;
            let payload = DualPolSignal::new(rrc_shape(&sx, layout)?, rrc_shape(&sy, layout)?)?;
            frames.push(assemble_frame(&ts, &payload, power)?);
            if ch == center {
                center_tx = Some([sx, sy]);
            }
        }
        let [tx_x, tx_y] = center_tx.expect("center channel symbols");

        let mut realization = run_link(&link, &frames, seed)?;
        let recovery = recover_payload(
            &realization,
            layout,
            &tx_x,
            &tx_y,
            &CmaConfig::default(),
            link.carrier_wavelength_nm,
        )?;
        realization.labels.snr_nl_db = recovery.snr.snr_nl_db;

        if !ds.windows.contains(&realization.labels) || recovery.snr.clamped {
            last_err = Some(Error::InvalidState(format!(
                "sample {index} attempt {attempt}: labels {:?} outside windows",
                realization.labels
            )));
            continue;
        }

        let image = make_feature(&realization, layout, &cfg.feature)?;
        let image_bytes = image.to_le_bytes();
        let labels = realization.labels.as_array().map(|v| v as f32);
        let frame = if ds.store_frames {
            let ts_rx = crate::frame::extract_ts(&realization.received, layout)?;
            let mut out =
                Vec::with_capacity(2 * ts_rx.len() * 2 * std::mem::size_of::<f32>());
            for pol in [&ts_rx.x_pol.samples, &ts_rx.y_pol.samples] {
                for s in pol.iter() {
                    out.extend_from_slice(&(s.re as f32).to_le_bytes());
                    out.extend_from_slice(&(s.im as f32).to_le_bytes());
                }
            }
            out
        } else {
            Vec::new()
        };
        let checksum = hex_digest(&image_bytes);
        let record = SampleRecord {
            index,
            seed,
            attempts: attempt + 1,
            labels: realization.labels,
            launch_power_dbm: power,
            spans,
            n_channels,
            mean_dgd_ps: mean_dgd,
            image_offset: 0, // assigned at assembly
            checksum,
        };
        return Ok(GeneratedSample { record, image: image_bytes, labels, frame });
    }
    Err(last_err.unwrap_or_else(|| {
        Error::InvalidState(format!("sample {index}: no attempt succeeded"))
    }))
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Seeded 80/10/10 split.
fn make_split(n: usize, master_seed: u64) -> SplitIndices {
    let mut idx: Vec<u32> = (0..n as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(master_seed, 0x5917));
    // Fisher-Yates
    for i in (1..idx.len()).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    let n_val = n / 10;
    let n_test = n / 10;
    let test = idx[..n_test].to_vec();
    let val = idx[n_test..n_test + n_val].to_vec();
    let train = idx[n_test + n_val..].to_vec();
    SplitIndices { train, val, test }
}

/// Generate `n` samples into `out_dir` with per-sample seeds derived from
/// the master seed. Output bytes are identical for any worker count:
/// samples are computed independently and written in index order.
pub fn generate_dataset(
    cfg: &Config,
    n: usize,
    master_seed: u64,
    out_dir: &Path,
    workers: usize,
) -> Result<DatasetManifest> {
    cfg.validate()?;
    if n < 10 {
        return Err(Error::invalid_argument("generate_dataset: n must be >= 10"));
    }
    fs::create_dir_all(out_dir)?;

    let indices: Vec<u32> = (0..n as u32).collect();
    let results: Vec<Result<GeneratedSample>> = if workers <= 1 {
        indices.iter().map(|&i| generate_sample(cfg, i, master_seed)).collect()
    } else {
        let chunk = n.div_ceil(workers);
        let mut out: Vec<Vec<Result<GeneratedSample>>> = Vec::new();
        std::thread::scope(|scope| {
            let handles: Vec<_> = indices
                .chunks(chunk)
                .map(|ids| {
                    scope.spawn(move || {
                        ids.iter()
                            .map(|&i| generate_sample(cfg, i, master_seed))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                out.push(h.join().expect("generation worker panicked"));
            }
        });
        out.into_iter().flatten().collect()
    };

    let image_floats = cfg.feature.image_size * cfg.feature.image_size * 2;
    let mut images = Vec::with_capacity(n * image_floats * 4);
    let mut labels = Vec::with_capacity(n * 16);
    let mut frames: Vec<u8> = Vec::new();
    let mut records = Vec::with_capacity(n);
    let mut rejected_total = 0u32;
    for r in results {
        let mut s = r?;
        s.record.image_offset = (records.len() * image_floats) as u64;
        rejected_total += s.record.attempts - 1;
        images.extend_from_slice(&s.image);
        for v in s.labels {
            labels.extend_from_slice(&v.to_le_bytes());
        }
        frames.extend_from_slice(&s.frame);
        records.push(s.record);
    }

    let manifest = DatasetManifest {
        version: DATASET_VERSION,
        master_seed,
        n_samples: n,
        image_floats_per_sample: image_floats,
        ts_samples_per_pol: cfg.layout.ts_samples(),
        rejected_total,
        config: cfg.clone(),
        split: make_split(n, master_seed),
        records,
    };
    fs::write(out_dir.join("images.bin"), images)?;
    fs::write(out_dir.join("labels.bin"), labels)?;
    if cfg.dataset.store_frames {
        fs::write(out_dir.join("frames.bin"), frames)?;
    }
    fs::write(out_dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// An on-disk dataset loaded into memory, checksums verified.
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub dir: PathBuf,
    images: Vec<f32>,
    labels: Vec<[f32; 4]>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: DatasetManifest =
            serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        if manifest.version != DATASET_VERSION {
            return Err(Error::invalid_argument("dataset version unsupported"));
        }
        let raw = fs::read(dir.join("images.bin"))?;
        let per = manifest.image_floats_per_sample;
        if raw.len() != manifest.n_samples * per * 4 {
            return Err(Error::invalid_argument("images.bin length mismatch"));
        }
        // verify offsets and checksums
        let mut prev_offset = None;
        for rec in &manifest.records {
            if let Some(p) = prev_offset {
                if rec.image_offset <= p {
                    return Err(Error::invalid_argument("image offsets must strictly increase"));
                }
            }
            prev_offset = Some(rec.image_offset);
            let start = rec.image_offset as usize * 4;
            let end = start + per * 4;
            if hex_digest(&raw[start..end]) != rec.checksum {
                return Err(Error::invalid_argument(format!(
                    "checksum mismatch at sample {}",
                    rec.index
                )));
            }
        }
        let images: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let lraw = fs::read(dir.join("labels.bin"))?;
        if lraw.len() != manifest.n_samples * 16 {
            return Err(Error::invalid_argument("labels.bin length mismatch"));
        }
        let labels: Vec<[f32; 4]> = lraw
            .chunks_exact(16)
            .map(|c| {
                let mut out = [0f32; 4];
                for (i, b) in c.chunks_exact(4).enumerate() {
                    out[i] = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                }
                out
            })
            .collect();
        Ok(Dataset { manifest, dir: dir.to_path_buf(), images, labels })
    }

    pub fn len(&self) -> usize {
        self.manifest.n_samples
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.n_samples == 0
    }

    pub fn image(&self, idx: usize) -> TfImage<f64> {
        let per = self.manifest.image_floats_per_sample;
        let size = self.manifest.config.feature.image_size;
        let vals = &self.images[idx * per..(idx + 1) * per];
        let half = per / 2;
        let x_plane = ndarray::Array2::from_shape_vec(
            (size, size),
            vals[..half].iter().map(|&v| v as f64).collect(),
        )
        .expect("plane shape");
        let y_plane = ndarray::Array2::from_shape_vec(
            (size, size),
            vals[half..].iter().map(|&v| v as f64).collect(),
        )
        .expect("plane shape");
        TfImage { x_plane, y_plane }
    }

    /// Physical-unit labels (SNR_NL, OSNR, CD, DGD).
    pub fn labels(&self, idx: usize) -> [f64; 4] {
        self.labels[idx].map(|v| v as f64)
    }

    pub fn labels_normalized(&self, idx: usize) -> [f64; 4] {
        self.manifest.config.dataset.windows.normalize(self.labels(idx))
    }

    /// Received TS slice for one sample, if frames were stored.
    pub fn frame_ts(&self, idx: usize) -> Result<DualPolSignal<f64>> {
        let per_pol = self.manifest.ts_samples_per_pol;
        let bytes_per_sample = 2 * per_pol * 2 * 4;
        let raw = fs::read(self.dir.join("frames.bin"))?;
        if raw.len() != self.manifest.n_samples * bytes_per_sample {
            return Err(Error::invalid_argument("frames.bin length mismatch"));
        }
        let start = idx * bytes_per_sample;
        let mut vals = raw[start..start + bytes_per_sample]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64);
        let mut read_pol = |n: usize| -> Vec<C<f64>> {
            (0..n)
                .map(|_| {
                    let re = vals.next().expect("length checked");
                    let im = vals.next().expect("length checked");
                    C::new(re, im)
                })
                .collect()
        };
        let rate = 2.0 * self.manifest.config.layout.symbol_rate;
        let x = ComplexSignal::new(read_pol(per_pol), rate)?;
        let y = ComplexSignal::new(read_pol(per_pol), rate)?;
        DualPolSignal::new(x, y)
    }
}

/// Recompute images.bin from stored frames with a (possibly different)
/// feature configuration; writes a fresh dataset directory.
pub fn recompute_features(
    dataset: &Dataset,
    feature: &FeatureConfig,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    fs::create_dir_all(out_dir)?;
    let n = dataset.len();
    let image_floats = feature.image_size * feature.image_size * 2;
    let mut images = Vec::with_capacity(n * image_floats * 4);
    let mut manifest = dataset.manifest.clone();
    manifest.config.feature = feature.clone();
    manifest.image_floats_per_sample = image_floats;
    for idx in 0..n {
        let ts = dataset.frame_ts(idx)?;
        let sino = crate::tfimage::build_sinogram(&ts, &feature.orders, feature.radial_bins)?;
        let img = crate::tfimage::inverse_radon(&sino, feature.image_size, feature.joint_normalize)?;
        let bytes = img.to_le_bytes();
        manifest.records[idx].image_offset = (idx * image_floats) as u64;
        manifest.records[idx].checksum = hex_digest(&bytes);
        images.extend_from_slice(&bytes);
    }
    fs::write(out_dir.join("images.bin"), images)?;
    fs::copy(dataset.dir.join("labels.bin"), out_dir.join("labels.bin"))?;
    if dataset.dir.join("frames.bin").exists() {
        fs::copy(dataset.dir.join("frames.bin"), out_dir.join("frames.bin"))?;
    }
    fs::write(out_dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> Config {
        let mut c = Config::desk();
        c.layout.payload_symbols = 1024;
        c.link.ssfm_steps_per_span = 8;
        c.dataset.n_samples = 10;
        c.dataset.span_range = (1, 2);
        c.dataset.channel_range = (1, 1);
        c.dataset.mean_dgd_range_ps = (0.0, 20.0);
        c.dataset.launch_powers_dbm = vec![0.0, 2.0];
        c
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = make_split(12_000, 5);
        assert_eq!(s.train.len(), 9600);
        assert_eq!(s.val.len(), 1200);
        assert_eq!(s.test.len(), 1200);
        let s2 = make_split(12_000, 5);
        assert_eq!(s.train, s2.train);
        // partition: all indices exactly once
        let mut all: Vec<u32> = s.train.iter().chain(&s.val).chain(&s.test).cloned().collect();
        all.sort_unstable();
        assert_eq!(all, (0..12_000u32).collect::<Vec<_>>());
    }

    #[test]
    fn generate_load_roundtrip_deterministic() {
        let cfg = tiny_config();
        let dir1 = std::env::temp_dir().join(format!("ds_a_{}", std::process::id()));
        let dir2 = std::env::temp_dir().join(format!("ds_b_{}", std::process::id()));
        let m1 = generate_dataset(&cfg, 10, 42, &dir1, 1).unwrap();
        let m2 = generate_dataset(&cfg, 10, 42, &dir2, 2).unwrap();
        // byte-identical regardless of worker count
        let a = fs::read(dir1.join("images.bin")).unwrap();
        let b = fs::read(dir2.join("images.bin")).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            fs::read(dir1.join("labels.bin")).unwrap(),
            fs::read(dir2.join("labels.bin")).unwrap()
        );
        assert_eq!(m1.records, m2.records);

        let ds = Dataset::load(&dir1).unwrap();
        assert_eq!(ds.len(), 10);
        let img = ds.image(3);
        assert_eq!(img.size(), 100);
        let labels = ds.labels(3);
        assert!(cfg.dataset.windows.contains(&Labels {
            snr_nl_db: labels[0],
            osnr_db: labels[1],
            cd_ps_per_nm: labels[2],
            dgd_ps: labels[3],
        }));
        // frames allow feature recomputation that matches images.bin
        let ts = ds.frame_ts(3).unwrap();
        let sino = crate::tfimage::build_sinogram(
            &ts,
            &cfg.feature.orders,
            cfg.feature.radial_bins,
        )
        .unwrap();
        let img2 = crate::tfimage::inverse_radon(
            &sino,
            cfg.feature.image_size,
            cfg.feature.joint_normalize,
        )
        .unwrap();
        // f32 storage quantization applies to the stored copy
        for (a, b) in img.x_plane.iter().zip(img2.x_plane.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
        fs::remove_dir_all(&dir1).ok();
        fs::remove_dir_all(&dir2).ok();
    }

    #[test]
    fn corrupted_store_detected() {
        let cfg = tiny_config();
        let dir = std::env::temp_dir().join(format!("ds_c_{}", std::process::id()));
        generate_dataset(&cfg, 10, 43, &dir, 1).unwrap();
        let mut raw = fs::read(dir.join("images.bin")).unwrap();
        raw[100] ^= 0xff;
        fs::write(dir.join("images.bin"), raw).unwrap();
        assert!(Dataset::load(&dir).is_err());
        fs::remove_dir_all(&dir).ok();
    }
}
