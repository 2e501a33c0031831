//! Training orchestration: mini-batch Adam on the weighted multi-task
//! MAE loss, deterministic batch-parallel gradients, early stopping, and
//! best-on-validation checkpointing.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use serde::{Deserialize, Serialize};

use crate::channel::mix_seed;
use crate::config::{Config, ModelKind, TrainConfig};
use crate::dataset::Dataset;
use crate::nn::{
    checkpoint, image_to_patches, image_to_row, multitask_loss, AdamState, GradBuffer,
    ModelForward, MultiTaskDnn, MultiTaskViT, ParamSet, Tape,
};
use crate::{Error, Result};

/// Either regressor behind one forward interface.
pub enum Model {
    Vit(MultiTaskViT<f64>),
    Dnn(MultiTaskDnn<f64>),
}

impl Model {
    pub fn new(kind: ModelKind, cfg: &Config, seed: u64) -> Result<Self> {
        Ok(match kind {
            ModelKind::Vit => Model::Vit(MultiTaskViT::new(cfg.vit.clone(), seed)?),
            ModelKind::Dnn => Model::Dnn(MultiTaskDnn::new(cfg.dnn.clone(), seed)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Vit(_) => ModelKind::Vit,
            Model::Dnn(_) => ModelKind::Dnn,
        }
    }

    pub fn params(&self) -> &ParamSet<f64> {
        match self {
            Model::Vit(m) => &m.params,
            Model::Dnn(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<f64> {
        match self {
            Model::Vit(m) => &mut m.params,
            Model::Dnn(m) => &mut m.params,
        }
    }

    pub fn set_params(&mut self, params: ParamSet<f64>) {
        *self.params_mut() = params;
    }

    /// Model-specific input encoding of one image.
    pub fn prepare(&self, dataset: &Dataset, idx: usize) -> Result<Array2<f64>> {
        let img = dataset.image(idx);
        match self {
            Model::Vit(m) => image_to_patches(&img, m.cfg.patch),
            Model::Dnn(_) => Ok(image_to_row(&img)),
        }
    }

    pub fn forward<'p>(
        &'p self,
        tape: &mut Tape<'p, f64>,
        input: Array2<f64>,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ModelForward> {
        match self {
            Model::Vit(m) => m.forward(tape, input, dropout_rng),
            Model::Dnn(m) => m.forward(tape, input),
        }
    }

    /// Normalized-space predictions for one prepared input.
    pub fn predict(&self, input: Array2<f64>) -> Result<[f64; 4]> {
        let params = self.params();
        let mut tape = Tape::new(params);
        let fwd = match self {
            Model::Vit(m) => m.forward(&mut tape, input, None)?,
            Model::Dnn(m) => m.forward(&mut tape, input)?,
        };
        let p = tape.value(fwd.prediction);
        Ok([p[(0, 0)], p[(0, 1)], p[(0, 2)], p[(0, 3)]])
    }

    pub fn config_json(&self, cfg: &Config) -> serde_json::Value {
        match self {
            Model::Vit(_) => serde_json::to_value(&cfg.vit).expect("serializable"),
            Model::Dnn(_) => serde_json::to_value(&cfg.dnn).expect("serializable"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug)]
pub struct TrainResult {
    pub curves: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub checkpoint_prefix: PathBuf,
}

/// Mean weighted loss over `indices`, forward only.
fn eval_loss(model: &Model, dataset: &Dataset, indices: &[u32], tcfg: &TrainConfig) -> Result<f64> {
    let chunked = split_chunks(indices, tcfg.threads);
    let mut total = 0.0;
    let results: Vec<Result<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = chunked
            .iter()
            .map(|ids| {
                scope.spawn(move || -> Result<f64> {
                    let mut acc = 0.0;
                    for &i in ids.iter() {
                        let input = model.prepare(dataset, i as usize)?;
                        let targets = dataset.labels_normalized(i as usize);
                        let mut tape = Tape::new(model.params());
                        let fwd = model.forward(&mut tape, input, None)?;
                        let (_, loss) =
                            multitask_loss(&mut tape, &fwd, &targets, &tcfg.weights)?;
                        acc += tape.scalar(loss);
                    }
                    Ok(acc)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("eval worker panicked")).collect()
    });
    for r in results {
        total += r?;
    }
    Ok(total / indices.len() as f64)
}

fn split_chunks(indices: &[u32], threads: usize) -> Vec<&[u32]> {
    let n = indices.len();
    let t = threads.max(1).min(n.max(1));
    let chunk = n.div_ceil(t);
    indices.chunks(chunk.max(1)).collect()
}

/// Batch gradient, deterministically reduced over fixed contiguous
/// chunks. Returns the summed loss over the batch.
fn batch_gradient(
    model: &Model,
    dataset: &Dataset,
    batch: &[u32],
    tcfg: &TrainConfig,
    grads: &mut GradBuffer<f64>,
    epoch: usize,
    batch_idx: usize,
) -> Result<f64> {
    // dropout masks are a pure function of (seed, epoch, sample index),
    // independent of worker count
    let drop_seed = mix_seed(tcfg.seed, 0xd207);
    let chunks = split_chunks(batch, tcfg.threads);
    let results: Vec<Result<(GradBuffer<f64>, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|ids| {
                scope.spawn(move || -> Result<(GradBuffer<f64>, f64)> {
                    let mut local = GradBuffer::zeros_like(model.params());
                    let mut acc = 0.0;
                    for &i in ids.iter() {
                        let input = model.prepare(dataset, i as usize)?;
                        let targets = dataset.labels_normalized(i as usize);
                        let mut tape = Tape::new(model.params());
                        let mut drop_rng = ChaCha8Rng::seed_from_u64(mix_seed(
                            drop_seed,
                            ((epoch as u64) << 32) ^ i as u64,
                        ));
                        let fwd = model.forward(&mut tape, input, Some(&mut drop_rng))?;
                        let (_, loss) =
                            multitask_loss(&mut tape, &fwd, &targets, &tcfg.weights)?;
                        let lv = tape.scalar(loss);
                        if !lv.is_finite() {
                            return Err(Error::NumericalFailure {
                                context: format!(
                                    "epoch {epoch} batch {batch_idx} sample {i}"
                                ),
                                detail: format!("loss = {lv}"),
                            });
                        }
                        acc += lv;
                        tape.backward(loss, &mut local)?;
                    }
                    Ok((local, acc))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("train worker panicked")).collect()
    });
    let mut total = 0.0;
    for r in results {
        let (local, acc) = r?;
        grads.add_from(&local);
        total += acc;
    }
    Ok(total)
}

/// Train on the dataset's train split, validating each epoch; emits
/// `curves.csv` and the best-on-validation checkpoint into `out_dir`.
pub fn train(
    dataset: &Dataset,
    cfg: &Config,
    tcfg: &TrainConfig,
    out_dir: &Path,
) -> Result<TrainResult> {
    tcfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let split = &dataset.manifest.split;
    if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
        return Err(Error::invalid_argument("train: dataset must have all three splits"));
    }
    let mut model = Model::new(tcfg.model, cfg, mix_seed(tcfg.seed, 0x11))?;
    let mut adam = AdamState::new(tcfg.adam, model.params());
    let mut grads = GradBuffer::zeros_like(model.params());

    let mut order: Vec<u32> = split.train.clone();
    let mut curves = Vec::with_capacity(tcfg.epochs);
    let mut best: Option<(usize, f64, ParamSet<f64>)> = None;
    let mut stall = 0usize;

    for epoch in 0..tcfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(tcfg.seed, 0x200 + epoch as u64));
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut train_loss_sum = 0.0;
        for (batch_idx, batch) in order.chunks(tcfg.batch_size).enumerate() {
            grads.zero();
            let loss_sum =
                batch_gradient(&model, dataset, batch, tcfg, &mut grads, epoch, batch_idx)?;
            train_loss_sum += loss_sum;
            grads.scale(1.0 / batch.len() as f64);
            adam.step(model.params_mut(), &grads);
        }
        let train_loss = train_loss_sum / order.len() as f64;
        let val_loss = eval_loss(&model, dataset, &split.val, tcfg)?;
        curves.push(EpochStats { epoch, train_loss, val_loss });

        let improved = best.as_ref().map(|(_, b, _)| val_loss < *b).unwrap_or(true);
        if improved {
            best = Some((epoch, val_loss, model.params().clone()));
            stall = 0;
        } else {
            stall += 1;
            if tcfg.patience > 0 && stall >= tcfg.patience {
                break;
            }
        }
    }

    let (best_epoch, best_val_loss, best_params) = best.expect("at least one epoch ran");
    model.set_params(best_params);

    let mut csv = String::from("epoch,train_loss,val_loss\n");
    for c in &curves {
        csv.push_str(&format!("{},{:.12e},{:.12e}\n", c.epoch, c.train_loss, c.val_loss));
    }
    std::fs::write(out_dir.join("curves.csv"), csv)?;

    let prefix = out_dir.join(format!("checkpoint-{}", model.kind()));
    checkpoint::save(&prefix, &model.kind().to_string(), model.config_json(cfg), model.params())?;
    Ok(TrainResult { curves, best_epoch, best_val_loss, checkpoint_prefix: prefix })
}

/// Load a checkpoint back into a model.
pub fn load_model(cfg: &Config, checkpoint_json: &Path) -> Result<Model> {
    let (manifest, params) = checkpoint::load::<f64>(checkpoint_json)?;
    let mut model = match manifest.model.as_str() {
        "vit" => {
            let vit_cfg: crate::nn::VitConfig = serde_json::from_value(manifest.config.clone())?;
            if vit_cfg != cfg.vit {
                return Err(Error::invalid_argument(
                    "checkpoint vit config differs from the active config",
                ));
            }
            Model::Vit(MultiTaskViT::new(vit_cfg, 0)?)
        }
        "dnn" => {
            let dnn_cfg: crate::nn::DnnConfig = serde_json::from_value(manifest.config.clone())?;
            if dnn_cfg != cfg.dnn {
                return Err(Error::invalid_argument(
                    "checkpoint dnn config differs from the active config",
                ));
            }
            Model::Dnn(MultiTaskDnn::new(dnn_cfg, 0)?)
        }
        other => return Err(Error::invalid_argument(format!("unknown model kind {other}"))),
    };
    // loaded parameter order must match the freshly built layout
    for i in 0..model.params().len() {
        if model.params().name(i) != params.name(i)
            || model.params().value(i).dim() != params.value(i).dim()
        {
            return Err(Error::invalid_argument("checkpoint parameter layout mismatch"));
        }
    }
    model.set_params(params);
    Ok(model)
}
