//! Dense multi-task baseline: flattened image, per-sample feature
//! normalization, a tapered GELU dense stack, and four width-1 heads.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::tensor::{ParamSet, Tape};
use crate::nn::vit::ModelForward;
use crate::num::Real;
use crate::tfimage::TfImage;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnConfig {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    pub n_tasks: usize,
}

impl Default for DnnConfig {
    fn default() -> Self {
        DnnConfig {
            input_dim: 100 * 100 * 2,
            widths: vec![2000, 800, 400, 100, 50, 20, 10],
            n_tasks: 4,
        }
    }
}

impl DnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.n_tasks == 0 || self.input_dim == 0 {
            return Err(Error::invalid_config("dnn: empty architecture"));
        }
        Ok(())
    }

    /// Narrowed stack for finite-difference gradient checks.
    pub fn tiny() -> Self {
        DnnConfig { input_dim: 20 * 20 * 2, widths: vec![20, 10], n_tasks: 4 }
    }
}

pub struct MultiTaskDnn<T: Real> {
    pub cfg: DnnConfig,
    pub params: ParamSet<T>,
    norm_g: usize,
    norm_b: usize,
    fc: Vec<(usize, usize)>,
    heads: Vec<(usize, usize)>,
}

impl<T: Real> MultiTaskDnn<T> {
    pub fn new(cfg: DnnConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        let norm_g = p.add("norm.g", Array2::ones((1, cfg.input_dim)));
        let norm_b = p.add("norm.b", Array2::zeros((1, cfg.input_dim)));
        let mut fc = Vec::new();
        let mut fan_in = cfg.input_dim;
        for (i, &w) in cfg.widths.iter().enumerate() {
            let lim = (6.0 / (fan_in + w) as f64).sqrt();
            let wi = p.add(
                format!("fc{i}.w"),
                Array2::from_shape_fn((fan_in, w), |_| T::from_f64c(rng.gen_range(-lim..lim))),
            );
            let bi = p.add(format!("fc{i}.b"), Array2::zeros((1, w)));
            fc.push((wi, bi));
            fan_in = w;
        }
        let mut heads = Vec::new();
        for t in 0..cfg.n_tasks {
            let lim = (6.0 / (fan_in + 1) as f64).sqrt();
            let wi = p.add(
                format!("head.task{t}.w"),
                Array2::from_shape_fn((fan_in, 1), |_| T::from_f64c(rng.gen_range(-lim..lim))),
            );
            let bi = p.add(format!("head.task{t}.b"), Array2::zeros((1, 1)));
            heads.push((wi, bi));
        }
        Ok(MultiTaskDnn { cfg, params: p, norm_g, norm_b, fc, heads })
    }

    pub fn forward<'p>(
        &'p self,
        tape: &mut Tape<'p, T>,
        input_row: Array2<T>,
    ) -> Result<ModelForward> {
        if input_row.dim() != (1, self.cfg.input_dim) {
            return Err(Error::invalid_argument(format!(
                "dnn: expected (1,{}) input, got {:?}",
                self.cfg.input_dim,
                input_row.dim()
            )));
        }
        let x = tape.constant(input_row);
        // per-sample feature standardization with learned affine terms
        let n = tape.layer_norm_rows(x);
        let g = tape.param(self.norm_g);
        let b = tape.param(self.norm_b);
        let scaled = tape.mul_row_vec(n, g);
        let mut h = tape.add_row_vec(scaled, b);
        for &(w, bias) in &self.fc {
            let wv = tape.param(w);
            let bv = tape.param(bias);
            let lin = tape.matmul(h, wv);
            let lin = tape.add_row_vec(lin, bv);
            h = tape.gelu(lin);
        }
        let mut heads = Vec::with_capacity(self.cfg.n_tasks);
        for &(w, bias) in &self.heads {
            let wv = tape.param(w);
            let bv = tape.param(bias);
            let o = tape.matmul(h, wv);
            heads.push(tape.add_row_vec(o, bv));
        }
        let prediction = tape.concat_cols(&heads);
        if !tape.is_finite(prediction) {
            return Err(Error::NumericalFailure {
                context: "dnn head".into(),
                detail: "non-finite prediction".into(),
            });
        }
        Ok(ModelForward { heads, prediction })
    }
}

/// Row vector of the flattened image: x plane row-major, then y plane.
pub fn image_to_row<T: Real>(img: &TfImage<T>) -> Array2<T> {
    let n = img.size() * img.size();
    let mut out = Array2::zeros((1, 2 * n));
    for (i, v) in img.x_plane.iter().enumerate() {
        out[(0, i)] = *v;
    }
    for (i, v) in img.y_plane.iter().enumerate() {
        out[(0, n + i)] = *v;
    }
    out
}
