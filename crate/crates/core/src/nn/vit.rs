//! Multi-task vision transformer: patch embedding with learned positions,
//! pre-norm encoder blocks (MHSA + GELU FFN), token flattening, and four
//! scalar regression heads.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::tensor::{ParamSet, Tape, Var};
use crate::num::Real;
use crate::tfimage::TfImage;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitConfig {
    pub image_size: usize,
    pub channels: usize,
    pub patch: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub ffn_hidden: usize,
    pub head_hidden: usize,
    pub n_tasks: usize,
    pub dropout: f64,
}

impl Default for VitConfig {
    fn default() -> Self {
        VitConfig {
            image_size: 100,
            channels: 2,
            patch: 10,
            d_model: 256,
            n_heads: 4,
            n_layers: 4,
            ffn_hidden: 1024,
            head_hidden: 256,
            n_tasks: 4,
            dropout: 0.1,
        }
    }
}

impl VitConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.image_size.is_multiple_of(self.patch) {
            return Err(Error::invalid_config("vit: image_size must be divisible by patch"));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::invalid_config("vit: d_model must be divisible by n_heads"));
        }
        if self.n_tasks == 0 || self.n_layers == 0 {
            return Err(Error::invalid_config("vit: n_tasks and n_layers must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid_config("vit: dropout must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn n_tokens(&self) -> usize {
        let per_side = self.image_size / self.patch;
        per_side * per_side
    }

    pub fn patch_dim(&self) -> usize {
        self.patch * self.patch * self.channels
    }

    pub fn d_k(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Tiny configuration for finite-difference gradient checks.
    pub fn tiny() -> Self {
        VitConfig {
            image_size: 20,
            channels: 2,
            patch: 10,
            d_model: 16,
            n_heads: 2,
            n_layers: 1,
            ffn_hidden: 32,
            head_hidden: 8,
            n_tasks: 4,
            dropout: 0.0,
        }
    }
}

struct LayerIdx {
    ln1_g: usize,
    ln1_b: usize,
    q: Vec<usize>,
    k: Vec<usize>,
    v: Vec<usize>,
    out: usize,
    ln2_g: usize,
    ln2_b: usize,
    ffn_w1: usize,
    ffn_b1: usize,
    ffn_w2: usize,
    ffn_b2: usize,
}

struct VitIndex {
    patch_w: usize,
    patch_b: usize,
    pos: usize,
    layers: Vec<LayerIdx>,
    final_g: usize,
    final_b: usize,
    shared_w: usize,
    shared_b: usize,
    head_w: Vec<usize>,
    head_b: Vec<usize>,
}

pub struct MultiTaskViT<T: Real> {
    pub cfg: VitConfig,
    pub params: ParamSet<T>,
    index: VitIndex,
}

fn xavier<T: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<T> {
    let lim = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| T::from_f64c(rng.gen_range(-lim..lim)))
}

impl<T: Real> MultiTaskViT<T> {
    pub fn new(cfg: VitConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        let dm = cfg.d_model;
        let dk = cfg.d_k();
        let patch_w = p.add("patch.w", xavier(&mut rng, cfg.patch_dim(), dm));
        let patch_b = p.add("patch.b", Array2::zeros((1, dm)));
        let pos = p.add(
            "pos",
            Array2::from_shape_fn((cfg.n_tokens(), dm), |_| {
                T::from_f64c(rng.gen_range(-0.02..0.02))
            }),
        );
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for l in 0..cfg.n_layers {
            let ln1_g = p.add(format!("enc{l}.ln1.g"), Array2::ones((1, dm)));
            let ln1_b = p.add(format!("enc{l}.ln1.b"), Array2::zeros((1, dm)));
            let mut q = Vec::new();
            let mut k = Vec::new();
            let mut v = Vec::new();
            for h in 0..cfg.n_heads {
                q.push(p.add(format!("enc{l}.attn.q{h}"), xavier(&mut rng, dm, dk)));
                k.push(p.add(format!("enc{l}.attn.k{h}"), xavier(&mut rng, dm, dk)));
                v.push(p.add(format!("enc{l}.attn.v{h}"), xavier(&mut rng, dm, dk)));
            }
            let out = p.add(format!("enc{l}.attn.out"), xavier(&mut rng, dm, dm));
            let ln2_g = p.add(format!("enc{l}.ln2.g"), Array2::ones((1, dm)));
            let ln2_b = p.add(format!("enc{l}.ln2.b"), Array2::zeros((1, dm)));
            let ffn_w1 = p.add(format!("enc{l}.ffn.w1"), xavier(&mut rng, dm, cfg.ffn_hidden));
            let ffn_b1 = p.add(format!("enc{l}.ffn.b1"), Array2::zeros((1, cfg.ffn_hidden)));
            let ffn_w2 = p.add(format!("enc{l}.ffn.w2"), xavier(&mut rng, cfg.ffn_hidden, dm));
            let ffn_b2 = p.add(format!("enc{l}.ffn.b2"), Array2::zeros((1, dm)));
            layers.push(LayerIdx {
                ln1_g,
                ln1_b,
                q,
                k,
                v,
                out,
                ln2_g,
                ln2_b,
                ffn_w1,
                ffn_b1,
                ffn_w2,
                ffn_b2,
            });
        }
        let final_g = p.add("final_ln.g", Array2::ones((1, dm)));
        let final_b = p.add("final_ln.b", Array2::zeros((1, dm)));
        let flat_dim = cfg.n_tokens() * dm;
        let shared_w = p.add("head.shared.w", xavier(&mut rng, flat_dim, cfg.head_hidden));
        let shared_b = p.add("head.shared.b", Array2::zeros((1, cfg.head_hidden)));
        let mut head_w = Vec::new();
        let mut head_b = Vec::new();
        for t in 0..cfg.n_tasks {
            head_w.push(p.add(format!("head.task{t}.w"), xavier(&mut rng, cfg.head_hidden, 1)));
            head_b.push(p.add(format!("head.task{t}.b"), Array2::zeros((1, 1))));
        }
        let index = VitIndex {
            patch_w,
            patch_b,
            pos,
            layers,
            final_g,
            final_b,
            shared_w,
            shared_b,
            head_w,
            head_b,
        };
        Ok(MultiTaskViT { cfg, params: p, index })
    }

    /// Flatten non-overlapping patches and project to token embeddings,
    /// adding the learned positional embedding.
    pub fn patch_embed<'p>(&'p self, tape: &mut Tape<'p, T>, patches: Array2<T>) -> Result<Var> {
        if patches.dim() != (self.cfg.n_tokens(), self.cfg.patch_dim()) {
            return Err(Error::invalid_argument(format!(
                "patch_embed: expected {}x{}, got {}x{}",
                self.cfg.n_tokens(),
                self.cfg.patch_dim(),
                patches.nrows(),
                patches.ncols()
            )));
        }
        let x = tape.constant(patches);
        let w = tape.param(self.index.patch_w);
        let b = tape.param(self.index.patch_b);
        let pos = tape.param(self.index.pos);
        let proj = tape.matmul(x, w);
        let proj = tape.add_row_vec(proj, b);
        Ok(tape.add(proj, pos))
    }

    /// Token embedding without the positional term (permutation
    /// equivariance checks).
    pub fn patch_embed_no_pos<'p>(
        &'p self,
        tape: &mut Tape<'p, T>,
        patches: Array2<T>,
    ) -> Result<Var> {
        let x = tape.constant(patches);
        let w = tape.param(self.index.patch_w);
        let b = tape.param(self.index.patch_b);
        let proj = tape.matmul(x, w);
        Ok(tape.add_row_vec(proj, b))
    }

    fn layer_norm<'p>(
        &'p self,
        tape: &mut Tape<'p, T>,
        x: Var,
        g_idx: usize,
        b_idx: usize,
    ) -> Var {
        let n = tape.layer_norm_rows(x);
        let g = tape.param(g_idx);
        let b = tape.param(b_idx);
        let scaled = tape.mul_row_vec(n, g);
        tape.add_row_vec(scaled, b)
    }

    fn dropout_mask<'p>(
        &'p self,
        tape: &mut Tape<'p, T>,
        x: Var,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Var {
        let rate = self.cfg.dropout;
        match rng {
            Some(rng) if rate > 0.0 => {
                let keep = 1.0 - rate;
                let dims = tape.value(x).dim();
                let mask = Array2::from_shape_fn(dims, |_| {
                    if rng.gen_range(0.0..1.0) < keep {
                        T::from_f64c(1.0 / keep)
                    } else {
                        T::zero()
                    }
                });
                let m = tape.constant(mask);
                tape.mul_elem(x, m)
            }
            _ => x,
        }
    }

    /// One pre-norm encoder block: X1 = X + MHSA(LN(X)),
    /// X' = X1 + FFN(LN(X1)).
    pub fn encoder_block<'p>(
        &'p self,
        tape: &mut Tape<'p, T>,
        x: Var,
        layer: usize,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Var {
        let idx = &self.index.layers[layer];
        let scale = T::from_f64c(1.0 / (self.cfg.d_k() as f64).sqrt());
        let ln1 = self.layer_norm(tape, x, idx.ln1_g, idx.ln1_b);
        let mut head_outs = Vec::with_capacity(self.cfg.n_heads);
        for h in 0..self.cfg.n_heads {
            let wq = tape.param(idx.q[h]);
            let wk = tape.param(idx.k[h]);
            let wv = tape.param(idx.v[h]);
            let q = tape.matmul(ln1, wq);
            let k = tape.matmul(ln1, wk);
            let v = tape.matmul(ln1, wv);
            let logits = tape.matmul_nt(q, k);
            let logits = tape.scale(logits, scale);
            let att = tape.softmax_rows(logits);
            head_outs.push(tape.matmul(att, v));
        }
        let concat = tape.concat_cols(&head_outs);
        let wo = tape.param(idx.out);
        let mo = tape.matmul(concat, wo);
        let mo = self.dropout_mask(tape, mo, dropout_rng.as_deref_mut());
        let x1 = tape.add(x, mo);

        let ln2 = self.layer_norm(tape, x1, idx.ln2_g, idx.ln2_b);
        let w1 = tape.param(idx.ffn_w1);
        let b1 = tape.param(idx.ffn_b1);
        let w2 = tape.param(idx.ffn_w2);
        let b2 = tape.param(idx.ffn_b2);
        let f1 = tape.matmul(ln2, w1);
        let f1 = tape.add_row_vec(f1, b1);
        let g1 = tape.gelu(f1);
        let f2 = tape.matmul(g1, w2);
        let f2 = tape.add_row_vec(f2, b2);
        let f2 = self.dropout_mask(tape, f2, dropout_rng);
        tape.add(x1, f2)
    }

    /// Full forward pass: per-task scalar heads plus the concatenated
    /// (1, n_tasks) prediction row, ordered (SNR_NL, OSNR, CD, DGD) in
    /// normalized label space.
    pub fn forward<'p>(
        &'p self,
        tape: &mut Tape<'p, T>,
        patches: Array2<T>,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ModelForward> {
        let mut x = self.patch_embed(tape, patches)?;
        x = self.dropout_mask(tape, x, dropout_rng.as_deref_mut());
        for l in 0..self.cfg.n_layers {
            x = self.encoder_block(tape, x, l, dropout_rng.as_deref_mut());
            if !tape.is_finite(x) {
                return Err(Error::NumericalFailure {
                    context: format!("vit encoder layer {l}"),
                    detail: "non-finite activations".into(),
                });
            }
        }
        // normalize the residual stream before the flatten head
        let x = self.layer_norm(tape, x, self.index.final_g, self.index.final_b);
        let flat = tape.flatten_row(x);
        let sw = tape.param(self.index.shared_w);
        let sb = tape.param(self.index.shared_b);
        let shared = tape.matmul(flat, sw);
        let shared = tape.add_row_vec(shared, sb);
        let shared = tape.gelu(shared);
        let mut heads = Vec::with_capacity(self.cfg.n_tasks);
        for t in 0..self.cfg.n_tasks {
            let w = tape.param(self.index.head_w[t]);
            let b = tape.param(self.index.head_b[t]);
            let h = tape.matmul(shared, w);
            heads.push(tape.add_row_vec(h, b));
        }
        let prediction = tape.concat_cols(&heads);
        Ok(ModelForward { heads, prediction })
    }
}

/// Heads and concatenated prediction of one forward pass.
pub struct ModelForward {
    pub heads: Vec<Var>,
    pub prediction: Var,
}

/// Flatten an image into the (n_tokens, patch*patch*channels) patch
/// matrix: patches in row-major patch-grid order, each patch holding its
/// x-plane block row-major, then its y-plane block.
pub fn image_to_patches<T: Real>(img: &TfImage<T>, patch: usize) -> Result<Array2<T>> {
    let size = img.size();
    if !size.is_multiple_of(patch) {
        return Err(Error::invalid_argument("image_to_patches: size not divisible by patch"));
    }
    let per_side = size / patch;
    let dim = patch * patch * 2;
    let mut out = Array2::zeros((per_side * per_side, dim));
    for pi in 0..per_side {
        for pj in 0..per_side {
            let row = pi * per_side + pj;
            let mut col = 0;
            for plane in [&img.x_plane, &img.y_plane] {
                for r in 0..patch {
                    for c in 0..patch {
                        out[(row, col)] = plane[(pi * patch + r, pj * patch + c)];
                        col += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::GradBuffer;
    use ndarray::Array2;

    fn tiny_model(seed: u64) -> MultiTaskViT<f64> {
        MultiTaskViT::new(VitConfig::tiny(), seed).unwrap()
    }

    fn tiny_patches(seed: u64) -> Array2<f64> {
        let cfg = VitConfig::tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((cfg.n_tokens(), cfg.patch_dim()), |_| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn config_validation() {
        let mut c = VitConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.n_tokens(), 100);
        assert_eq!(c.patch_dim(), 200);
        assert_eq!(c.d_k(), 64);
        c.patch = 7;
        assert!(c.validate().is_err());
        let c2 = VitConfig { n_heads: 5, ..VitConfig::default() };
        assert!(c2.validate().is_err());
    }

    #[test]
    fn default_dims_match_architecture() {
        let model = MultiTaskViT::<f64>::new(VitConfig::default(), 0).unwrap();
        let p = &model.params;
        assert_eq!(p.value(p.index_of("patch.w").unwrap()).dim(), (200, 256));
        assert_eq!(p.value(p.index_of("pos").unwrap()).dim(), (100, 256));
        assert_eq!(p.value(p.index_of("enc0.attn.q0").unwrap()).dim(), (256, 64));
        assert_eq!(p.value(p.index_of("enc3.ffn.w1").unwrap()).dim(), (256, 1024));
        assert_eq!(p.value(p.index_of("head.shared.w").unwrap()).dim(), (25600, 256));
    }

    #[test]
    fn zero_image_tokens_equal_positional_embedding() {
        let model = tiny_model(3);
        let cfg = &model.cfg;
        let zeros = Array2::zeros((cfg.n_tokens(), cfg.patch_dim()));
        let mut tape = Tape::new(&model.params);
        let tok = model.patch_embed(&mut tape, zeros).unwrap();
        let pos = model.params.value(model.params.index_of("pos").unwrap());
        for (a, b) in tape.value(tok).iter().zip(pos.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn patch_permutation_permutes_tokens_prepos() {
        let model = tiny_model(4);
        let patches = tiny_patches(1);
        let mut swapped = patches.clone();
        for c in 0..patches.ncols() {
            swapped[(0, c)] = patches[(2, c)];
            swapped[(2, c)] = patches[(0, c)];
        }
        let mut tape = Tape::new(&model.params);
        let a = model.patch_embed_no_pos(&mut tape, patches).unwrap();
        let b = model.patch_embed_no_pos(&mut tape, swapped).unwrap();
        let av = tape.value(a).clone();
        let bv = tape.value(b).clone();
        for c in 0..av.ncols() {
            assert_eq!(av[(0, c)], bv[(2, c)]);
            assert_eq!(av[(2, c)], bv[(0, c)]);
            assert_eq!(av[(1, c)], bv[(1, c)]);
        }
    }

    #[test]
    fn zero_weights_make_block_identity() {
        let mut model = tiny_model(5);
        // zero every attention and ffn weight; residual paths remain
        for name in ["enc0.attn.out", "enc0.ffn.w1", "enc0.ffn.w2", "enc0.ffn.b1", "enc0.ffn.b2"] {
            let idx = model.params.index_of(name).unwrap();
            model.params.value_mut(idx).fill(0.0);
        }
        let patches = tiny_patches(2);
        let mut tape = Tape::new(&model.params);
        let x = model.patch_embed(&mut tape, patches).unwrap();
        let y = model.encoder_block(&mut tape, x, 0, None);
        for (a, b) in tape.value(y).iter().zip(tape.value(x).iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn encoder_is_permutation_equivariant_without_pos() {
        let model = tiny_model(6);
        let patches = tiny_patches(3);
        let mut swapped = patches.clone();
        for c in 0..patches.ncols() {
            swapped[(1, c)] = patches[(3, c)];
            swapped[(3, c)] = patches[(1, c)];
        }
        let mut tape = Tape::new(&model.params);
        let xa = model.patch_embed_no_pos(&mut tape, patches.clone()).unwrap();
        let ya = model.encoder_block(&mut tape, xa, 0, None);
        let xb = model.patch_embed_no_pos(&mut tape, swapped.clone()).unwrap();
        let yb = model.encoder_block(&mut tape, xb, 0, None);
        for c in 0..tape.value(ya).ncols() {
            assert!((tape.value(ya)[(1, c)] - tape.value(yb)[(3, c)]).abs() < 1e-12);
            assert!((tape.value(ya)[(3, c)] - tape.value(yb)[(1, c)]).abs() < 1e-12);
        }
        // with positional embeddings the equivariance must break
        let mut tape2 = Tape::new(&model.params);
        let xa = model.patch_embed(&mut tape2, patches).unwrap();
        let ya = model.encoder_block(&mut tape2, xa, 0, None);
        let xb = model.patch_embed(&mut tape2, swapped).unwrap();
        let yb = model.encoder_block(&mut tape2, xb, 0, None);
        let mut max_diff = 0.0f64;
        for c in 0..tape2.value(ya).ncols() {
            max_diff = max_diff.max((tape2.value(ya)[(1, c)] - tape2.value(yb)[(3, c)]).abs());
        }
        assert!(max_diff > 1e-6, "positional embedding should break equivariance");
    }

    #[test]
    fn forward_deterministic_four_outputs_and_sensitive() {
        let model = tiny_model(7);
        let patches = tiny_patches(4);
        let mut tape = Tape::new(&model.params);
        let out = model.forward(&mut tape, patches.clone(), None).unwrap();
        assert_eq!(out.heads.len(), 4);
        assert_eq!(tape.value(out.prediction).dim(), (1, 4));
        let p1 = tape.value(out.prediction).clone();

        let mut tape2 = Tape::new(&model.params);
        let out2 = model.forward(&mut tape2, patches.clone(), None).unwrap();
        assert_eq!(p1, tape2.value(out2.prediction).clone());

        let mut tape3 = Tape::new(&model.params);
        let doubled = patches.mapv(|v| 2.0 * v);
        let out3 = model.forward(&mut tape3, doubled, None).unwrap();
        assert_ne!(p1, tape3.value(out3.prediction).clone());
    }

    #[test]
    fn unused_head_gets_zero_gradient() {
        let model = tiny_model(8);
        let patches = tiny_patches(5);
        let mut grads = GradBuffer::zeros_like(&model.params);
        let mut tape = Tape::new(&model.params);
        let out = model.forward(&mut tape, patches, None).unwrap();
        let targets = [0.3, 0.4, 0.5, 0.6];
        let mut losses = Vec::new();
        for (t, &h) in out.heads.iter().enumerate() {
            losses.push(tape.mae_const(h, &[targets[t]]));
        }
        // weight only the CD task (prediction order snr_nl, osnr, cd, dgd)
        let total = tape.weighted_sum(&losses, &[0.0, 0.0, 1.0, 0.0]);
        tape.backward(total, &mut grads).unwrap();
        for t in [0usize, 1, 3] {
            let w = grads.get(model.params.index_of(&format!("head.task{t}.w")).unwrap());
            assert!(w.iter().all(|&v| v == 0.0), "head {t} grads must be exactly zero");
        }
        let wcd = grads.get(model.params.index_of("head.task2.w").unwrap());
        assert!(wcd.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn image_patch_layout() {
        let mut x = Array2::zeros((20, 20));
        let y = Array2::zeros((20, 20));
        x[(0, 0)] = 1.0; // patch (0,0), x-plane, position (0,0)
        x[(10, 11)] = 2.0; // patch (1,1) -> token 3, position (0,1)
        let img = TfImage { x_plane: x, y_plane: y };
        let p = image_to_patches(&img, 10).unwrap();
        assert_eq!(p.dim(), (4, 200));
        assert_eq!(p[(0, 0)], 1.0);
        assert_eq!(p[(3, 1)], 2.0);
    }
}
