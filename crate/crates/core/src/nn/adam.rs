//! Adam with bias correction.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::nn::tensor::{GradBuffer, ParamSet};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

pub struct AdamState<T: Real> {
    pub cfg: AdamConfig,
    step: u64,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(cfg: AdamConfig, params: &ParamSet<T>) -> Self {
        let m = (0..params.len()).map(|i| Array2::zeros(params.value(i).dim())).collect();
        let v = (0..params.len()).map(|i| Array2::zeros(params.value(i).dim())).collect();
        AdamState { cfg, step: 0, m, v }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update over every parameter.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &GradBuffer<T>) {
        self.step += 1;
        let t = self.step as i32;
        let b1 = T::from_f64c(self.cfg.beta1);
        let b2 = T::from_f64c(self.cfg.beta2);
        let lr = T::from_f64c(self.cfg.lr);
        let eps = T::from_f64c(self.cfg.eps);
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);
        for i in 0..params.len() {
            let g = grads.get(i);
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = params.value_mut(i);
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|pv, mv, vv, &gv| {
                *mv = b1 * *mv + (T::one() - b1) * gv;
                *vv = b2 * *vv + (T::one() - b2) * gv * gv;
                let mhat = *mv / bc1;
                let vhat = *vv / bc2;
                *pv -= lr * mhat / (vhat.sqrt() + eps);
            });
        }
    }
}
