//! Multi-task loss weighting. Predictions are ordered
//! (SNR_NL, OSNR, CD, DGD) in normalized label space.

use serde::{Deserialize, Serialize};

use crate::nn::tensor::{Tape, Var};
use crate::nn::vit::ModelForward;
use crate::num::Real;
use crate::{Error, Result};

pub const TASK_NAMES: [&str; 4] = ["snr_nl", "osnr", "cd", "dgd"];

/// Per-task loss weights (all >= 0, not all zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskWeights {
    pub cd: f64,
    pub dgd: f64,
    pub osnr: f64,
    pub snr_nl: f64,
}

impl Default for TaskWeights {
    fn default() -> Self {
        TaskWeights { cd: 1.0, dgd: 1.0, osnr: 1.0, snr_nl: 1.0 }
    }
}

impl TaskWeights {
    pub fn validate(&self) -> Result<()> {
        let w = self.in_prediction_order();
        if w.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid_config("task weights must be >= 0"));
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid_config("task weights must not all be zero"));
        }
        Ok(())
    }

    /// Weights ordered like the prediction vector (SNR_NL, OSNR, CD, DGD).
    pub fn in_prediction_order(&self) -> [f64; 4] {
        [self.snr_nl, self.osnr, self.cd, self.dgd]
    }
}

/// Per-task MAE losses against normalized targets, plus the weighted
/// total: `lambda_cd L_cd + lambda_dgd L_dgd + lambda_osnr L_osnr +
/// lambda_snr L_snr`.
pub fn multitask_loss<T: Real>(
    tape: &mut Tape<'_, T>,
    forward: &ModelForward,
    targets: &[T; 4],
    weights: &TaskWeights,
) -> Result<(Vec<Var>, Var)> {
    if forward.heads.len() != 4 {
        return Err(Error::invalid_argument("multitask_loss: expected 4 heads"));
    }
    weights.validate()?;
    let mut per_task = Vec::with_capacity(4);
    for (t, &h) in forward.heads.iter().enumerate() {
        per_task.push(tape.mae_const(h, &[targets[t]]));
    }
    let w: Vec<T> = weights.in_prediction_order().iter().map(|&v| T::from_f64c(v)).collect();
    let total = tape.weighted_sum(&per_task, &w);
    Ok((per_task, total))
}
