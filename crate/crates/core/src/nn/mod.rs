//! Neural substrate: reverse-mode tensor tape, the multi-task vision
//! transformer, the dense baseline, Adam, and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod dnn;
pub mod loss;
pub mod tensor;
pub mod vit;

pub use adam::{AdamConfig, AdamState};
pub use dnn::{image_to_row, DnnConfig, MultiTaskDnn};
pub use loss::{multitask_loss, TaskWeights, TASK_NAMES};
pub use tensor::{GradBuffer, ParamSet, Tape, Var};
pub use vit::{image_to_patches, MultiTaskViT, ModelForward, VitConfig};
