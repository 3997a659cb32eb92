//! Semantic-classifier objectives and the metric-learning baselines.
//!
//! Every loss returns a [`LossResult`]: the scalar value plus analytic gradients
//! w.r.t. its inputs and trainable parameters.

mod center;
mod head;
mod metric;
mod semantic;
mod softmax;

pub use center::{center_bank_update, center_loss_eval, CenterBank};
pub use head::ClassifierHead;
pub use metric::{
    contrastive_batch_loss, contrastive_loss, npair_batch_loss, npair_cosine_loss,
};
pub use semantic::{combine_semantic, semantic_loss, SemanticLoss};
pub use softmax::{l2c_softmax_loss, softmax_ce_loss, softmax_head_loss};

use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// Gradients w.r.t. each input tensor, in the order the loss takes them.
    pub input_grads: Vec<Matrix>,
    /// Gradients w.r.t. trainable parameters (for head-based losses: `W`, then `b` as `1 × C`).
    pub param_grads: Vec<Matrix>,
}

impl LossResult {
    pub(crate) fn inputs_only(value: f64, input_grads: Vec<Matrix>) -> Self {
        Self {
            value,
            input_grads,
            param_grads: Vec::new(),
        }
    }
}

pub(crate) fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::shape("labels", rows, labels.len()));
    }
    if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= classes) {
        return Err(Error::Domain(format!(
            "label {y} at row {i} outside [0, {classes})"
        )));
    }
    Ok(())
}
