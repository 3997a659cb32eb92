//! Dense-network numerics with hand-written reverse-mode gradients.

mod adam;
mod layer;
mod matrix;
mod ops;

pub use adam::{Adam, AdamConfig, AdamState};
pub use layer::{Activation, DenseCache, DenseGrads, DenseLayer};
pub use matrix::{axpy, cosine, dot, norm, Matrix};
pub use ops::{
    clip_parameters, dropout, l2_normalize_rows, l2_normalize_rows_backward, l2_normalize_scale,
    l2_normalize_scale_backward, l2_normalize_scale_jacobian,
};
