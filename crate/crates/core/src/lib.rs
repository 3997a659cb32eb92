//! Semantic specialization of multilingual sentence embeddings.
//!
//! A trainable adapter ([`encoder`]) is fine-tuned on top of frozen base
//! embeddings with an L2-constrained softmax plus center loss ([`losses`]),
//! while per-language adversaries ([`discriminator`]) push the embedding space
//! toward language invariance ([`trainer`]). Quality is measured by
//! leave-one-out nearest-neighbor intent classification ([`evaluator`]).

pub mod dataset;
pub mod discriminator;
pub mod encoder;
pub mod error;
pub mod evaluator;
pub mod hyper;
pub mod losses;
pub mod nn;
pub mod persist;
pub mod trainer;

pub use error::{Error, Result};
pub use hyper::{DiscObjective, HyperParams};
