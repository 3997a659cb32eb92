use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Objective the language discriminator is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DiscObjective {
    /// Binary cross-entropy on sigmoid outputs.
    #[default]
    CrossEntropy,
    /// Critic score difference `mean f(v) - mean f(u)` on raw logits.
    Wasserstein,
}

/// Every scalar knob of a fine-tuning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Radius of the hypersphere the classifier sees.
    pub alpha: f64,
    /// Center-loss weight.
    pub lambda: f64,
    /// Adversarial weight in the encoder objective.
    pub gamma: f64,
    /// Discriminator updates per outer step.
    pub k: usize,
    /// Discriminator weight-clipping bound.
    pub clip_c: f64,
    /// Contrastive-loss margin.
    pub margin_m: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_main: f64,
    pub lr_disc: f64,
    pub center_lr: f64,
    pub npair_n: usize,
    pub npair_scale: f64,
    pub dropout_p: f64,
    /// Width of the two discriminator hidden layers.
    pub disc_hidden: usize,
    pub disc_objective: DiscObjective,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 50.0,
            lambda: 1e-4,
            gamma: 1e-4,
            k: 5,
            clip_c: 0.01,
            margin_m: 2.0,
            batch_size: 16,
            epochs: 3,
            lr_main: 1e-3,
            lr_disc: 5e-4,
            center_lr: 0.5,
            npair_n: 16,
            npair_scale: 1.0,
            dropout_p: 0.2,
            disc_hidden: 900,
            disc_objective: DiscObjective::CrossEntropy,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("hp.{key}: {why}")));
        let finite = [
            ("alpha", self.alpha),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("clip_c", self.clip_c),
            ("margin_m", self.margin_m),
            ("lr_main", self.lr_main),
            ("lr_disc", self.lr_disc),
            ("center_lr", self.center_lr),
            ("npair_scale", self.npair_scale),
            ("dropout_p", self.dropout_p),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return bad(key, "must be finite");
            }
        }
        if self.alpha <= 0.0 {
            return bad("alpha", "must be > 0");
        }
        if self.lambda < 0.0 {
            return bad("lambda", "must be >= 0");
        }
        if self.gamma < 0.0 {
            return bad("gamma", "must be >= 0");
        }
        if self.k < 1 {
            return bad("k", "must be >= 1");
        }
        if self.clip_c <= 0.0 {
            return bad("clip_c", "must be > 0");
        }
        if self.margin_m < 0.0 {
            return bad("margin_m", "must be >= 0");
        }
        if self.batch_size < 2 {
            return bad("batch_size", "must be >= 2");
        }
        if self.lr_main <= 0.0 || self.lr_disc <= 0.0 {
            return bad("lr_main/lr_disc", "learning rates must be > 0");
        }
        if !(self.center_lr > 0.0 && self.center_lr <= 1.0) {
            return bad("center_lr", "must be in (0, 1]");
        }
        if self.npair_n < 1 {
            return bad("npair_n", "must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout_p", "must be in [0, 1)");
        }
        if self.disc_hidden < 1 {
            return bad("disc_hidden", "must be >= 1");
        }
        Ok(())
    }
}
