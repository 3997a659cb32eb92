//! Per-language adversary: predicts whether an embedding belongs to its
//! training language. Parameters are clipped after every update.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyper::{DiscObjective, HyperParams};
use crate::losses::LossResult;
use crate::nn::{
    clip_parameters, dropout, Activation, Adam, AdamConfig, DenseCache, DenseGrads, DenseLayer,
    Matrix,
};

/// Probabilities are clamped into `[EPS, 1 - EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageDiscriminator {
    language: String,
    layers: Vec<DenseLayer>,
    dropout_p: f64,
    clip_c: f64,
    objective: DiscObjective,
    optimizer: Adam,
}

#[derive(Debug, Clone)]
pub struct DiscCache {
    layers: Vec<DenseCache>,
    masks: Vec<Option<Matrix>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LanguageDiscriminator {
    /// Two ReLU hidden layers of width `hp.disc_hidden`, one logistic output.
    /// Weights start Glorot-uniform and are clipped into `[-c, c]` immediately.
    pub fn new<R: Rng + ?Sized>(language: &str, dim: usize, hp: &HyperParams, rng: &mut R) -> Result<Self> {
        let h = hp.disc_hidden;
        let layers = vec![
            DenseLayer::glorot(dim, h, Activation::Relu, rng),
            DenseLayer::glorot(h, h, Activation::Relu, rng),
            DenseLayer::glorot(h, 1, Activation::Identity, rng),
        ];
        let mut d = Self::from_layers(
            language,
            layers,
            hp.dropout_p,
            hp.clip_c,
            hp.disc_objective,
            AdamConfig::with_lr(hp.lr_disc),
        )?;
        d.clip();
        Ok(d)
    }

    pub fn from_layers(
        language: &str,
        layers: Vec<DenseLayer>,
        dropout_p: f64,
        clip_c: f64,
        objective: DiscObjective,
        adam: AdamConfig,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("discriminator needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape("discriminator layers", pair[0].out_dim(), pair[1].in_dim()));
            }
        }
        if layers.last().map(|l| l.out_dim()) != Some(1) {
            return Err(Error::Config("discriminator output must be a single unit".into()));
        }
        let lens: Vec<usize> = layers
            .iter()
            .flat_map(|l| [l.weight().data().len(), l.bias().len()])
            .collect();
        Ok(Self {
            language: language.to_string(),
            layers,
            dropout_p,
            clip_c,
            objective,
            optimizer: Adam::new(&lens, adam),
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn objective(&self) -> DiscObjective {
        self.objective
    }

    pub fn clip_c(&self) -> f64 {
        self.clip_c
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.params().into_iter().flatten().copied().collect::<Vec<_>>())
            .collect()
    }

    fn clip(&mut self) {
        let c = self.clip_c;
        for layer in &mut self.layers {
            for p in layer.params_mut() {
                clip_parameters(p, c);
            }
        }
    }

    /// Forward pass. Dropout follows each hidden layer only when `rng` is given
    /// (train mode); without it the pass is deterministic.
    pub fn forward(&self, embeddings: &Matrix, mut rng: Option<&mut dyn RngCore>) -> Result<DiscCache> {
        if embeddings.cols() != self.input_dim() {
            return Err(Error::shape("disc_forward", self.input_dim(), embeddings.cols()));
        }
        let last = self.layers.len() - 1;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut h = embeddings.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let cache = layer.forward(&h)?;
            h = cache.output.clone();
            caches.push(cache);
            match rng.as_deref_mut() {
                Some(r) if i < last && self.dropout_p > 0.0 => {
                    let (dropped, mask) = dropout(&h, self.dropout_p, r);
                    h = dropped;
                    masks.push(Some(mask));
                }
                _ => masks.push(None),
            }
        }
        let logits = h.into_data();
        let probs = logits.iter().map(|&z| sigmoid(z)).collect();
        Ok(DiscCache {
            layers: caches,
            masks,
            logits,
            probs,
        })
    }

    /// Eval-mode probabilities that each row is in this discriminator's language.
    pub fn probabilities(&self, embeddings: &Matrix) -> Result<Vec<f64>> {
        Ok(self.forward(embeddings, None)?.probs)
    }

    /// Backpropagates `∂L/∂logit` to the input rows and every parameter.
    pub fn backward(&self, cache: &DiscCache, grad_logits: &[f64]) -> Result<(Matrix, Vec<DenseGrads>)> {
        let mut g = Matrix::new(grad_logits.len(), 1, grad_logits.to_vec())?;
        let mut grads = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if let Some(mask) = &cache.masks[i] {
                for (gv, m) in g.data_mut().iter_mut().zip(mask.data()) {
                    *gv *= m;
                }
            }
            let (gi, pg) = layer.backward(&cache.layers[i], &g)?;
            grads.push(pg);
            g = gi;
        }
        grads.reverse();
        Ok((g, grads))
    }

    /// Loss of this discriminator on a language-`t` batch (target 1) and an
    /// adversarial batch (target 0), with gradients w.r.t. both embedding batches.
    ///
    /// Parameters are not touched; `rng` selects train-mode dropout.
    pub fn objective_and_input_grads(
        &self,
        u_t: &Matrix,
        v_adv: &Matrix,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<(f64, Matrix, Matrix, Vec<DenseGrads>)> {
        if u_t.rows() == 0 || v_adv.rows() == 0 {
            return Err(Error::Data("discriminator batches must be non-empty".into()));
        }
        let stacked = u_t.vstack(v_adv)?;
        let cache = self.forward(&stacked, rng)?;
        let n = u_t.rows();
        let (value, grad_logits) = match self.objective {
            DiscObjective::CrossEntropy => {
                let r = disc_loss(&cache.probs[..n], &cache.probs[n..])?;
                let gp: Vec<f64> = r.input_grads[0]
                    .data()
                    .iter()
                    .chain(r.input_grads[1].data())
                    .copied()
                    .collect();
                let gl = gp
                    .iter()
                    .zip(&cache.probs)
                    .map(|(g, &p)| g * p * (1.0 - p))
                    .collect::<Vec<_>>();
                (r.value, gl)
            }
            DiscObjective::Wasserstein => {
                let r = wasserstein_critic_loss(&cache.logits[..n], &cache.logits[n..])?;
                let gl = r.input_grads[0]
                    .data()
                    .iter()
                    .chain(r.input_grads[1].data())
                    .copied()
                    .collect();
                (r.value, gl)
            }
        };
        let (gx, pgrads) = self.backward(&cache, &grad_logits)?;
        let (gu, gv) = gx.split_rows(n);
        Ok((value, gu, gv, pgrads))
    }

    /// One Adam step against the discriminator loss followed by weight clipping.
    /// Returns the loss evaluated before the update.
    pub fn update_step(&mut self, u_t: &Matrix, v_adv: &Matrix, rng: &mut dyn RngCore) -> Result<f64> {
        let (value, _, _, grads) = self.objective_and_input_grads(u_t, v_adv, Some(rng))?;
        let params: Vec<&mut [f64]> = self
            .layers
            .iter_mut()
            .flat_map(|l| {
                let [w, b] = l.params_mut();
                [w, b]
            })
            .collect();
        let gs: Vec<&[f64]> = grads
            .iter()
            .flat_map(|g| [g.weight.data(), g.bias.as_slice()])
            .collect();
        self.optimizer.step(params, gs)?;
        self.clip();
        Ok(value)
    }
}

/// `mean(−ln p_t) + mean(−ln(1 − p_adv))`, probabilities clamped into
/// `[1e-12, 1 − 1e-12]`. Gradients are w.r.t. both probability vectors.
pub fn disc_loss(p_t: &[f64], p_adv: &[f64]) -> Result<LossResult> {
    if p_t.is_empty() || p_adv.is_empty() {
        return Err(Error::Data("disc_loss needs non-empty batches".into()));
    }
    if let Some(p) = p_t.iter().chain(p_adv).find(|p| !p.is_finite()) {
        return Err(Error::Numeric(format!("probability {p}")));
    }
    let clamp = |p: f64| p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    let nt = p_t.len() as f64;
    let na = p_adv.len() as f64;
    let mut value = 0.0;
    let mut gt = Vec::with_capacity(p_t.len());
    for &p in p_t {
        let p = clamp(p);
        value -= p.ln() / nt;
        gt.push(-1.0 / (nt * p));
    }
    let mut ga = Vec::with_capacity(p_adv.len());
    for &p in p_adv {
        let p = clamp(p);
        value -= (1.0 - p).ln() / na;
        ga.push(1.0 / (na * (1.0 - p)));
    }
    Ok(LossResult::inputs_only(
        value,
        vec![Matrix::row_vector(&gt)?, Matrix::row_vector(&ga)?],
    ))
}

/// Critic objective `mean f(v_adv) − mean f(u_t)` on raw scores.
pub fn wasserstein_critic_loss(f_t: &[f64], f_adv: &[f64]) -> Result<LossResult> {
    if f_t.is_empty() || f_adv.is_empty() {
        return Err(Error::Data("critic loss needs non-empty batches".into()));
    }
    let nt = f_t.len() as f64;
    let na = f_adv.len() as f64;
    let value = f_adv.iter().sum::<f64>() / na - f_t.iter().sum::<f64>() / nt;
    Ok(LossResult::inputs_only(
        value,
        vec![
            Matrix::row_vector(&vec![-1.0 / nt; f_t.len()])?,
            Matrix::row_vector(&vec![1.0 / na; f_adv.len()])?,
        ],
    ))
}
