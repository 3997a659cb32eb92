use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, DenseCache, DenseLayer, Matrix};

/// Linear classifier `logits = u·Wᵀ + b` over `C` intent classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    layer: DenseLayer,
    optimizer: Adam,
}

impl ClassifierHead {
    pub fn new<R: Rng + ?Sized>(classes: usize, dim: usize, adam: AdamConfig, rng: &mut R) -> Result<Self> {
        if classes == 0 || dim == 0 {
            return Err(Error::Config("classifier head needs C >= 1 and d >= 1".into()));
        }
        Self::from_layer(DenseLayer::glorot(dim, classes, Activation::Identity, rng), adam)
    }

    /// All-zero head: uniform logits, so the first updates are driven by the
    /// labels rather than by a random projection of the hypersphere.
    pub fn zeros(classes: usize, dim: usize, adam: AdamConfig) -> Result<Self> {
        if classes == 0 || dim == 0 {
            return Err(Error::Config("classifier head needs C >= 1 and d >= 1".into()));
        }
        Self::from_layer(DenseLayer::zeros(dim, classes, Activation::Identity), adam)
    }

    pub fn from_parts(weight: Matrix, bias: Vec<f64>, adam: AdamConfig) -> Result<Self> {
        Self::from_layer(DenseLayer::new(weight, bias, Activation::Identity)?, adam)
    }

    fn from_layer(layer: DenseLayer, adam: AdamConfig) -> Result<Self> {
        if layer.out_dim() == 0 {
            return Err(Error::Config("classifier head needs C >= 1".into()));
        }
        let optimizer = Adam::new(&[layer.weight().data().len(), layer.bias().len()], adam);
        Ok(Self { layer, optimizer })
    }

    pub fn classes(&self) -> usize {
        self.layer.out_dim()
    }

    pub fn dim(&self) -> usize {
        self.layer.in_dim()
    }

    pub fn weight(&self) -> &Matrix {
        self.layer.weight()
    }

    pub fn bias(&self) -> &[f64] {
        self.layer.bias()
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    pub(crate) fn forward(&self, input: &Matrix) -> Result<DenseCache> {
        self.layer.forward(input)
    }

    /// Returns `(grad_input, [grad_W, grad_b])`.
    pub(crate) fn backward(&self, cache: &DenseCache, grad_logits: &Matrix) -> Result<(Matrix, Vec<Matrix>)> {
        let (gi, g) = self.layer.backward(cache, grad_logits)?;
        let gb = Matrix::row_vector(&g.bias)?;
        Ok((gi, vec![g.weight, gb]))
    }

    pub fn logits(&self, input: &Matrix) -> Result<Matrix> {
        self.layer.infer(input)
    }

    /// Adam step from `[grad_W, grad_b]` as produced by the head-based losses.
    pub fn apply_grads(&mut self, grads: &[Matrix]) -> Result<()> {
        if grads.len() != 2 {
            return Err(Error::shape("ClassifierHead::apply_grads", 2, grads.len()));
        }
        let [w, b] = self.layer.params_mut();
        self.optimizer.step(vec![w, b], vec![grads[0].data(), grads[1].data()])
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layer.params().into_iter().flatten().copied().collect()
    }
}
