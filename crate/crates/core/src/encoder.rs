//! Trainable adapter over frozen base sentence embeddings.
//!
//! The encoder maps a base embedding `x` to `x + F(x)` where `F` is a stack of
//! tanh layers followed by a linear projection back to the input dimension.
//! With the projection zero-initialized the adapter starts as the identity, so
//! the untrained encoder reproduces the base embedding space exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, DenseCache, DenseGrads, DenseLayer, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Number of tanh hidden layers before the output projection.
    pub hidden_layers: usize,
    /// Hidden width; `0` means "same as the embedding dimension".
    pub hidden_width: usize,
    pub residual: bool,
    /// Zero the output projection so that `encode(x) == x` at initialization.
    pub identity_init: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 1,
            hidden_width: 0,
            residual: true,
            identity_init: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterEncoder {
    dim: usize,
    layers: Vec<DenseLayer>,
    residual: bool,
    optimizer: Adam,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    layers: Vec<DenseCache>,
    output: Matrix,
}

impl EncoderCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub layers: Vec<DenseGrads>,
}

impl EncoderGrads {
    pub fn add_assign(&mut self, other: &EncoderGrads) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape("EncoderGrads::add_assign", self.layers.len(), other.layers.len()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.add_assign(&b.weight)?;
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|g| [g.weight.data(), g.bias.as_slice()])
            .collect()
    }
}

impl AdapterEncoder {
    pub fn new<R: Rng + ?Sized>(
        dim: usize,
        config: &EncoderConfig,
        adam: AdamConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("encoder dimension must be >= 1".into()));
        }
        if !config.residual && config.identity_init {
            return Err(Error::Config(
                "encoder.identity_init requires encoder.residual".into(),
            ));
        }
        let width = if config.hidden_width == 0 {
            dim
        } else {
            config.hidden_width
        };
        let mut layers = Vec::with_capacity(config.hidden_layers + 1);
        let mut in_dim = dim;
        for _ in 0..config.hidden_layers {
            layers.push(DenseLayer::glorot(in_dim, width, Activation::Tanh, rng));
            in_dim = width;
        }
        let last = if config.identity_init {
            DenseLayer::zeros(in_dim, dim, Activation::Identity)
        } else {
            DenseLayer::glorot(in_dim, dim, Activation::Identity, rng)
        };
        layers.push(last);
        Ok(Self::from_layers(dim, layers, config.residual, adam)?)
    }

    pub fn from_layers(
        dim: usize,
        layers: Vec<DenseLayer>,
        residual: bool,
        adam: AdamConfig,
    ) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::Config("encoder needs at least one layer".into()));
        };
        if first.in_dim() != dim {
            return Err(Error::shape("AdapterEncoder input", dim, first.in_dim()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape("AdapterEncoder layers", pair[0].out_dim(), pair[1].in_dim()));
            }
        }
        let out = layers.last().map(|l| l.out_dim()).unwrap_or(dim);
        if residual && out != dim {
            return Err(Error::shape("AdapterEncoder residual output", dim, out));
        }
        let lens: Vec<usize> = layers
            .iter()
            .flat_map(|l| [l.weight().data().len(), l.bias().len()])
            .collect();
        Ok(Self {
            dim,
            layers,
            residual,
            optimizer: Adam::new(&lens, adam),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim()).unwrap_or(self.dim)
    }

    pub fn residual(&self) -> bool {
        self.residual
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    /// Encodes a batch, retaining intermediates for [`AdapterEncoder::backward`].
    pub fn forward(&self, base: &Matrix) -> Result<EncoderCache> {
        if base.cols() != self.dim {
            return Err(Error::shape("encode", self.dim, base.cols()));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = base.clone();
        for layer in &self.layers {
            let cache = layer.forward(&h)?;
            h = cache.output.clone();
            caches.push(cache);
        }
        if self.residual {
            h.add_assign(base)?;
        }
        Ok(EncoderCache {
            layers: caches,
            output: h,
        })
    }

    pub fn encode(&self, base: &Matrix) -> Result<Matrix> {
        if base.cols() != self.dim {
            return Err(Error::shape("encode", self.dim, base.cols()));
        }
        let mut h = base.clone();
        for layer in &self.layers {
            h = layer.infer(&h)?;
        }
        if self.residual {
            h.add_assign(base)?;
        }
        Ok(h)
    }

    /// Returns the gradient w.r.t. the base embeddings and the parameter gradients.
    pub fn backward(&self, cache: &EncoderCache, grad_out: &Matrix) -> Result<(Matrix, EncoderGrads)> {
        if grad_out.shape() != cache.output.shape() {
            return Err(Error::shape(
                "encoder backward",
                format!("{:?}", cache.output.shape()),
                format!("{:?}", grad_out.shape()),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            let (gi, pg) = layer.backward(lc, &g)?;
            grads.push(pg);
            g = gi;
        }
        grads.reverse();
        if self.residual {
            g.add_assign(grad_out)?;
        }
        Ok((g, EncoderGrads { layers: grads }))
    }

    pub fn zero_grads(&self) -> EncoderGrads {
        EncoderGrads {
            layers: self
                .layers
                .iter()
                .map(|l| DenseGrads {
                    weight: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    /// Adam step on every adapter parameter.
    pub fn apply_grads(&mut self, grads: &EncoderGrads) -> Result<()> {
        let params: Vec<&mut [f64]> = self
            .layers
            .iter_mut()
            .flat_map(|l| {
                let [w, b] = l.params_mut();
                [w, b]
            })
            .collect();
        self.optimizer.step(params, grads.tensors())
    }

    /// All parameters flattened in layer order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.params().into_iter().flatten().copied().collect::<Vec<_>>())
            .collect()
    }
}
