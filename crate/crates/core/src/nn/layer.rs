use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation and the activated value.
    #[inline]
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - post * post,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected layer `y = act(x·Wᵀ + b)` with `W` stored as `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    weight: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

/// Intermediates retained by [`DenseLayer::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Matrix,
    pub pre: Matrix,
    pub output: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weight.rows() != bias.len() {
            return Err(Error::shape("DenseLayer::new", weight.rows(), bias.len()));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric("non-finite bias".into()));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (in + out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut layer = Self::zeros(in_dim, out_dim, activation);
        for w in layer.weight.data_mut() {
            *w = rng.gen_range(-limit..=limit);
        }
        layer
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weight_mut(&mut self) -> &mut Matrix {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Parameter tensors in a fixed order: weight, bias.
    pub fn params(&self) -> [&[f64]; 2] {
        [self.weight.data(), &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [self.weight.data_mut(), &mut self.bias]
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.in_dim() {
            return Err(Error::shape("dense_forward", self.in_dim(), input.cols()));
        }
        Ok(())
    }

    pub fn forward(&self, input: &Matrix) -> Result<DenseCache> {
        self.check_input(input)?;
        let mut pre = input.matmul_t(&self.weight)?;
        for r in 0..pre.rows() {
            for (v, b) in pre.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        let mut output = pre.clone();
        if self.activation != Activation::Identity {
            for v in output.data_mut() {
                *v = self.activation.apply(*v);
            }
        }
        Ok(DenseCache {
            input: input.clone(),
            pre,
            output,
        })
    }

    /// Forward pass without retaining intermediates.
    pub fn infer(&self, input: &Matrix) -> Result<Matrix> {
        self.forward(input).map(|c| c.output)
    }

    /// Returns the gradient w.r.t. the layer input and the parameter gradients.
    pub fn backward(&self, cache: &DenseCache, grad_out: &Matrix) -> Result<(Matrix, DenseGrads)> {
        if grad_out.shape() != cache.output.shape() {
            return Err(Error::shape(
                "dense_backward",
                format!("{:?}", cache.output.shape()),
                format!("{:?}", grad_out.shape()),
            ));
        }
        let mut g_pre = grad_out.clone();
        if self.activation != Activation::Identity {
            for ((g, &pre), &post) in g_pre
                .data_mut()
                .iter_mut()
                .zip(cache.pre.data())
                .zip(cache.output.data())
            {
                *g *= self.activation.derivative(pre, post);
            }
        }
        let weight = g_pre.t_matmul(&cache.input)?;
        let mut bias = vec![0.0; self.out_dim()];
        for row in g_pre.row_iter() {
            for (b, g) in bias.iter_mut().zip(row) {
                *b += g;
            }
        }
        let grad_input = g_pre.matmul(&self.weight)?;
        Ok((grad_input, DenseGrads { weight, bias }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_through() {
        let layer = DenseLayer::new(Matrix::identity(2), vec![0.0, 0.0], Activation::Identity).unwrap();
        let x = Matrix::new(1, 2, vec![1.0, 2.0]).unwrap();
        assert_eq!(layer.infer(&x).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn relu_clamps_negative() {
        let layer = DenseLayer::new(Matrix::identity(2), vec![1.0, 1.0], Activation::Relu).unwrap();
        let x = Matrix::new(1, 2, vec![-3.0, 2.0]).unwrap();
        assert_eq!(layer.infer(&x).unwrap().data(), &[0.0, 3.0]);
    }

    #[test]
    fn matches_naive_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layer = DenseLayer::glorot(4, 5, Activation::Tanh, &mut rng);
        let layer = {
            let mut l = layer;
            for b in l.bias_mut() {
                *b = rng.gen_range(-1.0..1.0);
            }
            l
        };
        let x = Matrix::new(3, 4, (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let y = layer.infer(&x).unwrap();
        for b in 0..3 {
            for o in 0..5 {
                let mut acc = layer.bias()[o];
                for i in 0..4 {
                    acc += x.get(b, i) * layer.weight().get(o, i);
                }
                assert!((y.get(b, o) - acc.tanh()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let layer = DenseLayer::zeros(3, 2, Activation::Identity);
        let x = Matrix::zeros(1, 4);
        assert!(matches!(layer.forward(&x), Err(Error::Shape { .. })));
    }

    #[test]
    fn glorot_respects_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = DenseLayer::glorot(10, 6, Activation::Relu, &mut rng);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(layer.weight().data().iter().all(|w| w.abs() <= limit));
        assert!(layer.bias().iter().all(|&b| b == 0.0));
    }
}
