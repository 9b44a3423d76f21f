use rand::Rng;

use super::layer::{relu, relu_backward};
use super::{check_shape, LayerParams, Result};
use crate::{DenseMatrix, Genre};

/// Hidden widths of the genre classifier.
pub const HIDDEN_DIMS: [usize; 2] = [128, 32];

/// Three fully connected layers; ReLU after the first two, raw logits out.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: [LayerParams; 3],
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct MlpCache {
    input: DenseMatrix,
    pre1: DenseMatrix,
    hidden1: DenseMatrix,
    pre2: DenseMatrix,
    hidden2: DenseMatrix,
}

impl Mlp {
    /// Hidden layers uniform-initialized, output layer zero so the first
    /// softmax is uniform.
    pub fn new(in_dim: usize, rng: &mut impl Rng) -> Self {
        let [h1, h2] = HIDDEN_DIMS;
        Self {
            layers: [
                LayerParams::uniform(in_dim, h1, rng),
                LayerParams::uniform(h1, h2, rng),
                LayerParams::zeros(h2, Genre::COUNT),
            ],
        }
    }

    pub fn from_layers(layers: [LayerParams; 3]) -> Result<Self> {
        check_shape("mlp layer 2", (layers[0].out_dim(), 0), (layers[1].in_dim(), 0))?;
        check_shape("mlp layer 3", (layers[1].out_dim(), 0), (layers[2].in_dim(), 0))?;
        Ok(Self { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(LayerParams::parameter_count).sum()
    }

    pub fn forward(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &DenseMatrix) -> Result<(DenseMatrix, MlpCache)> {
        check_shape("mlp input", (x.rows(), self.in_dim()), x.shape())?;
        let pre1 = self.layers[0].affine(x);
        let hidden1 = relu(&pre1);
        let pre2 = self.layers[1].affine(&hidden1);
        let hidden2 = relu(&pre2);
        let logits = self.layers[2].affine(&hidden2);
        let cache = MlpCache {
            input: x.clone(),
            pre1,
            hidden1,
            pre2,
            hidden2,
        };
        Ok((logits, cache))
    }

    /// Parameter gradients for all three layers and `∂L/∂input`.
    pub fn backward(&self, cache: &MlpCache, d_logits: &DenseMatrix) -> ([LayerParams; 3], DenseMatrix) {
        let (g3, d_h2) = self.layers[2].backward(&cache.hidden2, d_logits);
        let d_z2 = relu_backward(&cache.pre2, &d_h2);
        let (g2, d_h1) = self.layers[1].backward(&cache.hidden1, &d_z2);
        let d_z1 = relu_backward(&cache.pre1, &d_h1);
        let (g1, d_x) = self.layers[0].backward(&cache.input, &d_z1);
        ([g1, g2, g3], d_x)
    }

    /// ReLU activation pattern of both hidden layers, for kink detection.
    pub fn activation_pattern(cache: &MlpCache) -> Vec<bool> {
        cache
            .pre1
            .data()
            .iter()
            .chain(cache.pre2.data())
            .map(|&z| z > 0.0)
            .collect()
    }
}

pub fn mlp_forward(input: &DenseMatrix, mlp: &Mlp) -> Result<DenseMatrix> {
    mlp.forward(input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    #[test]
    fn plain_classifier_has_8360_parameters() {
        let mlp = Mlp::new(30, &mut rng_for(0, 0));
        assert_eq!(mlp.parameter_count(), 8360);
        assert_eq!(Mlp::new(60, &mut rng_for(0, 0)).parameter_count(), 12_200);
    }

    #[test]
    fn zero_input_and_biases_give_zero_logits() {
        let mut mlp = Mlp::new(30, &mut rng_for(1, 0));
        mlp.layers[2] = LayerParams::uniform(32, 8, &mut rng_for(2, 0));
        for l in &mut mlp.layers {
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let logits = mlp_forward(&DenseMatrix::zeros(3, 30), &mlp).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_naive_loops() {
        let mut mlp = Mlp::new(30, &mut rng_for(3, 0));
        mlp.layers[2] = LayerParams::uniform(32, 8, &mut rng_for(4, 0));
        let x = DenseMatrix::from_fn(5, 30, |r, c| ((r * 30 + c) as f64 * 0.37).sin() * 4.0);
        let got = mlp.forward(&x).unwrap();
        let dense = |input: &[f64], l: &LayerParams, act: bool| -> Vec<f64> {
            (0..l.out_dim())
                .map(|o| {
                    let z = l.bias[o] + (0..l.in_dim()).map(|i| input[i] * l.weight.get(i, o)).sum::<f64>();
                    if act { z.max(0.0) } else { z }
                })
                .collect()
        };
        for r in 0..5 {
            let h1 = dense(x.row(r), &mlp.layers[0], true);
            let h2 = dense(&h1, &mlp.layers[1], true);
            let out = dense(&h2, &mlp.layers[2], false);
            for (a, b) in got.row(r).iter().zip(&out) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_wrong_input_width() {
        let mlp = Mlp::new(30, &mut rng_for(0, 0));
        assert!(mlp.forward(&DenseMatrix::zeros(2, 60)).is_err());
    }
}
