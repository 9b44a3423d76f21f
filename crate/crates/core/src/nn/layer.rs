use rand::Rng;

use super::{check_shape, Result};
use crate::matrix::ShapeError;
use crate::DenseMatrix;

/// Affine layer parameters: `weight` is `in_dim × out_dim`, so a row batch
/// maps as `x · W + b`. Gradients reuse the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn new(weight: DenseMatrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(ShapeError {
                op: "LayerParams::new",
                left: weight.shape(),
                right: (1, bias.len()),
            }
            .into());
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: DenseMatrix::zeros(in_dim, out_dim),
            bias: vec![0.0; out_dim],
        }
    }

    /// Weights and biases drawn from `U(-1/√in_dim, 1/√in_dim)`.
    pub fn uniform(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        let weight = DenseMatrix::from_fn(in_dim, out_dim, |_, _| rng.random_range(-bound..bound));
        let bias = (0..out_dim).map(|_| rng.random_range(-bound..bound)).collect();
        Self { weight, bias }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.in_dim(), self.out_dim())
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn parameter_count(&self) -> usize {
        self.in_dim() * self.out_dim() + self.out_dim()
    }

    pub fn same_shape(&self, other: &LayerParams) -> bool {
        self.weight.shape() == other.weight.shape() && self.bias.len() == other.bias.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.bias.iter().all(|b| b.is_finite())
    }

    /// Weights (row-major) followed by biases.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weight.data().iter().chain(&self.bias).copied()
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.data_mut().iter_mut().chain(self.bias.iter_mut())
    }

    /// `x · W + b`
    pub fn forward(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_shape("affine input", (x.rows(), self.in_dim()), x.shape())?;
        Ok(self.affine(x))
    }

    pub(crate) fn affine(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut z = x.matmul(&self.weight);
        z.add_row_vector(&self.bias);
        z
    }

    /// Given the layer input and `∂L/∂z`, returns parameter gradients and `∂L/∂x`.
    pub(crate) fn backward(&self, input: &DenseMatrix, dz: &DenseMatrix) -> (LayerParams, DenseMatrix) {
        let grads = self.param_grads(input, dz);
        (grads, dz.matmul_t(&self.weight))
    }

    pub(crate) fn param_grads(&self, input: &DenseMatrix, dz: &DenseMatrix) -> LayerParams {
        LayerParams {
            weight: input.t_matmul(dz),
            bias: dz.col_sums(),
        }
    }
}

pub fn relu(z: &DenseMatrix) -> DenseMatrix {
    z.map(|v| v.max(0.0))
}

/// Passes `dh` through where the pre-activation was positive.
pub fn relu_backward(pre_activation: &DenseMatrix, dh: &DenseMatrix) -> DenseMatrix {
    assert_eq!(pre_activation.shape(), dh.shape());
    let data = pre_activation
        .data()
        .iter()
        .zip(dh.data())
        .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
        .collect();
    DenseMatrix::new(dh.rows(), dh.cols(), data).expect("same shape")
}
