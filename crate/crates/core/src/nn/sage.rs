use super::layer::{relu, relu_backward};
use super::{check_shape, LayerParams, NnError, Result};
use crate::graph::{sample_neighbors, GenreGraph};
use crate::rng::derive_seed;
use crate::DenseMatrix;

/// Sampled neighborhoods for one GraphSAGE pass. Kept fixed between the
/// forward and backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SageSample {
    neighbors: Vec<Vec<usize>>,
}

impl SageSample {
    /// Up to `k` neighbors per node; node `v` draws from stream `(seed, v)`.
    pub fn draw(graph: &GenreGraph, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(NnError::ZeroSampleSize);
        }
        let neighbors = (0..graph.len())
            .map(|v| sample_neighbors(graph, v, k, derive_seed(seed, v as u64)))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { neighbors })
    }

    pub fn from_lists(neighbors: Vec<Vec<usize>>) -> Self {
        Self { neighbors }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    /// Mean of each node's sampled neighbor rows; zero for empty neighborhoods.
    pub fn aggregate(&self, features: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.len(), features.cols());
        for (v, nbrs) in self.neighbors.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let scale = 1.0 / nbrs.len() as f64;
            let row = out.row_mut(v);
            for &u in nbrs {
                for (o, &x) in row.iter_mut().zip(features.row(u)) {
                    *o += x;
                }
            }
            row.iter_mut().for_each(|o| *o *= scale);
        }
        out
    }

    /// Adjoint of [`aggregate`](Self::aggregate).
    pub fn aggregate_transpose(&self, d_agg: &DenseMatrix, rows: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(rows, d_agg.cols());
        for (v, nbrs) in self.neighbors.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let scale = 1.0 / nbrs.len() as f64;
            for &u in nbrs {
                for (o, &g) in out.row_mut(u).iter_mut().zip(d_agg.row(v)) {
                    *o += scale * g;
                }
            }
        }
        out
    }

    /// `[X ∥ mean(X_neighbors)]`, the input of the SAGE affine map.
    pub fn concat_input(&self, features: &DenseMatrix) -> DenseMatrix {
        features.hconcat(&self.aggregate(features))
    }
}

pub(crate) fn sage_forward_sampled(
    sample: &SageSample,
    features: &DenseMatrix,
    layer: &LayerParams,
) -> Result<DenseMatrix> {
    check_shape("sage sample", (features.rows(), 1), (sample.len(), 1))?;
    check_shape("sage layer", (2 * features.cols(), layer.out_dim()), layer.weight.shape())?;
    Ok(relu(&layer.affine(&sample.concat_input(features))))
}

/// `ReLU([x_v ∥ mean_{u ∈ S(v)} x_u] · W + b)` with `S(v)` a seeded sample
/// of at most `sample_k` neighbors.
pub fn sage_forward(
    graph: &GenreGraph,
    features: &DenseMatrix,
    layer: &LayerParams,
    sample_k: usize,
    seed: u64,
) -> Result<DenseMatrix> {
    check_shape("sage features", (graph.len(), features.cols()), features.shape())?;
    let sample = SageSample::draw(graph, sample_k, seed)?;
    sage_forward_sampled(&sample, features, layer)
}

/// Gradients of a SAGE layer for a fixed sample. Returns parameter gradients
/// and `∂L/∂X` through both the self and the aggregated half of the input.
pub fn sage_backward(
    sample: &SageSample,
    features: &DenseMatrix,
    layer: &LayerParams,
    d_out: &DenseMatrix,
) -> Result<(LayerParams, DenseMatrix)> {
    check_shape("sage sample", (features.rows(), 1), (sample.len(), 1))?;
    let input = sample.concat_input(features);
    let pre = layer.forward(&input)?;
    check_shape("sage upstream gradient", pre.shape(), d_out.shape())?;
    let dz = relu_backward(&pre, d_out);
    let (grads, d_input) = layer.backward(&input, &dz);
    let (d_self, d_agg) = d_input.hsplit(features.cols());
    let d_nbr = sample.aggregate_transpose(&d_agg, features.rows());
    let d_features = DenseMatrix::from_fn(features.rows(), features.cols(), |r, c| {
        d_self.get(r, c) + d_nbr.get(r, c)
    });
    Ok((grads, d_features))
}
