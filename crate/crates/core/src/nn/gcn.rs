use super::layer::{relu, relu_backward};
use super::{check_shape, LayerParams, Result};
use crate::graph::NormalizedAdjacency;
use crate::DenseMatrix;

/// `Â · X · W + b`, before the ReLU.
pub fn gcn_pre_activation(
    adj: &NormalizedAdjacency,
    features: &DenseMatrix,
    layer: &LayerParams,
) -> Result<DenseMatrix> {
    check_shape("gcn adjacency", (adj.len(), adj.len()), (features.rows(), features.rows()))?;
    check_shape("gcn features", (features.rows(), layer.in_dim()), features.shape())?;
    Ok(layer.affine(&adj.matmul(features)))
}

/// `ReLU(Â · X · W + b)`
pub fn gcn_forward(adj: &NormalizedAdjacency, features: &DenseMatrix, layer: &LayerParams) -> Result<DenseMatrix> {
    Ok(relu(&gcn_pre_activation(adj, features, layer)?))
}

/// Gradients of a GCN layer given `∂L/∂H`. Returns the parameter gradients and
/// `∂L/∂X = Â · (∂L/∂Z) · Wᵀ` (Â is symmetric).
pub fn gcn_backward(
    adj: &NormalizedAdjacency,
    features: &DenseMatrix,
    layer: &LayerParams,
    d_out: &DenseMatrix,
) -> Result<(LayerParams, DenseMatrix)> {
    let propagated = adj.matmul(features);
    let pre = layer.forward(&propagated)?;
    check_shape("gcn upstream gradient", pre.shape(), d_out.shape())?;
    let dz = relu_backward(&pre, d_out);
    let (grads, d_propagated) = layer.backward(&propagated, &dz);
    Ok((grads, adj.matmul(&d_propagated)))
}
