//! Dense layers, graph layers, loss, backpropagation and Adam.

mod adam;
mod gcn;
mod layer;
mod loss;
mod mlp;
mod model;
mod sage;
mod weights;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use gcn::{gcn_backward, gcn_forward, gcn_pre_activation};
pub use layer::{relu, relu_backward, LayerParams};
pub use loss::{softmax_cross_entropy, softmax_rows};
pub use mlp::{mlp_forward, Mlp, MlpCache, HIDDEN_DIMS};
pub use model::{
    backward, classifier_loss_and_grads, embedding_loss_and_grads, EmbeddingModel, GraphLayerCache,
    ModelGradients, Propagation, Variant, GCN_LAYER_PARAMS, PLAIN_MLP_PARAMS, SAGE_LAYER_PARAMS,
};
pub use sage::{sage_backward, sage_forward, SageSample};
pub use weights::{load_weights, read_weights, save_weights, write_weights, WEIGHT_MAGIC, WEIGHT_VERSION};

use crate::graph::GraphError;
use crate::matrix::ShapeError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("target {target} in row {row} is outside 0..{classes}")]
    TargetOutOfRange { row: usize, target: usize, classes: usize },
    #[error("{0} does not match the feature row count")]
    RowMismatch(&'static str),
    #[error("sample size must be at least 1")]
    ZeroSampleSize,
    #[error("model variant {0} has no graph layer")]
    NoGraphLayer(&'static str),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, NnError>;

pub(crate) fn check_shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(ShapeError { op, left, right }.into())
    }
}
