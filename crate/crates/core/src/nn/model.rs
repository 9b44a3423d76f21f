use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::layer::{relu, relu_backward};
use super::{check_shape, softmax_cross_entropy, LayerParams, Mlp, NnError, Result, SageSample};
use crate::graph::NormalizedAdjacency;
use crate::rng::rng_for;
use crate::{DenseMatrix, Genre, EMBED_DIM, MFCC_DIM};

pub const GCN_LAYER_PARAMS: usize = 1860;
pub const SAGE_LAYER_PARAMS: usize = 3660;
pub const PLAIN_MLP_PARAMS: usize = 8360;

const STREAM_GRAPH_INIT: u64 = 1;
const STREAM_MLP_INIT: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Sage,
    Gcn,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Plain, Variant::Sage, Variant::Gcn];

    pub fn tag(self) -> u32 {
        match self {
            Variant::Plain => 0,
            Variant::Gcn => 1,
            Variant::Sage => 2,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Gcn => "gcn",
            Variant::Sage => "sage",
        }
    }

    /// Column heading used in reports.
    pub fn title(self) -> &'static str {
        match self {
            Variant::Plain => "MFCC",
            Variant::Gcn => "GCN",
            Variant::Sage => "GraphSAGE",
        }
    }

    /// `(in_dim, out_dim)` of the graph layer, if the variant has one.
    pub fn graph_layer_dims(self) -> Option<(usize, usize)> {
        match self {
            Variant::Plain => None,
            Variant::Gcn => Some((MFCC_DIM, EMBED_DIM)),
            Variant::Sage => Some((2 * MFCC_DIM, EMBED_DIM)),
        }
    }

    /// Width of the vectors used for retrieval and classification.
    pub fn embedding_dim(self) -> usize {
        match self {
            Variant::Plain => MFCC_DIM,
            Variant::Gcn | Variant::Sage => EMBED_DIM,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" | "mfcc" => Ok(Variant::Plain),
            "gcn" => Ok(Variant::Gcn),
            "sage" | "graphsage" => Ok(Variant::Sage),
            other => Err(format!("unknown variant '{other}' (expected plain, gcn or sage)")),
        }
    }
}

/// Graph layer, its throwaway training head, and the genre classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub variant: Variant,
    pub graph_layer: Option<LayerParams>,
    /// Linear 60 → 8 head used only while training the graph layer.
    pub embed_head: Option<LayerParams>,
    pub mlp: Mlp,
}

impl EmbeddingModel {
    /// Seeded initialization. Output heads start at zero.
    pub fn new(variant: Variant, seed: u64) -> Self {
        let graph_layer = variant
            .graph_layer_dims()
            .map(|(i, o)| LayerParams::uniform(i, o, &mut rng_for(seed, STREAM_GRAPH_INIT)));
        let embed_head = graph_layer.as_ref().map(|_| LayerParams::zeros(EMBED_DIM, Genre::COUNT));
        let mlp = Mlp::new(variant.embedding_dim(), &mut rng_for(seed, STREAM_MLP_INIT));
        let model = Self {
            variant,
            graph_layer,
            embed_head,
            mlp,
        };
        match variant {
            Variant::Plain => assert_eq!(model.mlp.parameter_count(), PLAIN_MLP_PARAMS),
            Variant::Gcn => assert_eq!(model.graph_parameter_count(), GCN_LAYER_PARAMS),
            Variant::Sage => assert_eq!(model.graph_parameter_count(), SAGE_LAYER_PARAMS),
        }
        model
    }

    pub fn graph_parameter_count(&self) -> usize {
        self.graph_layer.as_ref().map_or(0, LayerParams::parameter_count)
    }

    pub fn mlp_parameter_count(&self) -> usize {
        self.mlp.parameter_count()
    }

    pub fn head_parameter_count(&self) -> usize {
        self.embed_head.as_ref().map_or(0, LayerParams::parameter_count)
    }

    /// Graph layer plus classifier; the training head is not counted.
    pub fn pipeline_parameter_count(&self) -> usize {
        self.graph_parameter_count() + self.mlp_parameter_count()
    }

    /// Checks that every layer has the shape the variant requires.
    pub fn validate(&self) -> Result<()> {
        match (self.variant.graph_layer_dims(), &self.graph_layer, &self.embed_head) {
            (None, None, None) => {}
            (Some(dims), Some(layer), Some(head)) => {
                check_shape("graph layer", dims, layer.weight.shape())?;
                check_shape("embedding head", (EMBED_DIM, Genre::COUNT), head.weight.shape())?;
            }
            _ => {
                return Err(NnError::Shape(crate::matrix::ShapeError {
                    op: "model layer set",
                    left: (usize::from(self.variant.graph_layer_dims().is_some()), 0),
                    right: (usize::from(self.graph_layer.is_some()), 0),
                }))
            }
        }
        check_shape("classifier input", (self.variant.embedding_dim(), 0), (self.mlp.in_dim(), 0))?;
        check_shape("classifier output", (Genre::COUNT, 0), (self.mlp.layers[2].out_dim(), 0))?;
        Ok(())
    }
}

/// The fixed linear map that turns node features into the graph layer's
/// input: `Â·X` for GCN, `[X ∥ mean(X_sampled)]` for SAGE.
#[derive(Debug, Clone)]
pub enum Propagation {
    Gcn(NormalizedAdjacency),
    Sage(SageSample),
}

impl Propagation {
    pub fn variant(&self) -> Variant {
        match self {
            Propagation::Gcn(_) => Variant::Gcn,
            Propagation::Sage(_) => Variant::Sage,
        }
    }

    pub fn nodes(&self) -> usize {
        match self {
            Propagation::Gcn(adj) => adj.len(),
            Propagation::Sage(s) => s.len(),
        }
    }

    pub fn layer_input(&self, features: &DenseMatrix) -> Result<DenseMatrix> {
        check_shape("propagation rows", (self.nodes(), 1), (features.rows(), 1))?;
        Ok(match self {
            Propagation::Gcn(adj) => adj.matmul(features),
            Propagation::Sage(s) => s.concat_input(features),
        })
    }

    /// Adjoint of [`layer_input`](Self::layer_input): maps `∂L/∂input` to `∂L/∂X`.
    pub fn input_adjoint(&self, d_input: &DenseMatrix) -> DenseMatrix {
        match self {
            Propagation::Gcn(adj) => adj.matmul(d_input),
            Propagation::Sage(s) => {
                let half = d_input.cols() / 2;
                let (d_self, d_agg) = d_input.hsplit(half);
                let d_nbr = s.aggregate_transpose(&d_agg, d_input.rows());
                DenseMatrix::from_fn(d_input.rows(), half, |r, c| d_self.get(r, c) + d_nbr.get(r, c))
            }
        }
    }
}

/// Activations of one graph-layer pass.
#[derive(Debug, Clone)]
pub struct GraphLayerCache {
    pub input: DenseMatrix,
    pub pre_activation: DenseMatrix,
    pub output: DenseMatrix,
}

impl GraphLayerCache {
    pub fn forward(layer: &LayerParams, layer_input: &DenseMatrix) -> Result<Self> {
        let pre_activation = layer.forward(layer_input)?;
        let output = relu(&pre_activation);
        Ok(Self {
            input: layer_input.clone(),
            pre_activation,
            output,
        })
    }

    pub fn activation_pattern(&self) -> Vec<bool> {
        self.pre_activation.data().iter().map(|&z| z > 0.0).collect()
    }
}

/// Loss and gradients for one full-batch step of embedding training.
#[derive(Debug, Clone)]
pub struct EmbeddingStep {
    pub loss: f64,
    pub cache: GraphLayerCache,
    /// `[graph layer, head]`
    pub grads: [LayerParams; 2],
    pub d_layer_input: DenseMatrix,
}

/// Cross-entropy of `head(ReLU(input·W + b))` and its gradients.
pub fn embedding_loss_and_grads(
    layer: &LayerParams,
    head: &LayerParams,
    layer_input: &DenseMatrix,
    targets: &[usize],
) -> Result<EmbeddingStep> {
    let cache = GraphLayerCache::forward(layer, layer_input)?;
    let logits = head.forward(&cache.output)?;
    let (loss, d_logits) = softmax_cross_entropy(&logits, targets)?;
    let (g_head, d_emb) = head.backward(&cache.output, &d_logits);
    let d_pre = relu_backward(&cache.pre_activation, &d_emb);
    let (g_layer, d_layer_input) = layer.backward(layer_input, &d_pre);
    Ok(EmbeddingStep {
        loss,
        cache,
        grads: [g_layer, g_head],
        d_layer_input,
    })
}

/// Cross-entropy of the classifier on frozen inputs and its gradients.
pub fn classifier_loss_and_grads(mlp: &Mlp, inputs: &DenseMatrix, targets: &[usize]) -> Result<(f64, [LayerParams; 3])> {
    let (logits, cache) = mlp.forward_cached(inputs)?;
    let (loss, d_logits) = softmax_cross_entropy(&logits, targets)?;
    let (grads, _) = mlp.backward(&cache, &d_logits);
    Ok((loss, grads))
}

/// Gradients for every parameter of a model.
#[derive(Debug, Clone)]
pub struct ModelGradients {
    pub graph_layer: Option<LayerParams>,
    pub embed_head: Option<LayerParams>,
    pub mlp: [LayerParams; 3],
    /// Embedding-stage loss, when the model has a graph layer.
    pub embed_loss: Option<f64>,
    pub classifier_loss: f64,
    /// `∂(embedding loss)/∂X` through the propagation operator.
    pub d_features: Option<DenseMatrix>,
}

/// Reverse-mode gradients of both training objectives.
///
/// The graph layer and head receive gradients of the embedding loss; the
/// classifier receives gradients of its loss on the graph layer's output,
/// which is treated as a constant input (staged training).
pub fn backward(
    model: &EmbeddingModel,
    propagation: Option<&Propagation>,
    features: &DenseMatrix,
    targets: &[usize],
) -> Result<ModelGradients> {
    model.validate()?;
    match (&model.graph_layer, &model.embed_head) {
        (Some(layer), Some(head)) => {
            let prop = propagation.ok_or(NnError::NoGraphLayer("propagation missing for graph variant"))?;
            let input = prop.layer_input(features)?;
            let step = embedding_loss_and_grads(layer, head, &input, targets)?;
            let (classifier_loss, mlp) = classifier_loss_and_grads(&model.mlp, &step.cache.output, targets)?;
            let d_features = prop.input_adjoint(&step.d_layer_input);
            let [g_layer, g_head] = step.grads;
            Ok(ModelGradients {
                graph_layer: Some(g_layer),
                embed_head: Some(g_head),
                mlp,
                embed_loss: Some(step.loss),
                classifier_loss,
                d_features: Some(d_features),
            })
        }
        _ => {
            let (classifier_loss, mlp) = classifier_loss_and_grads(&model.mlp, features, targets)?;
            Ok(ModelGradients {
                graph_layer: None,
                embed_head: None,
                mlp,
                embed_loss: None,
                classifier_loss,
                d_features: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, normalize};

    #[test]
    fn parameter_counts() {
        let gcn = EmbeddingModel::new(Variant::Gcn, 0);
        let sage = EmbeddingModel::new(Variant::Sage, 0);
        let plain = EmbeddingModel::new(Variant::Plain, 0);
        assert_eq!(gcn.graph_parameter_count(), 1860);
        assert_eq!(sage.graph_parameter_count(), 3660);
        assert_eq!(plain.mlp_parameter_count(), 8360);
        assert_eq!(gcn.head_parameter_count(), 488);
        assert_eq!(gcn.mlp_parameter_count(), 12_200);
        assert_eq!(plain.pipeline_parameter_count(), 8360);
        for m in [gcn, sage, plain] {
            m.validate().unwrap();
        }
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("GCN".parse::<Variant>().unwrap(), Variant::Gcn);
        assert_eq!("graphsage".parse::<Variant>().unwrap(), Variant::Sage);
        assert!("gat".parse::<Variant>().is_err());
        for v in Variant::ALL {
            assert_eq!(Variant::from_tag(v.tag()), Some(v));
        }
    }

    #[test]
    fn dead_unit_has_exactly_zero_gradient() {
        let labels: Vec<Genre> = (0..12).map(|i| Genre::from_index(i % 3).unwrap()).collect();
        let g = build_graph(&labels).unwrap();
        let prop = Propagation::Gcn(normalize(&g, false).unwrap());
        let x = DenseMatrix::from_fn(12, 30, |r, c| ((r * 30 + c) as f64 * 0.23).sin());
        let mut model = EmbeddingModel::new(Variant::Gcn, 3);
        model.embed_head = Some(LayerParams::uniform(60, 8, &mut rng_for(9, 0)));
        // Kill unit 7 of the graph layer: zero weights, very negative bias.
        let layer = model.graph_layer.as_mut().unwrap();
        for i in 0..30 {
            layer.weight.set(i, 7, 0.0);
        }
        layer.bias[7] = -100.0;
        let targets: Vec<usize> = labels.iter().map(|g| g.index()).collect();
        let grads = backward(&model, Some(&prop), &x, &targets).unwrap();
        let gl = grads.graph_layer.unwrap();
        assert!((0..30).all(|i| gl.weight.get(i, 7) == 0.0));
        assert_eq!(gl.bias[7], 0.0);
        let gh = grads.embed_head.unwrap();
        assert!((0..8).all(|c| gh.weight.get(7, c) == 0.0));
    }

    #[test]
    fn duplicating_rows_keeps_mean_gradient() {
        let mut mlp = Mlp::new(30, &mut rng_for(1, 0));
        mlp.layers[2] = LayerParams::uniform(32, 8, &mut rng_for(2, 0));
        let x = DenseMatrix::from_fn(6, 30, |r, c| ((r * 30 + c) as f64 * 0.61).cos() * 2.0);
        let t = [0, 1, 2, 3, 4, 5];
        let doubled = DenseMatrix::from_rows(&x.iter_rows().chain(x.iter_rows()).collect::<Vec<_>>()).unwrap();
        let t2: Vec<usize> = t.iter().chain(&t).copied().collect();
        let (l1, g1) = classifier_loss_and_grads(&mlp, &x, &t).unwrap();
        let (l2, g2) = classifier_loss_and_grads(&mlp, &doubled, &t2).unwrap();
        assert!((l1 - l2).abs() < 1e-10);
        for (a, b) in g1.iter().zip(&g2) {
            for (x, y) in a.values().zip(b.values()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn graph_variant_needs_propagation() {
        let model = EmbeddingModel::new(Variant::Sage, 0);
        let x = DenseMatrix::zeros(2, 30);
        assert!(matches!(backward(&model, None, &x, &[0, 1]), Err(NnError::NoGraphLayer(_))));
    }
}
