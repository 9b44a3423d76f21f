//! Staged training: graph layer plus throwaway head first, then the genre
//! classifier on frozen embeddings.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::graph::{attach_unseen, normalize, sample_from, Attachment, GenreGraph, GraphError};
use crate::nn::{
    classifier_loss_and_grads, embedding_loss_and_grads, AdamState, EmbeddingModel, GraphLayerCache, LayerParams, Mlp,
    NnError, Propagation, SageSample, Variant,
};
use crate::rng::{derive_seed, rng_for, stream_of};
use crate::{DenseMatrix, Genre};

const STREAM_SPLIT: u64 = 0x5911;
const STREAM_SAGE_EPOCH: u64 = 0x5a6e;
const STREAM_SAGE_FINAL: u64 = 0xf1a1;
const STREAM_SAGE_QUERY: u64 = 0x9e77;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("{stage} training diverged at epoch {epoch}")]
    Diverged { stage: &'static str, epoch: usize },
    #[error("the plain variant has no graph layer to train")]
    NoGraphLayer,
    #[error("{what}: expected {expected} rows, got {found}")]
    RowMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("expected {expected}-dimensional inputs, got {found}")]
    BadWidth { expected: usize, found: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub embed_lr: f64,
    pub mlp_lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub variant: Variant,
    pub sage_sample_k: usize,
    pub self_loops: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            embed_lr: 0.01,
            mlp_lr: 0.001,
            epochs: 50,
            seed: 0,
            variant: Variant::Gcn,
            sage_sample_k: 25,
            self_loops: false,
        }
    }
}

impl TrainConfig {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.embed_lr.is_finite() && self.embed_lr > 0.0) {
            return bad("embed_lr must be positive");
        }
        if !(self.mlp_lr.is_finite() && self.mlp_lr > 0.0) {
            return bad("mlp_lr must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.sage_sample_k == 0 {
            return bad("sage_sample_k must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub eval_loss: Option<f64>,
}

/// One point per epoch, measured before that epoch's parameter update.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossCurve {
    pub points: Vec<LossPoint>,
}

impl LossCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Option<f64> {
        self.points.first().map(|p| p.train_loss)
    }

    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|p| p.train_loss)
    }

    pub fn train_losses(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.train_loss).collect()
    }

    /// `epoch,train_loss,eval_loss`; a missing eval loss is an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,eval_loss\n");
        for p in &self.points {
            let eval = p.eval_loss.map(|v| format!("{v:.17e}")).unwrap_or_default();
            writeln!(out, "{},{:.17e},{}", p.epoch, p.train_loss, eval).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    fn push(&mut self, stage: &'static str, epoch: usize, train_loss: f64, eval_loss: Option<f64>) -> Result<()> {
        if !train_loss.is_finite() || eval_loss.is_some_and(|v| !v.is_finite()) {
            return Err(TrainError::Diverged { stage, epoch });
        }
        self.points.push(LossPoint {
            epoch,
            train_loss,
            eval_loss,
        });
        Ok(())
    }
}

/// Output of the embedding stage.
#[derive(Debug, Clone)]
pub struct EmbeddingRun {
    pub graph_layer: LayerParams,
    pub embed_head: LayerParams,
    pub curve: LossCurve,
    /// Graph-layer outputs (before the head) of every training node.
    pub embeddings: DenseMatrix,
}

fn targets_of(labels: &[Genre]) -> Vec<usize> {
    labels.iter().map(|g| g.index()).collect()
}

fn propagation_for(graph: &GenreGraph, cfg: &TrainConfig, sage_seed: u64) -> Result<Propagation> {
    Ok(match cfg.variant {
        Variant::Gcn => Propagation::Gcn(normalize(graph, cfg.self_loops)?),
        Variant::Sage => Propagation::Sage(SageSample::draw(graph, cfg.sage_sample_k, sage_seed)?),
        Variant::Plain => return Err(TrainError::NoGraphLayer),
    })
}

/// Sample used for the stored embeddings of a trained SAGE layer.
pub fn final_sage_sample(graph: &GenreGraph, cfg: &TrainConfig) -> Result<SageSample> {
    Ok(SageSample::draw(graph, cfg.sage_sample_k, derive_seed(cfg.seed, STREAM_SAGE_FINAL))?)
}

/// Trains the graph layer of `cfg.variant` with a zero-initialized linear
/// head, full batch, Adam at `cfg.embed_lr`. SAGE redraws its neighbor
/// sample every epoch.
pub fn train_embeddings(graph: &GenreGraph, features: &DenseMatrix, cfg: &TrainConfig) -> Result<EmbeddingRun> {
    cfg.validate()?;
    if features.rows() != graph.len() {
        return Err(TrainError::RowMismatch {
            what: "node features",
            expected: graph.len(),
            found: features.rows(),
        });
    }
    let init = EmbeddingModel::new(cfg.variant, cfg.seed);
    let (Some(layer), Some(head)) = (init.graph_layer, init.embed_head) else {
        return Err(TrainError::NoGraphLayer);
    };
    let targets = targets_of(graph.labels());
    let mut params = [layer, head];
    let mut adam = AdamState::new(&params, cfg.embed_lr);
    let mut curve = LossCurve::default();

    let fixed = match cfg.variant {
        Variant::Gcn => Some(propagation_for(graph, cfg, 0)?.layer_input(features)?),
        _ => None,
    };
    for epoch in 0..cfg.epochs {
        let sampled;
        let input = match &fixed {
            Some(input) => input,
            None => {
                let seed = derive_seed(derive_seed(cfg.seed, STREAM_SAGE_EPOCH), epoch as u64);
                sampled = propagation_for(graph, cfg, seed)?.layer_input(features)?;
                &sampled
            }
        };
        let step = embedding_loss_and_grads(&params[0], &params[1], input, &targets)?;
        curve.push("embedding", epoch, step.loss, None)?;
        adam.step(&mut params, &step.grads)?;
        if !params.iter().all(LayerParams::is_finite) {
            return Err(TrainError::Diverged {
                stage: "embedding",
                epoch,
            });
        }
    }

    let [graph_layer, embed_head] = params;
    let final_input = match fixed {
        Some(input) => input,
        None => Propagation::Sage(final_sage_sample(graph, cfg)?).layer_input(features)?,
    };
    let embeddings = GraphLayerCache::forward(&graph_layer, &final_input)?.output;
    Ok(EmbeddingRun {
        graph_layer,
        embed_head,
        curve,
        embeddings,
    })
}

/// Held-out inputs whose loss is recorded alongside the training loss.
#[derive(Debug, Clone, Copy)]
pub struct EvalSet<'a> {
    pub inputs: &'a DenseMatrix,
    pub labels: &'a [Genre],
}

/// Trains the classifier on frozen inputs (embeddings or raw MFCC), full
/// batch, Adam at `cfg.mlp_lr`.
pub fn train_classifier(
    inputs: &DenseMatrix,
    labels: &[Genre],
    cfg: &TrainConfig,
    eval: Option<EvalSet<'_>>,
) -> Result<(Mlp, LossCurve)> {
    cfg.validate()?;
    let width = cfg.variant.embedding_dim();
    if inputs.cols() != width {
        return Err(TrainError::BadWidth {
            expected: width,
            found: inputs.cols(),
        });
    }
    if inputs.rows() != labels.len() {
        return Err(TrainError::RowMismatch {
            what: "classifier labels",
            expected: inputs.rows(),
            found: labels.len(),
        });
    }
    if let Some(e) = eval {
        if e.inputs.rows() != e.labels.len() {
            return Err(TrainError::RowMismatch {
                what: "eval labels",
                expected: e.inputs.rows(),
                found: e.labels.len(),
            });
        }
    }
    let targets = targets_of(labels);
    let eval_targets = eval.map(|e| targets_of(e.labels));
    let mut mlp = EmbeddingModel::new(cfg.variant, cfg.seed).mlp;
    let mut adam = AdamState::new(&mlp.layers, cfg.mlp_lr);
    let mut curve = LossCurve::default();
    for epoch in 0..cfg.epochs {
        let (loss, grads) = classifier_loss_and_grads(&mlp, inputs, &targets)?;
        let eval_loss = match (eval, &eval_targets) {
            (Some(e), Some(t)) if !t.is_empty() => Some(classifier_loss(&mlp, e.inputs, t)?),
            _ => None,
        };
        curve.push("classifier", epoch, loss, eval_loss)?;
        adam.step(&mut mlp.layers, &grads)?;
        if !mlp.layers.iter().all(LayerParams::is_finite) {
            return Err(TrainError::Diverged {
                stage: "classifier",
                epoch,
            });
        }
    }
    Ok((mlp, curve))
}

fn classifier_loss(mlp: &Mlp, inputs: &DenseMatrix, targets: &[usize]) -> Result<f64> {
    let logits = mlp.forward(inputs)?;
    Ok(crate::nn::softmax_cross_entropy(&logits, targets)?.0)
}

/// Fraction of rows whose arg-max logit is the true genre.
pub fn classifier_accuracy(mlp: &Mlp, inputs: &DenseMatrix, labels: &[Genre]) -> Result<f64> {
    let logits = mlp.forward(inputs)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let hits = logits
        .iter_rows()
        .zip(labels)
        .filter(|(row, g)| {
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            best.0 == g.index()
        })
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// A fully trained model with its loss curves and training-node embeddings.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: EmbeddingModel,
    pub embed_curve: Option<LossCurve>,
    pub classifier_curve: LossCurve,
    pub embeddings: DenseMatrix,
}

/// Songs outside the training graph whose classifier loss is recorded as
/// the eval loss. Embeddings come from [`infer_embedding`] with `ctx`, the
/// SAGE stream of each song keyed by its id.
#[derive(Debug, Clone, Copy)]
pub struct HeldOutSet<'a> {
    pub features: &'a DenseMatrix,
    pub ids: &'a [String],
    pub labels: &'a [Genre],
    pub ctx: InferenceContext,
}

/// Both stages for `cfg.variant`. For PLAIN the embeddings are the features.
pub fn train_model(
    graph: &GenreGraph,
    features: &DenseMatrix,
    cfg: &TrainConfig,
    held_out: Option<&HeldOutSet<'_>>,
) -> Result<TrainedModel> {
    cfg.validate()?;
    if features.rows() != graph.len() {
        return Err(TrainError::RowMismatch {
            what: "node features",
            expected: graph.len(),
            found: features.rows(),
        });
    }
    let (graph_layer, embed_head, embed_curve, embeddings) = match cfg.variant {
        Variant::Plain => (None, None, None, features.clone()),
        _ => {
            let run = train_embeddings(graph, features, cfg)?;
            (Some(run.graph_layer), Some(run.embed_head), Some(run.curve), run.embeddings)
        }
    };
    let eval_inputs = match held_out {
        Some(h) if !h.ids.is_empty() => {
            let rows = (0..h.ids.len())
                .map(|i| {
                    infer_with_layer(
                        cfg.variant,
                        graph_layer.as_ref(),
                        graph,
                        features,
                        h.features.row(i),
                        Some(h.labels[i]),
                        &h.ctx,
                        stream_of(&h.ids[i]),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Some(DenseMatrix::from_rows(&rows).expect("equal widths"))
        }
        _ => None,
    };
    let eval = eval_inputs.as_ref().zip(held_out).map(|(inputs, h)| EvalSet {
        inputs,
        labels: h.labels,
    });
    let (mlp, classifier_curve) = train_classifier(&embeddings, graph.labels(), cfg, eval)?;
    Ok(TrainedModel {
        model: EmbeddingModel {
            variant: cfg.variant,
            graph_layer,
            embed_head,
            mlp,
        },
        embed_curve,
        classifier_curve,
        embeddings,
    })
}

/// Settings that shape inference for songs outside the training graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceContext {
    pub attachment: Attachment,
    pub self_loops: bool,
    pub sage_sample_k: usize,
    pub seed: u64,
}

impl InferenceContext {
    pub fn from_config(cfg: &TrainConfig, attachment: Attachment) -> Self {
        Self {
            attachment,
            self_loops: cfg.self_loops,
            sage_sample_k: cfg.sage_sample_k,
            seed: cfg.seed,
        }
    }
}

/// Graph-layer input row for a new song with neighbor set `nbrs`, in the
/// extended graph where the song is node `n`.
fn unseen_layer_input(
    variant: Variant,
    graph: &GenreGraph,
    train_features: &DenseMatrix,
    feature: &[f64],
    nbrs: &[usize],
    ctx: &InferenceContext,
    query_stream: u64,
) -> Result<Vec<f64>> {
    let dim = feature.len();
    match variant {
        Variant::Gcn => {
            let loop_extra = usize::from(ctx.self_loops);
            let d_new = nbrs.len() + loop_extra;
            if d_new == 0 {
                return Err(GraphError::IsolatedNode {
                    node: graph.len(),
                    id: "<query>".into(),
                }
                .into());
            }
            let mut agg = vec![0.0; dim];
            for &u in nbrs {
                let d_u = graph.degree(u) + 1 + loop_extra;
                let w = 1.0 / ((d_new * d_u) as f64).sqrt();
                for (a, &x) in agg.iter_mut().zip(train_features.row(u)) {
                    *a += w * x;
                }
            }
            if ctx.self_loops {
                let w = 1.0 / d_new as f64;
                for (a, &x) in agg.iter_mut().zip(feature) {
                    *a += w * x;
                }
            }
            Ok(agg)
        }
        Variant::Sage => {
            let seed = derive_seed(derive_seed(ctx.seed, STREAM_SAGE_QUERY), query_stream);
            let sample = sample_from(nbrs, ctx.sage_sample_k, seed);
            let mut input = feature.to_vec();
            input.resize(2 * dim, 0.0);
            if !sample.is_empty() {
                let scale = 1.0 / sample.len() as f64;
                for &u in &sample {
                    for (a, &x) in input[dim..].iter_mut().zip(train_features.row(u)) {
                        *a += scale * x;
                    }
                }
            }
            Ok(input)
        }
        Variant::Plain => Ok(feature.to_vec()),
    }
}

/// Embedding of a song that is not in `graph`: attach it, then run one
/// graph-layer forward pass over its neighbors' training features. PLAIN
/// returns the feature itself. `query_stream` selects the SAGE sample.
pub fn infer_embedding(
    model: &EmbeddingModel,
    graph: &GenreGraph,
    train_features: &DenseMatrix,
    feature: &[f64],
    true_label: Option<Genre>,
    ctx: &InferenceContext,
    query_stream: u64,
) -> Result<Vec<f64>> {
    infer_with_layer(
        model.variant,
        model.graph_layer.as_ref(),
        graph,
        train_features,
        feature,
        true_label,
        ctx,
        query_stream,
    )
}

#[allow(clippy::too_many_arguments)]
fn infer_with_layer(
    variant: Variant,
    layer: Option<&LayerParams>,
    graph: &GenreGraph,
    train_features: &DenseMatrix,
    feature: &[f64],
    true_label: Option<Genre>,
    ctx: &InferenceContext,
    query_stream: u64,
) -> Result<Vec<f64>> {
    if feature.len() != train_features.cols() {
        return Err(TrainError::BadWidth {
            expected: train_features.cols(),
            found: feature.len(),
        });
    }
    let Some(layer) = layer else {
        return Ok(feature.to_vec());
    };
    let nbrs = attach_unseen(graph, train_features, feature, ctx.attachment, true_label)?;
    let input = unseen_layer_input(variant, graph, train_features, feature, &nbrs, ctx, query_stream)?;
    let row = DenseMatrix::new(1, input.len(), input).expect("single row");
    Ok(GraphLayerCache::forward(layer, &row)?.output.into_data())
}

/// Embeddings of the training nodes under a trained model.
pub fn training_embeddings(
    model: &EmbeddingModel,
    graph: &GenreGraph,
    features: &DenseMatrix,
    cfg: &TrainConfig,
) -> Result<DenseMatrix> {
    let Some(layer) = &model.graph_layer else {
        return Ok(features.clone());
    };
    let prop = match model.variant {
        Variant::Sage => Propagation::Sage(final_sage_sample(graph, cfg)?),
        _ => Propagation::Gcn(normalize(graph, cfg.self_loops)?),
    };
    Ok(GraphLayerCache::forward(layer, &prop.layer_input(features)?)?.output)
}

/// Node indices of the training and held-out parts of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub held_out: Vec<usize>,
}

/// Share of each genre held out for evaluation.
pub const HELD_OUT_FRACTION: f64 = 0.1;

/// Per genre, a seeded shuffle holds out `round(0.1·n)` songs (at least one
/// when the genre has two or more). Index lists are ascending.
pub fn split_dataset(labels: &[Genre], seed: u64) -> Split {
    let mut train = Vec::new();
    let mut held_out = Vec::new();
    for genre in Genre::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == genre).collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng_for(derive_seed(seed, STREAM_SPLIT), genre.index() as u64));
        let n = members.len();
        let held = if n < 2 {
            0
        } else {
            ((n as f64 * HELD_OUT_FRACTION).round() as usize).clamp(1, n - 1)
        };
        held_out.extend_from_slice(&members[..held]);
        train.extend_from_slice(&members[held..]);
    }
    train.sort_unstable();
    held_out.sort_unstable();
    Split { train, held_out }
}
