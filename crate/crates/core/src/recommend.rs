//! Euclidean top-k retrieval and the per-genre recommendation accuracy
//! (gamma) report.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graph::{Attachment, GenreGraph};
use crate::matrix::euclidean;
use crate::nn::{EmbeddingModel, Variant};
use crate::rng::stream_of;
use crate::store::FeatureStore;
use crate::train::{
    infer_embedding, split_dataset, train_model, training_embeddings, HeldOutSet, InferenceContext, Split,
    TrainConfig, TrainError, TrainedModel,
};
use crate::{DenseMatrix, Genre, TOP_K};

#[derive(Debug, thiserror::Error)]
pub enum RecommendError {
    #[error("recommendation catalog is empty")]
    EmptyCatalog,
    #[error("catalog has {ids} ids but {rows} embedding rows")]
    CatalogMismatch { ids: usize, rows: usize },
    #[error("duplicate catalog id '{0}'")]
    DuplicateId(String),
    #[error("query has dimension {found}, catalog has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no genre label for song '{0}'")]
    MissingLabel(String),
    #[error("unknown song id '{0}'")]
    UnknownSong(String),
    #[error("model variant {model} does not match requested {requested}")]
    VariantMismatch { model: Variant, requested: Variant },
    #[error(transparent)]
    Train(#[from] TrainError),
}

pub type Result<T> = std::result::Result<T, RecommendError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub song_id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub query_id: String,
    pub items: Vec<Recommendation>,
}

/// Song embeddings searched by [`recommend`].
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    ids: Vec<String>,
    embeddings: DenseMatrix,
    index: HashMap<String, usize>,
}

impl Catalog {
    pub fn new(ids: Vec<String>, embeddings: DenseMatrix) -> Result<Self> {
        if ids.len() != embeddings.rows() {
            return Err(RecommendError::CatalogMismatch {
                ids: ids.len(),
                rows: embeddings.rows(),
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(RecommendError::DuplicateId(id.clone()));
            }
        }
        Ok(Self { ids, embeddings, index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn embeddings(&self) -> &DenseMatrix {
        &self.embeddings
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.embeddings.row(i))
    }
}

/// The `k` catalog songs nearest to `query`, ascending by distance and then
/// by song id. A catalog entry whose id equals `query_id` is skipped.
pub fn recommend(query_id: &str, query: &[f64], catalog: &Catalog, k: usize) -> Result<RecommendationList> {
    if catalog.is_empty() {
        return Err(RecommendError::EmptyCatalog);
    }
    if query.len() != catalog.dim() {
        return Err(RecommendError::DimensionMismatch {
            expected: catalog.dim(),
            found: query.len(),
        });
    }
    let mut scored: Vec<(f64, &str)> = catalog
        .ids
        .iter()
        .zip(catalog.embeddings.iter_rows())
        .filter(|(id, _)| id.as_str() != query_id)
        .map(|(id, row)| (euclidean(query, row), id.as_str()))
        .collect();
    let cmp = |a: &(f64, &str), b: &(f64, &str)| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1));
    if scored.len() > k && k > 0 {
        scored.select_nth_unstable_by(k - 1, cmp);
    }
    scored.truncate(k);
    scored.sort_unstable_by(cmp);
    Ok(RecommendationList {
        query_id: query_id.to_string(),
        items: scored
            .into_iter()
            .map(|(distance, id)| Recommendation {
                song_id: id.to_string(),
                distance,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreGamma {
    pub genre: Genre,
    pub queries: usize,
    /// `None` when the genre had no queries.
    pub gamma_percent: Option<f64>,
}

/// Per-genre and average recommendation accuracy, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaScores {
    pub per_genre: Vec<GenreGamma>,
    pub gamma_percent: f64,
}

/// `R_ij` is the number of items in query `j`'s list that share its genre;
/// a genre scores the mean of `R_ij / len` over its queries, and the
/// average is taken over genres that have at least one query.
pub fn gamma(lists: &[RecommendationList], labels: &HashMap<String, Genre>) -> Result<GammaScores> {
    let label = |id: &str| labels.get(id).copied().ok_or_else(|| RecommendError::MissingLabel(id.to_string()));
    let mut sums = [0.0; Genre::COUNT];
    let mut counts = [0usize; Genre::COUNT];
    for list in lists {
        let genre = label(&list.query_id)?;
        let mut hits = 0usize;
        for item in &list.items {
            if label(&item.song_id)? == genre {
                hits += 1;
            }
        }
        let frac = if list.items.is_empty() {
            0.0
        } else {
            hits as f64 / list.items.len() as f64
        };
        sums[genre.index()] += frac;
        counts[genre.index()] += 1;
    }
    let per_genre: Vec<GenreGamma> = Genre::ALL
        .iter()
        .map(|&g| {
            let n = counts[g.index()];
            GenreGamma {
                genre: g,
                queries: n,
                gamma_percent: (n > 0).then(|| 100.0 * sums[g.index()] / n as f64),
            }
        })
        .collect();
    let scored: Vec<f64> = per_genre.iter().filter_map(|g| g.gamma_percent).collect();
    let gamma_percent = if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    Ok(GammaScores {
        per_genre,
        gamma_percent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: Variant,
    /// `"oracle"` or `"feature_knn"`.
    pub attachment: String,
    pub knn_k: Option<usize>,
    pub per_genre: Vec<GenreGamma>,
    pub gamma_percent: f64,
    pub queries_per_genre: usize,
    pub catalog_size: usize,
    /// Queries are held-out songs, never part of the catalog.
    pub held_out_queries: bool,
}

/// The held-out songs used as queries: for each genre, the first
/// `queries_per_genre` held-out indices in ascending order.
pub fn select_queries(labels: &[Genre], held_out: &[usize], queries_per_genre: usize) -> Vec<usize> {
    let mut taken = [0usize; Genre::COUNT];
    held_out
        .iter()
        .copied()
        .filter(|&i| {
            let t = &mut taken[labels[i].index()];
            *t += 1;
            *t <= queries_per_genre
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub attachment: Attachment,
    pub queries_per_genre: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            attachment: Attachment::Oracle,
            queries_per_genre: 10,
        }
    }
}

/// A feature store divided into the training graph and held-out songs.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub split: Split,
    pub graph: GenreGraph,
    pub train_features: DenseMatrix,
    pub held_out_features: DenseMatrix,
    pub held_out_ids: Vec<String>,
    pub held_out_labels: Vec<Genre>,
    pub labels: HashMap<String, Genre>,
}

impl PreparedData {
    pub fn new(store: &FeatureStore, seed: u64) -> Result<Self> {
        let labels_vec = store.labels();
        let ids = store.ids();
        let split = split_dataset(&labels_vec, seed);
        let x = store.feature_matrix();
        let pick = |idx: &[usize]| -> (Vec<String>, Vec<Genre>) {
            (idx.iter().map(|&i| ids[i].clone()).collect(), idx.iter().map(|&i| labels_vec[i]).collect())
        };
        let (train_ids, train_labels) = pick(&split.train);
        let (held_out_ids, held_out_labels) = pick(&split.held_out);
        let graph = GenreGraph::new(train_ids, train_labels).map_err(TrainError::from)?;
        Ok(Self {
            train_features: x.select_rows(&split.train),
            held_out_features: x.select_rows(&split.held_out),
            held_out_ids,
            held_out_labels,
            labels: ids.into_iter().zip(labels_vec).collect(),
            graph,
            split,
        })
    }

    pub fn held_out(&self, ctx: InferenceContext) -> HeldOutSet<'_> {
        HeldOutSet {
            features: &self.held_out_features,
            ids: &self.held_out_ids,
            labels: &self.held_out_labels,
            ctx,
        }
    }
}

/// Embedding of a held-out song; the SAGE sample stream is keyed by its id.
pub fn embed_unseen(
    model: &EmbeddingModel,
    data: &PreparedData,
    id: &str,
    feature: &[f64],
    label: Option<Genre>,
    ctx: &InferenceContext,
) -> Result<Vec<f64>> {
    Ok(infer_embedding(
        model,
        &data.graph,
        &data.train_features,
        feature,
        label,
        ctx,
        stream_of(id),
    )?)
}

/// Catalog of training-song embeddings under `model`.
pub fn build_catalog(model: &EmbeddingModel, data: &PreparedData, cfg: &TrainConfig) -> Result<Catalog> {
    let emb = training_embeddings(model, &data.graph, &data.train_features, cfg)?;
    Catalog::new(data.graph.node_ids().to_vec(), emb)
}

/// Gamma of one trained model: held-out queries against the training catalog.
pub fn evaluate_model(model: &EmbeddingModel, data: &PreparedData, cfg: &ExperimentConfig) -> Result<EvalReport> {
    let ctx = InferenceContext::from_config(&cfg.train, cfg.attachment);
    let catalog = build_catalog(model, data, &cfg.train)?;
    let queries = select_queries(&data.held_out_labels, &(0..data.held_out_ids.len()).collect::<Vec<_>>(), cfg.queries_per_genre);
    let mut lists = Vec::with_capacity(queries.len());
    for q in queries {
        let id = &data.held_out_ids[q];
        let emb = embed_unseen(model, data, id, data.held_out_features.row(q), Some(data.held_out_labels[q]), &ctx)?;
        lists.push(recommend(id, &emb, &catalog, TOP_K)?);
    }
    let scores = gamma(&lists, &data.labels)?;
    Ok(EvalReport {
        variant: model.variant,
        attachment: cfg.attachment.name().to_string(),
        knn_k: match cfg.attachment {
            Attachment::FeatureKnn { k } => Some(k),
            Attachment::Oracle => None,
        },
        per_genre: scores.per_genre,
        gamma_percent: scores.gamma_percent,
        queries_per_genre: cfg.queries_per_genre,
        catalog_size: catalog.len(),
        held_out_queries: true,
    })
}

/// Reports for several variants over the same data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub reports: Vec<EvalReport>,
}

impl ExperimentReport {
    pub fn get(&self, variant: Variant) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.variant == variant)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Genres as rows, variants as columns, then one average row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mode = self.reports.first().map_or("oracle", |r| r.attachment.as_str());
        writeln!(out, "Recommendation accuracy by genre (%), attachment: {mode}").unwrap();
        write!(out, "{:<16}", "Genre").unwrap();
        for r in &self.reports {
            write!(out, "{:>12}", r.variant.title()).unwrap();
        }
        out.push('\n');
        for g in Genre::ALL {
            write!(out, "{:<16}", g.name()).unwrap();
            for r in &self.reports {
                let cell = r.per_genre[g.index()]
                    .gamma_percent
                    .map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
                write!(out, "{cell:>12}").unwrap();
            }
            out.push('\n');
        }
        write!(out, "{:<16}", "Average").unwrap();
        for r in &self.reports {
            write!(out, "{:>12.2}", r.gamma_percent).unwrap();
        }
        out.push('\n');
        out
    }
}

/// Everything produced by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub models: Vec<TrainedModel>,
}

/// Splits the store, trains each variant on the training songs and scores
/// held-out queries against the training catalog.
pub fn run_experiment(store: &FeatureStore, variants: &[Variant], cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let data = PreparedData::new(store, cfg.train.seed)?;
    let mut reports = Vec::new();
    let mut models = Vec::new();
    for &variant in variants {
        let tcfg = cfg.train.clone().with_variant(variant);
        let ctx = InferenceContext::from_config(&tcfg, cfg.attachment);
        let trained = train_model(&data.graph, &data.train_features, &tcfg, Some(&data.held_out(ctx)))?;
        let vcfg = ExperimentConfig {
            train: tcfg,
            ..cfg.clone()
        };
        reports.push(evaluate_model(&trained.model, &data, &vcfg)?);
        models.push(trained);
    }
    Ok(ExperimentOutcome {
        report: ExperimentReport {
            seed: cfg.train.seed,
            reports,
        },
        models,
    })
}
