//! Song graph: every pair of same-genre songs is joined, so the graph is a
//! disjoint union of genre cliques.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::matrix::euclidean;
use crate::rng::rng_for;
use crate::{DenseMatrix, Genre};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("graph needs at least one song")]
    Empty,
    #[error("labels ({labels}) and ids ({ids}) differ in length")]
    LengthMismatch { labels: usize, ids: usize },
    #[error("node {node} ('{id}') is isolated; normalization without self-loops divides by zero")]
    IsolatedNode { node: usize, id: String },
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("oracle attachment requires the true genre label")]
    MissingLabel,
    #[error("feature-knn attachment needs k >= 1")]
    ZeroK,
    #[error("feature rows ({rows}) do not match node count ({nodes})")]
    FeatureMismatch { rows: usize, nodes: usize },
    #[error("invalid graph manifest: {0}")]
    Manifest(String),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// How a song that was not in the training graph gets its edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Attachment {
    /// Connect to every training song of the query's true genre.
    Oracle,
    /// Connect to the `k` training songs nearest in MFCC space.
    FeatureKnn { k: usize },
}

impl Attachment {
    pub fn name(self) -> &'static str {
        match self {
            Attachment::Oracle => "oracle",
            Attachment::FeatureKnn { .. } => "feature_knn",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenreGraph {
    node_ids: Vec<String>,
    labels: Vec<Genre>,
    neighbors: Vec<Vec<usize>>,
}

/// Builds the union-of-cliques graph with node ids `"0"`, `"1"`, ...
pub fn build_graph(labels: &[Genre]) -> Result<GenreGraph> {
    let ids = (0..labels.len()).map(|i| i.to_string()).collect();
    GenreGraph::new(ids, labels.to_vec())
}

impl GenreGraph {
    pub fn new(node_ids: Vec<String>, labels: Vec<Genre>) -> Result<Self> {
        if labels.is_empty() {
            return Err(GraphError::Empty);
        }
        if node_ids.len() != labels.len() {
            return Err(GraphError::LengthMismatch {
                labels: labels.len(),
                ids: node_ids.len(),
            });
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); Genre::COUNT];
        for (i, g) in labels.iter().enumerate() {
            members[g.index()].push(i);
        }
        let neighbors = labels
            .iter()
            .enumerate()
            .map(|(v, g)| members[g.index()].iter().copied().filter(|&u| u != v).collect())
            .collect();
        Ok(Self {
            node_ids,
            labels,
            neighbors,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn labels(&self) -> &[Genre] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> Genre {
        self.labels[node]
    }

    /// Sorted neighbor list of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Training nodes of one genre, ascending.
    pub fn members(&self, genre: Genre) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.labels[v] == genre).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|n| n == id)
    }
}

/// Sparse `D^{-1/2} A D^{-1/2}` in CSR form, optionally over `A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    self_loops: bool,
}

pub fn normalize(graph: &GenreGraph, add_self_loops: bool) -> Result<NormalizedAdjacency> {
    let loop_deg = usize::from(add_self_loops);
    let degree: Vec<usize> = (0..graph.len()).map(|v| graph.degree(v) + loop_deg).collect();
    if let Some(v) = degree.iter().position(|&d| d == 0) {
        return Err(GraphError::IsolatedNode {
            node: v,
            id: graph.node_ids[v].clone(),
        });
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
    let mut row_ptr = Vec::with_capacity(graph.len() + 1);
    let mut cols = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for v in 0..graph.len() {
        let nbrs = graph.neighbors(v);
        let split = nbrs.partition_point(|&u| u < v);
        let mut push = |u: usize| {
            cols.push(u);
            values.push(inv_sqrt[v] * inv_sqrt[u]);
        };
        nbrs[..split].iter().for_each(|&u| push(u));
        if add_self_loops {
            push(v);
        }
        nbrs[split..].iter().for_each(|&u| push(u));
        row_ptr.push(cols.len());
    }
    Ok(NormalizedAdjacency {
        row_ptr,
        cols,
        values,
        self_loops: add_self_loops,
    })
}

impl NormalizedAdjacency {
    pub fn len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    /// `(column, value)` pairs of one row, ascending by column.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(i) => self.values[span.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).map(|(_, v)| v).sum()
    }

    /// `Â · x`
    pub fn matmul(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.len(), x.rows(), "adjacency/feature row count");
        let mut out = DenseMatrix::zeros(x.rows(), x.cols());
        for r in 0..self.len() {
            let mut acc = vec![0.0; x.cols()];
            for (c, w) in self.row(r) {
                for (a, &b) in acc.iter_mut().zip(x.row(c)) {
                    *a += w * b;
                }
            }
            out.row_mut(r).copy_from_slice(&acc);
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.len(), self.len());
        for r in 0..self.len() {
            for (c, v) in self.row(r) {
                m.set(r, c, v);
            }
        }
        m
    }
}

/// Up to `k` distinct neighbors of `node`, uniformly without replacement.
/// Returns the full (sorted) neighbor list when the degree is at most `k`.
pub fn sample_neighbors(graph: &GenreGraph, node: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if node >= graph.len() {
        return Err(GraphError::UnknownNode(node));
    }
    Ok(sample_from(graph.neighbors(node), k, seed))
}

/// Seeded uniform subset of `pool` of size `min(k, pool.len())`.
pub(crate) fn sample_from(pool: &[usize], k: usize, seed: u64) -> Vec<usize> {
    if pool.len() <= k {
        return pool.to_vec();
    }
    let mut rng = rng_for(seed, 0);
    sample(&mut rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
}

/// Neighbor set for a song that is not part of `graph`.
///
/// `train_features` holds one MFCC row per graph node and is only consulted
/// in feature-knn mode.
pub fn attach_unseen(
    graph: &GenreGraph,
    train_features: &DenseMatrix,
    feature: &[f64],
    mode: Attachment,
    true_label: Option<Genre>,
) -> Result<Vec<usize>> {
    if graph.is_empty() {
        return Err(GraphError::Empty);
    }
    match mode {
        Attachment::Oracle => {
            let genre = true_label.ok_or(GraphError::MissingLabel)?;
            Ok(graph.members(genre))
        }
        Attachment::FeatureKnn { k } => {
            if k == 0 {
                return Err(GraphError::ZeroK);
            }
            if train_features.rows() != graph.len() {
                return Err(GraphError::FeatureMismatch {
                    rows: train_features.rows(),
                    nodes: graph.len(),
                });
            }
            let mut by_dist: Vec<(f64, usize)> = train_features
                .iter_rows()
                .enumerate()
                .map(|(i, row)| (euclidean(row, feature), i))
                .collect();
            by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut chosen: Vec<usize> = by_dist.into_iter().take(k).map(|(_, i)| i).collect();
            chosen.sort_unstable();
            Ok(chosen)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestNode {
    pub id: String,
    pub genre: Genre,
}

/// JSON form of a graph. Edges are implied by the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphManifest {
    pub nodes: Vec<ManifestNode>,
    pub self_loops: bool,
}

impl GraphManifest {
    pub fn from_graph(graph: &GenreGraph, self_loops: bool) -> Self {
        let nodes = graph
            .node_ids
            .iter()
            .zip(&graph.labels)
            .map(|(id, &genre)| ManifestNode { id: id.clone(), genre })
            .collect();
        Self { nodes, self_loops }
    }

    pub fn to_graph(&self) -> Result<GenreGraph> {
        let ids = self.nodes.iter().map(|n| n.id.clone()).collect();
        let labels = self.nodes.iter().map(|n| n.genre).collect();
        GenreGraph::new(ids, labels)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| GraphError::Manifest(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels_of(sizes: &[(Genre, usize)]) -> Vec<Genre> {
        sizes.iter().flat_map(|&(g, n)| std::iter::repeat_n(g, n)).collect()
    }

    fn dense_normalized(graph: &GenreGraph, loops: bool) -> DenseMatrix {
        let n = graph.len();
        let a = DenseMatrix::from_fn(n, n, |u, v| {
            if (u != v && graph.label(u) == graph.label(v)) || (loops && u == v) {
                1.0
            } else {
                0.0
            }
        });
        let d: Vec<f64> = (0..n).map(|u| a.row(u).iter().sum()).collect();
        DenseMatrix::from_fn(n, n, |u, v| a.get(u, v) / (d[u] * d[v]).sqrt())
    }

    #[test]
    fn paper_scale_edge_count() {
        let labels = labels_of(&Genre::ALL.map(|g| (g, 1000)));
        let g = build_graph(&labels).unwrap();
        assert_eq!(g.len(), 8000);
        assert_eq!(g.edge_count(), 3_996_000);
        assert_eq!(g.degree(0), 999);
    }

    #[test]
    fn single_genre_is_complete_and_singletons_are_isolated() {
        let g = build_graph(&[Genre::Pop; 6]).unwrap();
        assert_eq!(g.edge_count(), 15);
        assert!((0..6).all(|u| (0..6).all(|v| g.is_adjacent(u, v) == (u != v))));

        let g = build_graph(&Genre::ALL).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert!((0..8).all(|v| g.degree(v) == 0));
    }

    #[test]
    fn empty_graph_is_rejected() {
        assert_eq!(build_graph(&[]), Err(GraphError::Empty));
    }

    #[test]
    fn triangle_normalization() {
        let g = build_graph(&[Genre::Folk; 3]).unwrap();
        let plain = normalize(&g, false).unwrap();
        let looped = normalize(&g, true).unwrap();
        for u in 0..3 {
            for v in 0..3 {
                let want = if u == v { 0.0 } else { 0.5 };
                assert!((plain.get(u, v) - want).abs() < 1e-15);
                assert!((looped.get(u, v) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_cliques_match_dense_oracle() {
        let g = build_graph(&labels_of(&[(Genre::Rock, 3), (Genre::Pop, 5)])).unwrap();
        let sparse = normalize(&g, false).unwrap().to_dense();
        let dense = dense_normalized(&g, false);
        assert!(sparse.max_abs_diff(&dense) < 1e-15);
        assert!((sparse.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((sparse.get(3, 4) - 0.25).abs() < 1e-15);
        assert_eq!(sparse.get(0, 3), 0.0);
    }

    #[test]
    fn isolated_node_without_loops_is_named() {
        let g = build_graph(&[Genre::Rock, Genre::Rock, Genre::Pop]).unwrap();
        assert_eq!(
            normalize(&g, false),
            Err(GraphError::IsolatedNode { node: 2, id: "2".into() })
        );
        assert!(normalize(&g, true).is_ok());
    }

    #[test]
    fn sampling_small_degree_and_isolated() {
        let g = build_graph(&labels_of(&[(Genre::Folk, 4), (Genre::Pop, 1)])).unwrap();
        assert_eq!(sample_neighbors(&g, 0, 10, 1).unwrap(), vec![1, 2, 3]);
        assert!(sample_neighbors(&g, 4, 10, 1).unwrap().is_empty());
        assert_eq!(sample_neighbors(&g, 9, 3, 1), Err(GraphError::UnknownNode(9)));
    }

    #[test]
    fn sampling_frequencies_match_binomial() {
        let g = build_graph(&[Genre::Rock; 1000]).unwrap();
        let (k, seeds) = (25usize, 10_000u64);
        let mut counts = vec![0usize; 1000];
        for seed in 0..seeds {
            let s = sample_neighbors(&g, 0, k, seed).unwrap();
            assert_eq!(s.len(), k);
            for u in s {
                counts[u] += 1;
            }
        }
        assert_eq!(counts[0], 0);
        let p = k as f64 / 999.0;
        let mean = seeds as f64 * p;
        let sigma = (seeds as f64 * p * (1.0 - p)).sqrt();
        let worst = counts[1..]
            .iter()
            .map(|&c| (c as f64 - mean).abs() / sigma)
            .fold(0.0, f64::max);
        // 3 sigma per neighbor, corrected for testing 999 neighbors at once.
        use statrs::distribution::{ContinuousCDF, Normal};
        let family_alpha = 2.0 * (1.0 - Normal::standard().cdf(3.0));
        let bound = Normal::standard().inverse_cdf(1.0 - family_alpha / (2.0 * 999.0));
        assert!(worst <= bound, "largest deviation {worst:.2} sigma, bound {bound:.2}");
    }

    #[test]
    fn oracle_attachment_returns_genre_members() {
        let labels = labels_of(&[(Genre::Folk, 50), (Genre::Rock, 30)]);
        let g = build_graph(&labels).unwrap();
        let feats = DenseMatrix::zeros(80, 2);
        let n = attach_unseen(&g, &feats, &[0.0, 0.0], Attachment::Oracle, Some(Genre::Folk)).unwrap();
        assert_eq!(n.len(), 50);
        assert!(n.iter().all(|&v| g.label(v) == Genre::Folk));
        assert_eq!(
            attach_unseen(&g, &feats, &[0.0, 0.0], Attachment::Oracle, None),
            Err(GraphError::MissingLabel)
        );
    }

    #[test]
    fn knn_attachment_finds_identical_feature() {
        let labels = labels_of(&[(Genre::Folk, 5), (Genre::Pop, 5)]);
        let g = build_graph(&labels).unwrap();
        let feats = DenseMatrix::from_fn(10, 3, |r, c| (r * 3 + c) as f64 * 0.37);
        let q = feats.row(6).to_vec();
        assert_eq!(
            attach_unseen(&g, &feats, &q, Attachment::FeatureKnn { k: 1 }, None).unwrap(),
            vec![6]
        );
        assert_eq!(
            attach_unseen(&g, &feats, &q, Attachment::FeatureKnn { k: 0 }, None),
            Err(GraphError::ZeroK)
        );
    }

    #[test]
    fn knn_attachment_matches_exhaustive_sort() {
        let labels = labels_of(&[(Genre::Folk, 20), (Genre::Pop, 20)]);
        let g = build_graph(&labels).unwrap();
        let feats = DenseMatrix::from_fn(40, 30, |r, c| ((r * 31 + c * 17) as f64 * 0.113).sin());
        let q: Vec<f64> = (0..30).map(|c| (c as f64 * 0.4).cos()).collect();
        let got = attach_unseen(&g, &feats, &q, Attachment::FeatureKnn { k: 5 }, None).unwrap();
        let mut all: Vec<(f64, usize)> = (0..40)
            .map(|i| {
                let d: f64 = (0..30).map(|c| (feats.get(i, c) - q[c]).powi(2)).sum();
                (d, i)
            })
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want: Vec<usize> = all[..5].iter().map(|p| p.1).collect();
        want.sort_unstable();
        assert_eq!(got, want);
    }

    #[test]
    fn manifest_round_trip() {
        let g = GenreGraph::new(vec!["a".into(), "b".into()], vec![Genre::HipHop, Genre::Rock]).unwrap();
        let m = GraphManifest::from_graph(&g, true);
        let json = m.to_json();
        assert!(json.contains("\"Hip-Hop\""));
        let back = GraphManifest::from_json(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_graph().unwrap(), g);
    }

    fn arb_labels() -> impl Strategy<Value = Vec<Genre>> {
        prop::collection::vec((0usize..8).prop_map(|i| Genre::from_index(i).unwrap()), 1..60)
    }

    proptest! {
        #[test]
        fn normalized_adjacency_is_block_diagonal(labels in arb_labels(), loops: bool) {
            let g = build_graph(&labels).unwrap();
            for v in 0..g.len() {
                prop_assert_eq!(g.degree(v), labels.iter().filter(|&&l| l == labels[v]).count() - 1);
            }
            let Ok(norm) = normalize(&g, loops) else {
                prop_assert!(!loops);
                return Ok(());
            };
            for u in 0..g.len() {
                for v in 0..g.len() {
                    let a = norm.get(u, v);
                    prop_assert_eq!(a, norm.get(v, u));
                    if labels[u] != labels[v] {
                        prop_assert_eq!(a, 0.0);
                    }
                }
                prop_assert!(norm.row_sum(u) <= 1.0 + 1e-9);
                if !loops {
                    prop_assert!((norm.row_sum(u) - 1.0).abs() < 1e-12);
                    let n = g.degree(u) + 1;
                    for (_, w) in norm.row(u) {
                        prop_assert!((w - 1.0 / (n - 1) as f64).abs() < 1e-15);
                    }
                }
            }
        }

        #[test]
        fn samples_are_distinct_neighbors(labels in arb_labels(), k in 1usize..20, seed: u64) {
            let g = build_graph(&labels).unwrap();
            for v in 0..g.len() {
                let s = sample_neighbors(&g, v, k, seed).unwrap();
                prop_assert_eq!(s.len(), k.min(g.degree(v)));
                let mut sorted = s.clone();
                sorted.sort_unstable();
                sorted.dedup();
                prop_assert_eq!(sorted.len(), s.len());
                prop_assert!(!s.contains(&v));
                prop_assert!(s.iter().all(|&u| g.is_adjacent(u, v)));
                prop_assert_eq!(&s, &sample_neighbors(&g, v, k, seed).unwrap());
            }
        }
    }
}
