#![allow(dead_code)]

use genregraph::audio::MfccConfig;
use genregraph::dataset::{extract_features, DatasetManifest};
use genregraph::store::FeatureStore;
use genregraph::synth::{generate, SyntheticSpec};
use genregraph::Genre;

pub struct Desk {
    pub dir: tempfile::TempDir,
    pub manifest: DatasetManifest,
    pub store: FeatureStore,
}

/// Synthesizes `genres × per_genre` songs and extracts their features.
pub fn desk(seed: u64, genres: usize, per_genre: usize) -> Desk {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        genres,
        songs_per_genre: per_genre,
        seed,
        ..SyntheticSpec::default()
    };
    let manifest = generate(&spec, dir.path()).unwrap();
    let store = extract_features(&manifest, &MfccConfig::default(), seed).unwrap();
    Desk { dir, manifest, store }
}

/// Mean silhouette coefficient of the store's MFCC vectors under their genre labels.
pub fn silhouette(store: &FeatureStore) -> f64 {
    let x = store.feature_matrix();
    let labels = store.labels();
    let n = labels.len();
    let dist = |i: usize, j: usize| genregraph::matrix::euclidean(x.row(i), x.row(j));
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = [0.0; Genre::COUNT];
        let mut counts = [0usize; Genre::COUNT];
        for j in (0..n).filter(|&j| j != i) {
            sums[labels[j].index()] += dist(i, j);
            counts[labels[j].index()] += 1;
        }
        let own = labels[i].index();
        let a = sums[own] / counts[own].max(1) as f64;
        let b = (0..Genre::COUNT)
            .filter(|&g| g != own && counts[g] > 0)
            .map(|g| sums[g] / counts[g] as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}
