//! Dataset manifests and batch feature extraction.
//!
//! A manifest is a CSV file with the header `path,genre,split`. Relative
//! paths resolve against the manifest's directory, and the song id is the
//! path as written with its extension removed.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{extract_song_features, read_wav, AudioError, MfccConfig};
use crate::rng::{derive_seed, stream_of};
use crate::store::{FeatureRecord, FeatureStore, StoreError};
use crate::Genre;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("manifest lists '{0}' more than once")]
    DuplicatePath(String),
    #[error("invalid synthetic dataset spec: {0}")]
    InvalidSpec(String),
    #[error("manifest has no entries")]
    EmptyManifest,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{} of {total} files failed:{}", failures.len(), render_failures(failures))]
    Extraction {
        total: usize,
        failures: Vec<(String, AudioError)>,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

fn render_failures(failures: &[(String, AudioError)]) -> String {
    failures.iter().map(|(p, e)| format!("\n  {p}: {e}")).collect()
}

impl DatasetError {
    /// True when the failure comes from the inputs rather than the program.
    pub fn is_validation(&self) -> bool {
        match self {
            DatasetError::Io(_) => false,
            DatasetError::Store(StoreError::Io(_)) => false,
            DatasetError::Extraction { failures, .. } => {
                failures.iter().any(|(_, e)| !matches!(e, AudioError::Io(_)))
            }
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path as written in the manifest.
    pub path: String,
    pub genre: Genre,
    pub split: Option<String>,
}

impl ManifestEntry {
    pub fn song_id(&self) -> String {
        let p = Path::new(&self.path);
        match p.extension() {
            Some(ext) => self.path[..self.path.len() - ext.len() - 1].to_string(),
            None => self.path.clone(),
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    path: String,
    genre: String,
    #[serde(default)]
    split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths resolve against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, root: impl Into<PathBuf>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.path.as_str()) {
                return Err(DatasetError::DuplicatePath(e.path.clone()));
            }
        }
        Ok(Self {
            entries,
            root: root.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| DatasetError::Manifest { line, msg: e.to_string() })?;
            if row.path.is_empty() {
                return Err(DatasetError::Manifest {
                    line,
                    msg: "empty path".into(),
                });
            }
            let genre = row.genre.parse::<Genre>().map_err(|e| DatasetError::Manifest { line, msg: e.to_string() })?;
            entries.push(ManifestEntry {
                path: row.path,
                genre,
                split: row.split.filter(|s| !s.is_empty()),
            });
        }
        Self::new(entries, root)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, root)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(Row {
                path: e.path.clone(),
                genre: e.genre.name().to_string(),
                split: e.split.clone(),
            })
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Window seed of one song: independent of manifest order.
pub fn song_seed(seed: u64, song_id: &str) -> u64 {
    derive_seed(seed, stream_of(song_id))
}

/// Extracts one MFCC vector per manifest entry, in manifest order. Songs are
/// processed in parallel; every failing file is reported.
pub fn extract_features(manifest: &DatasetManifest, cfg: &MfccConfig, seed: u64) -> Result<FeatureStore> {
    if manifest.is_empty() {
        return Err(DatasetError::EmptyManifest);
    }
    cfg.validate().map_err(|e| DatasetError::Extraction {
        total: manifest.len(),
        failures: vec![("<config>".into(), e)],
    })?;
    let results: Vec<std::result::Result<FeatureRecord, (String, AudioError)>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let id = entry.song_id();
            let path = manifest.resolve(entry);
            let extract = || -> std::result::Result<Vec<f64>, AudioError> {
                let clip = read_wav(&path)?;
                Ok(extract_song_features(&clip, cfg, song_seed(seed, &id))?.values().to_vec())
            };
            extract()
                .map(|values| FeatureRecord {
                    song_id: id,
                    genre: entry.genre,
                    values,
                })
                .map_err(|e| (path.display().to_string(), e))
        })
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    if !failures.is_empty() {
        return Err(DatasetError::Extraction {
            total: manifest.len(),
            failures,
        });
    }
    Ok(FeatureStore::new(records)?)
}
