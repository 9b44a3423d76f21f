//! Binary feature store.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "GRMF" | version: u32 | count: u32 | dim: u32 (= 30)
//! count × ( id_len: u32 | id: UTF-8 bytes | genre: u8 | dim × f64 )
//! ```

use std::io::{self, Read, Write};
use std::path::Path;

use crate::{DenseMatrix, Genre, MFCC_DIM};

pub const FEATURE_MAGIC: &[u8; 4] = b"GRMF";
pub const FEATURE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported store version {0}")]
    UnsupportedVersion(u32),
    #[error("store is truncated")]
    Truncated,
    #[error("invalid genre index {0}")]
    InvalidGenre(u8),
    #[error("unexpected dimension {found}, expected {expected}")]
    BadDimension { expected: usize, found: usize },
    #[error("song id is not valid UTF-8")]
    InvalidUtf8,
    #[error("duplicate song id '{0}'")]
    DuplicateId(String),
    #[error("non-finite value in record '{0}'")]
    NonFinite(String),
    #[error("invalid store content: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for StoreError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            StoreError::Truncated
        } else {
            StoreError::Io(e)
        }
    }
}

pub type Result<T> = std::result::Result<T, StoreError>;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub song_id: String,
    pub genre: Genre,
    pub values: Vec<f64>,
}

/// Per-song MFCC vectors with genre labels, in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureStore {
    records: Vec<FeatureRecord>,
}

impl FeatureStore {
    pub fn new(records: Vec<FeatureRecord>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for r in &records {
            if r.values.len() != MFCC_DIM {
                return Err(StoreError::BadDimension {
                    expected: MFCC_DIM,
                    found: r.values.len(),
                });
            }
            if r.values.iter().any(|v| !v.is_finite()) {
                return Err(StoreError::NonFinite(r.song_id.clone()));
            }
            if !seen.insert(r.song_id.as_str()) {
                return Err(StoreError::DuplicateId(r.song_id.clone()));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.song_id.clone()).collect()
    }

    pub fn labels(&self) -> Vec<Genre> {
        self.records.iter().map(|r| r.genre).collect()
    }

    /// Songs × 30 feature matrix.
    pub fn feature_matrix(&self) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.records.len() * MFCC_DIM);
        for r in &self.records {
            data.extend_from_slice(&r.values);
        }
        DenseMatrix::new(self.records.len(), MFCC_DIM, data).expect("validated dimensions")
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(FEATURE_MAGIC)?;
        write_u32(&mut w, FEATURE_VERSION)?;
        write_u32(&mut w, len_u32(self.records.len())?)?;
        write_u32(&mut w, MFCC_DIM as u32)?;
        for r in &self.records {
            let id = r.song_id.as_bytes();
            write_u32(&mut w, len_u32(id.len())?)?;
            w.write_all(id)?;
            w.write_all(&[r.genre.index() as u8])?;
            for &v in &r.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        read_magic(&mut r, FEATURE_MAGIC)?;
        let version = read_u32(&mut r)?;
        if version != FEATURE_VERSION {
            return Err(StoreError::UnsupportedVersion(version));
        }
        let count = read_u32(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        if dim != MFCC_DIM {
            return Err(StoreError::BadDimension {
                expected: MFCC_DIM,
                found: dim,
            });
        }
        let mut records = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let id_len = read_u32(&mut r)? as usize;
            let mut id = vec![0u8; id_len];
            r.read_exact(&mut id)?;
            let song_id = String::from_utf8(id).map_err(|_| StoreError::InvalidUtf8)?;
            let mut g = [0u8; 1];
            r.read_exact(&mut g)?;
            let genre = Genre::from_index(usize::from(g[0])).ok_or(StoreError::InvalidGenre(g[0]))?;
            let values = (0..dim).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            records.push(FeatureRecord {
                song_id,
                genre,
                values,
            });
        }
        FeatureStore::new(records)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = io::Cursor::new(bytes);
        let store = Self::read_from(&mut cursor)?;
        if (cursor.position() as usize) != bytes.len() {
            return Err(StoreError::Invalid("trailing bytes after last record".into()));
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(StoreError::Io)?)
    }
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| StoreError::Invalid(format!("length {n} exceeds u32")))
}

pub(crate) fn read_magic(r: &mut impl Read, expected: &[u8; 4]) -> Result<()> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if &found != expected {
        return Err(StoreError::BadMagic {
            expected: *expected,
            found,
        });
    }
    Ok(())
}

pub(crate) fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
