use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The eight genre classes of the balanced corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Genre {
    Electronic,
    Experimental,
    Folk,
    #[serde(rename = "Hip-Hop")]
    HipHop,
    Instrumental,
    International,
    Pop,
    Rock,
}

impl Genre {
    pub const COUNT: usize = 8;

    pub const ALL: [Genre; Genre::COUNT] = [
        Genre::Electronic,
        Genre::Experimental,
        Genre::Folk,
        Genre::HipHop,
        Genre::Instrumental,
        Genre::International,
        Genre::Pop,
        Genre::Rock,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Genre> {
        Genre::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Genre::Electronic => "Electronic",
            Genre::Experimental => "Experimental",
            Genre::Folk => "Folk",
            Genre::HipHop => "Hip-Hop",
            Genre::Instrumental => "Instrumental",
            Genre::International => "International",
            Genre::Pop => "Pop",
            Genre::Rock => "Rock",
        }
    }

    /// Lowercase form used for directory and file names.
    pub fn slug(self) -> &'static str {
        match self {
            Genre::Electronic => "electronic",
            Genre::Experimental => "experimental",
            Genre::Folk => "folk",
            Genre::HipHop => "hiphop",
            Genre::Instrumental => "instrumental",
            Genre::International => "international",
            Genre::Pop => "pop",
            Genre::Rock => "rock",
        }
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown genre '{0}'")]
pub struct UnknownGenre(pub String);

impl FromStr for Genre {
    type Err = UnknownGenre;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Genre::ALL
            .into_iter()
            .find(|g| g.slug() == key)
            .ok_or_else(|| UnknownGenre(s.to_string()))
    }
}
