//! Game records, score aggregation, G-Score quantisation, genre grouping and
//! manifest ingestion.

mod genre;
mod manifest;
mod score;
mod stats;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use genre::{map_genre, GenreClass};
pub use manifest::{load_manifest, parse_manifest, ManifestRow};
pub use score::{
    aggregate_critic_score, aggregate_user_score, compute_gscore, quantize_gscore, GScore, ScoreInputs, NUM_CLASSES,
    WEIGHT_SUM_TOLERANCE,
};
pub use stats::{dataset_stats, StatsReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("MissingRatings: at least one rating is required")]
    MissingRatings,
    #[error("InvalidWeights: {0}")]
    InvalidWeights(String),
    #[error("InvalidScore: {0} is outside [0, 100]")]
    InvalidScore(f64),
    #[error("MalformedManifest: line {line}: {reason}")]
    MalformedManifest { line: usize, reason: String },
    #[error("DuplicateId: {0}")]
    DuplicateId(String),
    #[error("EmptyDataset")]
    EmptyDataset,
    #[error("Io: {0}")]
    Io(String),
}

/// Content age rating as shown on the storefront.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeRating {
    Mature,
    AdultsOnly,
    Everyone10Plus,
    Teen,
    Everyone,
    Other,
}

impl AgeRating {
    pub const ALL: [AgeRating; 6] = [
        AgeRating::Mature,
        AgeRating::AdultsOnly,
        AgeRating::Everyone10Plus,
        AgeRating::Teen,
        AgeRating::Everyone,
        AgeRating::Other,
    ];

    /// Accepts both the long names and the ESRB abbreviations; anything else is `Other`.
    pub fn parse(raw: &str) -> AgeRating {
        let norm: String = raw
            .trim()
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "mature" | "m" => AgeRating::Mature,
            "adultsonly" | "ao" => AgeRating::AdultsOnly,
            "everyone10+" | "everyone10plus" | "e10+" | "e10" => AgeRating::Everyone10Plus,
            "teen" | "t" => AgeRating::Teen,
            "everyone" | "e" => AgeRating::Everyone,
            _ => AgeRating::Other,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeRating::Mature => "Mature",
            AgeRating::AdultsOnly => "Adults Only",
            AgeRating::Everyone10Plus => "Everyone 10+",
            AgeRating::Teen => "Teen",
            AgeRating::Everyone => "Everyone",
            AgeRating::Other => "Other",
        }
    }
}

impl fmt::Display for AgeRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One game after ingestion. Scores are validated and the summary is ASCII.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub id: String,
    pub title: String,
    pub developer: String,
    pub age_rating: AgeRating,
    pub genre_raw: String,
    pub genre_class: GenreClass,
    pub user_score: f64,
    pub critic_score: f64,
    pub summary: String,
    pub trailer_ref: Option<PathBuf>,
    pub feature_ref: Option<PathBuf>,
}

impl GameRecord {
    pub fn gscore(&self) -> Result<GScore, DatasetError> {
        compute_gscore(self.user_score, self.critic_score)
    }

    /// Class label; ingestion guarantees the scores are in range.
    pub fn label(&self) -> usize {
        self.gscore().map(|g| g.class_index).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<GameRecord>,
    pub vocab_ref: Option<PathBuf>,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate ids.
    pub fn new(records: Vec<GameRecord>) -> Result<Self, DatasetError> {
        let mut seen = std::collections::HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self { records, vocab_ref: None })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(GameRecord::label).collect()
    }

    pub fn get(&self, id: &str) -> Option<&GameRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}
