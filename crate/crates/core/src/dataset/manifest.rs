//! Line-delimited JSON manifest.
//!
//! One object per line:
//!
//! ```text
//! {"id":"g1","title":"...","developer":"...","age_rating":"Teen","genre":"Action",
//!  "user_score":85,"critic_score":90,"summary":"...","trailer_ref":null,"feature_ref":"g1.vgdf"}
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. Scores must already be
//! on the 0-100 scale; they are validated, never rescaled.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{compute_gscore, map_genre, AgeRating, Dataset, DatasetError, GameRecord};
use crate::text::clean_summary;

/// Wire form of one manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRow {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub developer: String,
    #[serde(default)]
    pub age_rating: String,
    pub genre: String,
    pub user_score: f64,
    pub critic_score: f64,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub trailer_ref: Option<PathBuf>,
    #[serde(default)]
    pub feature_ref: Option<PathBuf>,
}

impl ManifestRow {
    pub fn into_record(self) -> Result<GameRecord, DatasetError> {
        compute_gscore(self.user_score, self.critic_score)?;
        Ok(GameRecord {
            genre_class: map_genre(&self.genre),
            age_rating: AgeRating::parse(&self.age_rating),
            summary: clean_summary(&self.summary),
            id: self.id,
            title: self.title,
            developer: self.developer,
            genre_raw: self.genre,
            user_score: self.user_score,
            critic_score: self.critic_score,
            trailer_ref: self.trailer_ref,
            feature_ref: self.feature_ref,
        })
    }

    pub fn from_record(r: &GameRecord) -> Self {
        Self {
            id: r.id.clone(),
            title: r.title.clone(),
            developer: r.developer.clone(),
            age_rating: r.age_rating.label().to_string(),
            genre: r.genre_raw.clone(),
            user_score: r.user_score,
            critic_score: r.critic_score,
            summary: r.summary.clone(),
            trailer_ref: r.trailer_ref.clone(),
            feature_ref: r.feature_ref.clone(),
        }
    }
}

/// Parses manifest text. Line numbers in errors are 1-based.
pub fn parse_manifest(text: &str) -> Result<Dataset, DatasetError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row: ManifestRow = serde_json::from_str(trimmed)
            .map_err(|e| DatasetError::MalformedManifest { line: i + 1, reason: e.to_string() })?;
        if row.id.is_empty() {
            return Err(DatasetError::MalformedManifest { line: i + 1, reason: "empty id".into() });
        }
        let record = row.into_record()?;
        if !seen.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(Dataset { records, vocab_ref: None })
}

/// Reads and parses a manifest. Relative `trailer_ref`/`feature_ref` paths are
/// resolved against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes).map_err(|e| {
        // report the line holding the first invalid byte
        let line = 1 + e.as_bytes()[..e.utf8_error().valid_up_to()].iter().filter(|&&b| b == b'\n').count();
        DatasetError::MalformedManifest { line, reason: "invalid UTF-8".into() }
    })?;
    let mut ds = parse_manifest(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for r in &mut ds.records {
        for p in [&mut r.trailer_ref, &mut r.feature_ref].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    Ok(ds)
}
