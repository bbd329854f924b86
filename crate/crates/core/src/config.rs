//! Run configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment line, blank lines
//! are ignored, and a key may appear only once. Lists are comma-separated.
//! Relative paths resolve against the file's directory. A `preset` key
//! (`full` or `toy`) is applied before every other key wherever it appears.
//!
//! ```text
//! # toy run on synthetic data
//! preset = toy
//! manifest = data/manifest.jsonl
//! features = data/features
//! seed = 7
//! variant = m1
//! modality = trailer+summary
//! text_channels = 16, 16, 16
//! ```

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::models::{Modality, ModelConfig, Variant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("ConfigError: line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("ConfigError: {0}")]
    Invalid(String),
    #[error("ConfigError: cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Everything a CLI job needs besides its command-specific flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub folds: usize,
    pub stratified: bool,
    pub model: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            features: None,
            out: None,
            seed: None,
            folds: 10,
            stratified: true,
            model: ModelConfig::new(Variant::M1, Modality::TrailerAndSummary),
        }
    }
}

/// Every key a configuration may set.
pub const KEYS: &[&str] = &[
    "preset",
    "manifest",
    "features",
    "out",
    "seed",
    "folds",
    "stratified",
    "variant",
    "modality",
    "embed_dim",
    "video_repr_dim",
    "text_repr_dim",
    "dropout",
    "lstm_layers",
    "text_channels",
    "text_kernel",
    "text_pool_blocks",
    "text_pool_width",
    "m2_channels",
    "m2_kernel",
    "m2_pool_width",
    "m2_frame_dim",
    "m3_frame_shape",
    "m3_channels",
    "m3_kernel",
    "m3_pool",
    "epochs",
    "batch_size",
    "patience",
    "lr",
    "decay",
    "beta1",
    "beta2",
    "eps",
];

/// `(line, key, value)` triples of a configuration text.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let Some((k, v)) = t.split_once('=') else {
            return Err(ConfigError::Malformed { line, reason: format!("expected `key = value`, got {t:?}") });
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError::Malformed { line, reason: format!("unknown key {k:?}") });
        }
        if v.is_empty() {
            return Err(ConfigError::Malformed { line, reason: format!("{k} has no value") });
        }
        if out.iter().any(|(_, seen, _)| seen == k) {
            return Err(ConfigError::Malformed { line, reason: format!("{k} is set twice") });
        }
        out.push((line, k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
}

fn list(key: &str, v: &str) -> Result<Vec<usize>, String> {
    v.split(',').map(|p| num(key, p.trim())).collect()
}

fn fixed<const N: usize>(key: &str, v: &str) -> Result<[usize; N], String> {
    let l = list(key, v)?;
    l.try_into().map_err(|l: Vec<usize>| format!("{key}: expected {N} values, got {}", l.len()))
}

fn boolean(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {v:?}")),
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })
}

impl RunConfig {
    /// Sets one key. Paths are joined onto `base` when relative.
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<(), String> {
        let path = |v: &str| {
            let p = PathBuf::from(v);
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        let m = &mut self.model;
        match key {
            "preset" => {
                let (variant, modality) = (m.variant, m.modality);
                *m = match value {
                    "full" | "default" => ModelConfig::new(variant, modality),
                    "toy" => ModelConfig::toy(variant, modality),
                    _ => return Err(format!("preset: expected full or toy, got {value:?}")),
                };
            }
            "manifest" => self.manifest = Some(path(value)),
            "features" => self.features = Some(path(value)),
            "out" => self.out = Some(path(value)),
            "seed" => self.seed = Some(num(key, value)?),
            "folds" => self.folds = num(key, value)?,
            "stratified" => self.stratified = boolean(key, value)?,
            "variant" => m.variant = Variant::parse(value).ok_or_else(|| format!("variant: unknown {value:?}"))?,
            "modality" => m.modality = Modality::parse(value).ok_or_else(|| format!("modality: unknown {value:?}"))?,
            "embed_dim" => m.embed_dim = num(key, value)?,
            "video_repr_dim" => m.video_repr_dim = num(key, value)?,
            "text_repr_dim" => m.text_repr_dim = num(key, value)?,
            "dropout" => m.dropout = num(key, value)?,
            "lstm_layers" => m.lstm_layers = num(key, value)?,
            "text_channels" => m.text_channels = list(key, value)?,
            "text_kernel" => m.text_kernel = num(key, value)?,
            "text_pool_blocks" => m.text_pool_blocks = num(key, value)?,
            "text_pool_width" => m.text_pool_width = num(key, value)?,
            "m2_channels" => m.m2_channels = num(key, value)?,
            "m2_kernel" => m.m2_kernel = num(key, value)?,
            "m2_pool_width" => m.m2_pool_width = num(key, value)?,
            "m2_frame_dim" => m.m2_frame_dim = num(key, value)?,
            "m3_frame_shape" => m.m3_frame_shape = fixed(key, value)?,
            "m3_channels" => m.m3_channels = list(key, value)?,
            "m3_kernel" => m.m3_kernel = fixed(key, value)?,
            "m3_pool" => m.m3_pool = fixed(key, value)?,
            "epochs" => m.epochs = num(key, value)?,
            "batch_size" => m.batch_size = num(key, value)?,
            "patience" => m.patience = if value == "none" { None } else { Some(num(key, value)?) },
            "lr" => m.adam.lr0 = num(key, value)?,
            "decay" => m.adam.decay = num(key, value)?,
            "beta1" => m.adam.beta1 = num(key, value)?,
            "beta2" => m.adam.beta2 = num(key, value)?,
            "eps" => m.adam.eps = num(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Applies a configuration text on top of `self`; presets go first.
    pub fn apply_text(&mut self, text: &str, base: Option<&Path>) -> Result<(), ConfigError> {
        let mut pairs = parse_pairs(text)?;
        pairs.sort_by_key(|(_, k, _)| k != "preset");
        for (line, k, v) in pairs {
            self.set(&k, &v, base).map_err(|reason| ConfigError::Malformed { line, reason })?;
        }
        Ok(())
    }

    /// A file's keys (if any) with `overrides` on top. The winning preset
    /// is applied first, then the file, then the overrides in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut pairs = match file {
            Some(path) => parse_pairs(&read(path)?)?,
            None => Vec::new(),
        };
        let mut c = Self::default();
        let preset = overrides.iter().rev().find(|(k, _)| k == "preset").map(|(_, v)| v.clone());
        let file_preset = pairs.iter().position(|(_, k, _)| k == "preset").map(|i| pairs.remove(i));
        match (preset, file_preset) {
            (Some(v), _) => c.set("preset", &v, None).map_err(ConfigError::Invalid)?,
            (None, Some((line, _, v))) => {
                c.set("preset", &v, None).map_err(|reason| ConfigError::Malformed { line, reason })?
            }
            (None, None) => {}
        }
        let base = file.and_then(Path::parent);
        for (line, k, v) in pairs {
            c.set(&k, &v, base).map_err(|reason| ConfigError::Malformed { line, reason })?;
        }
        for (k, v) in overrides.iter().filter(|(k, _)| k != "preset") {
            if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError::Invalid(format!("unknown key {k:?}")));
            }
            c.set(k, v, None).map_err(ConfigError::Invalid)?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        let mut c = Self::default();
        c.apply_text(&text, path.parent())?;
        Ok(c)
    }

    /// Folds, model config and everything else the jobs need checked up front.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.folds < 2 {
            return Err(ConfigError::Invalid(format!("folds must be at least 2, got {}", self.folds)));
        }
        self.model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
