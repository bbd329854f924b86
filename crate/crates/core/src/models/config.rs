use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::tensor::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Stacked LSTMs over per-frame features.
    M1,
    /// Shared per-frame encoder, pooled over time.
    M2,
    /// 3-D convolutions over raw frames.
    M3,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::M1, Variant::M2, Variant::M3];

    pub fn label(self) -> &'static str {
        match self {
            Variant::M1 => "Model-1",
            Variant::M2 => "Model-2",
            Variant::M3 => "Model-3",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "m1" | "model-1" | "1" => Some(Variant::M1),
            "m2" | "model-2" | "2" => Some(Variant::M2),
            "m3" | "model-3" | "3" => Some(Variant::M3),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    TrailerOnly,
    TrailerAndSummary,
}

impl Modality {
    pub fn label(self) -> &'static str {
        match self {
            Modality::TrailerOnly => "Trailer Only",
            Modality::TrailerAndSummary => "Trailer and Summary",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Modality::TrailerOnly => "trailer",
            Modality::TrailerAndSummary => "trailer+summary",
        }
    }

    pub fn parse(s: &str) -> Option<Modality> {
        match s.to_ascii_lowercase().as_str() {
            "trailer" | "trailer-only" | "traileronly" => Some(Modality::TrailerOnly),
            "trailer+summary" | "trailer-and-summary" | "both" | "multimodal" => Some(Modality::TrailerAndSummary),
            _ => None,
        }
    }

    pub fn uses_summary(self) -> bool {
        self == Modality::TrailerAndSummary
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub modality: Modality,
    pub embed_dim: usize,
    pub video_repr_dim: usize,
    pub text_repr_dim: usize,
    pub num_classes: usize,
    pub dropout: f64,
    pub lstm_layers: usize,
    /// One entry per text conv block; the first `text_pool_blocks` also max-pool.
    pub text_channels: Vec<usize>,
    pub text_kernel: usize,
    pub text_pool_blocks: usize,
    pub text_pool_width: usize,
    pub m2_channels: usize,
    pub m2_kernel: usize,
    pub m2_pool_width: usize,
    pub m2_frame_dim: usize,
    /// `[frames, height, width, channels]` of Model-3 clips.
    pub m3_frame_shape: [usize; 4],
    pub m3_channels: Vec<usize>,
    pub m3_kernel: [usize; 3],
    pub m3_pool: [usize; 3],
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without a lower training loss.
    pub patience: Option<usize>,
    pub adam: AdamConfig,
}

impl ModelConfig {
    pub fn new(variant: Variant, modality: Modality) -> Self {
        Self {
            variant,
            modality,
            embed_dim: 300,
            video_repr_dim: 512,
            text_repr_dim: 512,
            num_classes: 10,
            dropout: 0.5,
            lstm_layers: 2,
            text_channels: vec![128, 256, 256],
            text_kernel: 3,
            text_pool_blocks: 2,
            text_pool_width: 2,
            m2_channels: 8,
            m2_kernel: 3,
            m2_pool_width: 4,
            m2_frame_dim: 64,
            m3_frame_shape: [16, 64, 64, 3],
            m3_channels: vec![8, 16],
            m3_kernel: [3, 3, 3],
            m3_pool: [2, 2, 2],
            epochs: 25,
            batch_size: 32,
            patience: None,
            adam: AdamConfig::default(),
        }
    }

    /// Small sizes for tests and quick experiments.
    pub fn toy(variant: Variant, modality: Modality) -> Self {
        Self {
            embed_dim: 8,
            video_repr_dim: 8,
            text_repr_dim: 8,
            lstm_layers: 2,
            text_channels: vec![4, 4, 4],
            m2_channels: 2,
            m2_pool_width: 64,
            m2_frame_dim: 6,
            m3_frame_shape: [4, 10, 10, 2],
            m3_channels: vec![2, 3],
            m3_kernel: [2, 3, 3],
            m3_pool: [1, 2, 2],
            ..Self::new(variant, modality)
        }
    }

    pub fn with_modality(&self, modality: Modality) -> Self {
        Self { modality, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |s: String| Err(ModelError::Config(s));
        if self.num_classes != 10 {
            return bad(format!("num_classes must be 10, got {}", self.num_classes));
        }
        let dims = [
            ("embed_dim", self.embed_dim),
            ("video_repr_dim", self.video_repr_dim),
            ("text_repr_dim", self.text_repr_dim),
            ("lstm_layers", self.lstm_layers),
            ("text_kernel", self.text_kernel),
            ("text_pool_width", self.text_pool_width),
            ("m2_channels", self.m2_channels),
            ("m2_kernel", self.m2_kernel),
            ("m2_pool_width", self.m2_pool_width),
            ("m2_frame_dim", self.m2_frame_dim),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.text_channels.is_empty() || self.text_channels.contains(&0) {
            return bad("text_channels must be non-empty and positive".into());
        }
        if self.text_pool_blocks > self.text_channels.len() {
            return bad(format!(
                "text_pool_blocks {} exceeds the {} text blocks",
                self.text_pool_blocks,
                self.text_channels.len()
            ));
        }
        if self.m3_channels.is_empty() || self.m3_channels.contains(&0) {
            return bad("m3_channels must be non-empty and positive".into());
        }
        if self.m3_frame_shape.contains(&0) || self.m3_kernel.contains(&0) || self.m3_pool.contains(&0) {
            return bad("m3 shapes must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.patience == Some(0) {
            return bad("patience must be positive".into());
        }
        let a = &self.adam;
        if !(a.lr0 > 0.0
            && a.decay >= 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.eps > 0.0)
        {
            return bad(format!("invalid optimizer settings {a:?}"));
        }
        Ok(())
    }

    /// Width of the fusion head's input.
    pub fn head_input_width(&self) -> usize {
        self.video_repr_dim + if self.modality.uses_summary() { self.text_repr_dim } else { 0 }
    }

    /// Stable short hash of the configuration, for run names.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:08x}", crate::rng::stable_hash(&[json.as_bytes()]) as u32)
    }
}
