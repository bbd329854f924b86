//! The three fusion architectures.
//!
//! Every model has a video branch producing a `[1, video_repr_dim]` vector,
//! an optional text branch producing `[1, text_repr_dim]`, and a head that
//! concatenates them and projects to 10 logits.
//!
//! - Model-1: stacked LSTMs over the `M × 2048` feature sequence; the top
//!   layer's last state is the video vector.
//! - Model-2: one shared conv/dense encoder applied to each frame's features,
//!   mean-pooled over time, then a dense projection.
//! - Model-3: 3-D convolutions over a small raw clip.
//!
//! The text branch embeds the 100 summary tokens, runs conv blocks (the first
//! ones max-pool) and projects densely.

mod config;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{Modality, ModelConfig, Variant};

use crate::rng::substream;
use crate::tensor::{
    grad_check, softmax, Adam, Checkpoint, ForwardCtx, GradCheckOptions, GradCheckReport, Graph, Layer, LayerSpec,
    ParamStore, Real, Tensor, TensorError, Var,
};
use crate::text::{EncodedSummary, SUMMARY_LEN};
use crate::trailer::{FrameFeatureMatrix, RawClip, FEATURE_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("ModalityError: {0}")]
    Modality(String),
    #[error("EmptyTrailer: the trailer has no frames")]
    EmptyTrailer,
    #[error("CheckpointMismatch: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// What the video branch consumes.
#[derive(Debug, Clone, Copy)]
pub enum VideoInput<'a> {
    /// Model-1 and Model-2.
    Features(&'a FrameFeatureMatrix),
    /// Model-3.
    Clip(&'a RawClip),
}

#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    pub video: VideoInput<'a>,
    pub summary: Option<&'a EncodedSummary>,
}

fn video_specs(c: &ModelConfig) -> Vec<LayerSpec> {
    let drop = LayerSpec::Dropout { rate: c.dropout };
    match c.variant {
        Variant::M1 => {
            let mut v: Vec<LayerSpec> = (0..c.lstm_layers)
                .map(|i| LayerSpec::Lstm {
                    inputs: if i == 0 { FEATURE_DIM } else { c.video_repr_dim },
                    hidden: c.video_repr_dim,
                })
                .collect();
            v.extend([LayerSpec::LastStep, drop]);
            v
        }
        Variant::M2 => {
            let conv_len = (FEATURE_DIM + 1).saturating_sub(c.m2_kernel);
            let pooled = conv_len / c.m2_pool_width * c.m2_channels;
            vec![
                LayerSpec::TimeDistributed {
                    frame_shape: vec![FEATURE_DIM, 1],
                    inner: vec![
                        LayerSpec::Conv1D { in_channels: 1, out_channels: c.m2_channels, kernel: c.m2_kernel },
                        LayerSpec::Tanh,
                        LayerSpec::MaxPool1D { width: c.m2_pool_width },
                        LayerSpec::Flatten,
                        LayerSpec::Dense { inputs: pooled, outputs: c.m2_frame_dim },
                        LayerSpec::Tanh,
                    ],
                },
                LayerSpec::MeanOverTime,
                LayerSpec::Dense { inputs: c.m2_frame_dim, outputs: c.video_repr_dim },
                LayerSpec::Tanh,
                drop,
            ]
        }
        Variant::M3 => {
            let mut v = Vec::new();
            let mut shape = c.m3_frame_shape.to_vec();
            for &ch in &c.m3_channels {
                v.push(LayerSpec::Conv3D { in_channels: shape[3], out_channels: ch, kernel: c.m3_kernel });
                v.push(LayerSpec::Tanh);
                v.push(LayerSpec::MaxPool3D { window: c.m3_pool });
                // sizes are checked later by `check_shapes`
                shape =
                    [0, 1, 2].iter().map(|&a| (shape[a] + 1).saturating_sub(c.m3_kernel[a]) / c.m3_pool[a]).collect();
                shape.push(ch);
            }
            let flat: usize = shape.iter().product();
            v.extend([
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: flat.max(1), outputs: c.video_repr_dim },
                LayerSpec::Tanh,
                drop,
            ]);
            v
        }
    }
}

fn text_specs(c: &ModelConfig, vocab_size: usize) -> Vec<LayerSpec> {
    let mut v = vec![LayerSpec::Embedding { vocab: vocab_size, dim: c.embed_dim }];
    let (mut len, mut ch) = (SUMMARY_LEN, c.embed_dim);
    for (i, &out) in c.text_channels.iter().enumerate() {
        v.push(LayerSpec::Conv1D { in_channels: ch, out_channels: out, kernel: c.text_kernel });
        v.push(LayerSpec::Tanh);
        len = (len + 1).saturating_sub(c.text_kernel);
        if i < c.text_pool_blocks {
            v.push(LayerSpec::MaxPool1D { width: c.text_pool_width });
            len /= c.text_pool_width;
        }
        v.push(LayerSpec::Dropout { rate: c.dropout });
        ch = out;
    }
    v.extend([
        LayerSpec::Flatten,
        LayerSpec::Dense { inputs: (len * ch).max(1), outputs: c.text_repr_dim },
        LayerSpec::Tanh,
        LayerSpec::Dropout { rate: c.dropout },
    ]);
    v
}

fn head_specs(c: &ModelConfig) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Concat,
        LayerSpec::Dense { inputs: c.head_input_width(), outputs: c.num_classes },
        LayerSpec::Softmax,
    ]
}

fn propagate(specs: &[LayerSpec], mut shape: Vec<usize>, branch: &str) -> Result<Vec<usize>, ModelError> {
    for (i, s) in specs.iter().enumerate() {
        shape = s
            .output_shape(&shape)
            .map_err(|e| ModelError::Config(format!("{branch} layer {i} ({}): {e}", s.kind())))?;
    }
    Ok(shape)
}

/// Static shape check of the whole stack for `num_frames` input frames
/// (ignored by Model-3); returns the output shape, `[1, 10]` when valid.
pub fn check_shapes(config: &ModelConfig, vocab_size: usize, num_frames: usize) -> Result<Vec<usize>, ModelError> {
    config.validate()?;
    let video_in = match config.variant {
        Variant::M1 | Variant::M2 => vec![num_frames, FEATURE_DIM],
        Variant::M3 => config.m3_frame_shape.to_vec(),
    };
    let video = propagate(&video_specs(config), video_in, "video")?;
    let mut parts = vec![video];
    if config.modality.uses_summary() {
        parts.push(propagate(&text_specs(config, vocab_size), vec![SUMMARY_LEN], "text")?);
    }
    let fused = LayerSpec::concat_shape(&parts)?;
    propagate(&head_specs(config)[1..], fused, "head")
}

/// A model's layer structure and its 32-bit parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltModel {
    config: ModelConfig,
    vocab_size: usize,
    video: Vec<Layer>,
    text: Option<Vec<Layer>>,
    head: Vec<Layer>,
    params: ParamStore<f32>,
}

fn build_stack(
    specs: Vec<LayerSpec>,
    branch: &str,
    store: &mut ParamStore<f32>,
    seed: u64,
) -> Result<Vec<Layer>, ModelError> {
    let mut rng = substream(seed, &format!("init.{branch}"));
    let mut out = Vec::with_capacity(specs.len());
    for (i, s) in specs.into_iter().enumerate() {
        let name = format!("{branch}.{i}.{}", s.kind());
        out.push(Layer::build(s, &name, store, &mut rng)?);
    }
    Ok(out)
}

/// Validates `config`, checks every shape statically and initialises the
/// parameters from `seed`. Each branch draws from its own substream, so the
/// video weights do not depend on the modality.
pub fn build_model(config: &ModelConfig, vocab_size: usize, seed: u64) -> Result<BuiltModel, ModelError> {
    if config.modality.uses_summary() && vocab_size < 2 {
        return Err(ModelError::Config(format!("vocabulary table of {vocab_size} rows has no room for PAD and OOV")));
    }
    check_shapes(config, vocab_size, 1)?;
    let mut params = ParamStore::new();
    let video = build_stack(video_specs(config), "video", &mut params, seed)?;
    let text = match config.modality {
        Modality::TrailerAndSummary => Some(build_stack(text_specs(config, vocab_size), "text", &mut params, seed)?),
        Modality::TrailerOnly => None,
    };
    let head = build_stack(head_specs(config), "head", &mut params, seed)?;
    Ok(BuiltModel { config: config.clone(), vocab_size, video, text, head, params })
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    config: ModelConfig,
    vocab_size: usize,
}

impl BuiltModel {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Rows of the embedding table (vocabulary words plus PAD and OOV).
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn params(&self) -> &ParamStore<f32> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<f32> {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn head_input_width(&self) -> usize {
        self.config.head_input_width()
    }

    /// Every layer spec in video, text, head order.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.video.iter().chain(self.text.iter().flatten()).chain(&self.head).map(|l| l.spec().clone()).collect()
    }

    /// Names and values of the video branch's parameters.
    pub fn video_params(&self) -> Vec<(&str, &Tensor<f32>)> {
        self.params
            .entries()
            .iter()
            .filter(|e| e.name.starts_with("video."))
            .map(|e| (e.name.as_str(), &e.value))
            .collect()
    }

    /// Zeroes the output layer so every input gets uniform probabilities.
    pub fn zero_head(&mut self) {
        for e in self.params.entries_mut() {
            if e.name.starts_with("head.") {
                e.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    /// Checks that `input` fits this model; returns the video tensor.
    fn video_tensor<T: Real>(&self, input: &ModelInput<'_>) -> Result<Tensor<T>, ModelError> {
        match (self.config.modality.uses_summary(), input.summary.is_some()) {
            (true, false) => return Err(ModelError::Modality("this model needs a summary".into())),
            (false, true) => return Err(ModelError::Modality("trailer-only model was given a summary".into())),
            _ => {}
        }
        match (self.config.variant, input.video) {
            (Variant::M1 | Variant::M2, VideoInput::Features(m)) => {
                if m.num_frames() == 0 {
                    return Err(ModelError::EmptyTrailer);
                }
                let t = Tensor::new(vec![m.num_frames(), FEATURE_DIM], m.features().to_vec())?;
                Ok(t.cast())
            }
            (Variant::M3, VideoInput::Clip(clip)) => {
                if clip.shape != self.config.m3_frame_shape {
                    return Err(ModelError::Config(format!(
                        "clip shape {:?} does not match m3_frame_shape {:?}",
                        clip.shape, self.config.m3_frame_shape
                    )));
                }
                Ok(Tensor::new(clip.shape.to_vec(), clip.data.clone())?.cast())
            }
            (Variant::M3, VideoInput::Features(_)) => Err(ModelError::Config(format!(
                "Model-3 consumes raw clips of shape {:?}, not frame features",
                self.config.m3_frame_shape
            ))),
            (v, VideoInput::Clip(_)) => Err(ModelError::Config(format!("{v} consumes frame features, not raw clips"))),
        }
    }

    /// Records the forward pass up to the `[1, 10]` logits.
    pub fn logits<T: Real>(
        &self,
        g: &mut Graph<T>,
        input: &ModelInput<'_>,
        ctx: &mut ForwardCtx<'_>,
    ) -> Result<Var, ModelError> {
        let video = self.video_tensor::<T>(input)?;
        let mut v = g.input(video);
        for l in &self.video {
            v = l.forward(g, v, ctx)?;
        }
        let mut parts = vec![v];
        if let (Some(text), Some(summary)) = (&self.text, input.summary) {
            let mut t = text[0].embed(g, summary.indices())?;
            for l in &text[1..] {
                t = l.forward(g, t, ctx)?;
            }
            parts.push(t);
        }
        let fused = self.head[0].forward_many(g, &parts)?;
        Ok(self.head[1].forward(g, fused, ctx)?)
    }

    /// Cross-entropy of one example against `class`.
    pub fn loss<T: Real>(
        &self,
        g: &mut Graph<T>,
        input: &ModelInput<'_>,
        class: usize,
        ctx: &mut ForwardCtx<'_>,
    ) -> Result<Var, ModelError> {
        let logits = self.logits(g, input, ctx)?;
        Ok(g.softmax_cross_entropy(logits, class)?)
    }

    /// Class probabilities in eval mode.
    pub fn predict(&self, input: &ModelInput<'_>) -> Result<Vec<f64>, ModelError> {
        let mut g = Graph::new(&self.params);
        let logits = self.logits(&mut g, input, &mut ForwardCtx::eval())?;
        let z: Vec<f64> = g.value(logits).data().iter().map(|&v| f64::from(v)).collect();
        Ok(softmax(&z))
    }

    /// Finite-difference check of every parameter gradient of the loss on
    /// one example, at 64-bit with dropout off.
    pub fn grad_check(
        &self,
        input: &ModelInput<'_>,
        class: usize,
        opts: GradCheckOptions,
    ) -> Result<GradCheckReport, ModelError> {
        self.video_tensor::<f64>(input)?;
        let params: ParamStore<f64> = self.params.cast();
        let report = grad_check(
            &params,
            |g| {
                self.loss(g, input, class, &mut ForwardCtx::eval()).map_err(|e| match e {
                    ModelError::Tensor(t) => t,
                    other => TensorError::InvalidLayer(other.to_string()),
                })
            },
            opts,
        )?;
        Ok(report)
    }

    pub fn to_checkpoint(&self, adam: Option<&Adam<f32>>) -> Checkpoint {
        let meta = CheckpointMeta { config: self.config.clone(), vocab_size: self.vocab_size };
        Checkpoint {
            metadata: serde_json::to_string(&meta).expect("metadata serializes"),
            layers: self.layer_specs(),
            params: self.params.clone(),
            adam: adam.cloned(),
        }
    }

    /// Rebuilds the model a checkpoint describes and loads its parameters.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(BuiltModel, Option<Adam<f32>>), ModelError> {
        let meta: CheckpointMeta =
            serde_json::from_str(&ck.metadata).map_err(|e| ModelError::Checkpoint(format!("metadata: {e}")))?;
        let mut model = build_model(&meta.config, meta.vocab_size, 0)?;
        if model.layer_specs() != ck.layers {
            return Err(ModelError::Checkpoint("layer list differs from the configuration".into()));
        }
        if model.params.len() != ck.params.len() {
            return Err(ModelError::Checkpoint(format!(
                "{} parameter tensors, expected {}",
                ck.params.len(),
                model.params.len()
            )));
        }
        for (mine, theirs) in model.params.entries_mut().iter_mut().zip(ck.params.entries()) {
            if mine.name != theirs.name || mine.value.shape() != theirs.value.shape() {
                return Err(ModelError::Checkpoint(format!(
                    "parameter {} {:?} does not match {} {:?}",
                    theirs.name,
                    theirs.value.shape(),
                    mine.name,
                    mine.value.shape()
                )));
            }
            if theirs.value.data().iter().any(|v| !v.is_finite()) {
                return Err(ModelError::Checkpoint(format!("parameter {} has non-finite values", theirs.name)));
            }
            mine.value = theirs.value.clone();
        }
        Ok((model, ck.adam.clone()))
    }
}
