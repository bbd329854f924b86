//! Training, evaluation, k-fold cross-validation and the modality ablation.
//!
//! All randomness derives from one seed through named substreams: `folds`
//! for the partition, `init.fold<i>` for each fold's initial weights and
//! `train.fold<i>` (itself split into `shuffle` and `dropout`) for training.
//! Both arms of an ablation therefore share folds, seeds and video weights.

mod fit;
mod folds;
mod report;

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub use fit::{accuracy, argmax, evaluate, predict_classes, train, TrainOutcome};
pub use folds::{make_folds, FoldPlan};
pub use report::{render_ablation_table, AblationReport, FoldReport};

use crate::dataset::{Dataset, DatasetError, GameRecord};
use crate::models::{build_model, Modality, ModelConfig, ModelError, ModelInput, Variant, VideoInput};
use crate::rng::substream_seed;
use crate::tensor::TensorError;
use crate::text::{build_vocab, encode_summary, tokenize, EncodedSummary, Vocab, OOV};
use crate::trailer::{clip_from_features, read_feature_file, FeatureFileError, FrameFeatureMatrix, RawClip};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("TooFewSamples: {samples} samples for {k} folds")]
    TooFewSamples { samples: usize, k: usize },
    #[error("FeatureUnavailable: {0}")]
    FeatureUnavailable(String),
    #[error("{0}")]
    FeatureFile(String),
    #[error("EmptyTrainingSet: nothing to train or evaluate on")]
    EmptyTrainingSet,
    #[error("VocabLeakage: {0}")]
    VocabLeakage(String),
    #[error("AblationMismatch: {0}")]
    AblationMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Model(ModelError::Tensor(e))
    }
}

/// Per-frame features of a game's trailer.
pub trait VideoSource: Sync {
    fn load(&self, record: &GameRecord) -> Result<FrameFeatureMatrix, TrainError>;
}

/// VGDF files: the record's `feature_ref`, else `<dir>/<id>.vgdf`.
#[derive(Debug, Clone, Default)]
pub struct FeatureFiles {
    pub dir: Option<PathBuf>,
}

impl FeatureFiles {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    pub fn path_for(&self, record: &GameRecord) -> Option<PathBuf> {
        record.feature_ref.clone().or_else(|| self.dir.as_ref().map(|d| d.join(format!("{}.vgdf", record.id))))
    }
}

impl VideoSource for FeatureFiles {
    fn load(&self, record: &GameRecord) -> Result<FrameFeatureMatrix, TrainError> {
        let path = self.path_for(record).ok_or_else(|| TrainError::FeatureUnavailable(record.id.clone()))?;
        match read_feature_file(&path) {
            Ok(m) => Ok(m),
            Err(FeatureFileError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(TrainError::FeatureUnavailable(record.id.clone()))
            }
            Err(e) => Err(TrainError::FeatureFile(format!("{e} ({})", path.display()))),
        }
    }
}

/// Features held in memory, keyed by game id.
#[derive(Debug, Clone, Default)]
pub struct InMemoryFeatures(pub HashMap<String, FrameFeatureMatrix>);

impl VideoSource for InMemoryFeatures {
    fn load(&self, record: &GameRecord) -> Result<FrameFeatureMatrix, TrainError> {
        self.0.get(&record.id).cloned().ok_or_else(|| TrainError::FeatureUnavailable(record.id.clone()))
    }
}

/// Video input in the form the configured variant consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum VideoData {
    Features(FrameFeatureMatrix),
    Clip(RawClip),
}

impl VideoData {
    /// Model-3 gets a clip rendered from the features (no decoded frames exist here).
    pub fn for_config(config: &ModelConfig, m: FrameFeatureMatrix) -> Self {
        match config.variant {
            Variant::M1 | Variant::M2 => VideoData::Features(m),
            Variant::M3 => VideoData::Clip(clip_from_features(&m, config.m3_frame_shape)),
        }
    }

    pub fn as_input(&self) -> VideoInput<'_> {
        match self {
            VideoData::Features(m) => VideoInput::Features(m),
            VideoData::Clip(c) => VideoInput::Clip(c),
        }
    }
}

/// One labelled training or evaluation example.
#[derive(Debug, Clone)]
pub struct Sample<'a> {
    pub video: &'a VideoData,
    pub summary: Option<EncodedSummary>,
    pub label: usize,
}

impl Sample<'_> {
    pub fn input(&self) -> ModelInput<'_> {
        ModelInput { video: self.video.as_input(), summary: self.summary.as_ref() }
    }
}

pub fn load_videos(
    dataset: &Dataset,
    config: &ModelConfig,
    source: &dyn VideoSource,
) -> Result<Vec<VideoData>, TrainError> {
    dataset.records.iter().map(|r| Ok(VideoData::for_config(config, source.load(r)?))).collect()
}

/// Fails if the vocabulary holds a word absent from the training documents,
/// or if some validation-only word encodes to anything but OOV.
pub fn check_no_leakage(vocab: &Vocab, train_docs: &[&[String]], val_docs: &[&[String]]) -> Result<(), TrainError> {
    let seen: HashSet<&str> = train_docs.iter().flat_map(|d| d.iter().map(String::as_str)).collect();
    if let Some(w) = vocab.words().iter().find(|w| !seen.contains(w.as_str())) {
        return Err(TrainError::VocabLeakage(format!("vocabulary word {w:?} is not in the training split")));
    }
    for doc in val_docs {
        for w in doc.iter().filter(|w| !seen.contains(w.as_str())) {
            if vocab.index_of(w) != OOV {
                return Err(TrainError::VocabLeakage(format!("validation-only word {w:?} has an index")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl CvOptions {
    pub fn new(seed: u64) -> Self {
        Self { k: 10, seed, stratified: true }
    }
}

/// Seed of fold `fold`'s initial weights; shared by both modalities.
pub fn init_seed(seed: u64, fold: usize) -> u64 {
    substream_seed(seed, &format!("init.fold{fold}"))
}

fn train_seed(seed: u64, fold: usize) -> u64 {
    substream_seed(seed, &format!("train.fold{fold}"))
}

struct FoldOutcome {
    accuracy: f64,
    size: usize,
    final_loss: Option<f64>,
    epochs_run: usize,
}

fn run_fold(
    config: &ModelConfig,
    plan: &FoldPlan,
    fold: usize,
    videos: &[VideoData],
    docs: &[Vec<String>],
    labels: &[usize],
) -> Result<FoldOutcome, TrainError> {
    let train_idx = plan.training(fold);
    let val_idx = plan.validation(fold);
    if train_idx.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let (vocab, vocab_size) = if config.modality.uses_summary() {
        let train_docs: Vec<&[String]> = train_idx.iter().map(|&i| docs[i].as_slice()).collect();
        let val_docs: Vec<&[String]> = val_idx.iter().map(|&i| docs[i].as_slice()).collect();
        let vocab = build_vocab(&train_docs);
        check_no_leakage(&vocab, &train_docs, &val_docs)?;
        let size = vocab.table_size();
        (Some(vocab), size)
    } else {
        (None, 0)
    };
    let samples = |idx: &[usize]| -> Vec<Sample<'_>> {
        idx.iter()
            .map(|&i| Sample {
                video: &videos[i],
                summary: vocab.as_ref().map(|v| encode_summary(&docs[i], v)),
                label: labels[i],
            })
            .collect()
    };
    let model = build_model(config, vocab_size, init_seed(plan.seed, fold))?;
    let outcome = train(model, &samples(&train_idx), train_seed(plan.seed, fold))?;
    let accuracy = evaluate(&outcome.model, &samples(val_idx))?;
    Ok(FoldOutcome {
        accuracy,
        size: val_idx.len(),
        final_loss: outcome.loss_history.last().copied(),
        epochs_run: outcome.loss_history.len(),
    })
}

/// Trains a fresh model per fold (with a vocabulary from that fold's training
/// split) and evaluates it on the held-out fold. Folds run in parallel and
/// are merged in fold order.
pub fn cross_validate(
    dataset: &Dataset,
    config: &ModelConfig,
    source: &dyn VideoSource,
    opts: &CvOptions,
) -> Result<FoldReport, TrainError> {
    let videos = load_videos(dataset, config, source)?;
    cross_validate_loaded(dataset, config, &videos, opts)
}

/// [`cross_validate`] with the videos already loaded, in dataset order.
pub fn cross_validate_loaded(
    dataset: &Dataset,
    config: &ModelConfig,
    videos: &[VideoData],
    opts: &CvOptions,
) -> Result<FoldReport, TrainError> {
    let started = Instant::now();
    config.validate()?;
    let labels = dataset.labels();
    let plan = make_folds(&labels, opts.k, opts.seed, opts.stratified)?;
    let docs: Vec<Vec<String>> = dataset.records.iter().map(|r| tokenize(&r.summary)).collect();
    let outcomes: Vec<FoldOutcome> = (0..plan.k)
        .into_par_iter()
        .map(|f| run_fold(config, &plan, f, videos, &docs, &labels))
        .collect::<Result<_, _>>()?;
    let fold_accuracies: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    Ok(FoldReport {
        variant: config.variant,
        modality: config.modality,
        k: plan.k,
        seed: opts.seed,
        stratified: plan.stratified,
        per_fold_vocab: true,
        epochs: config.epochs,
        batch_size: config.batch_size,
        config_fingerprint: config.fingerprint(),
        fold_sizes: outcomes.iter().map(|o| o.size).collect(),
        epochs_run: outcomes.iter().map(|o| o.epochs_run).collect(),
        final_losses: outcomes.iter().map(|o| o.final_loss).collect(),
        fold_accuracies,
        mean_accuracy,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Cross-validates both modalities with the same folds and seeds;
/// the improvement is in percentage points.
pub fn ablate(
    dataset: &Dataset,
    config: &ModelConfig,
    source: &dyn VideoSource,
    opts: &CvOptions,
) -> Result<AblationReport, TrainError> {
    let videos = load_videos(dataset, config, source)?;
    ablate_loaded(dataset, config, &videos, opts)
}

pub fn ablate_loaded(
    dataset: &Dataset,
    config: &ModelConfig,
    videos: &[VideoData],
    opts: &CvOptions,
) -> Result<AblationReport, TrainError> {
    let unimodal = config.with_modality(Modality::TrailerOnly);
    let multimodal = config.with_modality(Modality::TrailerAndSummary);
    check_shared_video_init(&unimodal, &multimodal, opts.seed)?;
    let trailer_only = cross_validate_loaded(dataset, &unimodal, videos, opts)?;
    let trailer_and_summary = cross_validate_loaded(dataset, &multimodal, videos, opts)?;
    Ok(AblationReport::new(trailer_only, trailer_and_summary))
}

/// Both arms must start from identical video-branch weights.
fn check_shared_video_init(a: &ModelConfig, b: &ModelConfig, seed: u64) -> Result<(), TrainError> {
    let ma = build_model(a, 2, init_seed(seed, 0))?;
    let mb = build_model(b, 2, init_seed(seed, 0))?;
    if ma.video_params() != mb.video_params() {
        return Err(TrainError::AblationMismatch("video-branch initial weights differ between modalities".into()));
    }
    Ok(())
}

/// Trains one model on the whole dataset, with a vocabulary from every summary.
pub fn train_on_dataset(
    dataset: &Dataset,
    config: &ModelConfig,
    source: &dyn VideoSource,
    seed: u64,
) -> Result<(TrainOutcome, Option<Vocab>), TrainError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let videos = load_videos(dataset, config, source)?;
    let docs: Vec<Vec<String>> = dataset.records.iter().map(|r| tokenize(&r.summary)).collect();
    let vocab = config.modality.uses_summary().then(|| build_vocab(&docs));
    let labels = dataset.labels();
    let samples: Vec<Sample<'_>> = (0..videos.len())
        .map(|i| Sample {
            video: &videos[i],
            summary: vocab.as_ref().map(|v| encode_summary(&docs[i], v)),
            label: labels[i],
        })
        .collect();
    let vocab_size = vocab.as_ref().map_or(0, Vocab::table_size);
    let model = build_model(config, vocab_size, substream_seed(seed, "init"))?;
    let outcome = train(model, &samples, substream_seed(seed, "train"))?;
    Ok((outcome, vocab))
}

/// Deterministic file stem of a run's report.
pub fn report_stem(kind: &str, config: &ModelConfig, seed: u64) -> String {
    format!(
        "{kind}-{}-{}-seed{seed}-{}",
        format!("{:?}", config.variant).to_ascii_lowercase(),
        config.modality.slug().replace('+', "-"),
        config.fingerprint()
    )
}

/// Vocabulary file kept next to a model file.
pub fn vocab_path_for(model_path: &Path) -> PathBuf {
    model_path.with_extension("vocab")
}
