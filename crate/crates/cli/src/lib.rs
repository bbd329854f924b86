//! The `vgd` command line.
//!
//! Every subcommand reads an optional run configuration (`--config`, or the
//! `VGD_CONFIG` environment variable) and lets flags override its keys.
//! Errors are printed as `error: <Name>: <detail>` and exit with status 1;
//! usage errors exit with status 2.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};

use vgd_core::config::RunConfig;
use vgd_core::dataset::{dataset_stats, load_manifest, Dataset, ManifestRow, StatsReport};
use vgd_core::models::{build_model, BuiltModel, Modality, ModelInput, Variant, VideoInput};
use vgd_core::rng::substream_seed;
use vgd_core::synthetic::{generate, SummaryMode, SyntheticSpec};
use vgd_core::tensor::{check_every_layer_kind, load_checkpoint, save_checkpoint, GradCheckOptions};
use vgd_core::text::{build_vocab, encode_text, tokenize, Vocab};
use vgd_core::trailer::{
    atomic_write, clamp_frame_count, select_frames, synth_clip, synth_features, write_feature_file,
    FrameSelectionParams,
};
use vgd_core::train::{
    ablate, accuracy, cross_validate, predict_classes, render_ablation_table, report_stem, train_on_dataset,
    vocab_path_for, CvOptions, FeatureFiles, Sample, VideoData, VideoSource,
};
use vgd_core::ModelConfig;

pub const CONFIG_ENV: &str = "VGD_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "vgd", version, about = "Predict a video game's G-Score class from its trailer and summary")]
pub struct Cli {
    /// Run configuration file (key = value lines); flags override its keys
    #[arg(long, global = true, env = CONFIG_ENV, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Genre, G-Score class and age-rating distribution of a manifest
    Stats(StatsArgs),
    /// Frame indices the burst selector keeps for a trailer of N frames
    SelectFrames(SelectArgs),
    /// Write a feature file for every game of a manifest
    Featurize(FeaturizeArgs),
    /// Write a manifest and feature files with planted video and text signals
    Synthesize(SynthesizeArgs),
    /// Build the summary vocabulary of a manifest
    BuildVocab(BuildVocabArgs),
    /// Train one model on a whole manifest and save it
    Train(TrainArgs),
    /// K-fold cross-validation of one model configuration
    Cv(CvArgs),
    /// Cross-validate trailer-only against trailer-and-summary models
    Ablate(AblateArgs),
    /// Class and probabilities for one game
    Predict(PredictArgs),
    /// Compare analytic and finite-difference gradients
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Line-delimited JSON manifest of games
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    /// Directory of <id>.vgdf feature files, for games without a feature_ref
    #[arg(long, value_name = "DIR")]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Size preset applied before every other setting: full or toy
    #[arg(long)]
    pub preset: Option<String>,
    /// Architecture: m1 (LSTM), m2 (time-distributed CNN) or m3 (3D CNN)
    #[arg(long)]
    pub variant: Option<String>,
    /// Inputs: trailer or trailer+summary
    #[arg(long)]
    pub modality: Option<String>,
    /// Training epochs
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Dropout rate of every dropout layer
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Initial Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Stop after this many epochs without a lower training loss
    #[arg(long)]
    pub patience: Option<usize>,
    /// Any configuration key as KEY=VALUE; repeatable, applied after the flags above
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Print JSON instead of tables
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Decoded frame count of the trailer, before the duration cap
    #[arg(long, value_name = "N")]
    pub frames: u64,
    #[command(flatten)]
    pub params: FrameParamArgs,
}

#[derive(Debug, Args)]
pub struct FrameParamArgs {
    /// First frame of the first burst (1-based)
    #[arg(long, default_value_t = 50)]
    pub start_offset: u32,
    /// Frames per burst
    #[arg(long, default_value_t = 10)]
    pub window: u32,
    /// Frames between burst starts
    #[arg(long, default_value_t = 150)]
    pub stride: u32,
    /// Decoding frame rate
    #[arg(long, default_value_t = 4)]
    pub fps: u32,
    /// Trailer duration cap in seconds
    #[arg(long, default_value_t = 180)]
    pub max_duration: u32,
}

impl FrameParamArgs {
    fn params(&self) -> Result<FrameSelectionParams> {
        Ok(FrameSelectionParams::new(self.start_offset, self.window, self.stride, self.fps, self.max_duration)?)
    }
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Use deterministic stand-in features instead of a trained backbone
    #[arg(long)]
    pub synthetic: bool,
    /// Decoded frame count assumed for every trailer
    #[arg(long, value_name = "N", default_value_t = 720)]
    pub frames: u64,
    /// Output directory for the feature files
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed of the stand-in features
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub params: FrameParamArgs,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Number of games
    #[arg(long, default_value_t = 100)]
    pub games: usize,
    /// Seed of the generated data
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; receives manifest.jsonl and features/
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Feature rows per game
    #[arg(long, default_value_t = 4)]
    pub frames: usize,
    /// Empty summaries and video-only labels
    #[arg(long)]
    pub control: bool,
    /// Words per summary
    #[arg(long, default_value_t = 24)]
    pub summary_words: usize,
    /// Summary words that carry the text signal
    #[arg(long, default_value_t = 12)]
    pub cue_words: usize,
    /// Amplitude of the video prototype added to the noise
    #[arg(long, default_value_t = 0.5)]
    pub video_strength: f32,
}

#[derive(Debug, Args)]
pub struct BuildVocabArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Vocabulary file to write
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    /// Seed of initialization, shuffling and dropout
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file to write; the vocabulary goes next to it with a .vocab extension
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    /// Seed of folds, initialization, shuffling and dropout
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of folds
    #[arg(long)]
    pub folds: Option<usize>,
    /// Deal folds without balancing G-Score classes
    #[arg(long)]
    pub unstratified: bool,
    /// Report directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub cv: CvArgs,
    /// Comma-separated architectures to compare; all three by default
    #[arg(long, value_name = "LIST")]
    pub variants: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model file written by `train`
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Id of the game in the manifest
    #[arg(long, value_name = "ID")]
    pub game: String,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Architectures to check at toy size, comma-separated; all three by default
    #[arg(long, value_name = "LIST")]
    pub variants: Option<String>,
    /// Largest relative error accepted
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Finite-difference step
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Scalars sampled per model when it has more parameters than this
    #[arg(long, default_value_t = 1500)]
    pub max_checked: usize,
    /// Seed of the weights, inputs and sampling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip the per-layer checks
    #[arg(long)]
    pub models_only: bool,
}

/// The clap command, for help rendering and introspection.
pub fn command() -> clap::Command {
    Cli::command()
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            1
        }
    }
}

/// The error chain on one line, skipping causes a message already quotes.
pub fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

/// Runs a parsed command and returns what it prints on success.
pub fn execute(cli: Cli) -> Result<String> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Stats(a) => stats(config, &a),
        Command::SelectFrames(a) => select(&a),
        Command::Featurize(a) => featurize(config, &a),
        Command::Synthesize(a) => synthesize(&a),
        Command::BuildVocab(a) => build_vocab_cmd(config, &a),
        Command::Train(a) => train_cmd(config, &a),
        Command::Cv(a) => cv_cmd(config, &a),
        Command::Ablate(a) => ablate_cmd(config, &a),
        Command::Predict(a) => predict_cmd(config, &a),
        Command::Gradcheck(a) => gradcheck_cmd(&a),
    }
}

fn overrides(data: Option<&DataArgs>, model: Option<&ModelArgs>) -> Result<Vec<(String, String)>> {
    let mut o = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            o.push((k.to_string(), v));
        }
    };
    if let Some(d) = data {
        push("manifest", d.manifest.as_ref().map(|p| p.display().to_string()));
        push("features", d.features.as_ref().map(|p| p.display().to_string()));
    }
    if let Some(m) = model {
        push("preset", m.preset.clone());
        push("variant", m.variant.clone());
        push("modality", m.modality.clone());
        push("epochs", m.epochs.map(|v| v.to_string()));
        push("batch_size", m.batch_size.map(|v| v.to_string()));
        push("dropout", m.dropout.map(|v| v.to_string()));
        push("lr", m.lr.map(|v| v.to_string()));
        push("patience", m.patience.map(|v| v.to_string()));
        for kv in &m.set {
            let (k, v) =
                kv.split_once('=').ok_or_else(|| anyhow!("ConfigError: --set expects KEY=VALUE, got {kv:?}"))?;
            o.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    Ok(o)
}

fn resolve(config: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let c = RunConfig::resolve(config, overrides)?;
    c.validate()?;
    Ok(c)
}

fn manifest(c: &RunConfig) -> Result<Dataset> {
    let path =
        c.manifest.as_ref().ok_or_else(|| anyhow!("ConfigError: no manifest given (--manifest or `manifest =`)"))?;
    Ok(load_manifest(path)?)
}

fn seed(flag: Option<u64>, c: &RunConfig) -> Result<u64> {
    flag.or(c.seed).ok_or_else(|| anyhow!("ConfigError: a seed is required (--seed or `seed =`)"))
}

fn features(c: &RunConfig) -> Result<FeatureFiles> {
    if let Some(dir) = &c.features {
        if !dir.is_dir() {
            bail!("ConfigError: feature directory {} does not exist", dir.display());
        }
    }
    Ok(FeatureFiles::new(c.features.clone()))
}

fn out_dir(flag: Option<&PathBuf>, c: &RunConfig) -> Result<PathBuf> {
    let dir = flag.cloned().or_else(|| c.out.clone()).unwrap_or_else(|| PathBuf::from("reports"));
    std::fs::create_dir_all(&dir).with_context(|| format!("Io: cannot create {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes()).with_context(|| format!("Io: cannot write {}", path.display()))
}

fn stats(config: Option<&Path>, a: &StatsArgs) -> Result<String> {
    let c = resolve(config, &overrides(Some(&a.data), None)?)?;
    let report = dataset_stats(&manifest(&c)?)?;
    Ok(if a.json { report.to_json() + "\n" } else { report.render_table() })
}

/// `count=<M> fallback=<bool>` and the space-separated indices.
pub fn render_selection(frames: u64, params: &FrameSelectionParams) -> String {
    let n = clamp_frame_count(frames, params) as u32;
    let s = select_frames(n, params);
    let indices: Vec<String> = s.indices.iter().map(u32::to_string).collect();
    format!("count={} fallback={}\n{}\n", s.len(), s.fallback, indices.join(" "))
}

fn select(a: &SelectArgs) -> Result<String> {
    Ok(render_selection(a.frames, &a.params.params()?))
}

fn featurize(config: Option<&Path>, a: &FeaturizeArgs) -> Result<String> {
    if !a.synthetic {
        bail!("BackboneUnavailable: backbone features come from the extraction sidecar; pass --synthetic for stand-in features");
    }
    let mut o = overrides(Some(&a.data), None)?;
    if let Some(d) = &a.out {
        o.push(("out".into(), d.display().to_string()));
    }
    let c = resolve(config, &o)?;
    let ds = manifest(&c)?;
    let seed = seed(a.seed, &c)?;
    let dir = out_dir(None, &c)?;
    let params = a.params.params()?;
    let sel = select_frames(clamp_frame_count(a.frames, &params) as u32, &params);
    for r in &ds.records {
        write_feature_file(&synth_features(&r.id, &sel.indices, seed), dir.join(format!("{}.vgdf", r.id)))?;
    }
    Ok(format!("wrote {} feature files ({} frames each) to {}\n", ds.len(), sel.len(), dir.display()))
}

fn synthesize(a: &SynthesizeArgs) -> Result<String> {
    let seed = a.seed.ok_or_else(|| anyhow!("ConfigError: a seed is required (--seed)"))?;
    let out = a.out.clone().ok_or_else(|| anyhow!("ConfigError: an output directory is required (--out)"))?;
    let spec = SyntheticSpec {
        frames: a.frames,
        summaries: if a.control { SummaryMode::Empty } else { SummaryMode::Signal },
        video_strength: a.video_strength,
        summary_words: a.summary_words,
        cue_words: a.cue_words,
        ..SyntheticSpec::new(a.games, seed)
    };
    let data = generate(&spec);
    let feat_dir = out.join("features");
    std::fs::create_dir_all(&feat_dir).with_context(|| format!("Io: cannot create {}", feat_dir.display()))?;
    let mut manifest = String::new();
    for r in &data.dataset.records {
        let m = data.features.load(r)?;
        write_feature_file(&m, feat_dir.join(format!("{}.vgdf", r.id)))?;
        let mut row = ManifestRow::from_record(r);
        row.feature_ref = Some(PathBuf::from("features").join(format!("{}.vgdf", r.id)));
        manifest.push_str(&serde_json::to_string(&row)?);
        manifest.push('\n');
    }
    let path = out.join("manifest.jsonl");
    write(&path, &manifest)?;
    Ok(format!("wrote {} games to {}\n", data.dataset.len(), path.display()))
}

fn build_vocab_cmd(config: Option<&Path>, a: &BuildVocabArgs) -> Result<String> {
    let c = resolve(config, &overrides(Some(&a.data), None)?)?;
    let ds = manifest(&c)?;
    let docs: Vec<Vec<String>> = ds.records.iter().map(|r| tokenize(&r.summary)).collect();
    let vocab = build_vocab(&docs);
    vocab.save(&a.out)?;
    Ok(format!("{} words (table size {}) written to {}\n", vocab.len(), vocab.table_size(), a.out.display()))
}

fn train_cmd(config: Option<&Path>, a: &TrainArgs) -> Result<String> {
    let c = resolve(config, &overrides(Some(&a.data), Some(&a.model_args))?)?;
    let seed = seed(a.seed, &c)?;
    let ds = manifest(&c)?;
    let source = features(&c)?;
    let (outcome, vocab) = train_on_dataset(&ds, &c.model, &source, seed)?;
    if let Some(parent) = a.model.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("Io: cannot create {}", parent.display()))?;
    }
    save_checkpoint(&outcome.model.to_checkpoint(Some(&outcome.adam)), &a.model)?;
    if let Some(v) = &vocab {
        v.save(vocab_path_for(&a.model))?;
    }
    let samples_acc = training_accuracy(&outcome.model, &ds, &source, vocab.as_ref())?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} / {}: {} parameters, seed {seed}",
        c.model.variant,
        c.model.modality,
        outcome.model.num_params()
    );
    for (i, l) in outcome.loss_history.iter().enumerate() {
        let _ = writeln!(out, "epoch {:>3}  loss {l:.4}", i + 1);
    }
    let _ = writeln!(out, "training accuracy {:.1}%", samples_acc * 100.0);
    let _ = writeln!(out, "model written to {}", a.model.display());
    Ok(out)
}

fn training_accuracy(model: &BuiltModel, ds: &Dataset, source: &dyn VideoSource, vocab: Option<&Vocab>) -> Result<f64> {
    let videos: Vec<VideoData> =
        ds.records.iter().map(|r| Ok(VideoData::for_config(model.config(), source.load(r)?))).collect::<Result<_>>()?;
    let samples: Vec<Sample<'_>> = ds
        .records
        .iter()
        .zip(&videos)
        .map(|(r, v)| Sample { video: v, summary: vocab.map(|v| encode_text(&r.summary, v)), label: r.label() })
        .collect();
    let predicted = predict_classes(model, &samples)?;
    Ok(accuracy(&predicted, samples.iter().map(|s| s.label)))
}

fn cv_setup(config: Option<&Path>, a: &CvArgs) -> Result<(RunConfig, CvOptions, Dataset, FeatureFiles, PathBuf)> {
    let mut o = overrides(Some(&a.data), Some(&a.model_args))?;
    if let Some(k) = a.folds {
        o.push(("folds".into(), k.to_string()));
    }
    if a.unstratified {
        o.push(("stratified".into(), "false".into()));
    }
    let c = resolve(config, &o)?;
    let opts = CvOptions { k: c.folds, seed: seed(a.seed, &c)?, stratified: c.stratified };
    let ds = manifest(&c)?;
    let source = features(&c)?;
    let dir = out_dir(a.out.as_ref(), &c)?;
    Ok((c, opts, ds, source, dir))
}

fn cv_cmd(config: Option<&Path>, a: &CvArgs) -> Result<String> {
    let (c, opts, ds, source, dir) = cv_setup(config, a)?;
    let report = cross_validate(&ds, &c.model, &source, &opts)?;
    let stem = report_stem("cv", &c.model, opts.seed);
    let text = report.render();
    write(&dir.join(format!("{stem}.json")), &report.to_json())?;
    write(&dir.join(format!("{stem}.txt")), &text)?;
    Ok(format!("{text}report written to {}\n", dir.join(format!("{stem}.json")).display()))
}

fn parse_variants(list: Option<&str>) -> Result<Vec<Variant>> {
    match list {
        None => Ok(Variant::ALL.to_vec()),
        Some(l) => l
            .split(',')
            .map(|v| Variant::parse(v.trim()).ok_or_else(|| anyhow!("ConfigError: unknown variant {v:?}")))
            .collect(),
    }
}

fn ablate_cmd(config: Option<&Path>, a: &AblateArgs) -> Result<String> {
    let (c, opts, ds, source, dir) = cv_setup(config, &a.cv)?;
    let mut reports = Vec::new();
    for variant in parse_variants(a.variants.as_deref())? {
        let model = ModelConfig { variant, ..c.model.clone() };
        let r = ablate(&ds, &model, &source, &opts)?;
        write(&dir.join(format!("{}.json", report_stem("ablate", &model, opts.seed))), &r.to_json())?;
        reports.push(r);
    }
    let table = render_ablation_table(&reports);
    let names: Vec<String> = reports.iter().map(|r| format!("{:?}", r.variant).to_ascii_lowercase()).collect();
    let path = dir.join(format!("ablation-{}-seed{}-{}.txt", names.join("-"), opts.seed, c.model.fingerprint()));
    write(&path, &table)?;
    Ok(format!("{table}table written to {}\n", path.display()))
}

fn predict_cmd(config: Option<&Path>, a: &PredictArgs) -> Result<String> {
    let c = resolve(config, &overrides(Some(&a.data), None)?)?;
    let ck = load_checkpoint(&a.model)?;
    let (model, _) = BuiltModel::from_checkpoint(&ck)?;
    let ds = manifest(&c)?;
    let record = ds.get(&a.game).ok_or_else(|| anyhow!("UnknownGame: {} is not in the manifest", a.game))?;
    let video = VideoData::for_config(model.config(), features(&c)?.load(record)?);
    let summary = if model.config().modality.uses_summary() {
        let vocab = Vocab::load(vocab_path_for(&a.model))?;
        Some(encode_text(&record.summary, &vocab))
    } else {
        None
    };
    let p = model.predict(&ModelInput { video: video.as_input(), summary: summary.as_ref() })?;
    let class = vgd_core::train::argmax(&p);
    let mut out = String::new();
    let _ = writeln!(out, "game {}", record.id);
    let _ = writeln!(out, "class {class} ({})", StatsReport::gscore_bin_label(class));
    for (k, v) in p.iter().enumerate() {
        let _ = writeln!(out, "{:>6}  {v:.4}", StatsReport::gscore_bin_label(k));
    }
    Ok(out)
}

fn gradcheck_cmd(a: &GradcheckArgs) -> Result<String> {
    let opts = GradCheckOptions {
        step: a.step,
        tolerance: a.tolerance,
        max_checked: a.max_checked,
        seed: a.seed,
        ..Default::default()
    };
    let mut out = String::new();
    let mut failed = Vec::new();
    if !a.models_only {
        for (kind, r) in check_every_layer_kind(opts)? {
            let _ = writeln!(
                out,
                "{kind:<18} {:>5} checked  max {:.3e}  {}",
                r.checked,
                r.max_rel_error,
                verdict(r.passed())
            );
            if !r.passed() {
                failed.push(kind.to_string());
            }
        }
    }
    let vocab = build_vocab(&[["great", "game", "bad", "story"]]);
    let summary = encode_text("great game with a bad story", &vocab);
    let indices = [50, 51, 52];
    let feats = synth_features("gradcheck", &indices, substream_seed(a.seed, "gradcheck.input"));
    for variant in parse_variants(a.variants.as_deref())? {
        let c = ModelConfig::toy(variant, Modality::TrailerAndSummary);
        let model = build_model(&c, vocab.table_size(), a.seed)?;
        let clip = synth_clip("gradcheck", &indices, a.seed, c.m3_frame_shape);
        let video = match variant {
            Variant::M3 => VideoInput::Clip(&clip),
            _ => VideoInput::Features(&feats),
        };
        let r = model.grad_check(&ModelInput { video, summary: Some(&summary) }, 4, opts)?;
        let _ = writeln!(out, "\n{} (toy)\n{}", variant.label(), r.render());
        if !r.passed() {
            failed.push(variant.label().to_string());
        }
    }
    if !failed.is_empty() {
        bail!("GradCheckFailed: {}\n{out}", failed.join(", "));
    }
    Ok(out)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
