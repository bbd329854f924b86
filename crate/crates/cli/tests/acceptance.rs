//! Acceptance suite: one PASS/FAIL line per criterion, each with its
//! measured runtime against its budget. Exits non-zero if any line fails.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng as _;

use vgd_core::dataset::{compute_gscore, quantize_gscore, StatsReport};
use vgd_core::models::{build_model, Modality, ModelConfig, ModelInput, Variant, VideoInput};
use vgd_core::rng::substream;
use vgd_core::synthetic::{generate, SummaryMode, SyntheticSpec};
use vgd_core::tensor::{check_every_layer_kind, GradCheckOptions};
use vgd_core::text::{build_vocab, encode_text};
use vgd_core::trailer::{
    decode_feature_file, encode_feature_file, read_feature_file, select_frames, synth_clip, synth_features,
    write_feature_file, FeatureFileError, FrameSelectionParams, FEATURE_DIM,
};
use vgd_core::train::{ablate, evaluate, load_videos, make_folds, train_on_dataset, CvOptions, Sample};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Line-by-line transcription of the burst schedule.
fn literal_schedule(n: i64) -> Vec<u32> {
    let mut selected = Vec::new();
    let mut f_start: i64 = 50;
    while f_start < n {
        let mut j: i64 = 0;
        while j < 10 {
            if f_start + j <= n {
                selected.push((f_start + j) as u32);
            } else {
                break;
            }
            j += 1;
        }
        f_start += 150;
    }
    selected
}

fn frame_selection() -> Outcome {
    let p = FrameSelectionParams::default();
    for n in 0..=2000u32 {
        let got = select_frames(n, &p);
        let want = literal_schedule(i64::from(n));
        if want.is_empty() {
            // fallback: up to 10 distinct frames within [1, N], flagged
            ensure(got.fallback == (n > 0), format!("N={n}: fallback flag {}", got.fallback))?;
            ensure(got.len() == (n as usize).min(10), format!("N={n}: {} fallback frames", got.len()))?;
            ensure(got.indices.windows(2).all(|w| w[0] < w[1]), format!("N={n}: fallback not increasing"))?;
            ensure(got.indices.iter().all(|&i| (1..=n).contains(&i)), format!("N={n}: fallback out of range"))?;
        } else {
            ensure(!got.fallback && got.indices == want, format!("N={n}: {:?} != {:?}", got.indices, want))?;
        }
    }
    let s = select_frames(720, &p);
    let starts: Vec<u32> = s.indices.chunks(10).map(|c| c[0]).collect();
    ensure(
        s.len() == 50 && starts == [50, 200, 350, 500, 650],
        format!("N=720: {} frames, starts {starts:?}", s.len()),
    )?;
    Ok("N in [0, 2000] matches; N=720 gives 50 frames in bursts at 50/200/350/500/650".into())
}

fn score_math() -> Outcome {
    // the class labels as printed in the dataset table
    let labels = ["0-10", "11-20", "21-30", "31-40", "41-50", "51-60", "61-70", "71-80", "81-90", "91-100"];
    for s in 0..=100u32 {
        let class = quantize_gscore(f64::from(s)).map_err(|e| e.to_string())?;
        let (lo, hi) = labels[class].split_once('-').unwrap();
        let (lo, hi): (u32, u32) = (lo.parse().unwrap(), hi.parse().unwrap());
        ensure((lo..=hi).contains(&s), format!("S={s} -> class {class} ({})", labels[class]))?;
        ensure(StatsReport::gscore_bin_label(class) == labels[class], format!("label of class {class}"))?;
    }
    let g = compute_gscore(93.0, 93.0).map_err(|e| e.to_string())?;
    ensure(g.value == 93.0 && g.class_index == 9, format!("(93, 93) -> {g:?}"))?;
    ensure(quantize_gscore(81.0) == Ok(8), "S=81 is not class 8")?;
    Ok("S in [0, 100] lands in its printed bin; (93,93) -> class 9; S=81 -> class 8".into())
}

fn gradients() -> Outcome {
    let opts = GradCheckOptions::default();
    let mut worst: f64 = 0.0;
    let layers = check_every_layer_kind(opts).map_err(|e| e.to_string())?;
    for (kind, r) in &layers {
        ensure(r.passed(), format!("{kind}: {}", r.render()))?;
        worst = worst.max(r.max_rel_error);
    }
    let vocab = build_vocab(&[["great", "game", "bad", "story"]]);
    let summary = encode_text("great game with a bad story", &vocab);
    let feats = synth_features("g", &[50, 51, 52], 3);
    for variant in Variant::ALL {
        let c = ModelConfig::toy(variant, Modality::TrailerAndSummary);
        let model = build_model(&c, vocab.table_size(), 2).map_err(|e| e.to_string())?;
        let clip = synth_clip("g", &[50, 51, 52], 3, c.m3_frame_shape);
        let video = match variant {
            Variant::M3 => VideoInput::Clip(&clip),
            _ => VideoInput::Features(&feats),
        };
        let r = model.grad_check(&ModelInput { video, summary: Some(&summary) }, 4, opts).map_err(|e| e.to_string())?;
        ensure(r.passed(), format!("{variant}: {}", r.render()))?;
        worst = worst.max(r.max_rel_error);
    }
    Ok(format!("{} layer kinds and toy Model-1/2/3, max relative error {worst:.2e} < 1e-4", layers.len()))
}

fn uniform_loss() -> Outcome {
    let vocab = build_vocab(&[["fun", "game"]]);
    let feats = synth_features("u", &[50, 51, 52, 53], 7);
    let mut worst: f64 = 0.0;
    for variant in Variant::ALL {
        for modality in [Modality::TrailerOnly, Modality::TrailerAndSummary] {
            let c = ModelConfig::toy(variant, modality);
            let mut model = build_model(&c, vocab.table_size(), 11).map_err(|e| e.to_string())?;
            model.zero_head();
            let clip = synth_clip("u", &[50, 51, 52, 53], 7, c.m3_frame_shape);
            for text in ["fun game", "", "completely unseen words"] {
                let summary = encode_text(text, &vocab);
                let video = match variant {
                    Variant::M3 => VideoInput::Clip(&clip),
                    _ => VideoInput::Features(&feats),
                };
                let input = ModelInput { video, summary: modality.uses_summary().then_some(&summary) };
                let p = model.predict(&input).map_err(|e| e.to_string())?;
                ensure(p.iter().all(|&v| v == 0.1), format!("{variant}/{modality}: {p:?}"))?;
                for class in [0, 9] {
                    let params = model.params().cast::<f64>();
                    let mut g = vgd_core::tensor::Graph::new(&params);
                    let l = model
                        .loss(&mut g, &input, class, &mut vgd_core::tensor::ForwardCtx::eval())
                        .map_err(|e| e.to_string())?;
                    let err = (g.value(l).data()[0] - 10f64.ln()).abs();
                    worst = worst.max(err);
                }
            }
        }
    }
    ensure(worst < 1e-3, format!("|loss - ln 10| = {worst:e}"))?;
    Ok(format!("6 models x 3 inputs: probabilities exactly 0.1, |loss - ln 10| <= {worst:.1e}"))
}

fn overfit() -> Outcome {
    let data = generate(&SyntheticSpec::new(32, 1));
    let mut c = ModelConfig::toy(Variant::M1, Modality::TrailerAndSummary);
    c.epochs = 200;
    c.batch_size = 4;
    c.dropout = 0.0;
    let (out, vocab) = train_on_dataset(&data.dataset, &c, &data.features, 1).map_err(|e| e.to_string())?;
    let vocab = vocab.ok_or("no vocabulary")?;
    let videos = load_videos(&data.dataset, &c, &data.features).map_err(|e| e.to_string())?;
    let samples: Vec<Sample<'_>> = data
        .dataset
        .records
        .iter()
        .zip(&videos)
        .map(|(r, v)| Sample { video: v, summary: Some(encode_text(&r.summary, &vocab)), label: r.label() })
        .collect();
    let acc = evaluate(&out.model, &samples).map_err(|e| e.to_string())?;
    let h = &out.loss_history;
    let smoothed: Vec<f64> = h.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    let rises = smoothed.windows(2).filter(|w| w[1] > w[0]).count();
    ensure(acc == 1.0, format!("training accuracy {acc}"))?;
    ensure(rises == 0, format!("smoothed loss rises {rises} times"))?;
    Ok(format!(
        "32 games, toy Model-1: 100% training accuracy after {} epochs; window-5 loss {:.3} -> {:.3}, never rising",
        h.len(),
        smoothed[0],
        smoothed[smoothed.len() - 1]
    ))
}

fn cv_partition() -> Outcome {
    let mut rng = substream(2024, "acceptance.partition");
    for trial in 0..60 {
        let n = rng.gen_range(20..=200);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..10)).collect();
        let seed = rng.gen::<u64>();
        let plan = make_folds(&labels, 10, seed, true).map_err(|e| e.to_string())?;
        let mut seen = vec![0; n];
        for f in 0..10 {
            for &i in plan.validation(f) {
                seen[i] += 1;
            }
        }
        ensure(seen.iter().all(|&c| c == 1), format!("trial {trial}: a record is not validated exactly once"))?;
        for class in 0..10 {
            let counts: Vec<usize> =
                (0..10).map(|f| plan.validation(f).iter().filter(|&&i| labels[i] == class).count()).collect();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            ensure(hi - lo <= 1, format!("trial {trial}, class {class}: per-fold counts {counts:?}"))?;
        }
        let again = make_folds(&labels, 10, seed, true).map_err(|e| e.to_string())?;
        let bytes = |p: &vgd_core::train::FoldPlan| serde_json::to_vec(p).unwrap();
        ensure(bytes(&plan) == bytes(&again), format!("trial {trial}: rerun differs"))?;
    }
    Ok("60 random datasets of 20-200 games: exact cover, classes within +-1 per fold, reruns byte-identical".into())
}

/// Small-model settings under which the planted signals are learnable.
fn ablation_config() -> ModelConfig {
    let mut c = ModelConfig::toy(Variant::M1, Modality::TrailerAndSummary);
    c.video_repr_dim = 16;
    c.text_repr_dim = 16;
    c.embed_dim = 16;
    c.text_channels = vec![16; 3];
    c.dropout = 0.0;
    c.batch_size = 4;
    c.epochs = 60;
    c
}

fn ablation() -> Outcome {
    let config = ablation_config();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (mode, name) in [(SummaryMode::Signal, "signal"), (SummaryMode::Empty, "control")] {
        let spec = SyntheticSpec { cue_words: 12, summaries: mode, ..SyntheticSpec::new(100, 1) };
        let data = generate(&spec);
        let mut deltas = Vec::new();
        for seed in 1..=3 {
            let r = ablate(&data.dataset, &config, &data.features, &CvOptions::new(seed)).map_err(|e| e.to_string())?;
            let d = r.improvement_points;
            let ok = match mode {
                SummaryMode::Signal => d >= 3.0,
                SummaryMode::Empty => d.abs() <= 2.0,
            };
            if !ok {
                failures.push(format!("{name} seed {seed}: {d:+.1}"));
            }
            deltas.push(format!(
                "{:.0}/{:.0} ({d:+.1})",
                r.trailer_only.mean_accuracy * 100.0,
                r.trailer_and_summary.mean_accuracy * 100.0
            ));
        }
        lines.push(format!("{name} {}", deltas.join(", ")));
    }
    let detail = format!("trailer-only/trailer+summary %, seeds 1-3: {}", lines.join("; "));
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failures.join(", ")))
    }
}

fn feature_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = substream(5, "acceptance.features");
    let values: Vec<f32> = (0..3 * FEATURE_DIM)
        .map(|i| match i {
            0 => -0.0,
            1 => f32::MIN_POSITIVE / 2.0,
            2 => f32::MAX,
            _ => rng.gen_range(-1e6..1e6),
        })
        .collect();
    let m = vgd_core::FrameFeatureMatrix::new("gamé-1", vec![50, 51, 700], values).map_err(|e| e.to_string())?;
    let path = dir.path().join("g.vgdf");
    write_feature_file(&m, &path).map_err(|e| e.to_string())?;
    let back = read_feature_file(&path).map_err(|e| e.to_string())?;
    ensure(back.game_id() == m.game_id() && back.frame_indices() == m.frame_indices(), "header fields differ")?;
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    ensure(bits(back.features()) == bits(m.features()), "payload not bit-exact")?;
    let bytes = encode_feature_file(&m);
    ensure(std::fs::read(&path).map_err(|e| e.to_string())? == bytes, "file bytes differ from encoding")?;

    let patched = |at: usize, v: &[u8]| {
        let mut b = bytes.clone();
        b[at..at + v.len()].copy_from_slice(v);
        decode_feature_file(&b)
    };
    ensure(matches!(patched(0, b"VGDX"), Err(FeatureFileError::UnsupportedFormat(_))), "bad magic accepted")?;
    ensure(
        matches!(patched(4, &2u32.to_le_bytes()), Err(FeatureFileError::UnsupportedFormat(_))),
        "bad version accepted",
    )?;
    ensure(
        matches!(patched(12, &1024u32.to_le_bytes()), Err(FeatureFileError::DimensionMismatch { .. })),
        "wrong D accepted",
    )?;
    ensure((0..bytes.len()).all(|n| decode_feature_file(&bytes[..n]).is_err()), "a truncation was accepted")?;
    Ok("bit-exact write/read; magic, version and D guards; every truncation rejected".into())
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let mut argv = vec!["vgd"];
    argv.extend_from_slice(args);
    let cli = <vgd_cli::Cli as clap::Parser>::try_parse_from(&argv).map_err(|e| e.to_string())?;
    vgd_cli::execute(cli).map(|_| ()).map_err(|e| vgd_cli::describe(&e))
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let data = root.join("data");
    run_cli(&["synthesize", "--games", "40", "--seed", "4", "--out", data.to_str().unwrap()])?;
    let manifest = data.join("manifest.jsonl");
    let mut outs = Vec::new();
    for run in ["a", "b"] {
        let out = root.join(run);
        run_cli(&[
            "cv",
            "--manifest",
            manifest.to_str().unwrap(),
            "--seed",
            "9",
            "--preset",
            "toy",
            "--epochs",
            "8",
            "--batch-size",
            "4",
            "--folds",
            "5",
            "--out",
            out.to_str().unwrap(),
        ])?;
        outs.push(read_dir_bytes(&out));
    }
    ensure(outs[0].len() == 2, format!("expected 2 report files, found {}", outs[0].len()))?;
    ensure(outs[0] == outs[1], "reports differ between runs")?;
    Ok(format!(
        "two `cv` runs wrote byte-identical {}",
        outs[0].iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(", ")
    ))
}

fn main() {
    let criteria = [
        Criterion { name: "frame-selection oracle", budget: Duration::from_secs(1), run: frame_selection },
        Criterion { name: "score math", budget: Duration::from_secs(1), run: score_math },
        Criterion { name: "gradient verification", budget: Duration::from_secs(60), run: gradients },
        Criterion { name: "uniform-loss anchor", budget: Duration::from_secs(1), run: uniform_loss },
        Criterion { name: "overfit", budget: Duration::from_secs(300), run: overfit },
        Criterion { name: "cv partition", budget: Duration::from_secs(10), run: cv_partition },
        Criterion { name: "ablation direction", budget: Duration::from_secs(900), run: ablation },
        Criterion { name: "feature-file round trip", budget: Duration::from_secs(1), run: feature_round_trip },
        Criterion { name: "cv determinism", budget: Duration::from_secs(300), run: determinism },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = (c.run)();
        let took = started.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= c.budget => (true, d),
            Ok(d) => (false, format!("over budget; {d}")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!(
            "{} {:<24} {:>8.2}s / {:>4}s  {detail}",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            took.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
