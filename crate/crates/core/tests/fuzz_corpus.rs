//! Replays the fuzz seed corpora through the same checks the fuzz targets
//! make, so the targets stay meaningful without a nightly toolchain.

use std::path::PathBuf;

use vgd_core::config::RunConfig;
use vgd_core::dataset::{parse_manifest, ManifestRow};
use vgd_core::models::BuiltModel;
use vgd_core::tensor::{decode_checkpoint, encode_checkpoint};
use vgd_core::text::Vocab;
use vgd_core::trailer::{decode_feature_file, encode_feature_file};

/// `(file name, bytes)` of one target's corpus, sorted.
fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus for {target}");
    files
}

fn accepted(files: &[(String, Vec<u8>)], ok: impl Fn(&[u8]) -> bool) -> Vec<&str> {
    files.iter().filter(|(_, b)| ok(b)).map(|(n, _)| n.as_str()).collect()
}

#[test]
fn manifest_corpus() {
    let files = corpus("manifest");
    let ok = accepted(&files, |b| {
        let Ok(ds) = parse_manifest(std::str::from_utf8(b).unwrap()) else { return false };
        let again: String =
            ds.records.iter().map(|r| serde_json::to_string(&ManifestRow::from_record(r)).unwrap() + "\n").collect();
        assert_eq!(parse_manifest(&again).unwrap(), ds);
        true
    });
    assert_eq!(ok, ["two_games.jsonl"]);
}

#[test]
fn feature_file_corpus() {
    let files = corpus("feature_file");
    let ok = accepted(&files, |b| match decode_feature_file(b) {
        Ok(m) => {
            assert_eq!(encode_feature_file(&m), b);
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["empty.vgdf", "one_frame.vgdf"]);
}

#[test]
fn vocab_corpus() {
    let files = corpus("vocab");
    let ok = accepted(&files, |b| match Vocab::parse(std::str::from_utf8(b).unwrap()) {
        Ok(v) => {
            assert_eq!(Vocab::parse(&v.to_text()).unwrap(), v);
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["empty.vocab", "small.vocab"]);
}

#[test]
fn checkpoint_corpus() {
    let files = corpus("checkpoint");
    let ok = accepted(&files, |b| match decode_checkpoint(b) {
        Ok(ck) => {
            let once = encode_checkpoint(&ck);
            assert_eq!(once, b);
            assert_eq!(encode_checkpoint(&decode_checkpoint(&once).unwrap()), once);
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["dense_with_adam.vgdm", "empty.vgdm", "toy_m2.vgdm"]);
    let (_, toy) = files.iter().find(|(n, _)| n == "toy_m2.vgdm").unwrap();
    let (model, adam) = BuiltModel::from_checkpoint(&decode_checkpoint(toy).unwrap()).unwrap();
    assert!(adam.is_none());
    assert_eq!(model.config().variant, vgd_core::Variant::M2);
    // metadata without a model description is a mismatch, not a panic
    let (_, dense) = files.iter().find(|(n, _)| n == "dense_with_adam.vgdm").unwrap();
    assert!(BuiltModel::from_checkpoint(&decode_checkpoint(dense).unwrap()).is_err());
}

#[test]
fn run_config_corpus() {
    let files = corpus("run_config");
    let ok = accepted(&files, |b| {
        let mut c = RunConfig::default();
        c.apply_text(std::str::from_utf8(b).unwrap(), None).is_ok() && c.validate().is_ok()
    });
    assert_eq!(ok, ["full.conf"]);
}
