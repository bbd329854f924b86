//! Constructed datasets with known signal, for checking that training works.
//!
//! Class `2p + b` is planted in two places: `p` (one of five) picks a video
//! prototype added to every frame's features, `b` picks whether the summary
//! uses praising or panning words. A trailer alone therefore pins the class
//! to one of two, and only the summary resolves the rest.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::dataset::{map_genre, AgeRating, Dataset, GameRecord, GenreClass};
use crate::rng::substream;
use crate::trailer::{synth_features, FrameFeatureMatrix, FEATURE_DIM};
use crate::train::InMemoryFeatures;

pub const VIDEO_PROTOTYPES: usize = 5;

const PRAISE: &[&str] =
    &["stunning", "brilliant", "masterpiece", "gorgeous", "gripping", "polished", "superb", "inventive"];
const PAN: &[&str] = &["dull", "broken", "tedious", "clumsy", "shallow", "buggy", "bland", "repetitive"];
const FILLER: &[&str] = &[
    "the", "a", "game", "player", "world", "story", "levels", "with", "and", "of", "in", "hero", "quest", "battle",
    "city", "team", "across", "through", "new", "mode", "online", "friends", "explore", "build", "race", "fight",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryMode {
    /// Summaries carry the text bit, which is part of the label.
    Signal,
    /// Every summary is empty and labels come from the video alone.
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub games: usize,
    pub frames: usize,
    pub seed: u64,
    pub summaries: SummaryMode,
    /// Amplitude of the ±1 prototype added to the uniform `[-1, 1]` noise.
    pub video_strength: f32,
    /// Summary length in words.
    pub summary_words: usize,
    /// How many of those words carry the text bit.
    pub cue_words: usize,
}

impl SyntheticSpec {
    pub fn new(games: usize, seed: u64) -> Self {
        Self {
            games,
            frames: 4,
            seed,
            summaries: SummaryMode::Signal,
            video_strength: 0.5,
            summary_words: 24,
            cue_words: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub features: InMemoryFeatures,
}

fn prototype(seed: u64, p: usize) -> Vec<f32> {
    let mut rng = substream(seed, &format!("synthetic.prototype{p}"));
    (0..FEATURE_DIM).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Labels cycle through the classes so every class is equally common.
pub fn generate(spec: &SyntheticSpec) -> SyntheticData {
    let prototypes: Vec<Vec<f32>> = (0..VIDEO_PROTOTYPES).map(|p| prototype(spec.seed, p)).collect();
    let mut rng = substream(spec.seed, "synthetic.records");
    let genres: Vec<&str> = GenreClass::ALL.iter().flat_map(|g| g.members().iter().copied()).collect();
    let mut records = Vec::with_capacity(spec.games);
    let mut features = HashMap::with_capacity(spec.games);
    for i in 0..spec.games {
        let (p, b) = match spec.summaries {
            SummaryMode::Signal => ((i % 10) / 2, i % 2),
            SummaryMode::Empty => (i % VIDEO_PROTOTYPES, 0),
        };
        let label = 2 * p + b;
        let id = format!("syn{i:04}");
        let indices: Vec<u32> = (0..spec.frames as u32).map(|j| 50 + j).collect();
        let noise = synth_features(&id, &indices, spec.seed);
        let mut values = noise.features().to_vec();
        for row in values.chunks_exact_mut(FEATURE_DIM) {
            for (v, &s) in row.iter_mut().zip(&prototypes[p]) {
                *v += spec.video_strength * s;
            }
        }
        let matrix = FrameFeatureMatrix::new(id.clone(), indices, values).expect("finite synthetic features");
        let summary = match spec.summaries {
            SummaryMode::Empty => String::new(),
            SummaryMode::Signal => {
                let cues = if b == 1 { PRAISE } else { PAN };
                let mut words: Vec<&str> = (0..spec.summary_words.saturating_sub(spec.cue_words))
                    .map(|_| *FILLER.choose(&mut rng).expect("filler words"))
                    .collect();
                for _ in 0..spec.cue_words.min(spec.summary_words) {
                    let at = rng.gen_range(0..=words.len());
                    words.insert(at, cues.choose(&mut rng).expect("cue words"));
                }
                let mut s = words.join(" ");
                s.push('.');
                s
            }
        };
        let genre = genres.choose(&mut rng).expect("genres").to_string();
        let score = (label * 10 + 5) as f64;
        records.push(GameRecord {
            title: format!("Synthetic Game {i}"),
            developer: "Synthetic Studio".into(),
            age_rating: *AgeRating::ALL.choose(&mut rng).expect("ratings"),
            genre_class: map_genre(&genre),
            genre_raw: genre,
            user_score: score,
            critic_score: score,
            summary,
            trailer_ref: None,
            feature_ref: None,
            id: id.clone(),
        });
        features.insert(id, matrix);
    }
    let dataset = Dataset::new(records).expect("synthetic ids are unique");
    SyntheticData { dataset, features: InMemoryFeatures(features) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;
    use crate::train::VideoSource;

    #[test]
    fn labels_and_signals() {
        let data = generate(&SyntheticSpec::new(40, 3));
        assert_eq!(data.dataset.len(), 40);
        let labels = data.dataset.labels();
        for class in 0..10 {
            assert_eq!(labels.iter().filter(|&&l| l == class).count(), 4);
        }
        for (r, &l) in data.dataset.records.iter().zip(&labels) {
            let tokens = tokenize(&r.summary);
            assert_eq!(tokens.len(), 24);
            let praise = tokens.iter().filter(|t| PRAISE.contains(&t.as_str())).count();
            let pan = tokens.iter().filter(|t| PAN.contains(&t.as_str())).count();
            assert_eq!((praise, pan), if l % 2 == 1 { (4, 0) } else { (0, 4) });
            let m = data.features.load(r).unwrap();
            assert_eq!(m.num_frames(), 4);
        }
    }

    #[test]
    fn control_has_empty_summaries_and_video_labels() {
        let spec = SyntheticSpec { summaries: SummaryMode::Empty, ..SyntheticSpec::new(20, 3) };
        let data = generate(&spec);
        assert!(data.dataset.records.iter().all(|r| r.summary.is_empty()));
        assert!(data.dataset.labels().iter().all(|l| l % 2 == 0));
    }

    #[test]
    fn prototype_is_visible_in_the_mean() {
        let data = generate(&SyntheticSpec::new(10, 1));
        let proto = prototype(1, 0);
        let m = data.features.load(&data.dataset.records[0]).unwrap();
        let dot: f32 = m.row(0).iter().zip(&proto).map(|(a, b)| a * b).sum::<f32>() / FEATURE_DIM as f32;
        assert!((dot - 0.5).abs() < 0.05, "{dot}");
    }

    #[test]
    fn deterministic() {
        let a = generate(&SyntheticSpec::new(12, 9));
        let b = generate(&SyntheticSpec::new(12, 9));
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.features.0, b.features.0);
    }
}
