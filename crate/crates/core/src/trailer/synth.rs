//! Deterministic stand-ins for backbone features and decoded frames.

use rand::{Rng as _, SeedableRng};

use super::{sample_evenly, FrameFeatureMatrix, FEATURE_DIM};
use crate::rng::{stable_hash, Rng};

fn row_rng(kind: &[u8], game_id: &str, index: u32, seed: u64) -> Rng {
    Rng::seed_from_u64(stable_hash(&[kind, game_id.as_bytes(), &index.to_le_bytes(), &seed.to_le_bytes()]))
}

/// Uniform `[-1, 1]` features; row `i` depends only on `(game_id, frame_indices[i], seed)`.
pub fn synth_features(game_id: &str, frame_indices: &[u32], seed: u64) -> FrameFeatureMatrix {
    let mut features = Vec::with_capacity(frame_indices.len() * FEATURE_DIM);
    for &idx in frame_indices {
        let mut rng = row_rng(b"features", game_id, idx, seed);
        features.extend((0..FEATURE_DIM).map(|_| rng.gen_range(-1.0f32..=1.0)));
    }
    FrameFeatureMatrix::new(game_id, frame_indices.to_vec(), features)
        .expect("synthetic features need ascending positive indices")
}

/// Raw frames `[T, H, W, C]`, row-major, values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawClip {
    pub shape: [usize; 4],
    pub data: Vec<f32>,
}

impl RawClip {
    pub fn new(shape: [usize; 4], data: Vec<f32>) -> Option<Self> {
        (shape.iter().product::<usize>() == data.len()).then_some(Self { shape, data })
    }
}

/// Synthetic decoded clip: `shape[0]` frames picked evenly from `frame_indices`
/// (repeating the last one when there are fewer), each frame seeded by its index.
pub fn synth_clip(game_id: &str, frame_indices: &[u32], seed: u64, shape: [usize; 4]) -> RawClip {
    let [t, h, w, c] = shape;
    let mut picked = sample_evenly(frame_indices, t);
    let last = picked.last().copied().unwrap_or(1);
    picked.resize(t, last);
    let mut data = Vec::with_capacity(t * h * w * c);
    for idx in picked {
        let mut rng = row_rng(b"clip", game_id, idx, seed);
        data.extend((0..h * w * c).map(|_| rng.gen_range(-1.0f32..=1.0)));
    }
    RawClip { shape, data }
}

/// Clip rendered from a feature matrix: `shape[0]` rows picked evenly (the last
/// one repeated when there are fewer), each frame filled by cycling through
/// its row's values. Used where no decoded frames exist.
pub fn clip_from_features(m: &FrameFeatureMatrix, shape: [usize; 4]) -> RawClip {
    let [t, h, w, c] = shape;
    let rows: Vec<usize> = (0..m.num_frames()).collect();
    let mut picked = sample_evenly(&rows, t);
    if let Some(&last) = picked.last() {
        picked.resize(t, last);
    }
    let per_frame = h * w * c;
    let mut data = Vec::with_capacity(t * per_frame);
    for r in picked {
        let row = m.row(r);
        data.extend((0..per_frame).map(|i| row[i % FEATURE_DIM]));
    }
    data.resize(t * per_frame, 0.0);
    RawClip { shape, data }
}
