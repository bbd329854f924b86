use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("InvalidFrameParams: {0}")]
pub struct ParamsError(String);

/// Knobs of the burst frame selector and of the duration cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSelectionParams {
    start_offset: u32,
    window: u32,
    stride: u32,
    fps: u32,
    max_duration_secs: u32,
}

impl Default for FrameSelectionParams {
    fn default() -> Self {
        Self { start_offset: 50, window: 10, stride: 150, fps: 4, max_duration_secs: 180 }
    }
}

impl FrameSelectionParams {
    pub fn new(
        start_offset: u32,
        window: u32,
        stride: u32,
        fps: u32,
        max_duration_secs: u32,
    ) -> Result<Self, ParamsError> {
        if start_offset == 0 || window == 0 || stride == 0 || fps == 0 || max_duration_secs == 0 {
            return Err(ParamsError("all parameters must be positive".into()));
        }
        if window > stride {
            return Err(ParamsError(format!("window {window} exceeds stride {stride}")));
        }
        Ok(Self { start_offset, window, stride, fps, max_duration_secs })
    }

    pub fn start_offset(&self) -> u32 {
        self.start_offset
    }
    pub fn window(&self) -> u32 {
        self.window
    }
    pub fn stride(&self) -> u32 {
        self.stride
    }
    pub fn fps(&self) -> u32 {
        self.fps
    }
    pub fn max_duration_secs(&self) -> u32 {
        self.max_duration_secs
    }

    /// Frames kept after the duration cap (720 by default).
    pub fn max_frames(&self) -> u64 {
        u64::from(self.fps) * u64::from(self.max_duration_secs)
    }
}

/// Frame count after trimming to the maximum duration.
pub fn clamp_frame_count(raw_frames: u64, params: &FrameSelectionParams) -> u64 {
    raw_frames.min(params.max_frames())
}

/// Selected 1-based frame indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSelection {
    pub indices: Vec<u32>,
    /// Set when the burst schedule selected nothing and the indices were
    /// sampled evenly over the whole trailer instead.
    pub fallback: bool,
}

impl FrameSelection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Bursts of `window` consecutive frames starting at `start_offset` and every
/// `stride` frames after that, truncated at frame `n`.
///
/// Trailers too short for a single burst fall back to up to `window` frames
/// spread evenly over `[1, n]`.
pub fn select_frames(n: u32, params: &FrameSelectionParams) -> FrameSelection {
    let mut indices = Vec::new();
    let n64 = u64::from(n);
    let mut start = u64::from(params.start_offset);
    while start < n64 {
        for j in 0..u64::from(params.window) {
            if start + j <= n64 {
                indices.push((start + j) as u32);
            } else {
                break;
            }
        }
        start += u64::from(params.stride);
    }
    if indices.is_empty() && n > 0 {
        let all: Vec<u32> = (1..=n).collect();
        return FrameSelection { indices: sample_evenly(&all, params.window as usize), fallback: true };
    }
    FrameSelection { indices, fallback: false }
}

/// Up to `count` items spread evenly over `items`, endpoints included.
/// With fewer items than `count` the whole slice is returned.
pub fn sample_evenly<T: Copy>(items: &[T], count: usize) -> Vec<T> {
    if items.len() <= count {
        return items.to_vec();
    }
    match count {
        0 => Vec::new(),
        1 => vec![items[0]],
        _ => {
            let last = items.len() - 1;
            (0..count).map(|k| items[k * last / (count - 1)]).collect()
        }
    }
}
