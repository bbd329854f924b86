//! Trailer frame bookkeeping: the 3-minute cap, burst frame selection, the
//! VGDF feature-file format and deterministic synthetic stand-ins for the
//! pretrained backbone.
//!
//! Frame indices are 1-based throughout (`F_1 .. F_N`); a decoder holding a
//! 0-based frame array reads frame `i` at position `i - 1`.

mod features;
mod select;
mod synth;

use std::io::{self, Write};
use std::path::Path;

pub use features::{
    decode_feature_file, encode_feature_file, read_feature_file, write_feature_file, FeatureFileError,
    FrameFeatureMatrix, FEATURE_DIM, VGDF_MAGIC, VGDF_VERSION,
};
pub use select::{clamp_frame_count, sample_evenly, select_frames, FrameSelection, FrameSelectionParams, ParamsError};
pub use synth::{clip_from_features, synth_clip, synth_features, RawClip};

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
