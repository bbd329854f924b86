//! VGDF: per-trailer frame feature matrices.
//!
//! Little-endian layout:
//!
//! | field            | type                 |
//! |------------------|----------------------|
//! | magic            | `b"VGDF"`            |
//! | version          | u32 = 1              |
//! | M (frames)       | u32                  |
//! | D (feature dim)  | u32 = 2048           |
//! | id length        | u32                  |
//! | game id          | UTF-8 bytes          |
//! | frame indices    | M × u32, 1-based     |
//! | features         | M·D × f32, row-major |
//!
//! Nothing may follow the payload.

use std::path::Path;

use thiserror::Error;

use super::{atomic_write, FrameSelectionParams};

pub const VGDF_MAGIC: [u8; 4] = *b"VGDF";
pub const VGDF_VERSION: u32 = 1;
pub const FEATURE_DIM: usize = 2048;

#[derive(Debug, Error)]
pub enum FeatureFileError {
    #[error("UnsupportedFormat: {0}")]
    UnsupportedFormat(String),
    #[error("CorruptFeatureFile: {0}")]
    CorruptFeatureFile(String),
    #[error("DimensionMismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("InvalidMatrix: {0}")]
    InvalidMatrix(String),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}

/// `M × 2048` per-frame features of one trailer.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureMatrix {
    game_id: String,
    frame_indices: Vec<u32>,
    features: Vec<f32>,
}

impl FrameFeatureMatrix {
    pub fn new(
        game_id: impl Into<String>,
        frame_indices: Vec<u32>,
        features: Vec<f32>,
    ) -> Result<Self, FeatureFileError> {
        let m = Self { game_id: game_id.into(), frame_indices, features };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), FeatureFileError> {
        let bad = |s: String| Err(FeatureFileError::InvalidMatrix(s));
        if self.features.len() != self.frame_indices.len() * FEATURE_DIM {
            return bad(format!(
                "{} values for {} frames of width {FEATURE_DIM}",
                self.features.len(),
                self.frame_indices.len()
            ));
        }
        if self.frame_indices.first() == Some(&0) || self.frame_indices.windows(2).any(|w| w[0] >= w[1]) {
            return bad("frame indices must be 1-based and strictly ascending".into());
        }
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            return bad(format!("non-finite feature at flat position {pos}"));
        }
        Ok(())
    }

    pub fn game_id(&self) -> &str {
        &self.game_id
    }

    pub fn frame_indices(&self) -> &[u32] {
        &self.frame_indices
    }

    /// Row-major `M × 2048` values.
    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn num_frames(&self) -> usize {
        self.frame_indices.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]
    }

    /// True when the indices came from the short-trailer fallback rather than
    /// the burst schedule (bursts never select a frame before the start offset).
    pub fn is_fallback_sampled(&self, params: &FrameSelectionParams) -> bool {
        self.frame_indices.first().is_some_and(|&i| i < params.start_offset())
    }
}

pub fn encoded_len(num_frames: usize, id_len: usize) -> usize {
    4 + 4 * 4 + id_len + 4 * num_frames + 4 * num_frames * FEATURE_DIM
}

pub fn encode_feature_file(m: &FrameFeatureMatrix) -> Vec<u8> {
    let id = m.game_id.as_bytes();
    let mut out = Vec::with_capacity(encoded_len(m.num_frames(), id.len()));
    out.extend_from_slice(&VGDF_MAGIC);
    out.extend_from_slice(&VGDF_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.num_frames() as u32).to_le_bytes());
    out.extend_from_slice(&(FEATURE_DIM as u32).to_le_bytes());
    out.extend_from_slice(&(id.len() as u32).to_le_bytes());
    out.extend_from_slice(id);
    for &i in &m.frame_indices {
        out.extend_from_slice(&i.to_le_bytes());
    }
    for &v in &m.features {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], FeatureFileError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| FeatureFileError::CorruptFeatureFile(format!("truncated while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, FeatureFileError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_feature_file(bytes: &[u8]) -> Result<FrameFeatureMatrix, FeatureFileError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic = cur.take(4, "magic").map_err(|_| FeatureFileError::UnsupportedFormat("missing magic".into()))?;
    if magic != VGDF_MAGIC {
        return Err(FeatureFileError::UnsupportedFormat(format!("bad magic {magic:02x?}")));
    }
    let version = cur.u32("version")?;
    if version != VGDF_VERSION {
        return Err(FeatureFileError::UnsupportedFormat(format!("version {version}")));
    }
    let m = cur.u32("frame count")? as usize;
    let d = cur.u32("feature dimension")? as usize;
    if d != FEATURE_DIM {
        return Err(FeatureFileError::DimensionMismatch { expected: FEATURE_DIM, found: d });
    }
    let id_len = cur.u32("id length")? as usize;
    // size check before any allocation driven by header fields
    let expected = m
        .checked_mul(4 * (FEATURE_DIM + 1))
        .and_then(|p| p.checked_add(20 + id_len))
        .ok_or_else(|| FeatureFileError::CorruptFeatureFile("header sizes overflow".into()))?;
    if bytes.len() < expected {
        return Err(FeatureFileError::CorruptFeatureFile(format!(
            "truncated payload: {} of {expected} bytes",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(FeatureFileError::CorruptFeatureFile(format!("{} trailing bytes", bytes.len() - expected)));
    }
    let game_id = std::str::from_utf8(cur.take(id_len, "game id")?)
        .map_err(|_| FeatureFileError::CorruptFeatureFile("game id is not UTF-8".into()))?
        .to_string();
    let frame_indices = cur
        .take(4 * m, "frame indices")?
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let features = cur
        .take(4 * m * FEATURE_DIM, "features")?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    FrameFeatureMatrix::new(game_id, frame_indices, features).map_err(|e| match e {
        FeatureFileError::InvalidMatrix(s) => FeatureFileError::CorruptFeatureFile(s),
        other => other,
    })
}

pub fn write_feature_file(m: &FrameFeatureMatrix, path: impl AsRef<Path>) -> Result<(), FeatureFileError> {
    m.validate()?;
    atomic_write(path.as_ref(), &encode_feature_file(m))?;
    Ok(())
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FrameFeatureMatrix, FeatureFileError> {
    decode_feature_file(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trailer::synth_features;

    fn header(version: u32, m: u32, d: u32, id: &[u8]) -> Vec<u8> {
        let mut b = b"VGDF".to_vec();
        for v in [version, m, d, id.len() as u32] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(id);
        b
    }

    #[test]
    fn round_trip_three_rows() {
        let m = synth_features("g", &[50, 51, 52], 3);
        let back = decode_feature_file(&encode_feature_file(&m)).unwrap();
        assert_eq!(back, m);
        let same_bits = back.features().iter().zip(m.features()).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same_bits);
    }

    #[test]
    fn file_size_for_fifty_rows() {
        let idx: Vec<u32> = (1..=50).collect();
        let m = synth_features("abc", &idx, 1);
        let bytes = encode_feature_file(&m);
        // 4 magic + 4·4 header words + 3 id bytes + 50·4 indices + 50·2048·4 payload
        assert_eq!(bytes.len(), 20 + 3 + 200 + 50 * 2048 * 4);
    }

    #[test]
    fn header_guards() {
        let wrong_dim = header(1, 0, 1024, b"g");
        assert!(matches!(
            decode_feature_file(&wrong_dim),
            Err(FeatureFileError::DimensionMismatch { expected: 2048, found: 1024 })
        ));
        let mut bad_magic = header(1, 0, 2048, b"g");
        bad_magic[0] = b'X';
        assert!(matches!(decode_feature_file(&bad_magic), Err(FeatureFileError::UnsupportedFormat(_))));
        assert!(matches!(decode_feature_file(&header(2, 0, 2048, b"g")), Err(FeatureFileError::UnsupportedFormat(_))));
        assert!(matches!(decode_feature_file(b"VG"), Err(FeatureFileError::UnsupportedFormat(_))));
        assert!(decode_feature_file(&header(1, 0, 2048, b"g")).is_ok());
    }

    #[test]
    fn truncation_and_trailing_bytes() {
        let bytes = encode_feature_file(&synth_features("g", &[60, 61], 9));
        for cut in [bytes.len() - 1, bytes.len() - 4 * 2048, 21, 10] {
            assert!(
                matches!(decode_feature_file(&bytes[..cut]), Err(FeatureFileError::CorruptFeatureFile(_))),
                "cut at {cut}"
            );
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_feature_file(&extra), Err(FeatureFileError::CorruptFeatureFile(_))));
    }

    #[test]
    fn huge_frame_count_does_not_allocate() {
        let b = header(1, u32::MAX, 2048, b"g");
        assert!(matches!(decode_feature_file(&b), Err(FeatureFileError::CorruptFeatureFile(_))));
    }

    #[test]
    fn payload_invariants_checked_on_read() {
        let m = synth_features("g", &[5, 6], 1);
        let mut bytes = encode_feature_file(&m);
        // NaN in the first feature
        let off = 20 + 1 + 8;
        bytes[off..off + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_feature_file(&bytes), Err(FeatureFileError::CorruptFeatureFile(_))));
        // descending indices
        let mut bytes = encode_feature_file(&m);
        bytes[21..25].copy_from_slice(&9u32.to_le_bytes());
        assert!(matches!(decode_feature_file(&bytes), Err(FeatureFileError::CorruptFeatureFile(_))));
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(FrameFeatureMatrix::new("g", vec![1], vec![0.0; 10]).is_err());
        assert!(FrameFeatureMatrix::new("g", vec![0], vec![0.0; FEATURE_DIM]).is_err());
        assert!(FrameFeatureMatrix::new("g", vec![], vec![]).is_ok());
    }

    #[test]
    fn fallback_detection() {
        let p = FrameSelectionParams::default();
        assert!(synth_features("g", &[1, 6, 11], 0).is_fallback_sampled(&p));
        assert!(!synth_features("g", &[50, 51], 0).is_fallback_sampled(&p));
    }
}
