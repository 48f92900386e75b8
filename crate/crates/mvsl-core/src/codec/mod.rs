//! Simplified H.264-style inter-predictive codec.
//!
//! P-frames are coded macroblock by macroblock in raster order: median
//! motion-vector prediction from coded neighbors, a P-Skip test, then a
//! rate-distortion partition search over {16x16, 16x8, 8x16, 8x8} with
//! an intra fallback. Residuals go through a 4x4 orthonormal DCT with
//! dead-zone quantization, and the reconstruction loop is closed so the
//! decoder reproduces encoder state bit-exactly. I-frames code raw
//! samples per macroblock through the same transform path.
//!
//! Motion vectors are integer-pel. An optional in-loop embedder hook may
//! perturb chosen motion vectors before residual coding, which is how
//! the steganographic embedders integrate with the loop.

mod container;
mod decoder;
mod encoder;
pub mod me;
pub mod mv;
pub mod recon;
pub mod transform;

pub use container::{deserialize, serialize};
pub use decoder::{decode_sequence, decode_with_reference_frames};
pub use encoder::{encode_sequence, encode_with_reconstruction, p_skip_test};
pub use me::{motion_estimate, SearchStrategy};
pub use mv::{compute_mvd, mvd_bits, predict_mvp, MotionVector};
pub use recon::{RecPlane, RefView};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("qp {0} outside [0, 51]")]
    InvalidQp(u8),
    #[error("gop size must be at least 1")]
    InvalidGopSize,
    #[error("video has no frames")]
    EmptyVideo,
    #[error("embedder error: {0}")]
    Embedder(String),
    #[error("bad magic bytes")]
    MagicMismatch,
    #[error("unsupported container version {0}")]
    VersionUnsupported(u16),
    #[error("malformed stream at byte {offset}: {reason}")]
    MalformedStream { offset: usize, reason: String },
}

impl CodecError {
    pub(crate) fn malformed(offset: usize, reason: impl Into<String>) -> Self {
        CodecError::MalformedStream { offset, reason: reason.into() }
    }
}

/// Macroblock coding mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionKind {
    PSkip,
    P16x16,
    P16x8,
    P8x16,
    P8x8,
    Intra,
}

impl PartitionKind {
    pub fn code(self) -> u8 {
        match self {
            PartitionKind::PSkip => 0,
            PartitionKind::P16x16 => 1,
            PartitionKind::P16x8 => 2,
            PartitionKind::P8x16 => 3,
            PartitionKind::P8x8 => 4,
            PartitionKind::Intra => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => PartitionKind::PSkip,
            1 => PartitionKind::P16x16,
            2 => PartitionKind::P16x8,
            3 => PartitionKind::P8x16,
            4 => PartitionKind::P8x8,
            5 => PartitionKind::Intra,
            _ => return None,
        })
    }

    /// Number of motion vectors this mode carries.
    pub fn mv_count(self) -> usize {
        match self {
            PartitionKind::PSkip | PartitionKind::Intra => 0,
            PartitionKind::P16x16 => 1,
            PartitionKind::P16x8 | PartitionKind::P8x16 => 2,
            PartitionKind::P8x8 => 4,
        }
    }

    /// Sub-block rectangles as `(dx, dy, w, h)` in raster order.
    pub fn sub_blocks(self) -> &'static [(usize, usize, usize, usize)] {
        match self {
            PartitionKind::PSkip | PartitionKind::Intra | PartitionKind::P16x16 => {
                &[(0, 0, 16, 16)]
            }
            PartitionKind::P16x8 => &[(0, 0, 16, 8), (0, 8, 16, 8)],
            PartitionKind::P8x16 => &[(0, 0, 8, 16), (8, 0, 8, 16)],
            PartitionKind::P8x8 => {
                &[(0, 0, 8, 8), (8, 0, 8, 8), (0, 8, 8, 8), (8, 8, 8, 8)]
            }
        }
    }
}

impl std::fmt::Display for PartitionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PartitionKind::PSkip => "pskip",
            PartitionKind::P16x16 => "16x16",
            PartitionKind::P16x8 => "16x8",
            PartitionKind::P8x16 => "8x16",
            PartitionKind::P8x8 => "8x8",
            PartitionKind::Intra => "intra",
        };
        f.write_str(s)
    }
}

/// One coded macroblock as stored in the stream.
///
/// `mvs` is empty for skipped and intra macroblocks. `mvp` is the
/// prediction used for the first sub-block; for a skipped macroblock it
/// is the inferred motion vector. `coeffs` holds the quantized levels in
/// per-4x4-tile zigzag order (empty for skipped macroblocks).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedMacroblock {
    pub partition: PartitionKind,
    pub mvs: Vec<MotionVector>,
    pub mvp: MotionVector,
    pub coeffs: Vec<i16>,
}

impl CodedMacroblock {
    pub fn all_coeffs_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameType {
    I,
    P,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedFrame {
    pub frame_type: FrameType,
    pub macroblocks: Vec<CodedMacroblock>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamHeader {
    pub width: u16,
    pub height: u16,
    pub n_frames: u32,
    pub qp: u8,
    pub gop_size: u8,
    /// `method=<name>;rate=<r>;seed=<s>` when an embedder ran, else None.
    pub embedder: Option<String>,
    pub seed: u64,
}

/// A complete compressed sequence: header plus per-frame macroblock
/// records and quantized coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedStream {
    pub header: StreamHeader,
    pub frames: Vec<CodedFrame>,
}

impl EncodedStream {
    pub fn mb_cols(&self) -> usize {
        self.header.width as usize / 16
    }

    pub fn mb_rows(&self) -> usize {
        self.header.height as usize / 16
    }

    /// Frame indexes coded as P-frames, in order.
    pub fn p_frame_indices(&self) -> Vec<u32> {
        self.frames
            .iter()
            .enumerate()
            .filter(|(_, f)| f.frame_type == FrameType::P)
            .map(|(i, _)| i as u32)
            .collect()
    }
}

/// Per-macroblock coding outcome in the decoder trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroblockRecord {
    pub frame_index: u32,
    pub mb_row: u16,
    pub mb_col: u16,
    pub partition: PartitionKind,
    pub mvs: Vec<MotionVector>,
    pub mvp: MotionVector,
    pub all_coeffs_zero: bool,
}

/// Encoder parameters. `seed` is provenance metadata recorded in the
/// stream header; the cover encoding path itself draws no randomness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub qp: u8,
    pub gop_size: u8,
    pub search_range: i16,
    pub strategy: SearchStrategy,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            qp: 25,
            gop_size: 6,
            search_range: 16,
            strategy: SearchStrategy::Hexagon,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn lambda_mode(&self) -> f64 {
        0.85 * ((self.qp as f64 - 12.0) / 3.0).exp2()
    }

    pub fn lambda_motion(&self) -> f64 {
        self.lambda_mode().sqrt()
    }
}

/// A non-skip inter motion vector available for embedding, reported to
/// the in-loop embedder once per P-frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierCandidate {
    pub mb_row: u16,
    pub mb_col: u16,
    pub sub: u8,
    pub mv: MotionVector,
    pub sad: f64,
}

/// Hook for in-loop motion-vector embedding.
///
/// For each P-frame the encoder first runs a lookahead pass without
/// embedding, hands the resulting motion vectors to [`begin_frame`],
/// then codes the frame for real, offering every chosen inter MV to
/// [`perturb`] before residual coding.
///
/// [`begin_frame`]: InLoopEmbedder::begin_frame
/// [`perturb`]: InLoopEmbedder::perturb
pub trait InLoopEmbedder {
    /// Descriptor recorded in the stream header. Returning an empty
    /// string records nothing, keeping the stream byte-identical to a
    /// cover encode (used for rate-zero plans).
    fn descriptor(&self) -> String;

    /// Select carriers among the frame's candidate motion vectors.
    fn begin_frame(
        &mut self,
        frame_index: u32,
        candidates: &[CarrierCandidate],
    ) -> Result<(), String>;

    /// Possibly perturb one chosen motion vector. `is_valid` reports
    /// whether a replacement keeps the displaced block inside the frame
    /// and within the search range.
    fn perturb(
        &mut self,
        mb_row: u16,
        mb_col: u16,
        sub: u8,
        mv: MotionVector,
        is_valid: &dyn Fn(MotionVector) -> bool,
    ) -> MotionVector;
}

/// Which side of the current macroblock a neighbor sits on; selects the
/// adjacent sub-block whose MV feeds the median prediction.
#[derive(Clone, Copy)]
pub(crate) enum NeighborSide {
    Left,
    Top,
    TopRight,
}

/// MV contribution of a coded neighbor macroblock: skipped macroblocks
/// contribute their inferred MV, intra macroblocks are absent, and
/// multi-partition macroblocks contribute the sub-block nearest the
/// current macroblock.
pub(crate) fn neighbor_contribution(
    mb: &CodedMacroblock,
    side: NeighborSide,
) -> Option<MotionVector> {
    match mb.partition {
        PartitionKind::PSkip => Some(mb.mvp),
        PartitionKind::Intra => None,
        PartitionKind::P16x16 => Some(mb.mvs[0]),
        // a left neighbor donates the sub-block at its top-right corner,
        // a top or top-right neighbor the one at its bottom-left corner
        PartitionKind::P16x8 => match side {
            NeighborSide::Left => Some(mb.mvs[0]),
            NeighborSide::Top | NeighborSide::TopRight => Some(mb.mvs[1]),
        },
        PartitionKind::P8x16 => match side {
            NeighborSide::Left => Some(mb.mvs[1]),
            NeighborSide::Top | NeighborSide::TopRight => Some(mb.mvs[0]),
        },
        PartitionKind::P8x8 => match side {
            NeighborSide::Left => Some(mb.mvs[1]),
            NeighborSide::Top | NeighborSide::TopRight => Some(mb.mvs[2]),
        },
    }
}

/// Median MVP for macroblock `(row, col)` given the frame's macroblocks
/// coded so far (raster order, so all three neighbors precede it).
pub(crate) fn macroblock_mvp(
    coded: &[CodedMacroblock],
    mb_cols: usize,
    row: usize,
    col: usize,
) -> MotionVector {
    let lookup = |r: usize, c: usize, side: NeighborSide| -> Option<MotionVector> {
        neighbor_contribution(&coded[r * mb_cols + c], side)
    };
    let left = if col > 0 { lookup(row, col - 1, NeighborSide::Left) } else { None };
    let top = if row > 0 { lookup(row - 1, col, NeighborSide::Top) } else { None };
    let topright = if row > 0 && col + 1 < mb_cols {
        lookup(row - 1, col + 1, NeighborSide::TopRight)
    } else {
        None
    };
    predict_mvp(left, top, topright)
}
