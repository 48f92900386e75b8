//! Laboratory for motion-vector-domain video steganalysis built around
//! skipped macroblocks.
//!
//! The crate wires together a complete desk-scale pipeline:
//!
//! 1. [`yuv`] — raw YUV 4:2:0 I/O plus deterministic synthetic sequences.
//! 2. [`codec`] — a simplified inter-predictive encoder/decoder with
//!    variable macroblock partitions, median motion-vector prediction,
//!    P-Skip decisions and a closed reconstruction loop.
//! 3. [`stego`] — in-loop ±1 motion-vector embedders driven at a
//!    bits-per-non-skip-MV rate.
//! 4. [`calibration`] — recompression calibration: decode, re-encode,
//!    grid-align macroblock records from both compressions.
//! 5. [`features`] — the 11-dimensional skip-macroblock calibrated
//!    feature set (MVP reversion + partition state transfer).
//! 6. [`classifier`] — Gaussian-kernel SVM with the cross-validated
//!    paired-split evaluation protocol.

pub mod calibration;
pub mod classifier;
pub mod codec;
pub mod features;
pub mod stego;
pub mod util;
pub mod yuv;

pub use calibration::{calibrate, CalibratedBlockPair, CalibratedSequence};
pub use codec::{
    decode_sequence, encode_sequence, EncodedStream, EncoderConfig, MacroblockRecord,
    MotionVector, PartitionKind,
};
pub use features::{extract_smcf, FeatureVector, WindowMode};
pub use yuv::{generate_synthetic, MotionModel, VideoSequence};
