//! Recompression calibration.
//!
//! Decode a stream, re-encode the decoded pixels with the recorded
//! parameters (optionally overriding the QP to model analyst-side
//! parameter mismatch), decode the recompressed stream, and grid-align
//! the macroblock records of both compressions. Recompression never
//! runs an embedder; the second-compression records come from the
//! decoder trace, the same path an analyst holding only bitstreams
//! would use.

use thiserror::Error;

use crate::codec::{
    decode_sequence, encode_sequence, CodecError, EncodedStream, EncoderConfig, MacroblockRecord,
};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("no first-compression skipped macroblocks in the calibrated sequence")]
    NoSkipBlocks,
}

/// One macroblock grid cell seen by both compressions of the same
/// P-frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalibratedBlockPair {
    pub frame_index: u32,
    pub mb_row: u16,
    pub mb_col: u16,
    pub first: MacroblockRecord,
    pub second: MacroblockRecord,
}

/// All aligned P-frame macroblock pairs of one calibration run, sorted
/// by (frame, row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedSequence {
    pub pairs: Vec<CalibratedBlockPair>,
    pub qp_first: u8,
    pub qp_second: u8,
    /// P-frame indexes in coding order.
    pub p_frame_indices: Vec<u32>,
    pub mb_rows: u16,
    pub mb_cols: u16,
}

/// Calibrate a stream, also returning the recompressed stream.
pub fn calibrate_keep_stream(
    stream: &EncodedStream,
    qp_override: Option<u8>,
) -> Result<(CalibratedSequence, EncodedStream), CodecError> {
    let qp_second = qp_override.unwrap_or(stream.header.qp);
    let (decoded, first_records) = decode_sequence(stream)?;

    // all parameters except QP follow the first compression; search
    // parameters are the codec defaults the whole pipeline uses
    let config = EncoderConfig {
        qp: qp_second,
        gop_size: stream.header.gop_size,
        seed: stream.header.seed,
        ..EncoderConfig::default()
    };
    let recompressed = encode_sequence(&decoded, &config, None)?;
    let (_, second_records) = decode_sequence(&recompressed)?;

    let mb_cols = stream.mb_cols();
    let per_frame = mb_cols * stream.mb_rows();
    let p_frames = stream.p_frame_indices();

    let mut pairs = Vec::with_capacity(p_frames.len() * per_frame);
    for &t in &p_frames {
        let base = t as usize * per_frame;
        for i in 0..per_frame {
            let first = first_records[base + i].clone();
            let second = second_records[base + i].clone();
            debug_assert_eq!((first.mb_row, first.mb_col), (second.mb_row, second.mb_col));
            pairs.push(CalibratedBlockPair {
                frame_index: t,
                mb_row: first.mb_row,
                mb_col: first.mb_col,
                first,
                second,
            });
        }
    }

    Ok((
        CalibratedSequence {
            pairs,
            qp_first: stream.header.qp,
            qp_second,
            p_frame_indices: p_frames,
            mb_rows: stream.mb_rows() as u16,
            mb_cols: mb_cols as u16,
        },
        recompressed,
    ))
}

/// Recompression calibration of a stream; see the module docs.
pub fn calibrate(
    stream: &EncodedStream,
    qp_override: Option<u8>,
) -> Result<CalibratedSequence, CodecError> {
    calibrate_keep_stream(stream, qp_override).map(|(cal, _)| cal)
}

/// Fraction of first-compression skipped macroblocks that stay skipped
/// in the second compression.
pub fn retained_skip_fraction(cal: &CalibratedSequence) -> Result<f64, CalibrationError> {
    use crate::codec::PartitionKind::PSkip;
    let first_skips: Vec<&CalibratedBlockPair> =
        cal.pairs.iter().filter(|p| p.first.partition == PSkip).collect();
    if first_skips.is_empty() {
        return Err(CalibrationError::NoSkipBlocks);
    }
    let kept = first_skips.iter().filter(|p| p.second.partition == PSkip).count();
    Ok(kept as f64 / first_skips.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::PartitionKind;
    use crate::features::mvp_diff;
    use crate::yuv::{generate_synthetic, MotionModel};

    #[test]
    fn static_sequence_pairs_are_all_skip_with_zero_diff() {
        let video =
            generate_synthetic(64, 64, 6, MotionModel::StaticNoise { amplitude: 0 }, 1).unwrap();
        let stream = encode_sequence(&video, &EncoderConfig::default(), None).unwrap();
        let cal = calibrate(&stream, None).unwrap();
        assert_eq!(cal.pairs.len(), 80); // 5 P-frames x 16 macroblocks
        for p in &cal.pairs {
            assert_eq!(p.first.partition, PartitionKind::PSkip);
            assert_eq!(p.second.partition, PartitionKind::PSkip);
            assert_eq!(mvp_diff(p.first.mvp, p.second.mvp), 0);
        }
        assert_eq!(retained_skip_fraction(&cal).unwrap(), 1.0);
    }

    #[test]
    fn alignment_is_total() {
        let video = generate_synthetic(
            96,
            64,
            8,
            MotionModel::MultiObject { objects: 3, noise_amplitude: 1 },
            5,
        )
        .unwrap();
        let stream = encode_sequence(&video, &EncoderConfig::default(), None).unwrap();
        let cal = calibrate(&stream, None).unwrap();
        // 8 frames, gop 6 -> I at 0 and 6 -> 6 P-frames x 24 macroblocks
        assert_eq!(cal.pairs.len(), 6 * 24);
        let mut seen = std::collections::HashSet::new();
        for p in &cal.pairs {
            assert!(seen.insert((p.frame_index, p.mb_row, p.mb_col)), "duplicate pair");
        }
    }

    #[test]
    fn qp_override_is_recorded() {
        let video =
            generate_synthetic(64, 64, 4, MotionModel::StaticNoise { amplitude: 1 }, 2).unwrap();
        let config = EncoderConfig { qp: 25, ..Default::default() };
        let stream = encode_sequence(&video, &config, None).unwrap();
        let cal = calibrate(&stream, Some(28)).unwrap();
        assert_eq!((cal.qp_first, cal.qp_second), (25, 28));
        // matched override runs the identical path
        let a = calibrate(&stream, Some(25)).unwrap();
        let b = calibrate(&stream, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_skip_blocks_error() {
        // amplitude large enough that nothing skips at a tiny qp
        let video =
            generate_synthetic(64, 64, 4, MotionModel::StaticNoise { amplitude: 6 }, 3).unwrap();
        let config = EncoderConfig { qp: 2, ..Default::default() };
        let stream = encode_sequence(&video, &config, None).unwrap();
        let cal = calibrate(&stream, None).unwrap();
        let skips = cal
            .pairs
            .iter()
            .filter(|p| p.first.partition == PartitionKind::PSkip)
            .count();
        assert_eq!(skips, 0, "expected a skip-free stream for this test");
        assert!(matches!(retained_skip_fraction(&cal), Err(CalibrationError::NoSkipBlocks)));
    }
}
