//! Decoder: rebuilds every frame exactly as the encoder's closed loop
//! did and emits the coding-element trace consumed by calibration and
//! feature extraction.

use crate::yuv::VideoSequence;

use super::encoder::{reconstruct_inter_mb, reconstruct_intra_mb, reconstruct_skip_mb};
use super::recon::RecPlane;
use super::{
    macroblock_mvp, CodecError, EncodedStream, FrameType, MacroblockRecord, MotionVector,
    PartitionKind,
};

const MB: usize = 16;

/// Decode a stream into the reconstructed sequence (luma; chroma is
/// neutral gray) and the per-macroblock trace.
///
/// Skipped macroblocks are reconstructed at the motion vector the
/// decoder infers from already-decoded neighbors, which is the only
/// motion information a skipped macroblock has.
pub fn decode_sequence(
    stream: &EncodedStream,
) -> Result<(VideoSequence, Vec<MacroblockRecord>), CodecError> {
    decode_with_reference_frames(stream).map(|(v, r, _)| (v, r))
}

/// [`decode_sequence`] plus the float reference frames of the
/// reconstruction loop, for callers re-deriving encoder decisions.
pub fn decode_with_reference_frames(
    stream: &EncodedStream,
) -> Result<(VideoSequence, Vec<MacroblockRecord>, Vec<RecPlane>), CodecError> {
    let header = &stream.header;
    let (w, h) = (header.width as usize, header.height as usize);
    if w == 0 || h == 0 || w % MB != 0 || h % MB != 0 {
        return Err(CodecError::malformed(0, "dimensions not macroblock aligned"));
    }
    if header.qp > 51 {
        return Err(CodecError::InvalidQp(header.qp));
    }
    if stream.frames.len() != header.n_frames as usize {
        return Err(CodecError::malformed(
            0,
            format!(
                "header declares {} frames, payload has {}",
                header.n_frames,
                stream.frames.len()
            ),
        ));
    }
    let (mb_cols, mb_rows) = (w / MB, h / MB);
    let expected_mbs = mb_cols * mb_rows;

    let mut records = Vec::with_capacity(stream.frames.len() * expected_mbs);
    let mut recons: Vec<RecPlane> = Vec::with_capacity(stream.frames.len());

    for (t, frame) in stream.frames.iter().enumerate() {
        if frame.macroblocks.len() != expected_mbs {
            return Err(CodecError::malformed(
                0,
                format!(
                    "frame {t} carries {} macroblocks, expected {expected_mbs}",
                    frame.macroblocks.len()
                ),
            ));
        }
        for (i, mb) in frame.macroblocks.iter().enumerate() {
            if mb.mvs.len() != mb.partition.mv_count() {
                return Err(CodecError::malformed(
                    0,
                    format!("frame {t} macroblock {i}: mv count mismatch"),
                ));
            }
            let expect_coeffs =
                if mb.partition == PartitionKind::PSkip { 0 } else { MB * MB };
            if mb.coeffs.len() != expect_coeffs {
                return Err(CodecError::malformed(
                    0,
                    format!("frame {t} macroblock {i}: coefficient payload length"),
                ));
            }
        }

        let zero_reference;
        let reference = if t == 0 {
            zero_reference = RecPlane::new(w, h);
            &zero_reference
        } else {
            &recons[t - 1]
        };

        let mut recon = RecPlane::new(w, h);
        // decoded MBs of this frame feed neighbor MVP prediction exactly
        // as at encode time
        let mut frame_mbs = Vec::with_capacity(expected_mbs);
        for row in 0..mb_rows {
            for col in 0..mb_cols {
                let mb = &frame.macroblocks[row * mb_cols + col];
                let (mb_x, mb_y) = (col * MB, row * MB);
                let mvp = if frame.frame_type == FrameType::I {
                    MotionVector::ZERO
                } else {
                    macroblock_mvp(&frame_mbs, mb_cols, row, col)
                };
                match mb.partition {
                    PartitionKind::PSkip => {
                        reconstruct_skip_mb(&mut recon, reference, mb_x, mb_y, mvp);
                    }
                    PartitionKind::Intra => {
                        reconstruct_intra_mb(&mut recon, mb_x, mb_y, &mb.coeffs, header.qp);
                    }
                    kind => {
                        reconstruct_inter_mb(
                            &mut recon, reference, mb_x, mb_y, kind, &mb.mvs, &mb.coeffs,
                            header.qp,
                        );
                    }
                }
                records.push(MacroblockRecord {
                    frame_index: t as u32,
                    mb_row: row as u16,
                    mb_col: col as u16,
                    partition: mb.partition,
                    mvs: mb.mvs.clone(),
                    mvp,
                    all_coeffs_zero: mb.all_coeffs_zero(),
                });
                let mut decoded = mb.clone();
                decoded.mvp = mvp;
                frame_mbs.push(decoded);
            }
        }
        recons.push(recon);
    }

    let video = VideoSequence::from_luma(recons.iter().map(RecPlane::to_plane).collect())
        .map_err(|e| CodecError::malformed(0, format!("stream too short to decode: {e}")))?;
    Ok((video, records, recons))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_with_reconstruction, EncoderConfig};
    use crate::yuv::{generate_synthetic, MotionModel};

    #[test]
    fn decode_matches_encoder_reconstruction() {
        for (seed, model) in [
            (1, MotionModel::MultiObject { objects: 3, noise_amplitude: 1 }),
            (2, MotionModel::GlobalPan { dx: 1, dy: 1 }),
            (3, MotionModel::StaticNoise { amplitude: 2 }),
        ] {
            let video = generate_synthetic(64, 64, 7, model, seed).unwrap();
            let (stream, recon) =
                encode_with_reconstruction(&video, &EncoderConfig::default(), None).unwrap();
            let (decoded, _records) = decode_sequence(&stream).unwrap();
            assert_eq!(decoded, recon, "drift for model {model:?}");
        }
    }

    #[test]
    fn skip_mv_is_inferred_from_neighbors() {
        // decoder-side MVP of a skipped macroblock is the median of the
        // decoded neighbor MVs
        let video =
            generate_synthetic(96, 96, 4, MotionModel::GlobalPan { dx: -1, dy: 0 }, 11).unwrap();
        let stream = crate::codec::encode_sequence(&video, &EncoderConfig::default(), None)
            .unwrap();
        let (_, records) = decode_sequence(&stream).unwrap();
        let skips: Vec<_> = records
            .iter()
            .filter(|r| r.partition == PartitionKind::PSkip && r.frame_index > 0)
            .collect();
        assert!(!skips.is_empty(), "expected skipped macroblocks in a pan scene");
        assert!(skips.iter().all(|r| r.mvs.is_empty() && r.all_coeffs_zero));
    }

    #[test]
    fn frame_count_mismatch_is_malformed() {
        let video =
            generate_synthetic(64, 64, 4, MotionModel::StaticNoise { amplitude: 0 }, 5).unwrap();
        let mut stream =
            crate::codec::encode_sequence(&video, &EncoderConfig::default(), None).unwrap();
        stream.frames.pop();
        assert!(matches!(
            decode_sequence(&stream),
            Err(CodecError::MalformedStream { .. })
        ));
    }
}
