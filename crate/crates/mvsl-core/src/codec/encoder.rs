//! Closed-loop encoder.

use crate::yuv::{Plane, VideoSequence};

use super::me::{displaced_in_frame, motion_estimate};
use super::mv::{compute_mvd, mvd_bits, MotionVector};
use super::recon::{RecPlane, RefView};
use super::transform::{all_zero, dequantize_inverse, transform_quantize, ResidualBlock};
use super::{
    macroblock_mvp, CarrierCandidate, CodecError, CodedFrame, CodedMacroblock, EncodedStream,
    EncoderConfig, FrameType, InLoopEmbedder, PartitionKind, StreamHeader,
};

const MB: usize = 16;

/// Mode-decision header-bit estimate: 4 bits per macroblock plus one per
/// additional sub-block.
fn header_bits(kind: PartitionKind) -> u32 {
    4 + (kind.sub_blocks().len() as u32 - 1)
}

/// Side-information charge for an intra macroblock in a P-frame (mode
/// signalling plus per-tile DC overhead). Keeps intra a genuine
/// new-content fallback instead of the default at coarse quantization.
const INTRA_HEADER_BITS: u32 = 24;

/// Copy the `bw` x `bh` reference block displaced by `mv` from
/// `(bx, by)`. Sampling is clamped to the plane, which never triggers
/// for encoder-chosen vectors but keeps decoding total.
fn prediction_block<R: RefView>(
    reference: &R,
    bx: usize,
    by: usize,
    bw: usize,
    bh: usize,
    mv: MotionVector,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(bw * bh);
    for y in 0..bh {
        for x in 0..bw {
            out.push(reference.at_clamped(
                bx as isize + x as isize + mv.h as isize,
                by as isize + y as isize + mv.v as isize,
            ));
        }
    }
    out
}

/// Four-condition P-Skip test: 16x16 shape against the previous
/// reconstructed frame at `MV == MVP`, requiring the whole residual to
/// quantize to zero. Vectors displacing outside the frame fail.
pub fn p_skip_test<R: RefView>(
    current: &Plane,
    mb_x: usize,
    mb_y: usize,
    mvp: MotionVector,
    reference: &R,
    qp: u8,
) -> bool {
    if !displaced_in_frame(reference.width(), reference.height(), mb_x, mb_y, MB, MB, mvp) {
        return false;
    }
    let pred = prediction_block(reference, mb_x, mb_y, MB, MB, mvp);
    let mut residual = ResidualBlock::new(MB, MB);
    for y in 0..MB {
        for x in 0..MB {
            residual.set(x, y, current.sample(mb_x + x, mb_y + y) as f64 - pred[y * MB + x]);
        }
    }
    all_zero(&transform_quantize(&residual, qp))
}

/// Reconstruct one inter macroblock from its prediction and quantized
/// residual; shared by the encoder loop and the decoder.
pub(super) fn reconstruct_inter_mb<R: RefView>(
    recon: &mut RecPlane,
    reference: &R,
    mb_x: usize,
    mb_y: usize,
    partition: PartitionKind,
    mvs: &[MotionVector],
    coeffs: &[i16],
    qp: u8,
) {
    let res = dequantize_inverse(coeffs, MB, MB, qp);
    for (i, &(dx, dy, bw, bh)) in partition.sub_blocks().iter().enumerate() {
        let mv = mvs[i];
        let pred = prediction_block(reference, mb_x + dx, mb_y + dy, bw, bh, mv);
        for y in 0..bh {
            for x in 0..bw {
                let value = pred[y * bw + x] + res.at(dx + x, dy + y);
                recon.set(mb_x + dx + x, mb_y + dy + y, value.clamp(0.0, 255.0));
            }
        }
    }
}

pub(super) fn reconstruct_skip_mb<R: RefView>(
    recon: &mut RecPlane,
    reference: &R,
    mb_x: usize,
    mb_y: usize,
    mvp: MotionVector,
) {
    let pred = prediction_block(reference, mb_x, mb_y, MB, MB, mvp);
    for y in 0..MB {
        for x in 0..MB {
            recon.set(mb_x + x, mb_y + y, pred[y * MB + x]);
        }
    }
}

pub(super) fn reconstruct_intra_mb(
    recon: &mut RecPlane,
    mb_x: usize,
    mb_y: usize,
    coeffs: &[i16],
    qp: u8,
) {
    let res = dequantize_inverse(coeffs, MB, MB, qp);
    for y in 0..MB {
        for x in 0..MB {
            recon.set(mb_x + x, mb_y + y, res.at(x, y).clamp(0.0, 255.0));
        }
    }
}

fn code_i_frame(frame: &Plane, qp: u8) -> (Vec<CodedMacroblock>, RecPlane) {
    let (w, h) = (frame.width(), frame.height());
    let mut recon = RecPlane::new(w, h);
    let mut mbs = Vec::with_capacity((w / MB) * (h / MB));
    for mb_y in (0..h).step_by(MB) {
        for mb_x in (0..w).step_by(MB) {
            let mut residual = ResidualBlock::new(MB, MB);
            for y in 0..MB {
                for x in 0..MB {
                    residual.set(x, y, frame.sample(mb_x + x, mb_y + y) as f64);
                }
            }
            let coeffs = transform_quantize(&residual, qp);
            reconstruct_intra_mb(&mut recon, mb_x, mb_y, &coeffs, qp);
            mbs.push(CodedMacroblock {
                partition: PartitionKind::Intra,
                mvs: Vec::new(),
                mvp: MotionVector::ZERO,
                coeffs,
            });
        }
    }
    (mbs, recon)
}

/// Code one P-frame. Returns the coded macroblocks, the reconstructed
/// luma, and the list of non-skip inter MVs (the embedder candidates of
/// the pass).
fn code_p_frame(
    frame: &Plane,
    reference: &RecPlane,
    config: &EncoderConfig,
    mut embedder: Option<&mut dyn InLoopEmbedder>,
) -> (Vec<CodedMacroblock>, RecPlane, Vec<CarrierCandidate>) {
    let (w, h) = (frame.width(), frame.height());
    let (mb_cols, mb_rows) = (w / MB, h / MB);
    let lambda_mode = config.lambda_mode();
    let lambda_motion = config.lambda_motion();
    let qp = config.qp;

    let mut recon = RecPlane::new(w, h);
    let mut mbs: Vec<CodedMacroblock> = Vec::with_capacity(mb_cols * mb_rows);
    let mut candidates = Vec::new();

    for row in 0..mb_rows {
        for col in 0..mb_cols {
            let (mb_x, mb_y) = (col * MB, row * MB);
            let mvp = macroblock_mvp(&mbs, mb_cols, row, col);

            if p_skip_test(frame, mb_x, mb_y, mvp, reference, qp) {
                reconstruct_skip_mb(&mut recon, reference, mb_x, mb_y, mvp);
                mbs.push(CodedMacroblock {
                    partition: PartitionKind::PSkip,
                    mvs: Vec::new(),
                    mvp,
                    coeffs: Vec::new(),
                });
                continue;
            }

            // partition search in fixed enumeration order, first-wins ties
            let mut best: Option<(PartitionKind, Vec<(MotionVector, f64)>, f64)> = None;
            for kind in [
                PartitionKind::P16x16,
                PartitionKind::P16x8,
                PartitionKind::P8x16,
                PartitionKind::P8x8,
            ] {
                let mut chosen = Vec::with_capacity(kind.mv_count());
                let mut sad_sum = 0.0;
                let mut bit_sum = header_bits(kind);
                for &(dx, dy, bw, bh) in kind.sub_blocks() {
                    let (mv, s) = motion_estimate(
                        frame,
                        mb_x + dx,
                        mb_y + dy,
                        bw,
                        bh,
                        reference,
                        mvp,
                        config.search_range,
                        config.strategy,
                        lambda_motion,
                    );
                    sad_sum += s;
                    bit_sum += mvd_bits(compute_mvd(mv, mvp));
                    chosen.push((mv, s));
                }
                let cost = sad_sum + lambda_mode * bit_sum as f64;
                if best.as_ref().is_none_or(|(_, _, c)| cost < *c) {
                    best = Some((kind, chosen, cost));
                }
            }
            let (kind, chosen, inter_cost) = best.unwrap();

            // intra fallback: SAD against the macroblock mean
            let mut sum = 0u32;
            for y in 0..MB {
                for x in 0..MB {
                    sum += frame.sample(mb_x + x, mb_y + y) as u32;
                }
            }
            let mean = ((sum + 128) / 256) as i32;
            let mut intra_sad = 0u64;
            for y in 0..MB {
                for x in 0..MB {
                    intra_sad += (frame.sample(mb_x + x, mb_y + y) as i32 - mean)
                        .unsigned_abs() as u64;
                }
            }
            let intra_cost = intra_sad as f64 + lambda_mode * INTRA_HEADER_BITS as f64;
            if intra_cost < inter_cost {
                let mut residual = ResidualBlock::new(MB, MB);
                for y in 0..MB {
                    for x in 0..MB {
                        residual.set(x, y, frame.sample(mb_x + x, mb_y + y) as f64);
                    }
                }
                let coeffs = transform_quantize(&residual, qp);
                reconstruct_intra_mb(&mut recon, mb_x, mb_y, &coeffs, qp);
                mbs.push(CodedMacroblock {
                    partition: PartitionKind::Intra,
                    mvs: Vec::new(),
                    mvp,
                    coeffs,
                });
                continue;
            }

            for (i, &(mv, s)) in chosen.iter().enumerate() {
                candidates.push(CarrierCandidate {
                    mb_row: row as u16,
                    mb_col: col as u16,
                    sub: i as u8,
                    mv,
                    sad: s,
                });
            }

            // the embedder may perturb chosen MVs before residual coding
            let mut mvs: Vec<MotionVector> = chosen.iter().map(|&(mv, _)| mv).collect();
            if let Some(emb) = embedder.as_deref_mut() {
                let subs = kind.sub_blocks();
                for (i, mv) in mvs.iter_mut().enumerate() {
                    let (dx, dy, bw, bh) = subs[i];
                    let range = config.search_range;
                    let valid = |m: MotionVector| {
                        m.h.abs() <= range
                            && m.v.abs() <= range
                            && displaced_in_frame(w, h, mb_x + dx, mb_y + dy, bw, bh, m)
                    };
                    *mv = emb.perturb(row as u16, col as u16, i as u8, *mv, &valid);
                }
            }

            // residual against the (possibly perturbed) reference blocks
            let mut residual = ResidualBlock::new(MB, MB);
            for (i, &(dx, dy, bw, bh)) in kind.sub_blocks().iter().enumerate() {
                let pred = prediction_block(reference, mb_x + dx, mb_y + dy, bw, bh, mvs[i]);
                for y in 0..bh {
                    for x in 0..bw {
                        residual.set(
                            dx + x,
                            dy + y,
                            frame.sample(mb_x + dx + x, mb_y + dy + y) as f64
                                - pred[y * bw + x],
                        );
                    }
                }
            }
            let coeffs = transform_quantize(&residual, qp);
            reconstruct_inter_mb(&mut recon, reference, mb_x, mb_y, kind, &mvs, &coeffs, qp);
            mbs.push(CodedMacroblock { partition: kind, mvs, mvp, coeffs });
        }
    }
    (mbs, recon, candidates)
}

/// Encode a sequence, returning the stream and the encoder-side
/// reconstruction (8-bit luma with neutral chroma).
pub fn encode_with_reconstruction(
    video: &VideoSequence,
    config: &EncoderConfig,
    mut embedder: Option<&mut dyn InLoopEmbedder>,
) -> Result<(EncodedStream, VideoSequence), CodecError> {
    if config.qp > 51 {
        return Err(CodecError::InvalidQp(config.qp));
    }
    if config.gop_size == 0 {
        return Err(CodecError::InvalidGopSize);
    }
    if video.frames().is_empty() {
        return Err(CodecError::EmptyVideo);
    }

    let descriptor = match &embedder {
        Some(e) => {
            let d = e.descriptor();
            (!d.is_empty()).then_some(d)
        }
        None => None,
    };

    let mut frames = Vec::with_capacity(video.n_frames());
    let mut recons: Vec<RecPlane> = Vec::with_capacity(video.n_frames());
    for (t, frame) in video.frames().iter().enumerate() {
        if t % config.gop_size as usize == 0 {
            let (mbs, recon) = code_i_frame(&frame.y, config.qp);
            frames.push(CodedFrame { frame_type: FrameType::I, macroblocks: mbs });
            recons.push(recon);
        } else {
            let reference = &recons[t - 1];
            let (mbs, recon) = match embedder.as_deref_mut() {
                None => {
                    let (mbs, recon, _) = code_p_frame(&frame.y, reference, config, None);
                    (mbs, recon)
                }
                Some(emb) => {
                    // lookahead pass fixes this frame's carrier set from
                    // the unperturbed coding decisions
                    let (_, _, candidates) = code_p_frame(&frame.y, reference, config, None);
                    emb.begin_frame(t as u32, &candidates).map_err(CodecError::Embedder)?;
                    let (mbs, recon, _) = code_p_frame(&frame.y, reference, config, Some(emb));
                    (mbs, recon)
                }
            };
            frames.push(CodedFrame { frame_type: FrameType::P, macroblocks: mbs });
            recons.push(recon);
        }
    }

    let stream = EncodedStream {
        header: StreamHeader {
            width: video.width() as u16,
            height: video.height() as u16,
            n_frames: video.n_frames() as u32,
            qp: config.qp,
            gop_size: config.gop_size,
            embedder: descriptor,
            seed: config.seed,
        },
        frames,
    };
    let recon_video = VideoSequence::from_luma(recons.iter().map(RecPlane::to_plane).collect())
        .expect("recon mirrors input shape");
    Ok((stream, recon_video))
}

/// Encode a sequence into a compressed stream.
pub fn encode_sequence(
    video: &VideoSequence,
    config: &EncoderConfig,
    embedder: Option<&mut dyn InLoopEmbedder>,
) -> Result<EncodedStream, CodecError> {
    encode_with_reconstruction(video, config, embedder).map(|(stream, _)| stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::yuv::{generate_synthetic, MotionModel};

    #[test]
    fn static_sequence_is_all_skip() {
        let video =
            generate_synthetic(64, 64, 6, MotionModel::StaticNoise { amplitude: 0 }, 1).unwrap();
        for qp in [5, 15, 25, 35, 45] {
            let config = EncoderConfig { qp, ..Default::default() };
            let stream = encode_sequence(&video, &config, None).unwrap();
            for frame in stream.frames.iter().skip(1) {
                assert_eq!(frame.frame_type, FrameType::P);
                for mb in &frame.macroblocks {
                    assert_eq!(mb.partition, PartitionKind::PSkip, "qp {qp}");
                    assert_eq!(mb.mvp, MotionVector::ZERO);
                }
            }
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let video = generate_synthetic(
            64,
            64,
            6,
            MotionModel::MultiObject { objects: 3, noise_amplitude: 1 },
            2,
        )
        .unwrap();
        let a = encode_sequence(&video, &EncoderConfig::default(), None).unwrap();
        let b = encode_sequence(&video, &EncoderConfig::default(), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_qp_rejected() {
        let video =
            generate_synthetic(64, 64, 2, MotionModel::StaticNoise { amplitude: 0 }, 1).unwrap();
        let config = EncoderConfig { qp: 52, ..Default::default() };
        assert!(matches!(
            encode_sequence(&video, &config, None),
            Err(CodecError::InvalidQp(52))
        ));
    }

    #[test]
    fn gop_pattern_is_honored() {
        let video = generate_synthetic(
            64,
            64,
            13,
            MotionModel::MultiObject { objects: 3, noise_amplitude: 1 },
            3,
        )
        .unwrap();
        let stream = encode_sequence(&video, &EncoderConfig::default(), None).unwrap();
        for (t, frame) in stream.frames.iter().enumerate() {
            let expect = if t % 6 == 0 { FrameType::I } else { FrameType::P };
            assert_eq!(frame.frame_type, expect, "frame {t}");
        }
    }

    #[test]
    fn skip_test_rejects_out_of_frame_mvp() {
        let video =
            generate_synthetic(64, 64, 2, MotionModel::StaticNoise { amplitude: 0 }, 1).unwrap();
        let f = &video.frames()[1].y;
        let r = &video.frames()[0].y;
        assert!(p_skip_test(f, 0, 0, MotionVector::ZERO, r, 25));
        assert!(!p_skip_test(f, 0, 0, MotionVector::new(-1, 0), r, 25));
    }

    #[test]
    fn skip_fraction_grows_with_qp() {
        let video = generate_synthetic(
            96,
            96,
            6,
            MotionModel::MultiObject { objects: 3, noise_amplitude: 2 },
            4,
        )
        .unwrap();
        let frac = |qp: u8| -> f64 {
            let config = EncoderConfig { qp, ..Default::default() };
            let stream = encode_sequence(&video, &config, None).unwrap();
            let mut skip = 0usize;
            let mut total = 0usize;
            for frame in stream.frames.iter().filter(|f| f.frame_type == FrameType::P) {
                for mb in &frame.macroblocks {
                    total += 1;
                    skip += (mb.partition == PartitionKind::PSkip) as usize;
                }
            }
            skip as f64 / total as f64
        };
        let (f15, f25, f35) = (frac(15), frac(25), frac(35));
        assert!(f35 >= f25 && f25 >= f15, "got {f15} {f25} {f35}");
    }
}
