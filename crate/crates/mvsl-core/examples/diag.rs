//! Pipeline diagnostics: skip-rate, feature separation and detection
//! accuracy over corpus configurations.

use mvsl_core::calibration::calibrate;
use mvsl_core::classifier::{
    default_c_grid, default_gamma_grid, evaluate, LabeledSample, COVER_LABEL, STEGO_LABEL,
};
use mvsl_core::codec::{encode_sequence, EncoderConfig, FrameType, PartitionKind};
use mvsl_core::features::{extract_smcf, mvp_diff, WindowMode};
use mvsl_core::stego::{EmbedMethod, EmbeddingPlan, MvEmbedder};
use mvsl_core::util::mix_seed;
use mvsl_core::yuv::{generate_synthetic, MotionModel, VideoSequence};

#[derive(Clone, Copy)]
struct Config {
    name: &'static str,
    width: usize,
    height: usize,
    frames: usize,
    pan_share: usize, // every k-th sequence is a pan (0 = never)
    objects: [usize; 3],
    noise: u8,
    method: EmbedMethod,
}

fn corpus(cfg: &Config, count: usize, seed: u64) -> Vec<VideoSequence> {
    (0..count)
        .map(|i| {
            let s = mix_seed(seed, 1000 + i as u64);
            let model = if cfg.pan_share > 0 && i % cfg.pan_share == cfg.pan_share - 1 {
                MotionModel::GlobalPan {
                    dx: [1, -1, 2][i / 4 % 3],
                    dy: [0, 1, -1][i / 5 % 3],
                }
            } else {
                MotionModel::MultiObject {
                    objects: cfg.objects[i % 3],
                    noise_amplitude: cfg.noise,
                }
            };
            generate_synthetic(cfg.width, cfg.height, cfg.frames, model, s).unwrap()
        })
        .collect()
}

fn run(cfg: &Config, count: usize, seed: u64) {
    let videos = corpus(cfg, count, seed);
    let qp = 25u8;
    let rate = 0.2f64;
    let config = EncoderConfig { qp, ..Default::default() };

    let mut samples = Vec::new();
    let mut cover_f = [0.0f64; 11];
    let mut stego_f = [0.0f64; 11];
    let (mut cover_n, mut stego_n) = (0usize, 0usize);
    let (mut dual, mut perturbed) = (0usize, 0usize);
    let (mut fate_diff, mut fate_zero, mut fate_broke) = (0, 0, 0);
    let (mut base_total, mut base_cover, mut base_stego) = (0usize, 0usize, 0usize);
    let mut skip_frac = [0.0f64; 3];

    for (i, v) in videos.iter().enumerate() {
        for (k, qpx) in [15u8, 25, 35].into_iter().enumerate() {
            let c = EncoderConfig { qp: qpx, ..Default::default() };
            let s = encode_sequence(v, &c, None).unwrap();
            let (mut sk, mut tot) = (0usize, 0usize);
            for f in s.frames.iter().filter(|f| f.frame_type == FrameType::P) {
                for mb in &f.macroblocks {
                    tot += 1;
                    sk += (mb.partition == PartitionKind::PSkip) as usize;
                }
            }
            skip_frac[k] += sk as f64 / tot as f64 / count as f64;
        }

        let cover = encode_sequence(v, &config, None).unwrap();
        let plan =
            EmbeddingPlan::new(cfg.method, rate, mix_seed(seed, 2000 + i as u64)).unwrap();
        let mut emb = MvEmbedder::new(plan);
        let stego = encode_sequence(v, &config, Some(&mut emb)).unwrap();

        let stego_cal = calibrate(&stego, None).unwrap();
        let cover_cal = calibrate(&cover, None).unwrap();
        let per = cover.mb_cols() * cover.mb_rows();
        let p_frames: Vec<u32> = cover.p_frame_indices();
        for (fi, (fc, fs)) in cover.frames.iter().zip(&stego.frames).enumerate() {
            if fc.frame_type != FrameType::P {
                continue;
            }
            let p_pos = p_frames.iter().position(|&t| t == fi as u32).unwrap();
            for (mi, (mc, ms)) in fc.macroblocks.iter().zip(&fs.macroblocks).enumerate() {
                if mc.partition != PartitionKind::PSkip
                    || ms.partition != PartitionKind::PSkip
                {
                    continue;
                }
                dual += 1;
                let pair_s = &stego_cal.pairs[p_pos * per + mi];
                let pair_c = &cover_cal.pairs[p_pos * per + mi];
                let sdiff = mvp_diff(pair_s.first.mvp, pair_s.second.mvp);
                if mc.mvp != ms.mvp {
                    perturbed += 1;
                    if pair_s.second.partition == PartitionKind::PSkip {
                        if sdiff > 0 {
                            fate_diff += 1;
                        } else {
                            fate_zero += 1;
                        }
                    } else {
                        fate_broke += 1;
                    }
                } else if pair_c.second.partition == PartitionKind::PSkip
                    && pair_s.second.partition == PartitionKind::PSkip
                {
                    let cdiff = mvp_diff(pair_c.first.mvp, pair_c.second.mvp);
                    base_total += 1;
                    base_cover += (cdiff > 0) as usize;
                    base_stego += (sdiff > 0) as usize;
                }
            }
        }

        for (label, cal) in [(COVER_LABEL, &cover_cal), (STEGO_LABEL, &stego_cal)] {
            for v in extract_smcf(cal, 5, WindowMode::NonOverlapping) {
                if v.n_f1 > 0 {
                    let acc = if label == COVER_LABEL {
                        cover_n += 1;
                        &mut cover_f
                    } else {
                        stego_n += 1;
                        &mut stego_f
                    };
                    for (a, b) in acc.iter_mut().zip(&v.f) {
                        *a += b;
                    }
                }
                samples.push(LabeledSample {
                    features: v.f.to_vec(),
                    label,
                    pair_id: format!("seq{i:03}"),
                });
            }
        }
    }
    for v in cover_f.iter_mut() {
        *v /= cover_n as f64;
    }
    for v in stego_f.iter_mut() {
        *v /= stego_n as f64;
    }

    let report =
        evaluate(&samples, &default_c_grid(), &default_gamma_grid(), 10, 0.6, seed).unwrap();
    println!(
        "[{}] skip15/25/35 {:.2}/{:.2}/{:.2} | pert {}/{} fate d/z/b {}/{}/{} | base c/s {}/{} of {} | f1(0) {:.3}/{:.3} f1(1) {:.3}/{:.3} f2(sk) {:.3}/{:.3} f2(16) {:.3}/{:.3} | ACC {:.3} +- {:.3}",
        cfg.name,
        skip_frac[0],
        skip_frac[1],
        skip_frac[2],
        perturbed,
        dual,
        fate_diff,
        fate_zero,
        fate_broke,
        base_cover,
        base_stego,
        base_total,
        cover_f[0],
        stego_f[0],
        cover_f[1],
        stego_f[1],
        cover_f[5],
        stego_f[5],
        cover_f[6],
        stego_f[6],
        report.mean,
        report.std_dev
    );
}

fn main() {
    let seed = 7u64;
    let configs = [
        Config {
            name: "A 96x96x18 obj9/12/7 n1 rand",
            width: 96,
            height: 96,
            frames: 18,
            pan_share: 4,
            objects: [9, 12, 7],
            noise: 1,
            method: EmbedMethod::LsbMatchRandom,
        },
        Config {
            name: "B 128x96x24 same",
            width: 128,
            height: 96,
            frames: 24,
            pan_share: 4,
            objects: [9, 12, 7],
            noise: 1,
            method: EmbedMethod::LsbMatchRandom,
        },
        Config {
            name: "C 96x96x18 no-pan obj12",
            width: 96,
            height: 96,
            frames: 18,
            pan_share: 0,
            objects: [12, 12, 12],
            noise: 1,
            method: EmbedMethod::LsbMatchRandom,
        },
        Config {
            name: "D 96x96x18 mag-selective",
            width: 96,
            height: 96,
            frames: 18,
            pan_share: 4,
            objects: [9, 12, 7],
            noise: 1,
            method: EmbedMethod::MagnitudeSelective,
        },
    ];
    for cfg in &configs {
        run(cfg, 20, seed);
    }
}
