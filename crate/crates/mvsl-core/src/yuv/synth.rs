//! Deterministic synthetic test sequences.
//!
//! Three motion models cover the coding situations the pipeline cares
//! about: a rigid global pan (every block has the same true motion), a
//! multi-object scene (independently moving textured rectangles over a
//! slowly panning background, with optional temporal noise), and a
//! static scene with i.i.d. noise. All content is a pure function of
//! `(width, height, n_frames, model, seed)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::util::mix_seed;

use super::{Frame, Plane, VideoSequence, YuvError, MB_SIZE};

/// Scene motion model for [`generate_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionModel {
    /// Content translates rigidly by `(dx, dy)` pixels per frame.
    GlobalPan { dx: i32, dy: i32 },
    /// At least three textured rectangles with pairwise distinct
    /// velocities move over a slowly panning textured background;
    /// `noise_amplitude` adds i.i.d. uniform noise in `[-a, a]` per
    /// sample per frame.
    MultiObject { objects: usize, noise_amplitude: u8 },
    /// A fixed frame plus i.i.d. uniform noise in `[-a, a]`.
    StaticNoise { amplitude: u8 },
}

use mix_seed as subseed;

/// Floating-point texture canvas sampled down to u8 per frame window.
struct Texture {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Texture {
    /// Band-limited gratings with low-frequency contrast modulation plus
    /// block-cell noise. The modulation leaves quiet regions where small
    /// reference shifts survive quantization and busy regions where they
    /// do not. `scale` stretches all spatial constants, so a 2x canvas
    /// sampled at stride 2 looks like a 1x texture with sub-pixel phase.
    /// `strength` scales every amplitude.
    fn generate(
        width: usize,
        height: usize,
        rng: &mut ChaCha8Rng,
        scale: usize,
        strength: f64,
    ) -> Texture {
        let tau = std::f64::consts::TAU;
        let s = scale as f64;
        let n_gratings = 3;
        let gratings: Vec<(f64, f64, f64, f64)> = (0..n_gratings)
            .map(|k| {
                let wavelength = rng.gen_range(10.0..44.0) * s;
                let angle = rng.gen_range(0.0..tau);
                // one dominant grating, weaker companions
                let amp = strength
                    * if k == 0 { rng.gen_range(16.0..30.0) } else { rng.gen_range(4.0..9.0) };
                let phase = rng.gen_range(0.0..tau);
                (angle.cos() / wavelength, angle.sin() / wavelength, amp, phase)
            })
            .collect();
        let mod_wavelength = rng.gen_range(64.0..160.0) * s;
        let mod_angle = rng.gen_range(0.0..tau);
        let (mgx, mgy) = (mod_angle.cos() / mod_wavelength, mod_angle.sin() / mod_wavelength);
        let mod_phase = rng.gen_range(0.0..tau);

        let cell_amp = strength * rng.gen_range(1.5..4.0);
        let cell_mod_wavelength = rng.gen_range(48.0..128.0) * s;
        let cell_mod_angle = rng.gen_range(0.0..tau);
        let (cgx, cgy) = (
            cell_mod_angle.cos() / cell_mod_wavelength,
            cell_mod_angle.sin() / cell_mod_wavelength,
        );
        let cell_mod_phase = rng.gen_range(0.0..tau);
        let cell_px = 4 * scale;
        let cells_w = width.div_ceil(cell_px);
        let cells_h = height.div_ceil(cell_px);
        let cells: Vec<f64> =
            (0..cells_w * cells_h).map(|_| rng.gen_range(-cell_amp..cell_amp)).collect();

        let mut values = vec![0.0; width * height];
        for y in 0..height {
            for x in 0..width {
                let (xf, yf) = (x as f64, y as f64);
                let m = 0.1
                    + 0.9 * (0.5 + 0.5 * (tau * (xf * mgx + yf * mgy) + mod_phase).cos());
                let cm = 0.1
                    + 0.9 * (0.5
                        + 0.5 * (tau * (xf * cgx + yf * cgy) + cell_mod_phase).cos());
                let mut v = 128.0;
                for &(gx, gy, amp, phase) in &gratings {
                    v += m * amp * (tau * (xf * gx + yf * gy) + phase).cos();
                }
                v += cm * cells[(y / cell_px) * cells_w + x / cell_px];
                values[y * width + x] = v;
            }
        }
        Texture { width, height, values }
    }

    #[inline]
    fn sample(&self, x: isize, y: isize) -> u8 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        let v = self.values[cy * self.width + cx];
        v.round().clamp(0.0, 255.0) as u8
    }
}

fn chroma_from_luma(y: &Plane) -> (Plane, Plane) {
    let (cw, ch) = (y.width() / 2, y.height() / 2);
    let mut u = Plane::new(cw, ch);
    let mut v = Plane::new(cw, ch);
    for cy in 0..ch {
        for cx in 0..cw {
            let s = y.sample(2 * cx, 2 * cy) as u16
                + y.sample(2 * cx + 1, 2 * cy) as u16
                + y.sample(2 * cx, 2 * cy + 1) as u16
                + y.sample(2 * cx + 1, 2 * cy + 1) as u16;
            let mean = ((s + 2) / 4) as u8;
            u.set(cx, cy, mean);
            // offset second channel so the two chroma planes differ
            v.set(cx, cy, mean ^ 0x55);
        }
    }
    (u, v)
}

fn finish_frames(lumas: Vec<Plane>) -> Result<VideoSequence, YuvError> {
    let frames = lumas
        .into_iter()
        .map(|y| {
            let (u, v) = chroma_from_luma(&y);
            Frame { y, u, v }
        })
        .collect();
    VideoSequence::new(frames)
}

/// A textured rectangle moving at a half-pel velocity. Positions and
/// velocities are in half-pel units over a 2x-supersampled texture, so
/// odd velocities give genuine sub-pixel motion that integer-pel motion
/// estimation can only approximate.
struct MovingRect {
    /// position of the top-left corner in half-pels
    x: i32,
    y: i32,
    /// velocity in half-pels per frame
    vx: i32,
    vy: i32,
    /// output-resolution size in pixels
    w: usize,
    h: usize,
    texture: Texture,
}

impl MovingRect {
    fn step(&mut self, frame_w: i32, frame_h: i32) {
        let (max_x, max_y) = (2 * (frame_w - self.w as i32), 2 * (frame_h - self.h as i32));
        self.x += self.vx;
        self.y += self.vy;
        if self.x < 0 {
            self.x = -self.x;
            self.vx = -self.vx;
        } else if self.x > max_x {
            self.x = 2 * max_x - self.x;
            self.vx = -self.vx;
        }
        if self.y < 0 {
            self.y = -self.y;
            self.vy = -self.vy;
        } else if self.y > max_y {
            self.y = 2 * max_y - self.y;
            self.vy = -self.vy;
        }
    }
}

/// Generate a deterministic synthetic sequence.
pub fn generate_synthetic(
    width: usize,
    height: usize,
    n_frames: usize,
    model: MotionModel,
    seed: u64,
) -> Result<VideoSequence, YuvError> {
    if n_frames < 2 {
        return Err(YuvError::TooFewFrames(n_frames));
    }
    if width == 0 || height == 0 || width % MB_SIZE != 0 || height % MB_SIZE != 0 {
        return Err(YuvError::DimensionNotMacroblockAligned { width, height });
    }
    match model {
        MotionModel::GlobalPan { dx, dy } => global_pan(width, height, n_frames, dx, dy, seed),
        MotionModel::MultiObject { objects, noise_amplitude } => {
            multi_object(width, height, n_frames, objects, noise_amplitude, seed)
        }
        MotionModel::StaticNoise { amplitude } => {
            static_noise(width, height, n_frames, amplitude, seed)
        }
    }
}

fn global_pan(
    width: usize,
    height: usize,
    n_frames: usize,
    dx: i32,
    dy: i32,
    seed: u64,
) -> Result<VideoSequence, YuvError> {
    let span_x = (n_frames as i32 - 1) * dx.abs();
    let span_y = (n_frames as i32 - 1) * dy.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, 1));
    let canvas =
        Texture::generate(width + span_x as usize, height + span_y as usize, &mut rng, 1, 1.0);
    let base_x = (n_frames as i32 - 1) * dx.max(0);
    let base_y = (n_frames as i32 - 1) * dy.max(0);

    let lumas = (0..n_frames as i32)
        .map(|t| {
            let mut plane = Plane::new(width, height);
            for y in 0..height {
                for x in 0..width {
                    let sx = x as i32 - t * dx + base_x;
                    let sy = y as i32 - t * dy + base_y;
                    plane.set(x, y, canvas.sample(sx as isize, sy as isize));
                }
            }
            plane
        })
        .collect();
    finish_frames(lumas)
}

/// Object velocity pool in half-pel units. All entries are even:
/// integer-pel motion keeps every block's best match exactly
/// re-derivable after a decode/re-encode round, which is what calibration
/// relies on. Diversity across objects is what perturbs the median
/// predictions of skipped macroblocks between them.
const VELOCITY_POOL: [(i32, i32); 16] = [
    (2, 0),
    (0, 2),
    (-2, 0),
    (0, -2),
    (2, 2),
    (-2, -2),
    (2, -2),
    (-2, 2),
    (4, 0),
    (0, 4),
    (-4, 0),
    (0, -4),
    (4, 2),
    (-2, 4),
    (2, -4),
    (-4, -2),
];

fn multi_object(
    width: usize,
    height: usize,
    n_frames: usize,
    objects: usize,
    noise_amplitude: u8,
    seed: u64,
) -> Result<VideoSequence, YuvError> {
    let n_objects = objects.clamp(3, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, 2));

    // integer background pan, including the static case
    const BG_POOL: [(i32, i32); 5] = [(0, 0), (2, 0), (0, 2), (-2, 0), (0, -2)];
    let (bg_vx, bg_vy) = BG_POOL[rng.gen_range(0..BG_POOL.len())];
    let span_x = ((n_frames as i32 - 1) * bg_vx.abs()) as usize;
    let span_y = ((n_frames as i32 - 1) * bg_vy.abs()) as usize;
    let background =
        Texture::generate(2 * width + span_x, 2 * height + span_y, &mut rng, 2, 1.0);
    let base_x = (n_frames as i32 - 1) * bg_vx.max(0);
    let base_y = (n_frames as i32 - 1) * bg_vy.max(0);

    let mut pool: Vec<(i32, i32)> =
        VELOCITY_POOL.iter().copied().filter(|&v| v != (bg_vx, bg_vy)).collect();
    // seeded shuffle
    for i in 0..pool.len() {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }

    let mut rects: Vec<MovingRect> = (0..n_objects)
        .map(|k| {
            let w = (2 * rng.gen_range(10..=24)).min(width - 2);
            let h = (2 * rng.gen_range(10..=24)).min(height - 2);
            let x = 2 * rng.gen_range(0..=(width - w)) as i32;
            let y = 2 * rng.gen_range(0..=(height - h)) as i32;
            let (vx, vy) = pool[k % pool.len()];
            let mut trng = ChaCha8Rng::seed_from_u64(subseed(seed, 100 + k as u64));
            let texture = Texture::generate(2 * w, 2 * h, &mut trng, 2, 1.0);
            MovingRect { x, y, vx, vy, w, h, texture }
        })
        .collect();

    let mut noise_rng = ChaCha8Rng::seed_from_u64(subseed(seed, 3));
    let amp = noise_amplitude as i32;
    let mut lumas = Vec::with_capacity(n_frames);
    for t in 0..n_frames as i32 {
        let mut plane = Plane::new(width, height);
        for y in 0..height {
            for x in 0..width {
                let sx = 2 * x as i32 - t * bg_vx + base_x;
                let sy = 2 * y as i32 - t * bg_vy + base_y;
                plane.set(x, y, background.sample(sx as isize, sy as isize));
            }
        }
        for r in &rects {
            // pixel coverage anchored at the rounded half-pel position
            let px = (r.x + 1).div_euclid(2);
            let py = (r.y + 1).div_euclid(2);
            for oy in 0..r.h {
                for ox in 0..r.w {
                    let (fx, fy) = (px + ox as i32, py + oy as i32);
                    if fx >= 0 && fy >= 0 && (fx as usize) < width && (fy as usize) < height {
                        plane.set(
                            fx as usize,
                            fy as usize,
                            r.texture.sample(
                                (2 * fx - r.x) as isize,
                                (2 * fy - r.y) as isize,
                            ),
                        );
                    }
                }
            }
        }
        if amp > 0 {
            for y in 0..height {
                for x in 0..width {
                    let n = noise_rng.gen_range(-amp..=amp);
                    plane.set(x, y, (plane.sample(x, y) as i32 + n).clamp(0, 255) as u8);
                }
            }
        }
        lumas.push(plane);
        for r in &mut rects {
            r.step(width as i32, height as i32);
        }
    }
    finish_frames(lumas)
}

fn static_noise(
    width: usize,
    height: usize,
    n_frames: usize,
    amplitude: u8,
    seed: u64,
) -> Result<VideoSequence, YuvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, 4));
    let canvas = Texture::generate(width, height, &mut rng, 1, 1.0);
    let mut base = Plane::new(width, height);
    for y in 0..height {
        for x in 0..width {
            base.set(x, y, canvas.sample(x as isize, y as isize));
        }
    }
    let mut noise_rng = ChaCha8Rng::seed_from_u64(subseed(seed, 5));
    let amp = amplitude as i32;
    let lumas = (0..n_frames)
        .map(|_| {
            if amp == 0 {
                return base.clone();
            }
            let mut plane = base.clone();
            for y in 0..height {
                for x in 0..width {
                    let n = noise_rng.gen_range(-amp..=amp);
                    plane.set(x, y, (base.sample(x, y) as i32 + n).clamp(0, 255) as u8);
                }
            }
            plane
        })
        .collect();
    finish_frames(lumas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let m = MotionModel::GlobalPan { dx: 1, dy: 0 };
        let a = generate_synthetic(64, 64, 6, m, 7).unwrap();
        let b = generate_synthetic(64, 64, 6, m, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(64, 64, 6, m, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_amplitude_static_noise_repeats_one_frame() {
        let seq =
            generate_synthetic(64, 64, 5, MotionModel::StaticNoise { amplitude: 0 }, 3).unwrap();
        for f in &seq.frames()[1..] {
            assert_eq!(f, &seq.frames()[0]);
        }
    }

    #[test]
    fn global_pan_overlap_matches_exactly() {
        // content moves by (2, 0) per frame: frame t at (x, y) must equal
        // frame t+1 at (x+2, y) wherever both are in bounds
        let seq =
            generate_synthetic(64, 64, 6, MotionModel::GlobalPan { dx: 2, dy: 0 }, 11).unwrap();
        for t in 0..seq.n_frames() - 1 {
            let (a, b) = (&seq.frames()[t].y, &seq.frames()[t + 1].y);
            let mut max_diff = 0i32;
            for y in 0..64 {
                for x in 0..62 {
                    let d = (a.sample(x, y) as i32 - b.sample(x + 2, y) as i32).abs();
                    max_diff = max_diff.max(d);
                }
            }
            assert_eq!(max_diff, 0, "overlap mismatch between frames {t} and {}", t + 1);
        }
    }

    #[test]
    fn multi_object_deterministic_and_noisy() {
        let m = MotionModel::MultiObject { objects: 4, noise_amplitude: 2 };
        let a = generate_synthetic(96, 96, 6, m, 5).unwrap();
        let b = generate_synthetic(96, 96, 6, m, 5).unwrap();
        assert_eq!(a, b);
        // with noise, consecutive frames differ even in static regions
        assert_ne!(a.frames()[0], a.frames()[1]);
    }

    #[test]
    fn too_few_frames_rejected() {
        match generate_synthetic(64, 64, 1, MotionModel::StaticNoise { amplitude: 0 }, 0) {
            Err(YuvError::TooFewFrames(1)) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }
}
