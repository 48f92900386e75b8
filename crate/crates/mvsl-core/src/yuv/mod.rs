//! Raw planar YUV 4:2:0 input/output and synthetic sequence generation.
//!
//! Files are headerless: 8-bit samples, luma plane first, then the two
//! half-resolution chroma planes, frame after frame. Dimensions travel
//! out-of-band. Everything downstream of this module requires
//! macroblock-aligned dimensions, so ingest either rejects unaligned
//! material or edge-replicates it up to the next multiple of 16.

mod synth;

pub use synth::{generate_synthetic, MotionModel};

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

/// Macroblock edge length in luma samples.
pub const MB_SIZE: usize = 16;

#[derive(Debug, Error)]
pub enum YuvError {
    #[error("file size {size} is not a multiple of the {frame_bytes}-byte frame size")]
    TruncatedFile { size: u64, frame_bytes: u64 },
    #[error("dimensions {width}x{height} are not multiples of 16 and padding is disabled")]
    DimensionNotMacroblockAligned { width: usize, height: usize },
    #[error("dimensions {width}x{height} must be positive and even for 4:2:0 sampling")]
    InvalidDimensions { width: usize, height: usize },
    #[error("sequence needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// How to handle dimensions that are not multiples of 16 on ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Reject with [`YuvError::DimensionNotMacroblockAligned`].
    Reject,
    /// Replicate the right column / bottom row up to the next multiple of 16.
    EdgeExtend,
}

/// A single 8-bit sample plane.
#[derive(Clone, PartialEq, Eq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for Plane {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Plane({}x{})", self.width, self.height)
    }
}

impl Plane {
    pub fn new(width: usize, height: usize) -> Self {
        Plane { width, height, data: vec![0; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width * height, "plane data length mismatch");
        Plane { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Sample with coordinates clamped to the plane bounds.
    #[inline]
    pub fn clamped_sample(&self, x: isize, y: isize) -> u8 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Edge-replicate to `new_width` x `new_height` (both >= current dims).
    fn pad_to(&self, new_width: usize, new_height: usize) -> Plane {
        let mut out = Plane::new(new_width, new_height);
        for y in 0..new_height {
            let sy = y.min(self.height - 1);
            for x in 0..new_width {
                let sx = x.min(self.width - 1);
                out.set(x, y, self.sample(sx, sy));
            }
        }
        out
    }
}

/// One video frame: full-resolution luma plus half-resolution chroma.
#[derive(Clone, PartialEq, Debug)]
pub struct Frame {
    pub y: Plane,
    pub u: Plane,
    pub v: Plane,
}

impl Frame {
    pub fn new(width: usize, height: usize) -> Self {
        Frame {
            y: Plane::new(width, height),
            u: Plane::new(width / 2, height / 2),
            v: Plane::new(width / 2, height / 2),
        }
    }
}

/// An 8-bit YUV 4:2:0 sequence with macroblock-aligned dimensions.
///
/// Construction enforces the invariants the codec relies on: dimensions
/// are positive multiples of 16, every frame has consistent plane sizes,
/// and there are at least two frames so one P-frame exists.
#[derive(Clone, PartialEq, Debug)]
pub struct VideoSequence {
    width: usize,
    height: usize,
    frames: Vec<Frame>,
}

impl VideoSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self, YuvError> {
        if frames.len() < 2 {
            return Err(YuvError::TooFewFrames(frames.len()));
        }
        let width = frames[0].y.width();
        let height = frames[0].y.height();
        if width == 0 || height == 0 || width % MB_SIZE != 0 || height % MB_SIZE != 0 {
            return Err(YuvError::DimensionNotMacroblockAligned { width, height });
        }
        for f in &frames {
            assert_eq!(f.y.width(), width);
            assert_eq!(f.y.height(), height);
            assert_eq!(f.u.width(), width / 2);
            assert_eq!(f.u.height(), height / 2);
            assert_eq!(f.v.width(), width / 2);
            assert_eq!(f.v.height(), height / 2);
        }
        Ok(VideoSequence { width, height, frames })
    }

    /// Build a sequence from luma planes alone; chroma is neutral gray.
    pub fn from_luma(planes: Vec<Plane>) -> Result<Self, YuvError> {
        let frames = planes
            .into_iter()
            .map(|y| {
                let (cw, ch) = (y.width() / 2, y.height() / 2);
                Frame {
                    y,
                    u: Plane::from_vec(cw, ch, vec![128; cw * ch]),
                    v: Plane::from_vec(cw, ch, vec![128; cw * ch]),
                }
            })
            .collect();
        VideoSequence::new(frames)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn mb_cols(&self) -> usize {
        self.width / MB_SIZE
    }

    pub fn mb_rows(&self) -> usize {
        self.height / MB_SIZE
    }
}

fn next_multiple_of_16(v: usize) -> usize {
    v.div_ceil(MB_SIZE) * MB_SIZE
}

/// Read a headerless planar YUV 4:2:0 file of known dimensions.
///
/// The file size must be an exact multiple of `width*height*3/2`. With
/// [`Padding::EdgeExtend`], non-aligned dimensions are replicated out to
/// the next macroblock boundary; with [`Padding::Reject`] they are an
/// error.
pub fn read_yuv<P: AsRef<Path>>(
    path: P,
    width: usize,
    height: usize,
    padding: Padding,
) -> Result<VideoSequence, YuvError> {
    if width == 0 || height == 0 || width % 2 != 0 || height % 2 != 0 {
        return Err(YuvError::InvalidDimensions { width, height });
    }
    if (width % MB_SIZE != 0 || height % MB_SIZE != 0) && padding == Padding::Reject {
        return Err(YuvError::DimensionNotMacroblockAligned { width, height });
    }
    let bytes = fs::read(path)?;
    let frame_bytes = width * height * 3 / 2;
    if bytes.is_empty() || bytes.len() % frame_bytes != 0 {
        return Err(YuvError::TruncatedFile {
            size: bytes.len() as u64,
            frame_bytes: frame_bytes as u64,
        });
    }
    let n_frames = bytes.len() / frame_bytes;
    if n_frames < 2 {
        return Err(YuvError::TooFewFrames(n_frames));
    }

    let (pw, ph) = (next_multiple_of_16(width), next_multiple_of_16(height));
    let luma_bytes = width * height;
    let chroma_bytes = luma_bytes / 4;
    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let base = i * frame_bytes;
        let y = Plane::from_vec(width, height, bytes[base..base + luma_bytes].to_vec());
        let u = Plane::from_vec(
            width / 2,
            height / 2,
            bytes[base + luma_bytes..base + luma_bytes + chroma_bytes].to_vec(),
        );
        let v = Plane::from_vec(
            width / 2,
            height / 2,
            bytes[base + luma_bytes + chroma_bytes..base + frame_bytes].to_vec(),
        );
        frames.push(if (pw, ph) == (width, height) {
            Frame { y, u, v }
        } else {
            Frame {
                y: y.pad_to(pw, ph),
                u: u.pad_to(pw / 2, ph / 2),
                v: v.pad_to(pw / 2, ph / 2),
            }
        });
    }
    VideoSequence::new(frames)
}

/// Write a sequence as a headerless planar YUV 4:2:0 file.
pub fn write_yuv<P: AsRef<Path>>(seq: &VideoSequence, path: P) -> Result<(), YuvError> {
    let mut out =
        Vec::with_capacity(seq.n_frames() * seq.width() * seq.height() * 3 / 2);
    for f in seq.frames() {
        out.extend_from_slice(f.y.data());
        out.extend_from_slice(f.u.data());
        out.extend_from_slice(f.v.data());
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_seq(width: usize, height: usize, n: usize) -> VideoSequence {
        let frames = (0..n)
            .map(|t| {
                let mut f = Frame::new(width, height);
                for y in 0..height {
                    for x in 0..width {
                        f.y.set(x, y, ((x * 3 + y * 5 + t * 7) % 256) as u8);
                    }
                }
                for y in 0..height / 2 {
                    for x in 0..width / 2 {
                        f.u.set(x, y, ((x + y + t) % 256) as u8);
                        f.v.set(x, y, ((x * 2 + t) % 256) as u8);
                    }
                }
                f
            })
            .collect();
        VideoSequence::new(frames).unwrap()
    }

    #[test]
    fn six_frame_64x64_file_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.yuv");
        let seq = gradient_seq(64, 64, 6);
        write_yuv(&seq, &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 36864);
        let back = read_yuv(&path, 64, 64, Padding::Reject).unwrap();
        assert_eq!(back.n_frames(), 6);
        assert_eq!(back, seq);
    }

    #[test]
    fn non_multiple_size_is_truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.yuv");
        std::fs::write(&path, vec![0u8; 100]).unwrap();
        match read_yuv(&path, 64, 64, Padding::Reject) {
            Err(YuvError::TruncatedFile { size: 100, .. }) => {}
            other => panic!("expected TruncatedFile, got {other:?}"),
        }
    }

    #[test]
    fn all_zero_file_gives_black_frames() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.yuv");
        std::fs::write(&path, vec![0u8; 64 * 64 * 3 / 2 * 2]).unwrap();
        let seq = read_yuv(&path, 64, 64, Padding::Reject).unwrap();
        assert_eq!(seq.n_frames(), 2);
        assert!(seq.frames().iter().all(|f| f.y.data().iter().all(|&s| s == 0)));
    }

    #[test]
    fn unaligned_dims_rejected_without_padding() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.yuv");
        std::fs::write(&path, vec![7u8; 40 * 24 * 3 / 2 * 2]).unwrap();
        match read_yuv(&path, 40, 24, Padding::Reject) {
            Err(YuvError::DimensionNotMacroblockAligned { width: 40, height: 24 }) => {}
            other => panic!("expected alignment error, got {other:?}"),
        }
    }

    #[test]
    fn unaligned_dims_edge_extended() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.yuv");
        let mut bytes = Vec::new();
        for _ in 0..2 {
            for y in 0..24usize {
                for x in 0..40usize {
                    bytes.push((x * 2 + y) as u8);
                }
            }
            bytes.extend(std::iter::repeat(90).take(20 * 12)); // u
            bytes.extend(std::iter::repeat(200).take(20 * 12)); // v
        }
        std::fs::write(&path, bytes).unwrap();
        let seq = read_yuv(&path, 40, 24, Padding::EdgeExtend).unwrap();
        assert_eq!((seq.width(), seq.height()), (48, 32));
        let f = &seq.frames()[0];
        // replicated rightmost column and bottom row
        assert_eq!(f.y.sample(47, 0), f.y.sample(39, 0));
        assert_eq!(f.y.sample(0, 31), f.y.sample(0, 23));
        assert_eq!(f.u.sample(23, 15), 90);
    }

    #[test]
    fn single_frame_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.yuv");
        std::fs::write(&path, vec![0u8; 64 * 64 * 3 / 2]).unwrap();
        match read_yuv(&path, 64, 64, Padding::Reject) {
            Err(YuvError::TooFewFrames(1)) => {}
            other => panic!("expected TooFewFrames, got {other:?}"),
        }
    }
}
