//! Reconstruction-loop planes.
//!
//! The closed loop carries samples as f64 so the only loss between a
//! source block and its reconstruction is the quantizer's: re-coding a
//! reconstructed block at zero motion always quantizes to zero, which is
//! what keeps static content skipped from the first P-frame on.
//! Reconstruction is converted to 8-bit samples only at the decode
//! boundary.

use crate::yuv::Plane;

/// Read access shared by 8-bit source planes and float reconstruction
/// planes when they serve as prediction references.
pub trait RefView {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    /// Sample with coordinates clamped to the plane.
    fn at_clamped(&self, x: isize, y: isize) -> f64;
}

impl RefView for Plane {
    fn width(&self) -> usize {
        self.width()
    }

    fn height(&self) -> usize {
        self.height()
    }

    #[inline]
    fn at_clamped(&self, x: isize, y: isize) -> f64 {
        self.clamped_sample(x, y) as f64
    }
}

/// A float sample plane holding one reconstructed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RecPlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RecPlane {
    pub fn new(width: usize, height: usize) -> Self {
        RecPlane { width, height, data: vec![0.0; width * height] }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Round to 8-bit output samples.
    pub fn to_plane(&self) -> Plane {
        let data = self.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect();
        Plane::from_vec(self.width, self.height, data)
    }
}

impl RefView for RecPlane {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }
}
