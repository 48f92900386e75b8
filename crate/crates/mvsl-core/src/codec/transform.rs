//! 4x4 orthonormal DCT, dead-zone quantization and zigzag coefficient
//! ordering.
//!
//! Residual blocks are tiled into 4x4 sub-blocks (raster order), each
//! transformed with the floating-point orthonormal DCT and quantized
//! with a dead-zone uniform quantizer at step `qstep(qp)`. Coefficients
//! are stored as integer levels in per-tile zigzag order.

/// Orthonormal 4-point DCT-II matrix, rows = basis vectors.
/// Entries are `sqrt(1/4)` resp. `sqrt(2/4)*cos((2i+1)u*pi/8)`.
const DCT4: [[f64; 4]; 4] = [
    [0.5, 0.5, 0.5, 0.5],
    [
        0.6532814824381883,
        0.2705980500730986,
        -0.2705980500730986,
        -0.6532814824381883,
    ],
    [0.5, -0.5, -0.5, 0.5],
    [
        0.2705980500730986,
        -0.6532814824381883,
        0.6532814824381883,
        -0.2705980500730986,
    ],
];

/// Dead-zone rounding offset of the uniform quantizer.
pub const DEAD_ZONE_OFFSET: f64 = 1.0 / 3.0;

/// Zigzag scan order of a 4x4 tile as (row, col) pairs.
pub const ZIGZAG4: [(usize, usize); 16] = [
    (0, 0),
    (0, 1),
    (1, 0),
    (2, 0),
    (1, 1),
    (0, 2),
    (0, 3),
    (1, 2),
    (2, 1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (2, 3),
    (3, 2),
    (3, 3),
];

/// Quantization step for a QP in [0, 51].
pub fn qstep(qp: u8) -> f64 {
    ((qp as f64 - 4.0) / 6.0).exp2()
}

/// A rectangular block of residual samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub width: usize,
    pub height: usize,
    pub samples: Vec<f64>,
}

impl ResidualBlock {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width % 4 == 0 && height % 4 == 0, "residual dims must tile into 4x4");
        ResidualBlock { width, height, samples: vec![0.0; width * height] }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.samples[y * self.width + x] = v;
    }
}

fn forward_dct4(tile: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    // C * X * C^T
    let mut tmp = [[0.0; 4]; 4];
    for u in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for i in 0..4 {
                acc += DCT4[u][i] * tile[i][j];
            }
            tmp[u][j] = acc;
        }
    }
    let mut out = [[0.0; 4]; 4];
    for u in 0..4 {
        for v in 0..4 {
            let mut acc = 0.0;
            for j in 0..4 {
                acc += tmp[u][j] * DCT4[v][j];
            }
            out[u][v] = acc;
        }
    }
    out
}

fn inverse_dct4(coefs: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    // C^T * X * C
    let mut tmp = [[0.0; 4]; 4];
    for i in 0..4 {
        for v in 0..4 {
            let mut acc = 0.0;
            for u in 0..4 {
                acc += DCT4[u][i] * coefs[u][v];
            }
            tmp[i][v] = acc;
        }
    }
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for v in 0..4 {
                acc += tmp[i][v] * DCT4[v][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

#[inline]
fn quantize_coef(c: f64, step: f64) -> i32 {
    let level = (c.abs() / step + DEAD_ZONE_OFFSET).floor() as i32;
    if c < 0.0 {
        -level
    } else {
        level
    }
}

/// Transform and quantize a residual block.
///
/// Returns one i16 level per sample: 4x4 tiles in raster order over the
/// block, zigzag order inside each tile.
pub fn transform_quantize(residual: &ResidualBlock, qp: u8) -> Vec<i16> {
    let step = qstep(qp);
    let mut out = Vec::with_capacity(residual.width * residual.height);
    for ty in (0..residual.height).step_by(4) {
        for tx in (0..residual.width).step_by(4) {
            let mut tile = [[0.0; 4]; 4];
            for (i, row) in tile.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = residual.at(tx + j, ty + i);
                }
            }
            let coefs = forward_dct4(&tile);
            for &(r, c) in ZIGZAG4.iter() {
                let level = quantize_coef(coefs[r][c], step);
                out.push(level.clamp(i16::MIN as i32, i16::MAX as i32) as i16);
            }
        }
    }
    out
}

/// Dequantize and inverse-transform levels produced by
/// [`transform_quantize`].
pub fn dequantize_inverse(levels: &[i16], width: usize, height: usize, qp: u8) -> ResidualBlock {
    assert_eq!(levels.len(), width * height, "level count must match block size");
    let step = qstep(qp);
    let mut out = ResidualBlock::new(width, height);
    let mut idx = 0;
    for ty in (0..height).step_by(4) {
        for tx in (0..width).step_by(4) {
            let mut coefs = [[0.0; 4]; 4];
            for &(r, c) in ZIGZAG4.iter() {
                coefs[r][c] = levels[idx] as f64 * step;
                idx += 1;
            }
            let tile = inverse_dct4(&coefs);
            for (i, row) in tile.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    out.set(tx + j, ty + i, *v);
                }
            }
        }
    }
    out
}

pub fn all_zero(levels: &[i16]) -> bool {
    levels.iter().all(|&l| l == 0)
}
