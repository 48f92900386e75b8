//! Block motion estimation: exhaustive full search and hexagon-based
//! search, both minimizing `SAD + lambda_motion * mvd_bits`.

use crate::yuv::Plane;

use super::mv::{compute_mvd, mvd_bits, MotionVector};
use super::recon::RefView;

/// Search strategy for motion estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    Full,
    #[default]
    Hexagon,
}

/// Sum of absolute differences between the current source block at
/// `(bx, by)` and the reference block displaced by `mv`. The caller
/// guarantees the displaced block is inside the reference frame.
pub fn sad<R: RefView>(
    current: &Plane,
    bx: usize,
    by: usize,
    bw: usize,
    bh: usize,
    reference: &R,
    mv: MotionVector,
) -> f64 {
    let mut acc = 0.0;
    for y in 0..bh {
        let cur = &current.row(by + y)[bx..bx + bw];
        let ry = (by + y) as isize + mv.v as isize;
        for (x, c) in cur.iter().enumerate() {
            let r = reference.at_clamped((bx + x) as isize + mv.h as isize, ry);
            acc += (*c as f64 - r).abs();
        }
    }
    acc
}

/// True when the block displaced by `mv` lies fully inside the frame.
#[inline]
pub fn displaced_in_frame(
    frame_w: usize,
    frame_h: usize,
    bx: usize,
    by: usize,
    bw: usize,
    bh: usize,
    mv: MotionVector,
) -> bool {
    let x0 = bx as isize + mv.h as isize;
    let y0 = by as isize + mv.v as isize;
    x0 >= 0
        && y0 >= 0
        && x0 + bw as isize <= frame_w as isize
        && y0 + bh as isize <= frame_h as isize
}

struct CostModel<'a, R: RefView> {
    current: &'a Plane,
    reference: &'a R,
    bx: usize,
    by: usize,
    bw: usize,
    bh: usize,
    center: MotionVector,
    lambda_motion: f64,
}

impl<R: RefView> CostModel<'_, R> {
    #[inline]
    fn valid(&self, mv: MotionVector) -> bool {
        displaced_in_frame(
            self.reference.width(),
            self.reference.height(),
            self.bx,
            self.by,
            self.bw,
            self.bh,
            mv,
        )
    }

    #[inline]
    fn cost(&self, mv: MotionVector) -> (f64, f64) {
        let s = sad(self.current, self.bx, self.by, self.bw, self.bh, self.reference, mv);
        let bits = mvd_bits(compute_mvd(mv, self.center));
        (s + self.lambda_motion * bits as f64, s)
    }
}

/// Find the motion vector minimizing `SAD + lambda_motion * mvd_bits`
/// for the block at `(bx, by)` of size `bw` x `bh`.
///
/// `center` is the motion vector prediction the rate term is measured
/// against. Candidates whose displaced block leaves the reference frame
/// are skipped; `(0, 0)` is always searchable because the block itself
/// is in frame. Ties keep the earlier candidate in scan order.
#[allow(clippy::too_many_arguments)]
pub fn motion_estimate<R: RefView>(
    current: &Plane,
    bx: usize,
    by: usize,
    bw: usize,
    bh: usize,
    reference: &R,
    center: MotionVector,
    search_range: i16,
    strategy: SearchStrategy,
    lambda_motion: f64,
) -> (MotionVector, f64) {
    let model = CostModel { current, reference, bx, by, bw, bh, center, lambda_motion };
    match strategy {
        SearchStrategy::Full => full_search(&model, search_range),
        SearchStrategy::Hexagon => hexagon_search(&model, search_range),
    }
}

fn full_search<R: RefView>(model: &CostModel<R>, range: i16) -> (MotionVector, f64) {
    let mut best_mv = MotionVector::ZERO;
    let (mut best_cost, mut best_sad) = model.cost(MotionVector::ZERO);
    // raster scan over the window; strict improvement keeps first-wins ties
    for v in -range..=range {
        for h in -range..=range {
            let mv = MotionVector::new(h, v);
            if mv == MotionVector::ZERO || !model.valid(mv) {
                continue;
            }
            let (cost, s) = model.cost(mv);
            if cost < best_cost {
                best_cost = cost;
                best_sad = s;
                best_mv = mv;
            }
        }
    }
    (best_mv, best_sad)
}

/// Large-hexagon refinement pattern, then a square step of radius 1.
const HEX_POINTS: [(i16, i16); 6] = [(-2, 0), (-1, -2), (1, -2), (2, 0), (1, 2), (-1, 2)];
const SQUARE_POINTS: [(i16, i16); 8] =
    [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

fn hexagon_search<R: RefView>(model: &CostModel<R>, range: i16) -> (MotionVector, f64) {
    let in_range = |mv: MotionVector| mv.h.abs() <= range && mv.v.abs() <= range;

    let mut best_mv = MotionVector::ZERO;
    let (mut best_cost, mut best_sad) = model.cost(MotionVector::ZERO);

    // the prediction is the second seed candidate
    let clamped_center = MotionVector::new(
        model.center.h.clamp(-range, range),
        model.center.v.clamp(-range, range),
    );
    if clamped_center != MotionVector::ZERO && model.valid(clamped_center) {
        let (cost, s) = model.cost(clamped_center);
        if cost < best_cost {
            best_cost = cost;
            best_sad = s;
            best_mv = clamped_center;
        }
    }

    // big-hexagon descent, bounded by the window diameter
    for _ in 0..(2 * range as usize + 1) {
        let mut improved = false;
        for &(dh, dv) in HEX_POINTS.iter() {
            let mv = MotionVector::new(best_mv.h + dh, best_mv.v + dv);
            if !in_range(mv) || !model.valid(mv) {
                continue;
            }
            let (cost, s) = model.cost(mv);
            if cost < best_cost {
                best_cost = cost;
                best_sad = s;
                best_mv = mv;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    // final square refinement
    for &(dh, dv) in SQUARE_POINTS.iter() {
        let mv = MotionVector::new(best_mv.h + dh, best_mv.v + dv);
        if !in_range(mv) || !model.valid(mv) {
            continue;
        }
        let (cost, s) = model.cost(mv);
        if cost < best_cost {
            best_cost = cost;
            best_sad = s;
            best_mv = mv;
        }
    }

    (best_mv, best_sad)
}
