//! Motion vectors, median prediction and the motion-vector-difference
//! bit-cost model.

/// Integer-pel motion vector. The convention throughout the codec is
/// `reference block top-left = current block top-left + (h, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct MotionVector {
    pub h: i16,
    pub v: i16,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { h: 0, v: 0 };

    pub fn new(h: i16, v: i16) -> Self {
        MotionVector { h, v }
    }

    /// `|h| + |v|`, used for magnitude-ranked carrier selection.
    pub fn l1_norm(self) -> u32 {
        self.h.unsigned_abs() as u32 + self.v.unsigned_abs() as u32
    }
}

impl std::fmt::Display for MotionVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.h, self.v)
    }
}

fn median3(a: i16, b: i16, c: i16) -> i16 {
    a.max(b).min(a.min(b).max(c))
}

/// Median motion-vector prediction from the left (A), top (B) and
/// top-right (C) neighbors.
///
/// Availability rules: with no neighbor at all the prediction is zero;
/// with only A available the prediction is A; otherwise absent neighbors
/// contribute a zero vector to the component-wise median. Skipped
/// neighbors are expected to contribute their inferred motion vector and
/// intra neighbors count as absent — both handled by the caller.
pub fn predict_mvp(
    left: Option<MotionVector>,
    top: Option<MotionVector>,
    topright: Option<MotionVector>,
) -> MotionVector {
    match (left, top, topright) {
        (None, None, None) => MotionVector::ZERO,
        (Some(a), None, None) => a,
        (a, b, c) => {
            let a = a.unwrap_or(MotionVector::ZERO);
            let b = b.unwrap_or(MotionVector::ZERO);
            let c = c.unwrap_or(MotionVector::ZERO);
            MotionVector::new(median3(a.h, b.h, c.h), median3(a.v, b.v, c.v))
        }
    }
}

/// Motion vector difference: `mv - mvp`.
pub fn compute_mvd(mv: MotionVector, mvp: MotionVector) -> MotionVector {
    MotionVector::new(mv.h - mvp.h, mv.v - mvp.v)
}

fn signed_exp_golomb_len(x: i16) -> u32 {
    // signed-to-unsigned mapping: x > 0 -> 2x-1, x <= 0 -> -2x
    let code_num = if x > 0 { 2 * x as u32 - 1 } else { 2 * (-(x as i32)) as u32 };
    2 * (code_num + 1).ilog2() + 1
}

/// Bit cost of coding an MVD with signed exponential-Golomb codes.
/// Only a cost model; the container never stores entropy-coded bits.
pub fn mvd_bits(mvd: MotionVector) -> u32 {
    signed_exp_golomb_len(mvd.h) + signed_exp_golomb_len(mvd.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mv(h: i16, v: i16) -> MotionVector {
        MotionVector::new(h, v)
    }

    #[test]
    fn median_prediction_examples() {
        // both cover/stego example cases of the skip-MVP perturbation
        assert_eq!(predict_mvp(Some(mv(1, 2)), Some(mv(1, 3)), Some(mv(2, 2))), mv(1, 2));
        assert_eq!(predict_mvp(Some(mv(1, 2)), Some(mv(2, 3)), Some(mv(2, 3))), mv(2, 3));
        assert_eq!(predict_mvp(Some(mv(14, 6)), Some(mv(13, 7)), Some(mv(18, 10))), mv(14, 7));
        assert_eq!(predict_mvp(Some(mv(5, -3)), Some(mv(5, -3)), Some(mv(5, -3))), mv(5, -3));
    }

    #[test]
    fn availability_rules() {
        assert_eq!(predict_mvp(None, None, None), mv(0, 0));
        assert_eq!(predict_mvp(Some(mv(3, -4)), None, None), mv(3, -4));
        // one non-left neighbor: absent ones pull the median to zero
        assert_eq!(predict_mvp(None, Some(mv(3, -4)), None), mv(0, 0));
        assert_eq!(predict_mvp(Some(mv(2, 2)), None, Some(mv(4, -4))), mv(2, 0));
    }

    #[test]
    fn mvd_arithmetic() {
        assert_eq!(compute_mvd(mv(2, 3), mv(1, 2)), mv(1, 1));
        assert_eq!(compute_mvd(mv(7, -7), mv(7, -7)), mv(0, 0));
        assert_eq!(compute_mvd(mv(-4, 0), mv(3, -2)), mv(-7, 2));
    }

    #[test]
    fn exp_golomb_lengths() {
        assert_eq!(mvd_bits(mv(0, 0)), 2);
        assert_eq!(mvd_bits(mv(1, 0)), 4);
        assert_eq!(mvd_bits(mv(-1, -1)), 6);
        // value 2 -> codeNum 3 -> 5 bits; value -3 -> codeNum 6 -> 5 bits
        assert_eq!(mvd_bits(mv(2, 0)), 6);
        assert_eq!(mvd_bits(mv(0, -3)), 6);
    }

    /// exhaustive sort-based median over all full triples
    fn sorted_median(values: [i16; 3]) -> i16 {
        let mut s = values;
        s.sort_unstable();
        s[1]
    }

    #[test]
    fn median_matches_sort_oracle_exhaustively() {
        for ah in -3..=3i16 {
            for av in -3..=3i16 {
                for bh in -3..=3i16 {
                    for bv in -3..=3i16 {
                        for ch in -3..=3i16 {
                            for cv in -3..=3i16 {
                                let got = predict_mvp(
                                    Some(mv(ah, av)),
                                    Some(mv(bh, bv)),
                                    Some(mv(ch, cv)),
                                );
                                assert_eq!(got.h, sorted_median([ah, bh, ch]));
                                assert_eq!(got.v, sorted_median([av, bv, cv]));
                            }
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn median_is_permutation_invariant(
            a in (-16i16..=16, -16i16..=16),
            b in (-16i16..=16, -16i16..=16),
            c in (-16i16..=16, -16i16..=16),
        ) {
            let (a, b, c) = (mv(a.0, a.1), mv(b.0, b.1), mv(c.0, c.1));
            let base = predict_mvp(Some(a), Some(b), Some(c));
            prop_assert_eq!(predict_mvp(Some(b), Some(c), Some(a)), base);
            prop_assert_eq!(predict_mvp(Some(c), Some(a), Some(b)), base);
            prop_assert_eq!(predict_mvp(Some(b), Some(a), Some(c)), base);
        }
    }
}
