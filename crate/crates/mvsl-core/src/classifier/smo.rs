//! Sequential minimal optimization for the soft-margin dual.
//!
//! Classic two-variable working-set descent: sweep the samples, pick a
//! KKT violator as the first variable, pair it with the partner of
//! maximal error difference (seeded random fallback), solve the
//! two-variable subproblem analytically, repeat until a full pass makes
//! no progress. Problem sizes here are a few hundred samples, so the
//! kernel matrix is precomputed densely.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gaussian_kernel;

pub const KKT_TOLERANCE: f64 = 1e-3;

const EPS: f64 = 1e-12;
const MAX_SWEEPS: usize = 10_000;

struct State<'a> {
    gram: Vec<f64>,
    y: &'a [f64],
    alphas: Vec<f64>,
    /// decision(i) - y_i for every sample
    errors: Vec<f64>,
    bias: f64,
    c: f64,
    tol: f64,
    n: usize,
}

impl State<'_> {
    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    fn decision(&self, i: usize) -> f64 {
        let mut acc = self.bias;
        for j in 0..self.n {
            if self.alphas[j] > 0.0 {
                acc += self.alphas[j] * self.y[j] * self.k(i, j);
            }
        }
        acc
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.errors[i] * self.y[i];
        (r < -self.tol && self.alphas[i] < self.c) || (r > self.tol && self.alphas[i] > 0.0)
    }

    /// Analytic two-variable step; true if progress was made.
    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (ai_old, aj_old) = (self.alphas[i], self.alphas[j]);
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ei, ej) = (self.errors[i], self.errors[j]);

        let (low, high) = if yi != yj {
            ((aj_old - ai_old).max(0.0), (self.c + aj_old - ai_old).min(self.c))
        } else {
            ((ai_old + aj_old - self.c).max(0.0), (ai_old + aj_old).min(self.c))
        };
        if high - low < EPS {
            return false;
        }

        let eta = 2.0 * self.k(i, j) - self.k(i, i) - self.k(j, j);
        if eta >= -EPS {
            // kernel matrix is PSD so eta <= 0; a flat direction makes no progress
            return false;
        }
        let mut aj = aj_old - yj * (ei - ej) / eta;
        aj = aj.clamp(low, high);
        if (aj - aj_old).abs() < EPS * (aj + aj_old + EPS) {
            return false;
        }
        let ai = ai_old + yi * yj * (aj_old - aj);

        // bias so that the updated variable sits on the margin
        let b_old = self.bias;
        let b1 = b_old - ei
            - yi * (ai - ai_old) * self.k(i, i)
            - yj * (aj - aj_old) * self.k(i, j);
        let b2 = b_old - ej
            - yi * (ai - ai_old) * self.k(i, j)
            - yj * (aj - aj_old) * self.k(j, j);
        let in_box = |a: f64| a > 0.0 && a < self.c;
        self.bias = if in_box(ai) {
            b1
        } else if in_box(aj) {
            b2
        } else {
            (b1 + b2) / 2.0
        };

        self.alphas[i] = ai;
        self.alphas[j] = aj;
        let db = self.bias - b_old;
        for t in 0..self.n {
            self.errors[t] += yi * (ai - ai_old) * self.k(i, t)
                + yj * (aj - aj_old) * self.k(j, t)
                + db;
        }
        true
    }

    /// Pick the partner maximizing |E_i - E_j| among free alphas, else a
    /// seeded random scan over everything.
    fn examine(&mut self, i: usize, rng: &mut ChaCha8Rng) -> bool {
        if !self.violates_kkt(i) {
            return false;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n {
            if j == i || !(self.alphas[j] > 0.0 && self.alphas[j] < self.c) {
                continue;
            }
            let gap = (self.errors[i] - self.errors[j]).abs();
            if best.map_or(true, |(_, g)| gap > g) {
                best = Some((j, gap));
            }
        }
        if let Some((j, _)) = best {
            if self.take_step(i, j) {
                return true;
            }
        }
        let start = rng.gen_range(0..self.n);
        for off in 0..self.n {
            let j = (start + off) % self.n;
            if j != i && self.take_step(i, j) {
                return true;
            }
        }
        false
    }
}

/// Solve the dual on the given (already scaled) samples. Returns the
/// alphas and the bias.
pub fn solve(
    samples: &[Vec<f64>],
    y: &[f64],
    c: f64,
    gamma: f64,
    tol: f64,
    seed: u64,
) -> (Vec<f64>, f64) {
    let n = samples.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = gaussian_kernel(&samples[i], &samples[j], gamma);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }
    let mut state = State {
        gram,
        y,
        alphas: vec![0.0; n],
        errors: y.iter().map(|&yi| -yi).collect(),
        bias: 0.0,
        c,
        tol,
        n,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut examine_all = true;
    for _ in 0..MAX_SWEEPS {
        let mut changed = 0usize;
        for i in 0..n {
            let free = state.alphas[i] > 0.0 && state.alphas[i] < c;
            if (examine_all || free) && state.examine(i, &mut rng) {
                changed += 1;
            }
        }
        if examine_all {
            if changed == 0 {
                break;
            }
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }

    // recompute the bias from the free support vectors for stability
    let free: Vec<usize> =
        (0..n).filter(|&i| state.alphas[i] > 0.0 && state.alphas[i] < c).collect();
    if !free.is_empty() {
        let sum: f64 = free
            .iter()
            .map(|&i| y[i] - (state.decision(i) - state.bias))
            .sum();
        state.bias = sum / free.len() as f64;
    }
    (state.alphas, state.bias)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_two_point_problem() {
        let samples = vec![vec![0.0], vec![1.0]];
        let y = [-1.0, 1.0];
        let (alphas, bias) = solve(&samples, &y, 10.0, 1.0, 1e-3, 0);
        // symmetric problem: equal alphas, midpoint threshold
        assert!((alphas[0] - alphas[1]).abs() < 1e-6);
        assert!(alphas[0] > 0.0);
        let decide = |x: f64| {
            alphas[0] * y[0] * gaussian_kernel(&[x], &samples[0], 1.0)
                + alphas[1] * y[1] * gaussian_kernel(&[x], &samples[1], 1.0)
                + bias
        };
        assert!(decide(0.0) < 0.0);
        assert!(decide(1.0) > 0.0);
        assert!(decide(0.5).abs() < 1e-6);
    }

    #[test]
    fn equality_constraint_is_preserved() {
        let samples: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i % 4) as f64, (i / 4) as f64 * if i % 2 == 0 { 1.0 } else { -0.5 }])
            .collect();
        let y: Vec<f64> = (0..12).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (alphas, _) = solve(&samples, &y, 3.0, 0.7, 1e-3, 1);
        let balance: f64 = alphas.iter().zip(&y).map(|(a, yi)| a * yi).sum();
        assert!(balance.abs() < 1e-9, "sum alpha_i y_i = {balance}");
        for &a in &alphas {
            assert!((-1e-12..=3.0 + 1e-12).contains(&a));
        }
    }
}
