//! Gaussian-kernel SVM with the paired-split evaluation protocol.

mod smo;
pub mod protocol;

pub use protocol::{
    cross_validate, default_c_grid, default_gamma_grid, evaluate, evaluate_splits,
    load_model, save_model, AccuracyReport, RepeatResult,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training set contains a single class")]
    SingleClassInput,
    #[error("need at least {needed} cover/stego pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("inconsistent feature dimension: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model file corrupt: {0}")]
    BadModelFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const COVER_LABEL: i8 = -1;
pub const STEGO_LABEL: i8 = 1;

/// One labeled feature vector. `pair_id` names the cover/stego sequence
/// pair the sample came from; splits never separate a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    /// -1 cover, +1 stego.
    pub label: i8,
    pub pair_id: String,
}

/// Gaussian (RBF) kernel `exp(-gamma * ||x - y||^2)`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// Per-dimension min-max scaling to [0, 1], fitted on training data
/// only. Constant dimensions map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(samples: &[&[f64]]) -> FeatureScaler {
        let dim = samples.first().map_or(0, |s| s.len());
        let mut mins = vec![f64::INFINITY; dim];
        let mut maxs = vec![f64::NEG_INFINITY; dim];
        for s in samples {
            for (d, &v) in s.iter().enumerate() {
                mins[d] = mins[d].min(v);
                maxs[d] = maxs[d].max(v);
            }
        }
        FeatureScaler { mins, maxs }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(d, &v)| {
                let span = self.maxs[d] - self.mins[d];
                if span > 0.0 {
                    (v - self.mins[d]) / span
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// A trained soft-margin SVM: support vectors in scaled space with their
/// dual coefficients `alpha_i * y_i`, the bias, the kernel width and the
/// scaling fitted on the training portion.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub c: f64,
    pub gamma: f64,
    pub bias: f64,
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefs: Vec<f64>,
    pub scaler: FeatureScaler,
}

impl TrainedModel {
    /// Signed decision value; positive means stego.
    pub fn decision(&self, features: &[f64]) -> f64 {
        let x = self.scaler.transform(features);
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, &a)| a * gaussian_kernel(sv, &x, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, features: &[f64]) -> i8 {
        if self.decision(features) >= 0.0 {
            STEGO_LABEL
        } else {
            COVER_LABEL
        }
    }

    pub fn accuracy(&self, samples: &[LabeledSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let correct =
            samples.iter().filter(|s| self.predict(&s.features) == s.label).count();
        correct as f64 / samples.len() as f64
    }
}

/// Train a Gaussian-kernel SVM by sequential pairwise dual optimization
/// (KKT tolerance 1e-3). Deterministic under fixed sample order and
/// seed.
pub fn train(
    samples: &[LabeledSample],
    c: f64,
    gamma: f64,
    seed: u64,
) -> Result<TrainedModel, ClassifierError> {
    let has_cover = samples.iter().any(|s| s.label == COVER_LABEL);
    let has_stego = samples.iter().any(|s| s.label == STEGO_LABEL);
    if !has_cover || !has_stego {
        return Err(ClassifierError::SingleClassInput);
    }
    let dim = samples[0].features.len();
    for s in samples {
        if s.features.len() != dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: dim,
                got: s.features.len(),
            });
        }
    }

    let scaler =
        FeatureScaler::fit(&samples.iter().map(|s| s.features.as_slice()).collect::<Vec<_>>());
    let scaled: Vec<Vec<f64>> = samples.iter().map(|s| scaler.transform(&s.features)).collect();
    let labels: Vec<f64> = samples.iter().map(|s| s.label as f64).collect();

    let (alphas, bias) = smo::solve(&scaled, &labels, c, gamma, smo::KKT_TOLERANCE, seed);

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (i, &a) in alphas.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(scaled[i].clone());
            dual_coefs.push(a * labels[i]);
        }
    }
    Ok(TrainedModel { c, gamma, bias, support_vectors, dual_coefs, scaler })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(features: Vec<f64>, label: i8, pair: usize) -> LabeledSample {
        LabeledSample { features, label, pair_id: format!("p{pair}") }
    }

    /// two well-separated clusters in 2D
    fn separated_clusters() -> Vec<LabeledSample> {
        let mut out = Vec::new();
        for i in 0..10 {
            let t = i as f64 * 0.05;
            out.push(sample(vec![t, 0.1 + t * 0.5], COVER_LABEL, i));
            out.push(sample(vec![5.0 + t, 4.9 - t * 0.5], STEGO_LABEL, i));
        }
        out
    }

    #[test]
    fn kernel_identities() {
        let x = [0.3, -0.7, 2.0];
        let y = [1.3, -0.7, 2.0];
        assert_eq!(gaussian_kernel(&x, &x, 0.5), 1.0);
        assert_eq!(gaussian_kernel(&x, &y, 0.5), gaussian_kernel(&y, &x, 0.5));
        // ||x-y||^2 = 1 at gamma 1
        assert!((gaussian_kernel(&x, &y, 1.0) - (-1.0f64).exp()).abs() < 1e-12);
        assert!((gaussian_kernel(&x, &y, 1.0) - 0.367879441).abs() < 1e-9);
    }

    #[test]
    fn separable_clusters_train_to_full_accuracy() {
        let samples = separated_clusters();
        let model = train(&samples, 10.0, 1.0, 0).unwrap();
        assert_eq!(model.accuracy(&samples), 1.0);
    }

    #[test]
    fn single_class_rejected() {
        let samples: Vec<_> =
            (0..6).map(|i| sample(vec![i as f64, 0.0], COVER_LABEL, i)).collect();
        assert!(matches!(
            train(&samples, 1.0, 1.0, 0),
            Err(ClassifierError::SingleClassInput)
        ));
    }

    #[test]
    fn duplicating_samples_keeps_decision_signs() {
        let samples = separated_clusters();
        let model_a = train(&samples, 4.0, 0.5, 0).unwrap();
        let mut doubled = samples.clone();
        doubled.extend(samples.iter().cloned());
        let model_b = train(&doubled, 4.0, 0.5, 0).unwrap();
        // held-out probe grid
        for i in 0..20 {
            for j in 0..20 {
                let p = [i as f64 * 0.35 - 1.0, j as f64 * 0.35 - 1.0];
                assert_eq!(model_a.predict(&p), model_b.predict(&p), "probe {p:?}");
            }
        }
    }

    #[test]
    fn scaler_fits_training_portion_only() {
        let samples = separated_clusters();
        let model = train(&samples, 4.0, 0.5, 0).unwrap();
        let mins: Vec<f64> = (0..2)
            .map(|d| samples.iter().map(|s| s.features[d]).fold(f64::INFINITY, f64::min))
            .collect();
        let maxs: Vec<f64> = (0..2)
            .map(|d| {
                samples.iter().map(|s| s.features[d]).fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        assert_eq!(model.scaler.mins, mins);
        assert_eq!(model.scaler.maxs, maxs);
    }

    #[test]
    fn dual_coefficients_respect_the_box() {
        let samples = separated_clusters();
        let c = 2.0;
        let model = train(&samples, c, 1.0, 0).unwrap();
        for &a in &model.dual_coefs {
            assert!(a.abs() <= c + 1e-9, "alpha outside [0, c]");
            assert!(a != 0.0);
        }
    }
}
