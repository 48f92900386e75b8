//! The evaluation protocol: five-fold cross-validated grid search over
//! `(c, gamma)`, repeated 60/40 splits by cover/stego pair, and the
//! model/report file formats.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::util::mix_seed;

use super::{train, ClassifierError, FeatureScaler, LabeledSample, TrainedModel};

/// Penalty grid `2^-1 .. 2^7`.
pub fn default_c_grid() -> Vec<f64> {
    (-1..=7).map(|e| (e as f64).exp2()).collect()
}

/// Kernel-width grid `2^-7 .. 2^3`.
pub fn default_gamma_grid() -> Vec<f64> {
    (-7..=3).map(|e| (e as f64).exp2()).collect()
}

/// Distinct pair ids in first-appearance order.
fn pair_ids(samples: &[LabeledSample]) -> Vec<String> {
    let mut ids = Vec::new();
    for s in samples {
        if !ids.contains(&s.pair_id) {
            ids.push(s.pair_id.clone());
        }
    }
    ids
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Five-fold (or `folds`-fold) cross-validated grid search. Folds are
/// split by `pair_id` so a cover/stego pair never straddles the
/// train/validation boundary. Ties prefer smaller `c`, then smaller
/// `gamma`.
pub fn cross_validate(
    samples: &[LabeledSample],
    c_grid: &[f64],
    gamma_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<(f64, f64), ClassifierError> {
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(ClassifierError::EmptyGrid);
    }
    let mut ids = pair_ids(samples);
    ids.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xcf));
    shuffle(&mut ids, &mut rng);
    let folds = folds.min(ids.len()).max(2);
    let fold_of = |pair: &str| -> usize {
        ids.iter().position(|p| p == pair).expect("sample pair in id list") % folds
    };

    let mut c_sorted = c_grid.to_vec();
    c_sorted.sort_by(f64::total_cmp);
    let mut gamma_sorted = gamma_grid.to_vec();
    gamma_sorted.sort_by(f64::total_cmp);

    let mut best: Option<(f64, f64, f64)> = None; // (c, gamma, accuracy)
    for &c in &c_sorted {
        for &gamma in &gamma_sorted {
            let mut correct = 0usize;
            let mut total = 0usize;
            for fold in 0..folds {
                let train_part: Vec<LabeledSample> = samples
                    .iter()
                    .filter(|s| fold_of(&s.pair_id) != fold)
                    .cloned()
                    .collect();
                let validate: Vec<&LabeledSample> =
                    samples.iter().filter(|s| fold_of(&s.pair_id) == fold).collect();
                if validate.is_empty() {
                    continue;
                }
                let model = train(&train_part, c, gamma, mix_seed(seed, fold as u64))?;
                correct +=
                    validate.iter().filter(|s| model.predict(&s.features) == s.label).count();
                total += validate.len();
            }
            let accuracy = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
            // strictly-greater keeps the smallest (c, gamma) on ties
            if best.map_or(true, |(_, _, a)| accuracy > a) {
                best = Some((c, gamma, accuracy));
            }
        }
    }
    let (c, gamma, _) = best.expect("grids are non-empty");
    Ok((c, gamma))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatResult {
    pub repeat: u32,
    pub c: f64,
    pub gamma: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub per_repeat: Vec<RepeatResult>,
    pub mean: f64,
    pub std_dev: f64,
}

impl AccuracyReport {
    fn from_results(per_repeat: Vec<RepeatResult>) -> Self {
        let n = per_repeat.len() as f64;
        let mean = per_repeat.iter().map(|r| r.accuracy).sum::<f64>() / n;
        let var = if per_repeat.len() > 1 {
            per_repeat.iter().map(|r| (r.accuracy - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        AccuracyReport { per_repeat, mean, std_dev: var.sqrt() }
    }

    /// CSV rows `repeat,c,gamma,accuracy`.
    pub fn csv_string(&self) -> String {
        let mut out = String::from("repeat,c,gamma,accuracy\n");
        for r in &self.per_repeat {
            writeln!(out, "{},{},{},{}", r.repeat, r.c, r.gamma, r.accuracy).unwrap();
        }
        out
    }
}

/// The train/test pair-id split of every repeat, exposed so callers can
/// audit pair integrity. `evaluate` uses exactly these splits.
pub fn evaluate_splits(
    samples: &[LabeledSample],
    repeats: u32,
    train_fraction: f64,
    seed: u64,
) -> Result<Vec<(Vec<String>, Vec<String>)>, ClassifierError> {
    let mut ids = pair_ids(samples);
    ids.sort_unstable();
    if ids.len() < 5 {
        return Err(ClassifierError::TooFewPairs { needed: 5, got: ids.len() });
    }
    let n_train = ((ids.len() as f64) * train_fraction).round() as usize;
    let n_train = n_train.clamp(1, ids.len() - 1);
    Ok((0..repeats)
        .map(|r| {
            let mut shuffled = ids.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xe0 + r as u64));
            shuffle(&mut shuffled, &mut rng);
            let train_ids = shuffled[..n_train].to_vec();
            let test_ids = shuffled[n_train..].to_vec();
            (train_ids, test_ids)
        })
        .collect())
}

/// Full protocol: per repeat, split pairs `train_fraction`/rest, pick
/// `(c, gamma)` by five-fold cross-validation on the training portion,
/// retrain and score on the held-out portion.
pub fn evaluate(
    samples: &[LabeledSample],
    c_grid: &[f64],
    gamma_grid: &[f64],
    repeats: u32,
    train_fraction: f64,
    seed: u64,
) -> Result<AccuracyReport, ClassifierError> {
    let splits = evaluate_splits(samples, repeats, train_fraction, seed)?;
    let mut results = Vec::with_capacity(splits.len());
    for (r, (train_ids, test_ids)) in splits.into_iter().enumerate() {
        let train_set: Vec<LabeledSample> =
            samples.iter().filter(|s| train_ids.contains(&s.pair_id)).cloned().collect();
        let test_set: Vec<LabeledSample> =
            samples.iter().filter(|s| test_ids.contains(&s.pair_id)).cloned().collect();
        let (c, gamma) = cross_validate(
            &train_set,
            c_grid,
            gamma_grid,
            5,
            mix_seed(seed, 0xa0 + r as u64),
        )?;
        let model = train(&train_set, c, gamma, mix_seed(seed, 0xb0 + r as u64))?;
        let accuracy = model.accuracy(&test_set);
        results.push(RepeatResult { repeat: r as u32, c, gamma, accuracy });
    }
    Ok(AccuracyReport::from_results(results))
}

const MODEL_MAGIC: &[u8; 4] = b"MVSM";
const MODEL_VERSION: u16 = 1;

/// Persist a trained model as a little-endian binary blob.
pub fn save_model<P: AsRef<Path>>(path: P, model: &TrainedModel) -> Result<(), ClassifierError> {
    let dim = model.scaler.mins.len();
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&model.c.to_le_bytes());
    out.extend_from_slice(&model.gamma.to_le_bytes());
    out.extend_from_slice(&model.bias.to_le_bytes());
    out.extend_from_slice(&(dim as u16).to_le_bytes());
    for v in model.scaler.mins.iter().chain(&model.scaler.maxs) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(model.support_vectors.len() as u32).to_le_bytes());
    for (sv, coef) in model.support_vectors.iter().zip(&model.dual_coefs) {
        out.extend_from_slice(&coef.to_le_bytes());
        for v in sv {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

struct BlobReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BlobReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ClassifierError> {
        if self.pos + n > self.bytes.len() {
            return Err(ClassifierError::BadModelFile("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64, ClassifierError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u16(&mut self) -> Result<u16, ClassifierError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ClassifierError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Load a model written by [`save_model`].
pub fn load_model<P: AsRef<Path>>(path: P) -> Result<TrainedModel, ClassifierError> {
    let bytes = std::fs::read(path)?;
    let bad = |m: &str| ClassifierError::BadModelFile(m.to_string());
    let mut r = BlobReader { bytes: &bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(bad("bad magic"));
    }
    if r.u16()? != MODEL_VERSION {
        return Err(bad("unsupported version"));
    }
    let c = r.f64()?;
    let gamma = r.f64()?;
    let bias = r.f64()?;
    let dim = r.u16()? as usize;
    let mut mins = Vec::with_capacity(dim);
    let mut maxs = Vec::with_capacity(dim);
    for _ in 0..dim {
        mins.push(r.f64()?);
    }
    for _ in 0..dim {
        maxs.push(r.f64()?);
    }
    let n_sv = r.u32()? as usize;
    let mut support_vectors = Vec::with_capacity(n_sv);
    let mut dual_coefs = Vec::with_capacity(n_sv);
    for _ in 0..n_sv {
        dual_coefs.push(r.f64()?);
        let mut sv = Vec::with_capacity(dim);
        for _ in 0..dim {
            sv.push(r.f64()?);
        }
        support_vectors.push(sv);
    }
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(TrainedModel {
        c,
        gamma,
        bias,
        support_vectors,
        dual_coefs,
        scaler: FeatureScaler { mins, maxs },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{COVER_LABEL, STEGO_LABEL};

    fn paired_corpus(pairs: usize, separation: f64) -> Vec<LabeledSample> {
        let mut out = Vec::new();
        for p in 0..pairs {
            let jitter = (p as f64 * 0.37).sin() * 0.2;
            out.push(LabeledSample {
                features: vec![jitter, -jitter * 0.5],
                label: COVER_LABEL,
                pair_id: format!("seq{p:03}"),
            });
            out.push(LabeledSample {
                features: vec![separation + jitter, separation - jitter],
                label: STEGO_LABEL,
                pair_id: format!("seq{p:03}"),
            });
        }
        out
    }

    #[test]
    fn single_point_grid_is_returned() {
        let corpus = paired_corpus(6, 3.0);
        let (c, gamma) = cross_validate(&corpus, &[2.0], &[0.25], 5, 1).unwrap();
        assert_eq!((c, gamma), (2.0, 0.25));
    }

    #[test]
    fn separable_corpus_reaches_full_cv_accuracy() {
        let corpus = paired_corpus(10, 4.0);
        let (c, gamma) =
            cross_validate(&corpus, &default_c_grid(), &default_gamma_grid(), 5, 3).unwrap();
        let model = train(&corpus, c, gamma, 3).unwrap();
        assert_eq!(model.accuracy(&corpus), 1.0);
    }

    #[test]
    fn fold_assignment_is_reproducible() {
        let corpus = paired_corpus(8, 1.0);
        let a = cross_validate(&corpus, &default_c_grid(), &[0.5, 1.0], 5, 7).unwrap();
        let b = cross_validate(&corpus, &default_c_grid(), &[0.5, 1.0], 5, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn evaluate_is_deterministic_and_perfect_on_separable_data() {
        let corpus = paired_corpus(10, 4.0);
        let grids = (default_c_grid(), vec![1.0]);
        let a = evaluate(&corpus, &grids.0, &grids.1, 3, 0.6, 9).unwrap();
        let b = evaluate(&corpus, &grids.0, &grids.1, 3, 0.6, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean, 1.0);
    }

    #[test]
    fn too_few_pairs_rejected() {
        let corpus = paired_corpus(4, 2.0);
        assert!(matches!(
            evaluate(&corpus, &[1.0], &[1.0], 2, 0.6, 0),
            Err(ClassifierError::TooFewPairs { needed: 5, got: 4 })
        ));
    }

    #[test]
    fn splits_never_leak_pairs() {
        let corpus = paired_corpus(9, 1.0);
        for (train_ids, test_ids) in evaluate_splits(&corpus, 10, 0.6, 5).unwrap() {
            assert!(!train_ids.iter().any(|t| test_ids.contains(t)));
            assert_eq!(train_ids.len() + test_ids.len(), 9);
            // 60% of 9 rounds to 5
            assert_eq!(train_ids.len(), 5);
        }
    }

    #[test]
    fn model_file_round_trip() {
        let corpus = paired_corpus(6, 3.0);
        let model = train(&corpus, 2.0, 0.5, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&path, &model).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        // corrupt magic
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'x';
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_model(&path), Err(ClassifierError::BadModelFile(_))));
    }

    #[test]
    fn report_csv_shape() {
        let corpus = paired_corpus(7, 3.0);
        let report = evaluate(&corpus, &[1.0], &[1.0], 2, 0.6, 1).unwrap();
        let csv = report.csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "repeat,c,gamma,accuracy");
        assert_eq!(lines.len(), 3);
    }
}
