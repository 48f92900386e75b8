//! The 11-dimensional skip-macroblock calibrated feature set.
//!
//! Windows of consecutive P-frames are the extraction unit. Per window:
//!
//! * `f[0..5]` — distribution of the MVP L1 difference (bins 0, 1, 2, 3,
//!   >=4) over macroblocks skipped in *both* compressions;
//! * `f[5..11]` — distribution of the first-compression partition
//!   (pskip, 16x16, 16x8, 8x16, 8x8, else) over macroblocks skipped in
//!   the *second* compression.
//!
//! Each sub-feature is normalized by its own denominator; windows with
//! an empty denominator emit zeros and carry the counts so downstream
//! consumers can filter.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::calibration::{CalibratedBlockPair, CalibratedSequence};
use crate::codec::{MotionVector, PartitionKind};

pub const F1_BINS: usize = 5;
pub const F2_BINS: usize = 6;
pub const SMCF_DIM: usize = F1_BINS + F2_BINS;

#[derive(Debug, Error)]
pub enum FeatureCsvError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// L1 distance between two motion vector predictions.
pub fn mvp_diff(first: MotionVector, second: MotionVector) -> u32 {
    (first.h as i32 - second.h as i32).unsigned_abs()
        + (first.v as i32 - second.v as i32).unsigned_abs()
}

/// One extraction window's feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// `f[0..5]` MVP-difference bins, `f[5..11]` partition bins.
    pub f: [f64; SMCF_DIM],
    pub window_id: u32,
    /// Pairs skipped in both compressions (the f1 denominator).
    pub n_f1: u32,
    /// Pairs skipped in the second compression (the f2 denominator).
    pub m_f2: u32,
}

/// Window layout over the P-frames of a calibrated sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// Consecutive non-overlapping windows; a trailing partial window is
    /// dropped.
    NonOverlapping,
    /// Stride-1 sliding windows.
    Sliding,
}

/// MVP reversion distribution over pairs skipped in both compressions.
pub fn extract_f1(pairs: &[CalibratedBlockPair]) -> ([f64; F1_BINS], u32) {
    let mut counts = [0u32; F1_BINS];
    let mut n = 0u32;
    for p in pairs {
        if p.first.partition == PartitionKind::PSkip
            && p.second.partition == PartitionKind::PSkip
        {
            n += 1;
            let d = mvp_diff(p.first.mvp, p.second.mvp) as usize;
            counts[d.min(F1_BINS - 1)] += 1;
        }
    }
    let mut f = [0.0; F1_BINS];
    if n > 0 {
        for (slot, &c) in f.iter_mut().zip(&counts) {
            *slot = c as f64 / n as f64;
        }
    }
    (f, n)
}

fn partition_bin(kind: PartitionKind) -> usize {
    match kind {
        PartitionKind::PSkip => 0,
        PartitionKind::P16x16 => 1,
        PartitionKind::P16x8 => 2,
        PartitionKind::P8x16 => 3,
        PartitionKind::P8x8 => 4,
        // the catch-all category; only intra exists in this codec
        PartitionKind::Intra => 5,
    }
}

/// Partition state-transfer distribution over pairs skipped in the
/// second compression.
pub fn extract_f2(pairs: &[CalibratedBlockPair]) -> ([f64; F2_BINS], u32) {
    let mut counts = [0u32; F2_BINS];
    let mut m = 0u32;
    for p in pairs {
        if p.second.partition == PartitionKind::PSkip {
            m += 1;
            counts[partition_bin(p.first.partition)] += 1;
        }
    }
    let mut f = [0.0; F2_BINS];
    if m > 0 {
        for (slot, &c) in f.iter_mut().zip(&counts) {
            *slot = c as f64 / m as f64;
        }
    }
    (f, m)
}

/// Extract one feature vector per window of `window_len` P-frames.
pub fn extract_smcf(
    cal: &CalibratedSequence,
    window_len: usize,
    mode: WindowMode,
) -> Vec<FeatureVector> {
    assert!(window_len >= 1, "window length must be at least 1");
    let n_p = cal.p_frame_indices.len();
    let per_frame = cal.mb_rows as usize * cal.mb_cols as usize;

    let window_starts: Vec<usize> = match mode {
        WindowMode::NonOverlapping => (0..n_p / window_len).map(|w| w * window_len).collect(),
        WindowMode::Sliding => {
            if n_p < window_len {
                Vec::new()
            } else {
                (0..=n_p - window_len).collect()
            }
        }
    };

    window_starts
        .iter()
        .enumerate()
        .map(|(window_id, &start)| {
            // pairs are sorted by (frame, row, col), so a run of whole
            // P-frames is one contiguous slice
            let lo = start * per_frame;
            let hi = (start + window_len) * per_frame;
            let window = &cal.pairs[lo..hi];
            let (f1, n_f1) = extract_f1(window);
            let (f2, m_f2) = extract_f2(window);
            let mut f = [0.0; SMCF_DIM];
            f[..F1_BINS].copy_from_slice(&f1);
            f[F1_BINS..].copy_from_slice(&f2);
            FeatureVector { f, window_id: window_id as u32, n_f1, m_f2 }
        })
        .collect()
}

/// Sample label in the steganalysis protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Cover,
    Stego,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Cover => "cover",
            Label::Stego => "stego",
        }
    }
}

/// One row of the feature CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub sequence_id: String,
    pub window_id: u32,
    pub label: Label,
    pub n_f1: u32,
    pub m_f2: u32,
    pub f: [f64; SMCF_DIM],
}

impl FeatureRow {
    pub fn from_vector(sequence_id: &str, label: Label, v: &FeatureVector) -> Self {
        FeatureRow {
            sequence_id: sequence_id.to_string(),
            window_id: v.window_id,
            label,
            n_f1: v.n_f1,
            m_f2: v.m_f2,
            f: v.f,
        }
    }
}

pub const FEATURE_CSV_HEADER: &str = "sequence_id,window_id,label,n_f1,m_f2,\
f1_0,f1_1,f1_2,f1_3,f1_4,f2_pskip,f2_16x16,f2_16x8,f2_8x16,f2_8x8,f2_else";

/// Render feature rows as CSV text (full f64 round-trip precision).
pub fn feature_csv_string(rows: &[FeatureRow]) -> String {
    let mut out = String::new();
    out.push_str(FEATURE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        write!(
            out,
            "{},{},{},{},{}",
            r.sequence_id,
            r.window_id,
            r.label.as_str(),
            r.n_f1,
            r.m_f2
        )
        .unwrap();
        for v in r.f {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_feature_csv<P: AsRef<Path>>(
    path: P,
    rows: &[FeatureRow],
) -> Result<(), FeatureCsvError> {
    std::fs::write(path, feature_csv_string(rows))?;
    Ok(())
}

pub fn parse_feature_csv(text: &str) -> Result<Vec<FeatureRow>, FeatureCsvError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != FEATURE_CSV_HEADER {
                return Err(FeatureCsvError::Parse {
                    line: 1,
                    reason: "unexpected header".to_string(),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let err = |reason: &str| FeatureCsvError::Parse {
            line: i + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 + SMCF_DIM {
            return Err(err("wrong field count"));
        }
        let label = match fields[2] {
            "cover" => Label::Cover,
            "stego" => Label::Stego,
            _ => return Err(err("label must be cover or stego")),
        };
        let mut f = [0.0; SMCF_DIM];
        for (slot, raw) in f.iter_mut().zip(&fields[5..]) {
            *slot = raw.parse().map_err(|_| err("bad feature value"))?;
        }
        rows.push(FeatureRow {
            sequence_id: fields[0].to_string(),
            window_id: fields[1].parse().map_err(|_| err("bad window id"))?,
            label,
            n_f1: fields[3].parse().map_err(|_| err("bad n_f1"))?,
            m_f2: fields[4].parse().map_err(|_| err("bad m_f2"))?,
            f,
        });
    }
    Ok(rows)
}

pub fn read_feature_csv<P: AsRef<Path>>(path: P) -> Result<Vec<FeatureRow>, FeatureCsvError> {
    parse_feature_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::MacroblockRecord;

    fn record(partition: PartitionKind, mvp: (i16, i16)) -> MacroblockRecord {
        MacroblockRecord {
            frame_index: 0,
            mb_row: 0,
            mb_col: 0,
            partition,
            mvs: Vec::new(),
            mvp: MotionVector::new(mvp.0, mvp.1),
            all_coeffs_zero: partition == PartitionKind::PSkip,
        }
    }

    fn pair(
        first: PartitionKind,
        first_mvp: (i16, i16),
        second: PartitionKind,
        second_mvp: (i16, i16),
    ) -> CalibratedBlockPair {
        CalibratedBlockPair {
            frame_index: 1,
            mb_row: 0,
            mb_col: 0,
            first: record(first, first_mvp),
            second: record(second, second_mvp),
        }
    }

    #[test]
    fn mvp_diff_examples() {
        let mv = MotionVector::new;
        assert_eq!(mvp_diff(mv(1, 2), mv(1, 2)), 0);
        assert_eq!(mvp_diff(mv(1, 2), mv(2, 3)), 2);
        assert_eq!(mvp_diff(mv(14, 7), mv(13, 6)), 2);
    }

    #[test]
    fn f1_counts_dual_skip_pairs_only() {
        use PartitionKind::*;
        let diffs = [(0, 0), (0, 0), (0, 0), (1, 0), (2, 0)];
        let mut pairs: Vec<_> = diffs
            .iter()
            .map(|&(dh, dv)| pair(PSkip, (0, 0), PSkip, (dh, dv)))
            .collect();
        // pairs that are not skip on both sides never count
        pairs.push(pair(P16x16, (0, 0), PSkip, (9, 9)));
        pairs.push(pair(PSkip, (0, 0), P8x8, (9, 9)));
        let (f1, n) = extract_f1(&pairs);
        assert_eq!(n, 5);
        assert_eq!(f1, [0.6, 0.2, 0.2, 0.0, 0.0]);
    }

    #[test]
    fn f1_large_diffs_land_in_last_bin() {
        use PartitionKind::*;
        let pairs =
            vec![pair(PSkip, (0, 0), PSkip, (5, 0)), pair(PSkip, (0, 0), PSkip, (3, 4))];
        let (f1, n) = extract_f1(&pairs);
        assert_eq!(n, 2);
        assert_eq!(f1, [0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn f1_empty_window_is_zero_vector() {
        let pairs = vec![pair(PartitionKind::P16x16, (0, 0), PartitionKind::Intra, (0, 0))];
        let (f1, n) = extract_f1(&pairs);
        assert_eq!(n, 0);
        assert_eq!(f1, [0.0; F1_BINS]);
    }

    #[test]
    fn f2_tallies_first_partition_of_second_skips() {
        use PartitionKind::*;
        let firsts = [PSkip, PSkip, P16x16, P16x8, P8x16, Intra];
        let mut pairs: Vec<_> =
            firsts.iter().map(|&k| pair(k, (0, 0), PSkip, (0, 0))).collect();
        pairs.push(pair(P8x8, (0, 0), P16x16, (0, 0))); // second not skip: ignored
        let (f2, m) = extract_f2(&pairs);
        assert_eq!(m, 6);
        let sixth = 1.0 / 6.0;
        assert_eq!(f2, [2.0 * sixth, sixth, sixth, sixth, 0.0, sixth]);
    }

    fn synthetic_cal(n_p: usize, per_frame: usize) -> CalibratedSequence {
        let mut pairs = Vec::new();
        for t in 0..n_p {
            for i in 0..per_frame {
                let mut p = pair(PartitionKind::PSkip, (0, 0), PartitionKind::PSkip, (0, 0));
                p.frame_index = t as u32 + 1;
                p.mb_row = 0;
                p.mb_col = i as u16;
                pairs.push(p);
            }
        }
        CalibratedSequence {
            pairs,
            qp_first: 25,
            qp_second: 25,
            p_frame_indices: (0..n_p as u32).map(|t| t + 1).collect(),
            mb_rows: 1,
            mb_cols: per_frame as u16,
        }
    }

    #[test]
    fn window_counts() {
        let cal5 = synthetic_cal(5, 4);
        assert_eq!(extract_smcf(&cal5, 5, WindowMode::NonOverlapping).len(), 1);
        let cal12 = synthetic_cal(12, 4);
        assert_eq!(extract_smcf(&cal12, 5, WindowMode::NonOverlapping).len(), 2);
        assert_eq!(extract_smcf(&cal12, 5, WindowMode::Sliding).len(), 8);
        let cal3 = synthetic_cal(3, 4);
        assert_eq!(extract_smcf(&cal3, 5, WindowMode::NonOverlapping).len(), 0);
        assert_eq!(extract_smcf(&cal3, 5, WindowMode::Sliding).len(), 0);
    }

    #[test]
    fn all_static_window_vector() {
        let cal = synthetic_cal(5, 4);
        let vs = extract_smcf(&cal, 5, WindowMode::NonOverlapping);
        assert_eq!(vs.len(), 1);
        let expected = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(vs[0].f, expected);
        assert_eq!((vs[0].n_f1, vs[0].m_f2), (20, 20));
    }

    #[test]
    fn csv_round_trip() {
        let cal = synthetic_cal(5, 4);
        let vs = extract_smcf(&cal, 5, WindowMode::NonOverlapping);
        let rows: Vec<FeatureRow> = vs
            .iter()
            .map(|v| FeatureRow::from_vector("seq000", Label::Cover, v))
            .collect();
        let text = feature_csv_string(&rows);
        let back = parse_feature_csv(&text).unwrap();
        assert_eq!(back, rows);
    }
}
