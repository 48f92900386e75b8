//! In-loop motion-vector embedders.
//!
//! The published MV-steganography targets minimize bespoke distortion
//! functions under syndrome coding; what their detectors (and this
//! pipeline's features) react to is the underlying ±1 perturbation of
//! non-skip motion vectors at a controlled bits-per-non-skip-MV rate.
//! The embedders here realize exactly that perturbation model: LSB
//! matching on the parity of `h + v`, with carriers chosen per frame
//! either uniformly at random or by largest MV magnitude.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thiserror::Error;

use crate::codec::{CarrierCandidate, InLoopEmbedder, MotionVector};

#[derive(Debug, Error)]
pub enum StegoError {
    #[error("rate {rate} asks for {requested} carriers but only {available} MVs exist")]
    RateTooHigh { rate: f64, requested: usize, available: usize },
    #[error("embedding rate {0} must be a finite non-negative number")]
    InvalidRate(f64),
    #[error("bad embedder descriptor: {0}")]
    BadDescriptor(String),
}

/// Carrier selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedMethod {
    /// Uniform seeded selection among the frame's non-skip MVs.
    LsbMatchRandom,
    /// The MVs with the largest `|h| + |v|`, ties by block id.
    MagnitudeSelective,
}

impl EmbedMethod {
    fn name(self) -> &'static str {
        match self {
            EmbedMethod::LsbMatchRandom => "lsb-match-random",
            EmbedMethod::MagnitudeSelective => "magnitude-selective",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "lsb-match-random" => Some(EmbedMethod::LsbMatchRandom),
            "magnitude-selective" => Some(EmbedMethod::MagnitudeSelective),
            _ => None,
        }
    }
}

/// An embedding plan: pure function of `(method, rate, seed)`.
///
/// `rate` is in bits per non-skip motion vector; the payload is a
/// pseudo-random bit stream derived from `seed` (message content is
/// irrelevant to the statistics the detector sees).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPlan {
    pub method: EmbedMethod,
    pub rate: f64,
    pub seed: u64,
}

impl EmbeddingPlan {
    pub fn new(method: EmbedMethod, rate: f64, seed: u64) -> Result<Self, StegoError> {
        if !rate.is_finite() || rate < 0.0 {
            return Err(StegoError::InvalidRate(rate));
        }
        Ok(EmbeddingPlan { method, rate, seed })
    }

    /// Header descriptor: `method=<name>;rate=<r>;seed=<s>`.
    pub fn descriptor(&self) -> String {
        format!("method={};rate={};seed={}", self.method.name(), self.rate, self.seed)
    }

    pub fn parse_descriptor(s: &str) -> Result<Self, StegoError> {
        let mut method = None;
        let mut rate = None;
        let mut seed = None;
        for part in s.split(';') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| StegoError::BadDescriptor(s.to_string()))?;
            match key {
                "method" => method = EmbedMethod::from_name(value),
                "rate" => rate = value.parse::<f64>().ok(),
                "seed" => seed = value.parse::<u64>().ok(),
                _ => return Err(StegoError::BadDescriptor(s.to_string())),
            }
        }
        match (method, rate, seed) {
            (Some(m), Some(r), Some(sd)) => EmbeddingPlan::new(m, r, sd),
            _ => Err(StegoError::BadDescriptor(s.to_string())),
        }
    }
}

/// Identifies one motion vector inside a frame: macroblock grid cell
/// plus sub-block index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId {
    pub mb_row: u16,
    pub mb_col: u16,
    pub sub: u8,
}

impl BlockId {
    pub fn of(c: &CarrierCandidate) -> Self {
        BlockId { mb_row: c.mb_row, mb_col: c.mb_col, sub: c.sub }
    }
}

/// LSB matching on one component: if the parity of `h + v` already
/// equals `bit` the vector passes through unchanged; otherwise exactly
/// one component moves by ±1, the choice drawn from `rng` among the
/// candidates `keep` accepts. All four candidates flip the parity, so
/// any valid one embeds the bit.
pub fn embed_mv_filtered(
    mv: MotionVector,
    bit: u8,
    rng: &mut ChaCha8Rng,
    keep: &dyn Fn(MotionVector) -> bool,
) -> MotionVector {
    debug_assert!(bit <= 1);
    let parity = ((mv.h + mv.v) & 1).unsigned_abs() as u8;
    if parity == bit {
        return mv;
    }
    let options = [
        MotionVector::new(mv.h + 1, mv.v),
        MotionVector::new(mv.h - 1, mv.v),
        MotionVector::new(mv.h, mv.v + 1),
        MotionVector::new(mv.h, mv.v - 1),
    ];
    let valid: Vec<MotionVector> = options.iter().copied().filter(|&m| keep(m)).collect();
    if valid.is_empty() {
        return mv;
    }
    valid[rng.gen_range(0..valid.len())]
}

/// LSB matching without positional constraints.
pub fn embed_mv(mv: MotionVector, bit: u8, rng: &mut ChaCha8Rng) -> MotionVector {
    embed_mv_filtered(mv, bit, rng, &|_| true)
}

/// Select `round(rate * n)` carrier ids from a frame's non-skip MVs.
///
/// Selection is deterministic in `(plan, frame_index, frame_mvs)`; the
/// returned ids are sorted ascending.
pub fn select_carriers(
    frame_mvs: &[(BlockId, MotionVector, f64)],
    plan: &EmbeddingPlan,
    frame_index: u32,
) -> Result<Vec<BlockId>, StegoError> {
    let available = frame_mvs.len();
    let requested = (plan.rate * available as f64).round() as usize;
    if requested > available {
        return Err(StegoError::RateTooHigh { rate: plan.rate, requested, available });
    }
    let mut ids: Vec<BlockId> = match plan.method {
        EmbedMethod::LsbMatchRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(
                plan.seed ^ (frame_index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            );
            let mut indexes: Vec<usize> = (0..available).collect();
            // partial Fisher-Yates: the first `requested` slots
            for i in 0..requested {
                let j = rng.gen_range(i..available);
                indexes.swap(i, j);
            }
            indexes[..requested].iter().map(|&i| frame_mvs[i].0).collect()
        }
        EmbedMethod::MagnitudeSelective => {
            let mut ranked: Vec<&(BlockId, MotionVector, f64)> = frame_mvs.iter().collect();
            ranked.sort_by(|a, b| b.1.l1_norm().cmp(&a.1.l1_norm()).then(a.0.cmp(&b.0)));
            ranked[..requested].iter().map(|e| e.0).collect()
        }
    };
    ids.sort_unstable();
    Ok(ids)
}

/// The in-loop embedder: selects carriers per P-frame, assigns payload
/// bits in id order, and perturbs carrier MVs as the encoder offers
/// them.
pub struct MvEmbedder {
    plan: EmbeddingPlan,
    payload: ChaCha8Rng,
    choice: ChaCha8Rng,
    bits: HashMap<BlockId, u8>,
}

impl MvEmbedder {
    pub fn new(plan: EmbeddingPlan) -> Self {
        let payload = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x70ad_10ad);
        let choice = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x5e1e_c7ed);
        MvEmbedder { plan, payload, choice, bits: HashMap::new() }
    }

    pub fn plan(&self) -> &EmbeddingPlan {
        &self.plan
    }
}

impl InLoopEmbedder for MvEmbedder {
    fn descriptor(&self) -> String {
        // a rate-zero plan changes nothing; recording no descriptor keeps
        // the stream byte-identical to the cover encode
        if self.plan.rate == 0.0 {
            String::new()
        } else {
            self.plan.descriptor()
        }
    }

    fn begin_frame(
        &mut self,
        frame_index: u32,
        candidates: &[CarrierCandidate],
    ) -> Result<(), String> {
        let frame_mvs: Vec<(BlockId, MotionVector, f64)> =
            candidates.iter().map(|c| (BlockId::of(c), c.mv, c.sad)).collect();
        let ids = select_carriers(&frame_mvs, &self.plan, frame_index)
            .map_err(|e| e.to_string())?;
        self.bits.clear();
        for id in ids {
            let bit = self.payload.gen_range(0..2u8);
            self.bits.insert(id, bit);
        }
        Ok(())
    }

    fn perturb(
        &mut self,
        mb_row: u16,
        mb_col: u16,
        sub: u8,
        mv: MotionVector,
        is_valid: &dyn Fn(MotionVector) -> bool,
    ) -> MotionVector {
        match self.bits.get(&BlockId { mb_row, mb_col, sub }) {
            Some(&bit) => embed_mv_filtered(mv, bit, &mut self.choice, is_valid),
            None => mv,
        }
    }
}
