//! Sign-aggregation decoders.
//!
//! Aggregating M one-bit worker signs into one decision is decoding a
//! rate-1/M repetition code over parallel BSCs. Majority vote is the
//! uniform-weight decoder; weighting each worker by its channel's
//! log-likelihood ratio ln((1-p)/p) makes the weighted majority vote the
//! maximum-likelihood decoder, which `ml_oracle` checks by direct likelihood
//! evaluation.

use crate::channel::ParallelChannels;
use crate::error::{Error, Result};
use crate::sign::{Sign, SignWord};

/// Per-worker aggregation weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidArgument("need at least one weight".into()));
        }
        if let Some(bad) = w.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weights must be finite, got {bad}"
            )));
        }
        Ok(WeightVector { w })
    }

    /// All-ones weights: reduces the weighted vote to plain majority vote.
    pub fn uniform(m: usize) -> Self {
        assert!(m > 0);
        WeightVector { w: vec![1.0; m] }
    }

    /// The LLR weights of the given channels; every p must lie in (0, 1).
    pub fn llr_from_channels(channels: &ParallelChannels) -> Result<Self> {
        let w = (0..channels.len())
            .map(|m| llr_weight(channels.get(m).crossover()))
            .collect::<Result<Vec<_>>>()?;
        Ok(WeightVector { w })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }
}

/// A decode decision together with the weighted score it was taken from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeOutcome {
    pub decision: Sign,
    pub score: f64,
}

/// Majority vote: the sign of the unweighted sum, ties to +1.
pub fn majority_vote(word: &SignWord) -> DecodeOutcome {
    majority_vote_slice(word.as_slice())
}

pub fn majority_vote_slice(word: &[Sign]) -> DecodeOutcome {
    let score: f64 = word.iter().map(|s| s.value()).sum();
    DecodeOutcome {
        decision: Sign::of_finite(score),
        score,
    }
}

/// The log-likelihood-ratio weight ln((1-p)/p) of a BSC with cross-over p.
///
/// Strictly decreasing in p, zero at p = 1/2, negative for p > 1/2 (an
/// anti-trusted channel). p in {0, 1} is rejected; estimators clamp first.
pub fn llr_weight(p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "LLR weight needs p in (0, 1), got {p}"
        )));
    }
    Ok(((1.0 - p) / p).ln())
}

/// Weighted majority vote: the sign of the weighted sum, ties to +1.
pub fn weighted_majority_vote(word: &SignWord, weights: &WeightVector) -> Result<DecodeOutcome> {
    if word.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "word of {} workers vs {} weights",
            word.len(),
            weights.len()
        )));
    }
    Ok(weighted_majority_vote_slice(word.as_slice(), weights.as_slice()))
}

pub fn weighted_majority_vote_slice(word: &[Sign], weights: &[f64]) -> DecodeOutcome {
    debug_assert_eq!(word.len(), weights.len());
    let score: f64 = word
        .iter()
        .zip(weights)
        .map(|(s, w)| w * s.value())
        .sum();
    DecodeOutcome {
        decision: Sign::of_finite(score),
        score,
    }
}

/// Maximum-likelihood decision by direct evaluation of both conditional
/// log-likelihoods; exact ties go to +1, matching the global tie-break.
pub fn ml_oracle(word: &SignWord, channels: &ParallelChannels) -> Result<Sign> {
    if word.len() != channels.len() {
        return Err(Error::DimensionMismatch(format!(
            "word of {} workers vs {} channels",
            word.len(),
            channels.len()
        )));
    }
    let mut ll_plus = 0.0;
    let mut ll_minus = 0.0;
    for m in 0..word.len() {
        let p = channels.get(m).crossover();
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ml_oracle needs p in (0, 1), channel {m} has p = {p}"
            )));
        }
        let (hit, miss) = ((1.0 - p).ln(), p.ln());
        match word.get(m) {
            Sign::Plus => {
                ll_plus += hit;
                ll_minus += miss;
            }
            Sign::Minus => {
                ll_plus += miss;
                ll_minus += hit;
            }
        }
    }
    Ok(if ll_plus >= ll_minus {
        Sign::Plus
    } else {
        Sign::Minus
    })
}

/// Exact decode error of a weighted vote, conditioned on each transmitted
/// sign. With the deterministic +1 tie-break the two conditionings can differ,
/// so both are reported along with their average.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ExactDecodeError {
    pub given_plus: f64,
    pub given_minus: f64,
    pub average: f64,
}

/// Exhaustively enumerate all 2^M received words and sum the probability of
/// a wrong decision. M is capped at 20.
pub fn decode_error_probability_exact(
    channels: &ParallelChannels,
    weights: &WeightVector,
) -> Result<ExactDecodeError> {
    let m = channels.len();
    if m != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{m} channels vs {} weights",
            weights.len()
        )));
    }
    if m > 20 {
        return Err(Error::Precondition(format!(
            "exhaustive enumeration is limited to M <= 20, got {m}"
        )));
    }
    let p = channels.crossovers();
    let w = weights.as_slice();

    let mut err_plus = 0.0;
    let mut err_minus = 0.0;
    for mask in 0u32..(1u32 << m) {
        // Bit set: worker received +1.
        let mut prob_plus = 1.0; // P[word | U = +1]
        let mut prob_minus = 1.0; // P[word | U = -1]
        let mut score = 0.0;
        for (i, (&pi, &wi)) in p.iter().zip(w).enumerate() {
            if mask >> i & 1 == 1 {
                prob_plus *= 1.0 - pi;
                prob_minus *= pi;
                score += wi;
            } else {
                prob_plus *= pi;
                prob_minus *= 1.0 - pi;
                score -= wi;
            }
        }
        let decision = Sign::of_finite(score);
        if decision != Sign::Plus {
            err_plus += prob_plus;
        }
        if decision != Sign::Minus {
            err_minus += prob_minus;
        }
    }
    Ok(ExactDecodeError {
        given_plus: err_plus,
        given_minus: err_minus,
        average: 0.5 * (err_plus + err_minus),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RngStream, StreamId};
    use crate::sign::Sign::{Minus, Plus};
    use proptest::prelude::*;

    fn word(bits: &[Sign]) -> SignWord {
        SignWord::new(bits.to_vec()).unwrap()
    }

    #[test]
    fn majority_vote_examples() {
        assert_eq!(majority_vote(&word(&[Plus, Plus, Minus])).decision, Plus);
        assert_eq!(
            majority_vote(&word(&[Minus, Minus, Minus, Minus])).decision,
            Minus
        );
        // Tie resolves to +1.
        let tie = majority_vote(&word(&[Plus, Minus]));
        assert_eq!(tie.score, 0.0);
        assert_eq!(tie.decision, Plus);
    }

    #[test]
    fn llr_weight_examples() {
        assert_eq!(llr_weight(0.5).unwrap(), 0.0);
        assert!((llr_weight(0.1).unwrap() - 9.0f64.ln()).abs() < 1e-15);
        assert!((llr_weight(0.9).unwrap() + 9.0f64.ln()).abs() < 1e-15);
        assert!(llr_weight(0.0).is_err());
        assert!(llr_weight(1.0).is_err());
    }

    #[test]
    fn weighted_vote_examples() {
        let heavy = WeightVector::new(vec![5.0, 1.0, 1.0]).unwrap();
        let out = weighted_majority_vote(&word(&[Plus, Minus, Minus]), &heavy).unwrap();
        assert_eq!(out.decision, Plus);
        assert!((out.score - 3.0).abs() < 1e-15);

        let tie = weighted_majority_vote(&word(&[Plus, Minus]), &WeightVector::uniform(2)).unwrap();
        assert_eq!(tie.decision, Plus);

        let mismatched = WeightVector::uniform(3);
        assert!(weighted_majority_vote(&word(&[Plus, Minus]), &mismatched).is_err());
        assert!(WeightVector::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn uniform_weights_reduce_to_majority() {
        let mut rng = RngStream::new(11, StreamId::new(Purpose::Trial, 0, 0));
        for _ in 0..200 {
            let m = 1 + rng.index(9);
            let bits: Vec<Sign> = (0..m)
                .map(|_| if rng.bernoulli(0.5) { Plus } else { Minus })
                .collect();
            let w = word(&bits);
            assert_eq!(
                weighted_majority_vote(&w, &WeightVector::uniform(m))
                    .unwrap()
                    .decision,
                majority_vote(&w).decision
            );
        }
    }

    #[test]
    fn ml_oracle_examples() {
        let one = ParallelChannels::from_probs(&[0.1]).unwrap();
        assert_eq!(ml_oracle(&word(&[Plus]), &one).unwrap(), Plus);

        let three = ParallelChannels::from_probs(&[0.3; 3]).unwrap();
        assert_eq!(ml_oracle(&word(&[Plus, Plus, Minus]), &three).unwrap(), Plus);

        let degenerate = ParallelChannels::from_probs(&[0.0]).unwrap();
        assert!(ml_oracle(&word(&[Plus]), &degenerate).is_err());
    }

    #[test]
    fn wmv_with_llr_weights_equals_ml_oracle() {
        // Exhaustive over all words for M in 1..=8 with random p-vectors;
        // the acceptance suite extends this to M = 11 with 100 vectors per M.
        let mut rng = RngStream::new(17, StreamId::new(Purpose::ConfigSample, 0, 0));
        for m in 1..=8usize {
            for _ in 0..20 {
                let p: Vec<f64> = (0..m).map(|_| 0.01 + 0.98 * rng.f64()).collect();
                let channels = ParallelChannels::from_probs(&p).unwrap();
                let weights = WeightVector::llr_from_channels(&channels).unwrap();
                for mask in 0u32..(1 << m) {
                    let bits: Vec<Sign> = (0..m)
                        .map(|i| if mask >> i & 1 == 1 { Plus } else { Minus })
                        .collect();
                    let w = word(&bits);
                    let wmv = weighted_majority_vote(&w, &weights).unwrap().decision;
                    let ml = ml_oracle(&w, &channels).unwrap();
                    assert_eq!(wmv, ml, "M={m} p={p:?} mask={mask:b}");
                }
            }
        }
    }

    #[test]
    fn exact_error_single_channel() {
        let channels = ParallelChannels::from_probs(&[0.2]).unwrap();
        let weights = WeightVector::new(vec![2.5]).unwrap();
        let e = decode_error_probability_exact(&channels, &weights).unwrap();
        assert!((e.given_plus - 0.2).abs() < 1e-15);
        assert!((e.given_minus - 0.2).abs() < 1e-15);
        assert!((e.average - 0.2).abs() < 1e-15);
    }

    #[test]
    fn exact_error_matches_closed_form_majority() {
        // M=3, p=0.1 uniform: error = p^3 + 3 p^2 (1-p) = 0.028.
        let channels = ParallelChannels::from_probs(&[0.1; 3]).unwrap();
        let uniform = WeightVector::uniform(3);
        let e = decode_error_probability_exact(&channels, &uniform).unwrap();
        assert!((e.average - 0.028).abs() < 1e-15, "{e:?}");

        // Equal p: LLR weights are equal, so the rule and error coincide.
        let llr = WeightVector::llr_from_channels(&channels).unwrap();
        let e2 = decode_error_probability_exact(&channels, &llr).unwrap();
        assert!((e2.average - 0.028).abs() < 1e-15);
    }

    #[test]
    fn exact_error_rejects_large_m() {
        let channels = ParallelChannels::from_probs(&[0.1; 21]).unwrap();
        let w = WeightVector::uniform(21);
        assert!(decode_error_probability_exact(&channels, &w).is_err());
    }

    #[test]
    fn tie_break_asymmetry_is_reported() {
        // Even M with equal weights: ties count against the -1 conditioning only.
        let channels = ParallelChannels::from_probs(&[0.1; 2]).unwrap();
        let w = WeightVector::uniform(2);
        let e = decode_error_probability_exact(&channels, &w).unwrap();
        // Given +1: error only when both flip.
        assert!((e.given_plus - 0.01).abs() < 1e-12);
        // Given -1: both flip (0.01) plus both tie cases (2 * 0.09).
        assert!((e.given_minus - 0.19).abs() < 1e-12);
        assert!((e.average - 0.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn positive_scaling_leaves_decisions_unchanged(
            bits in proptest::collection::vec(any::<bool>(), 1..12),
            ws in proptest::collection::vec(0.01f64..10.0, 12),
            c in prop::sample::select(vec![0.125f64, 0.5, 2.0, 64.0, 1e3, 1e-3]),
        ) {
            let m = bits.len();
            let signs: Vec<Sign> = bits.iter().map(|&b| if b { Plus } else { Minus }).collect();
            let base = weighted_majority_vote_slice(&signs, &ws[..m]).decision;
            let scaled: Vec<f64> = ws[..m].iter().map(|w| w * c).collect();
            prop_assert_eq!(weighted_majority_vote_slice(&signs, &scaled).decision, base);
        }

        #[test]
        fn single_upward_flip_never_demotes_plus(
            bits in proptest::collection::vec(any::<bool>(), 1..12),
            ps in proptest::collection::vec(0.01f64..0.49, 12),
        ) {
            // All p < 1/2 means positive LLR weights: flipping one received
            // bit from -1 to +1 can only raise the score.
            let m = bits.len();
            let signs: Vec<Sign> = bits.iter().map(|&b| if b { Plus } else { Minus }).collect();
            let channels = ParallelChannels::from_probs(&ps[..m]).unwrap();
            let weights = WeightVector::llr_from_channels(&channels).unwrap();
            let before = weighted_majority_vote_slice(&signs, weights.as_slice()).decision;
            for i in 0..m {
                if signs[i] == Minus {
                    let mut up = signs.clone();
                    up[i] = Plus;
                    let after = weighted_majority_vote_slice(&up, weights.as_slice()).decision;
                    prop_assert!(!(before == Plus && after == Minus));
                }
            }
        }
    }
}
