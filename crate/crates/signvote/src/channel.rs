//! Binary symmetric channels.
//!
//! Stochastic gradient computation with a limited mini-batch is modeled as a
//! BSC: worker m's sign for coordinate n equals the true gradient sign except
//! with some cross-over probability. This module provides the synthetic form
//! of that channel (direct `p`), the Gaussian mini-batch form used to check
//! the computing-error bound, and the empirical cross-over measurement.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sign::{Sign, SignWord};

/// One binary symmetric channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BscSpec {
    p: f64,
}

impl BscSpec {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidArgument(format!(
                "cross-over probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(BscSpec { p })
    }

    #[inline]
    pub fn crossover(&self) -> f64 {
        self.p
    }

    /// A channel is informative in the usual sense when p < 1/2.
    pub fn is_well_behaved(&self) -> bool {
        self.p < 0.5
    }
}

/// M independent BSCs, one per worker.
#[derive(Clone, Debug, PartialEq)]
pub struct ParallelChannels {
    specs: Vec<BscSpec>,
}

impl ParallelChannels {
    pub fn new(specs: Vec<BscSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidArgument(
                "need at least one channel".into(),
            ));
        }
        Ok(ParallelChannels { specs })
    }

    pub fn from_probs(p: &[f64]) -> Result<Self> {
        Self::new(p.iter().map(|&pi| BscSpec::new(pi)).collect::<Result<_>>()?)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    #[inline]
    pub fn get(&self, m: usize) -> &BscSpec {
        &self.specs[m]
    }

    pub fn crossovers(&self) -> Vec<f64> {
        self.specs.iter().map(|s| s.p).collect()
    }
}

/// Send one sign through a BSC: flipped with probability `p`.
#[inline]
pub fn transmit(truth: Sign, channel: &BscSpec, rng: &mut RngStream) -> Sign {
    if rng.bernoulli(channel.p) {
        truth.flip()
    } else {
        truth
    }
}

/// Send the same sign through all M channels independently.
pub fn transmit_word(truth: Sign, channels: &ParallelChannels, rng: &mut RngStream) -> SignWord {
    let bits = channels
        .specs
        .iter()
        .map(|ch| transmit(truth, ch, rng))
        .collect();
    SignWord::new(bits).expect("channels are nonempty")
}

/// Upper bound on the probability that a batch-B stochastic sign disagrees
/// with the true gradient sign: min(1, sigma / sqrt(B)).
pub fn computing_error_bound(batch: u64, sigma: f64) -> Result<f64> {
    if batch == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    Ok((sigma / (batch as f64).sqrt()).min(1.0))
}

/// Fraction of positions where `observed` disagrees with `truth`.
pub fn empirical_crossover(truth: &[Sign], observed: &[Sign]) -> Result<f64> {
    if truth.len() != observed.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} truth signs vs {} observed",
            truth.len(),
            observed.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one sign pair".into(),
        ));
    }
    let mismatches = truth
        .iter()
        .zip(observed)
        .filter(|(a, b)| a != b)
        .count();
    Ok(mismatches as f64 / truth.len() as f64)
}

/// One draw of the mini-batch sign computation under the normalized-variance
/// noise model: the batch-mean gradient is `g = g_true * (1 + v)` with
/// `v ~ N(0, sigma^2 / B)`, so the sign flips exactly when `1 + v < 0`.
#[inline]
pub fn mini_batch_sign_flip(batch: u64, sigma: f64, rng: &mut RngStream) -> bool {
    let v = rng.normal(0.0, sigma / (batch as f64).sqrt());
    1.0 + v < 0.0
}
