//! Online estimation of cross-over probabilities and LLR weights.
//!
//! The server counts, per (worker, coordinate), how often a worker's
//! transmitted sign disagreed with the server's own decoded sign. The
//! estimate p-hat is the cumulative mismatch fraction since round 1 (the
//! two-phase update that switches denominators at the initial phase boundary
//! is algebraically the same running average), clamped away from {0, 1} so
//! the derived LLR weight stays finite. Weights start at 1 before any
//! observation.

use serde::Serialize;

use crate::config::Pooling;
use crate::decode::{llr_weight, WeightVector};
use crate::error::{Error, Result};
use crate::sign::SignVector;

/// Mismatch counts and derived estimates for all (worker, coordinate) pairs.
#[derive(Clone, Debug)]
pub struct CrossoverState {
    workers: usize,
    dims: usize,
    eps: f64,
    pooling: Pooling,
    rounds: u64,
    /// Per (worker, coordinate) counts in per-coordinate mode (`m * dims + n`),
    /// per worker in pooled mode.
    mismatches: Vec<u64>,
}

impl CrossoverState {
    pub fn new(workers: usize, dims: usize, eps: f64, pooling: Pooling) -> Result<Self> {
        if workers == 0 || dims == 0 {
            return Err(Error::InvalidArgument(
                "estimator needs workers >= 1 and dims >= 1".into(),
            ));
        }
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "clamp eps must lie in (0, 0.5), got {eps}"
            )));
        }
        let slots = match pooling {
            Pooling::PerCoordinate => workers * dims,
            Pooling::PerWorker => workers,
        };
        Ok(CrossoverState {
            workers,
            dims,
            eps,
            pooling,
            rounds: 0,
            mismatches: vec![0; slots],
        })
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Fold in one round: bump the mismatch count wherever worker m's sign
    /// for coordinate n differs from the decoded sign for n.
    pub fn record_round(&mut self, received: &[SignVector], decoded: &SignVector) -> Result<()> {
        if received.len() != self.workers {
            return Err(Error::DimensionMismatch(format!(
                "{} received vectors for {} workers",
                received.len(),
                self.workers
            )));
        }
        if decoded.len() != self.dims {
            return Err(Error::DimensionMismatch(format!(
                "decoded vector of length {} for {} coordinates",
                decoded.len(),
                self.dims
            )));
        }
        for (m, y) in received.iter().enumerate() {
            if y.len() != self.dims {
                return Err(Error::DimensionMismatch(format!(
                    "worker {m} sent {} coordinates, expected {}",
                    y.len(),
                    self.dims
                )));
            }
            match self.pooling {
                Pooling::PerCoordinate => {
                    let base = m * self.dims;
                    y.for_each_mismatch(decoded, |n| self.mismatches[base + n] += 1)?;
                }
                Pooling::PerWorker => {
                    self.mismatches[m] += y.mismatches(decoded)?;
                }
            }
        }
        self.rounds += 1;
        Ok(())
    }

    fn raw_fraction(&self, m: usize, n: usize) -> Option<f64> {
        if self.rounds == 0 {
            return None;
        }
        Some(match self.pooling {
            Pooling::PerCoordinate => {
                self.mismatches[m * self.dims + n] as f64 / self.rounds as f64
            }
            Pooling::PerWorker => {
                self.mismatches[m] as f64 / (self.rounds * self.dims as u64) as f64
            }
        })
    }

    /// Clamped cross-over estimate; `None` before the first observation.
    pub fn p_hat(&self, m: usize, n: usize) -> Option<f64> {
        self.raw_fraction(m, n)
            .map(|f| f.clamp(self.eps, 1.0 - self.eps))
    }

    /// Current LLR weight estimate; the pre-observation weight is 1.
    pub fn w_hat(&self, m: usize, n: usize) -> f64 {
        match self.p_hat(m, n) {
            None => 1.0,
            Some(p) => llr_weight(p).expect("clamped p is interior"),
        }
    }

    /// Decode weights for coordinate `n` at round `t`: all-ones while
    /// `t <= t_in` (majority-vote phase), the learned weights strictly after.
    pub fn current_weights(&self, t: u64, t_in: u64, n: usize) -> WeightVector {
        let mut buf = vec![0.0; self.workers];
        self.current_weights_into(t, t_in, n, &mut buf);
        WeightVector::new(buf).expect("weights are finite")
    }

    pub fn current_weights_into(&self, t: u64, t_in: u64, n: usize, out: &mut [f64]) {
        assert_eq!(out.len(), self.workers);
        if t <= t_in {
            out.fill(1.0);
        } else {
            for (m, slot) in out.iter_mut().enumerate() {
                *slot = self.w_hat(m, n);
            }
        }
    }

    pub fn snapshot(&self) -> CrossoverSnapshot {
        let per_worker = (0..self.workers)
            .map(|m| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut sum = 0.0;
                for n in 0..self.dims {
                    let p = self.p_hat(m, n).unwrap_or(f64::NAN);
                    lo = lo.min(p);
                    hi = hi.max(p);
                    sum += p;
                }
                WorkerCrossoverSummary {
                    worker: m,
                    p_hat_mean: sum / self.dims as f64,
                    p_hat_min: lo,
                    p_hat_max: hi,
                    w_hat_mean: (0..self.dims).map(|n| self.w_hat(m, n)).sum::<f64>()
                        / self.dims as f64,
                }
            })
            .collect();
        // The full matrix is only embedded at desk scale; summaries always are.
        let p_hat = if self.workers * self.dims <= 32_768 && self.rounds > 0 {
            Some(
                (0..self.workers)
                    .map(|m| {
                        (0..self.dims)
                            .map(|n| self.p_hat(m, n).unwrap())
                            .collect()
                    })
                    .collect(),
            )
        } else {
            None
        };
        CrossoverSnapshot {
            rounds: self.rounds,
            eps: self.eps,
            pooling: self.pooling,
            per_worker,
            p_hat,
        }
    }
}

/// Serializable view of the estimator for the run's metadata output.
#[derive(Clone, Debug, Serialize)]
pub struct CrossoverSnapshot {
    pub rounds: u64,
    pub eps: f64,
    pub pooling: Pooling,
    pub per_worker: Vec<WorkerCrossoverSummary>,
    /// Full per-(worker, coordinate) estimates when small enough to embed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_hat: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WorkerCrossoverSummary {
    pub worker: usize,
    pub p_hat_mean: f64,
    pub p_hat_min: f64,
    pub p_hat_max: f64,
    pub w_hat_mean: f64,
}

/// Tightest multiplicative band around the estimated-to-true weight ratio:
/// `1 - delta_min <= w_hat / w <= 1 + delta_max` over everything observed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightUncertainty {
    pub delta_min: f64,
    pub delta_max: f64,
}

/// Streaming accumulator for [`WeightUncertainty`]. Pairs whose true weight is
/// (numerically) zero cannot constrain a ratio and are counted as skipped.
#[derive(Clone, Debug)]
pub struct UncertaintyTracker {
    min_ratio: f64,
    max_ratio: f64,
    observed: u64,
    skipped: u64,
}

impl Default for UncertaintyTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl UncertaintyTracker {
    pub fn new() -> Self {
        UncertaintyTracker {
            min_ratio: f64::INFINITY,
            max_ratio: f64::NEG_INFINITY,
            observed: 0,
            skipped: 0,
        }
    }

    pub fn observe(&mut self, w_hat: f64, w_true: f64) {
        if w_true.abs() < 1e-12 {
            self.skipped += 1;
            return;
        }
        let r = w_hat / w_true;
        self.min_ratio = self.min_ratio.min(r);
        self.max_ratio = self.max_ratio.max(r);
        self.observed += 1;
    }

    pub fn observed(&self) -> u64 {
        self.observed
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn finish(&self) -> Option<WeightUncertainty> {
        if self.observed == 0 {
            return None;
        }
        Some(WeightUncertainty {
            delta_min: (1.0 - self.min_ratio).max(0.0),
            delta_max: (self.max_ratio - 1.0).max(0.0),
        })
    }
}

/// Tightest uncertainty band over a set of (estimated, true) weight pairs.
pub fn measure_uncertainty(
    pairs: impl IntoIterator<Item = (f64, f64)>,
) -> Result<WeightUncertainty> {
    let mut tracker = UncertaintyTracker::new();
    for (hat, tru) in pairs {
        tracker.observe(hat, tru);
    }
    tracker.finish().ok_or_else(|| {
        Error::InvalidArgument("no usable weight pairs (all true weights were zero?)".into())
    })
}
