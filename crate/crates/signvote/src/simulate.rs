//! The synchronous round protocol.
//!
//! Each round: workers compute (or synthetically receive) one-bit gradient
//! signs, the server decodes one sign per coordinate under the active
//! aggregation rule, the federated-voting estimator folds in the round, the
//! decision is broadcast, and every worker applies the identical update to
//! its own model copy. Workers hold separate copies precisely so the
//! broadcast-consistency invariant is checkable.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::ParallelChannels;
use crate::config::{ChannelConfig, CoordinateDist, DecoderKind, ExperimentConfig};
use crate::decode::{
    decode_error_probability_exact, llr_weight, weighted_majority_vote_slice, WeightVector,
};
use crate::error::{Error, Result};
use crate::estimate::{CrossoverSnapshot, CrossoverState, UncertaintyTracker};
use crate::objective::{
    apply_update_in_place, shard_indices, MiniBatch, ModelState, Objective, SigmaEstimate,
};
use crate::rng::{Purpose, RngStream, StreamId};
use crate::sign::{Sign, SignVector};

pub const SMALL_BATCH: u64 = 4;
pub const TARGET_AVERAGE_BATCH: u64 = 64;

/// One worker's static role in a run.
#[derive(Clone, Debug)]
pub struct WorkerSpec {
    pub id: usize,
    pub batch: u64,
    pub shard: Vec<u32>,
}

/// Preset mixes of small-batch (B = 4) and large-batch workers at a fixed
/// average batch size of 64. Worker counts that make the small-batch share
/// fractional are rounded to the nearest integer (keeping at least one
/// large-batch worker), and the large batch size is solved from the average.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BatchModePreset {
    pub mode: u8,
    pub small_count: usize,
    pub large_count: usize,
    pub large_size: u64,
}

impl BatchModePreset {
    pub fn new(mode: u8, workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        let m = workers as f64;
        let small = match mode {
            1 => 0usize,
            2 => (0.6 * m).round() as usize,
            3 => (0.8 * m).round() as usize,
            4 => workers.saturating_sub(1),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "batch mode must be 1..=4, got {other}"
                )))
            }
        };
        let small = small.min(workers.saturating_sub(1));
        let large = workers - small;
        let total = TARGET_AVERAGE_BATCH * workers as u64;
        let large_size = ((total - SMALL_BATCH * small as u64) as f64 / large as f64).round()
            as u64;
        Ok(BatchModePreset {
            mode,
            small_count: small,
            large_count: large,
            large_size: large_size.max(1),
        })
    }

    /// Per-worker batch sizes, large-batch workers first (in the mode-4
    /// scenario "worker 1" is the lone large-batch worker).
    pub fn sizes(&self) -> Vec<u64> {
        let mut sizes = vec![self.large_size; self.large_count];
        sizes.extend(std::iter::repeat_n(SMALL_BATCH, self.small_count));
        sizes
    }
}

/// Per-round metrics. `bits_up` / `bits_down` are cumulative through the
/// round; `wall` is the round's wall-clock seconds and is excluded from the
/// CSV so outputs stay byte-reproducible.
#[derive(Clone, Debug, Serialize)]
pub struct RoundRecord {
    pub t: u64,
    pub f: f64,
    pub g_l1: f64,
    pub err_active: f64,
    pub bits_up: u64,
    pub bits_down: u64,
    pub wall: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaCheckpoint {
    pub t: u64,
    pub sigma: f64,
    pub excluded: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaReport {
    pub initial: SigmaEstimate,
    pub trajectory: Vec<SigmaCheckpoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct UncertaintyReport {
    pub delta_min: f64,
    pub delta_max: f64,
    pub observed: u64,
    pub skipped: u64,
}

/// Exact decode error of a fixed aggregation rule on the synthetic channels,
/// aggregated over coordinates both ways (worst-case and average), since the
/// bound framework needs the max while typical behavior follows the mean.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecodeErrorSummary {
    /// Mean over coordinates of the truth-averaged exact error.
    pub mean: f64,
    /// Max over coordinates of the truth-averaged exact error.
    pub max: f64,
    /// Max over coordinates and truth conditionings: the P_E^max that enters
    /// the convergence-rate bound.
    pub max_conditioned: f64,
    pub coordinates: usize,
}

/// Config echo plus everything measured about the run.
#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata {
    pub config: ExperimentConfig,
    pub batch_sizes: Vec<u64>,
    pub objective_kind: String,
    pub lipschitz_l1: f64,
    pub f_star_lower: f64,
    pub f_best_found: Option<f64>,
    pub f_initial: f64,
    pub final_f: f64,
    pub final_err: Option<f64>,
    pub diverged: bool,
    pub diverged_at: Option<u64>,
    pub total_bits_up: u64,
    pub total_bits_down: u64,
    /// Empirical normalized-variance constant (real channel mode only).
    pub sigma: Option<SigmaReport>,
    /// Measured weight-uncertainty band (synthetic federated voting only).
    pub weight_uncertainty: Option<UncertaintyReport>,
    /// Exact decode error of the active rule (synthetic channels, fixed
    /// decode rule, enumerable size).
    pub decode_error_exact: Option<DecodeErrorSummary>,
    pub estimator: Option<CrossoverSnapshot>,
    /// Diagnostic estimator fed the true signs instead of the decoded signs
    /// (synthetic federated voting only).
    pub estimator_against_truth: Option<CrossoverSnapshot>,
}

pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub final_model: ModelState,
    pub metadata: RunMetadata,
}

impl RunOutput {
    pub fn diverged(&self) -> bool {
        self.metadata.diverged
    }
}

/// Total communication cost formulas (uplink + downlink, bits).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommAlgorithm {
    Sgd,
    TopK,
    SignsgdMv,
    SignsgdFv,
}

impl CommAlgorithm {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(CommAlgorithm::Sgd),
            "top_k" | "topk" => Ok(CommAlgorithm::TopK),
            "signsgd_mv" | "mv" => Ok(CommAlgorithm::SignsgdMv),
            "signsgd_fv" | "fv" => Ok(CommAlgorithm::SignsgdFv),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm `{other}` (expected sgd, top_k, signsgd_mv, signsgd_fv)"
            ))),
        }
    }
}

/// Total bits exchanged over T rounds:
/// * sign modes: `[MN + MN] T`
/// * full-precision SGD: `[32MN + 32MN] T`
/// * Top-K: `[M (32K + K log2(N/K)) + 32MN] T`
pub fn communication_cost(
    alg: CommAlgorithm,
    workers: u64,
    dim: u64,
    rounds: u64,
    k: Option<u64>,
) -> Result<f64> {
    if workers == 0 || dim == 0 || rounds == 0 {
        return Err(Error::InvalidArgument(
            "workers, dim, rounds must all be positive".into(),
        ));
    }
    let (m, n, t) = (workers as f64, dim as f64, rounds as f64);
    Ok(match alg {
        CommAlgorithm::Sgd => (32.0 * m * n + 32.0 * m * n) * t,
        CommAlgorithm::SignsgdMv | CommAlgorithm::SignsgdFv => (m * n + m * n) * t,
        CommAlgorithm::TopK => {
            let k = k.ok_or_else(|| {
                Error::InvalidArgument("top_k cost needs the sparsity level K".into())
            })?;
            if k == 0 || k > dim {
                return Err(Error::InvalidArgument(format!(
                    "K must lie in 1..=N, got {k} with N = {dim}"
                )));
            }
            let kf = k as f64;
            (m * (32.0 * kf + kf * (n / kf).log2()) + 32.0 * m * n) * t
        }
    })
}

struct ChannelProfile {
    /// Row-major M x N cross-over probabilities.
    p: Vec<f64>,
    /// LLR weights of `p` when every entry is interior, else None.
    w_true: Option<Vec<f64>>,
    constant_per_worker: bool,
}

fn build_channel_profile(
    config: &ExperimentConfig,
    p_workers: &[f64],
    dist: CoordinateDist,
) -> ChannelProfile {
    let (m, n) = (config.workers, config.dim);
    let mut p = vec![0.0; m * n];
    match dist {
        CoordinateDist::Constant => {
            for (mi, &pm) in p_workers.iter().enumerate() {
                p[mi * n..(mi + 1) * n].fill(pm);
            }
        }
        CoordinateDist::Uniform => {
            for (mi, &pm) in p_workers.iter().enumerate() {
                let mut rng = RngStream::new(
                    config.seed,
                    StreamId::new(Purpose::ChannelProfile, mi as u64, 0),
                );
                for slot in &mut p[mi * n..(mi + 1) * n] {
                    // Floor keeps the implied LLR weight finite.
                    *slot = (pm * rng.f64()).max(1e-9);
                }
            }
        }
    }
    let interior = p.iter().all(|&x| x > 0.0 && x < 1.0);
    let w_true = interior.then(|| {
        p.iter()
            .map(|&x| llr_weight(x).expect("interior p"))
            .collect()
    });
    ChannelProfile {
        p,
        w_true,
        constant_per_worker: matches!(dist, CoordinateDist::Constant),
    }
}

fn exact_error_summary(
    profile: &ChannelProfile,
    decoder: DecoderKind,
    m: usize,
    n: usize,
) -> Option<DecodeErrorSummary> {
    if !matches!(decoder, DecoderKind::Mv | DecoderKind::WmvPerfect) || m > 15 {
        return None;
    }
    let coords = if profile.constant_per_worker { 1 } else { n };
    // Enumeration is coords * 2^m * m likelihood terms.
    if (coords as u64) * (1u64 << m) * m as u64 > 200_000_000 {
        return None;
    }
    let mut mean = 0.0;
    let mut max: f64 = 0.0;
    let mut max_conditioned: f64 = 0.0;
    for ni in 0..coords {
        let p_col: Vec<f64> = (0..m).map(|mi| profile.p[mi * n + ni]).collect();
        let channels = ParallelChannels::from_probs(&p_col).ok()?;
        let weights = match decoder {
            DecoderKind::Mv => WeightVector::uniform(m),
            DecoderKind::WmvPerfect => WeightVector::llr_from_channels(&channels).ok()?,
            _ => unreachable!(),
        };
        let e = decode_error_probability_exact(&channels, &weights).ok()?;
        mean += e.average;
        max = max.max(e.average);
        max_conditioned = max_conditioned.max(e.given_plus.max(e.given_minus));
    }
    Some(DecodeErrorSummary {
        mean: mean / coords as f64,
        max,
        max_conditioned,
        coordinates: coords,
    })
}

/// Execute exactly T rounds of the synchronous protocol for any decoder,
/// including the signGD and full-precision SGD baselines.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let m = config.workers;
    let n = config.dim;
    let delta = config.learning_rate;
    let decoder = config.decoder;

    let objective = Objective::build(&config.objective, n, config.seed)?;
    let batches = config.batch_sizes()?;

    let profile = match &config.channel {
        ChannelConfig::Synthetic { p, per_coordinate } => {
            Some(build_channel_profile(config, p, *per_coordinate))
        }
        ChannelConfig::Real => None,
    };

    // Real-mode worker shards; the sign baselines that never sample
    // (signgd) skip sharding entirely.
    let needs_batches = profile.is_none() && decoder != DecoderKind::Signgd;
    let workers_spec: Vec<WorkerSpec> = if needs_batches {
        let shards = shard_indices(objective.samples(), m, config.seed);
        for (mi, shard) in shards.iter().enumerate() {
            if (batches[mi] as usize) > shard.len() {
                return Err(Error::InvalidConfig(format!(
                    "worker {mi} batch size {} exceeds its shard of {} samples",
                    batches[mi],
                    shard.len()
                )));
            }
        }
        shards
            .into_iter()
            .enumerate()
            .map(|(id, shard)| WorkerSpec {
                id,
                batch: batches[id],
                shard,
            })
            .collect()
    } else {
        batches
            .iter()
            .enumerate()
            .map(|(id, &batch)| WorkerSpec {
                id,
                batch,
                shard: Vec::new(),
            })
            .collect()
    };

    // Every worker holds its own model copy; the server broadcasts decisions.
    let mut models: Vec<Vec<f64>> = vec![objective.initial_point(); m];

    let is_fv = decoder == DecoderKind::Fv;
    let mut estimator = if is_fv {
        Some(CrossoverState::new(
            m,
            n,
            config.clamp_eps,
            config.estimator_pooling,
        )?)
    } else {
        None
    };
    let mut diag_estimator = if is_fv && profile.is_some() {
        Some(CrossoverState::new(
            m,
            n,
            config.clamp_eps,
            config.estimator_pooling,
        )?)
    } else {
        None
    };
    let mut tracker = if is_fv && profile.as_ref().is_some_and(|pr| pr.w_true.is_some()) {
        Some(UncertaintyTracker::new())
    } else {
        None
    };

    let f_lb = objective.f_star();
    let f_initial = objective.value(&models[0])?;
    let divergence_ceiling = 1e6 * (f_initial - f_lb).max(1e-12);

    let (up_per_round, down_per_round) = if decoder.is_sign_based() {
        ((m * n) as u64, (m * n) as u64)
    } else {
        (32 * (m * n) as u64, 32 * (m * n) as u64)
    };

    // Empirical sigma checkpoints (real mode): round 1 plus ~10 more.
    let sigma_every = (config.rounds / 10).max(1);
    let mut sigma_report: Option<SigmaReport> = None;

    let mut records: Vec<RoundRecord> = Vec::with_capacity(config.rounds as usize);
    let mut bits_up = 0u64;
    let mut bits_down = 0u64;
    let mut diverged_at = None;

    let mut ys: Vec<SignVector> = Vec::new();
    let mut word_buf = vec![Sign::Plus; m];
    let mut weight_buf = vec![1.0; m];
    let mut mean_grad = vec![0.0; n];

    for t in 1..=config.rounds {
        let start = Instant::now();

        // Broadcast consistency: every worker must hold the identical model.
        for (mi, model) in models.iter().enumerate().skip(1) {
            if model != &models[0] {
                return Err(Error::Protocol(format!(
                    "worker {mi} model differs from worker 0 at round {t}"
                )));
            }
        }
        let x = models[0].clone();

        let (f, g_true) = objective.value_and_true_gradient(&x)?;
        let g_finite = g_true.iter().all(|v| v.is_finite());
        if !f.is_finite() || (f - f_lb) > divergence_ceiling || !g_finite {
            let g_l1: f64 = g_true.iter().map(|v| v.abs()).sum();
            records.push(RoundRecord {
                t,
                f,
                g_l1,
                err_active: f64::NAN,
                bits_up,
                bits_down,
                wall: start.elapsed().as_secs_f64(),
            });
            diverged_at = Some(t);
            break;
        }
        let g_l1: f64 = g_true.iter().map(|v| v.abs()).sum();
        let u_true = SignVector::from_values(&g_true)?;

        // Worker phase: one-bit signs (or raw gradients for SGD).
        let mut worker_failed = false;
        match decoder {
            DecoderKind::Signgd => {}
            DecoderKind::Sgd => {
                mean_grad.iter_mut().for_each(|v| *v = 0.0);
                for spec in &workers_spec {
                    let mut rng = RngStream::new(
                        config.seed,
                        StreamId::new(Purpose::Batch, spec.id as u64, t),
                    );
                    let batch = MiniBatch::sample(&spec.shard, spec.batch, &mut rng)?;
                    let g = objective.stochastic_gradient(&x, &batch)?;
                    if g.iter().any(|v| !v.is_finite()) {
                        worker_failed = true;
                        break;
                    }
                    for (acc, v) in mean_grad.iter_mut().zip(&g) {
                        *acc += v / m as f64;
                    }
                }
            }
            _ => {
                ys.clear();
                match &profile {
                    Some(pr) => {
                        for mi in 0..m {
                            let mut rng = RngStream::new(
                                config.seed,
                                StreamId::new(Purpose::Channel, mi as u64, t),
                            );
                            let row = &pr.p[mi * n..(mi + 1) * n];
                            let mut y = u_true.clone();
                            for (ni, &p) in row.iter().enumerate() {
                                if rng.bernoulli(p) {
                                    y.set(ni, y.get(ni).flip());
                                }
                            }
                            ys.push(y);
                        }
                    }
                    None => {
                        for spec in &workers_spec {
                            let mut rng = RngStream::new(
                                config.seed,
                                StreamId::new(Purpose::Batch, spec.id as u64, t),
                            );
                            let batch = MiniBatch::sample(&spec.shard, spec.batch, &mut rng)?;
                            let g = objective.stochastic_gradient(&x, &batch)?;
                            if g.iter().any(|v| !v.is_finite()) {
                                worker_failed = true;
                                break;
                            }
                            ys.push(SignVector::from_values(&g)?);
                        }
                    }
                }
            }
        }
        if worker_failed {
            records.push(RoundRecord {
                t,
                f,
                g_l1,
                err_active: f64::NAN,
                bits_up,
                bits_down,
                wall: start.elapsed().as_secs_f64(),
            });
            diverged_at = Some(t);
            break;
        }

        // Server phase: decode one sign per coordinate.
        let u_hat = match decoder {
            DecoderKind::Signgd => u_true.clone(),
            DecoderKind::Sgd => SignVector::from_values(&mean_grad)?,
            DecoderKind::Mv => {
                let mut out = SignVector::filled(n, Sign::Plus);
                weight_buf.fill(1.0);
                for ni in 0..n {
                    for (mi, y) in ys.iter().enumerate() {
                        word_buf[mi] = y.get(ni);
                    }
                    out.set(
                        ni,
                        weighted_majority_vote_slice(&word_buf, &weight_buf).decision,
                    );
                }
                out
            }
            DecoderKind::WmvPerfect => {
                let pr = profile.as_ref().expect("validated synthetic");
                let w_true = pr.w_true.as_ref().expect("validated interior p");
                let mut out = SignVector::filled(n, Sign::Plus);
                for ni in 0..n {
                    for (mi, y) in ys.iter().enumerate() {
                        word_buf[mi] = y.get(ni);
                        weight_buf[mi] = w_true[mi * n + ni];
                    }
                    out.set(
                        ni,
                        weighted_majority_vote_slice(&word_buf, &weight_buf).decision,
                    );
                }
                out
            }
            DecoderKind::Fv => {
                let est = estimator.as_ref().expect("fv estimator");
                let mut out = SignVector::filled(n, Sign::Plus);
                for ni in 0..n {
                    est.current_weights_into(t, config.initial_rounds, ni, &mut weight_buf);
                    for (mi, y) in ys.iter().enumerate() {
                        word_buf[mi] = y.get(ni);
                    }
                    out.set(
                        ni,
                        weighted_majority_vote_slice(&word_buf, &weight_buf).decision,
                    );
                }
                // Weight-uncertainty is measured on the weights actually
                // used for decoding, i.e. before this round's estimate folds in.
                if t > config.initial_rounds {
                    if let (Some(tr), Some(pr)) = (tracker.as_mut(), profile.as_ref()) {
                        let w_true = pr.w_true.as_ref().expect("tracker implies interior");
                        for mi in 0..m {
                            for ni in 0..n {
                                tr.observe(est.w_hat(mi, ni), w_true[mi * n + ni]);
                            }
                        }
                    }
                }
                out
            }
        };

        if let Some(est) = estimator.as_mut() {
            est.record_round(&ys, &u_hat)?;
        }
        if let Some(diag) = diag_estimator.as_mut() {
            diag.record_round(&ys, &u_true)?;
        }

        let err_active = match decoder {
            DecoderKind::Signgd => 0.0,
            _ => u_hat.mismatches(&u_true)? as f64 / n as f64,
        };

        bits_up += up_per_round;
        bits_down += down_per_round;

        if profile.is_none() && needs_batches && (t == 1 || t % sigma_every == 0) {
            let mut rng = RngStream::new(config.seed, StreamId::new(Purpose::Sigma, 0, t));
            let est = objective.estimate_sigma(&x, 2048, &mut rng)?;
            let report = sigma_report.get_or_insert_with(|| SigmaReport {
                initial: est,
                trajectory: Vec::new(),
            });
            report.trajectory.push(SigmaCheckpoint {
                t,
                sigma: est.sigma,
                excluded: est.excluded,
            });
        }

        records.push(RoundRecord {
            t,
            f,
            g_l1,
            err_active,
            bits_up,
            bits_down,
            wall: start.elapsed().as_secs_f64(),
        });

        // Broadcast and local update on every worker.
        match decoder {
            DecoderKind::Sgd => {
                for model in models.iter_mut() {
                    for (v, g) in model.iter_mut().zip(&mean_grad) {
                        *v -= delta * g;
                    }
                }
            }
            _ => {
                for model in models.iter_mut() {
                    apply_update_in_place(model, &u_hat, delta)?;
                }
            }
        }
    }

    let diverged = diverged_at.is_some();
    let final_f = if diverged {
        records.last().map(|r| r.f).unwrap_or(f_initial)
    } else {
        objective.value(&models[0])?
    };
    let final_err = if diverged {
        None
    } else {
        records.last().map(|r| r.err_active)
    };

    // Exact decode error of the active rule when it is enumerable: synthetic
    // profile, fixed weights, and a feasible enumeration budget.
    let decode_error_exact = profile
        .as_ref()
        .and_then(|pr| exact_error_summary(pr, decoder, m, n));

    let metadata = RunMetadata {
        config: config.clone(),
        batch_sizes: batches,
        objective_kind: objective.kind_name().to_string(),
        lipschitz_l1: objective.lipschitz().iter().sum(),
        f_star_lower: objective.f_star(),
        f_best_found: objective.f_best_found(),
        f_initial,
        final_f,
        final_err,
        diverged,
        diverged_at,
        total_bits_up: bits_up,
        total_bits_down: bits_down,
        sigma: sigma_report,
        weight_uncertainty: tracker.as_ref().and_then(|tr| {
            tr.finish().map(|u| UncertaintyReport {
                delta_min: u.delta_min,
                delta_max: u.delta_max,
                observed: tr.observed(),
                skipped: tr.skipped(),
            })
        }),
        decode_error_exact,
        estimator: estimator.as_ref().map(|e| e.snapshot()),
        estimator_against_truth: diag_estimator.as_ref().map(|e| e.snapshot()),
    };

    Ok(RunOutput {
        records,
        final_model: ModelState {
            x: models.into_iter().next().expect("at least one worker"),
            round: config.rounds + 1,
        },
        metadata,
    })
}
