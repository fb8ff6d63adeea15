//! Statistical verification harness: empirical decode errors against the
//! analytic bounds, with 3-sigma binomial slack for Monte Carlo noise.
//!
//! A bound check can `hold`, `hold vacuously` (the bound is >= 1, so it says
//! nothing), or be `violated` (the empirical error exceeds the bound by more
//! than the noise band). Violations are data, not panics; suites report them
//! and the caller decides.

use serde::Serialize;

use crate::bounds::{asymptotic_exponent_uniform, gamma_wmv};
use crate::channel::computing_error_bound;
use crate::decode::{decode_error_probability_exact, llr_weight, WeightVector};
use crate::error::Result;
use crate::rng::{Purpose, RngStream, StreamId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    HoldsVacuously,
    Violated,
}

/// One configuration's empirical-vs-analytic comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub label: String,
    pub workers: usize,
    pub p: Vec<f64>,
    pub trials: u64,
    pub errors: u64,
    pub empirical: f64,
    /// 3 * sqrt(p_hat (1 - p_hat) / trials).
    pub band3: f64,
    pub bound: f64,
    /// Enumerated exact error for M <= 11 (perfect-weight suite only).
    pub exact: Option<f64>,
    /// Whether the enumerated error sits inside the empirical 3-sigma band.
    pub exact_within_band: Option<bool>,
    pub verdict: Verdict,
}

fn verdict_for(empirical: f64, band3: f64, bound: f64) -> Verdict {
    if bound >= 1.0 {
        Verdict::HoldsVacuously
    } else if empirical - band3 > bound {
        Verdict::Violated
    } else {
        Verdict::Holds
    }
}

fn band3(errors: u64, trials: u64) -> f64 {
    let p = errors as f64 / trials as f64;
    3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Sampling plan shared by the perfect- and imperfect-weight suites.
#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub trials: u64,
    pub configs: usize,
    pub workers_min: usize,
    pub workers_max: usize,
    pub p_low: f64,
    pub p_high: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            trials: 100_000,
            configs: 100,
            workers_min: 2,
            workers_max: 15,
            p_low: 0.01,
            p_high: 0.49,
            seed: 7,
        }
    }
}

fn sample_config(opts: &VerifyOptions, idx: usize) -> (usize, Vec<f64>) {
    let mut rng = RngStream::new(
        opts.seed,
        StreamId::new(Purpose::ConfigSample, idx as u64, 0),
    );
    let span = opts.workers_max - opts.workers_min + 1;
    let m = opts.workers_min + rng.index(span);
    let p = (0..m)
        .map(|_| opts.p_low + (opts.p_high - opts.p_low) * rng.f64())
        .collect();
    (m, p)
}

/// Count trials where a weighted majority vote with per-trial weights decodes
/// the transmitted sign wrongly. Truth is resampled per trial; channel draws
/// come from the `Trial` stream so a second suite with its own extra streams
/// reproduces them bit-for-bit.
fn run_trials(
    p: &[f64],
    trials: u64,
    seed: u64,
    config_idx: usize,
    mut weights_for_trial: impl FnMut(&mut dyn FnMut() -> f64) -> Vec<f64>,
) -> u64 {
    let m = p.len();
    let mut chan = RngStream::new(seed, StreamId::new(Purpose::Trial, config_idx as u64, 0));
    let mut perturb = RngStream::new(seed, StreamId::new(Purpose::Perturb, config_idx as u64, 0));
    let mut errors = 0u64;
    for _ in 0..trials {
        let truth = if chan.bernoulli(0.5) { 1.0 } else { -1.0 };
        let w = weights_for_trial(&mut || perturb.f64());
        debug_assert_eq!(w.len(), m);
        let mut score = 0.0;
        for (mi, &pm) in p.iter().enumerate() {
            let y = if chan.bernoulli(pm) { -truth } else { truth };
            score += w[mi] * y;
        }
        let decision = if score < 0.0 { -1.0 } else { 1.0 };
        if decision != truth {
            errors += 1;
        }
    }
    errors
}

fn check_opts(opts: &VerifyOptions) -> Result<()> {
    if opts.trials < 10_000 {
        return Err(crate::error::Error::Precondition(format!(
            "the 3-sigma verdicts need >= 1e4 trials per configuration, got {}",
            opts.trials
        )));
    }
    if opts.configs == 0 || opts.workers_min == 0 || opts.workers_min > opts.workers_max {
        return Err(crate::error::Error::InvalidArgument(
            "need configs >= 1 and a nonempty worker range".into(),
        ));
    }
    if !(opts.p_low > 0.0 && opts.p_high < 0.5 && opts.p_low < opts.p_high) {
        return Err(crate::error::Error::InvalidArgument(
            "need 0 < p_low < p_high < 1/2".into(),
        ));
    }
    Ok(())
}

/// Empirical error of the perfect-weight WMV decoder against its analytic
/// bound, with an enumeration cross-check at enumerable sizes.
pub fn verify_wmv_bound(opts: &VerifyOptions) -> Result<Vec<BoundCheck>> {
    check_opts(opts)?;
    let mut checks = Vec::with_capacity(opts.configs);
    for idx in 0..opts.configs {
        let (m, p) = sample_config(opts, idx);
        let w: Vec<f64> = p
            .iter()
            .map(|&pm| llr_weight(pm))
            .collect::<Result<_>>()?;
        let errors = run_trials(&p, opts.trials, opts.seed, idx, |_| w.clone());
        let empirical = errors as f64 / opts.trials as f64;
        let band = band3(errors, opts.trials);
        let bound = (-(m as f64) * gamma_wmv(&p)?).exp();

        let (exact, exact_ok) = if m <= 11 {
            let channels = crate::channel::ParallelChannels::from_probs(&p)?;
            let weights = WeightVector::new(w.clone())?;
            let e = decode_error_probability_exact(&channels, &weights)?;
            // Band around the known true mean, plus one trial of discreteness.
            let exact_band = 3.0 * (e.average * (1.0 - e.average) / opts.trials as f64).sqrt()
                + 1.0 / opts.trials as f64;
            let ok = (empirical - e.average).abs() <= exact_band;
            (Some(e.average), Some(ok))
        } else {
            (None, None)
        };

        checks.push(BoundCheck {
            label: format!("wmv[{idx}]"),
            workers: m,
            p,
            trials: opts.trials,
            errors,
            empirical,
            band3: band,
            bound,
            exact,
            exact_within_band: exact_ok,
            verdict: verdict_for(empirical, band, bound),
        });
    }
    Ok(checks)
}

/// Same channels, but the decoder's weights are perturbed multiplicatively
/// into [1 - delta_min, 1 + delta_max] per trial and worker; compared against
/// the imperfect-weight bound. With delta_min = delta_max = 0 the perturbation
/// factor is exactly 1 and the trial stream consumption matches
/// [`verify_wmv_bound`], so the counts reproduce bit-identically.
pub fn verify_imperfect_bound(
    opts: &VerifyOptions,
    delta_min: f64,
    delta_max: f64,
) -> Result<Vec<BoundCheck>> {
    check_opts(opts)?;
    let mut checks = Vec::with_capacity(opts.configs);
    for idx in 0..opts.configs {
        let (m, p) = sample_config(opts, idx);
        let w: Vec<f64> = p
            .iter()
            .map(|&pm| llr_weight(pm))
            .collect::<Result<_>>()?;
        let span = delta_min + delta_max;
        let errors = run_trials(&p, opts.trials, opts.seed, idx, |draw| {
            w.iter()
                .map(|&wi| wi * (1.0 - delta_min + draw() * span))
                .collect()
        });
        let empirical = errors as f64 / opts.trials as f64;
        let band = band3(errors, opts.trials);
        let shrink = (1.0 - delta_min) / (1.0 + delta_max);
        let bound = (-(m as f64) * shrink * gamma_wmv(&p)?).exp();
        checks.push(BoundCheck {
            label: format!("imperfect[{idx}] d=({delta_min},{delta_max})"),
            workers: m,
            p,
            trials: opts.trials,
            errors,
            empirical,
            band3: band,
            bound,
            exact: None,
            exact_within_band: None,
            verdict: verdict_for(empirical, band, bound),
        });
    }
    Ok(checks)
}

/// Monte Carlo check of the uniform-p limit of the error exponent: the
/// sample mean of (1/2) ln((1-p)/p) (1/2 - p) over p ~ U[0, a] against the
/// closed form.
#[derive(Clone, Debug, Serialize)]
pub struct ExponentLimitCheck {
    pub a: f64,
    pub samples: u64,
    pub mc_mean: f64,
    /// 3 * (sample std) / sqrt(samples).
    pub band3: f64,
    pub closed_form: f64,
    pub verdict: Verdict,
}

pub fn verify_exponent_limit(a_values: &[f64], samples: u64, seed: u64) -> Result<Vec<ExponentLimitCheck>> {
    let mut out = Vec::with_capacity(a_values.len());
    for (i, &a) in a_values.iter().enumerate() {
        let closed = asymptotic_exponent_uniform(a)?;
        let mut rng = RngStream::new(seed, StreamId::new(Purpose::Trial, 1000 + i as u64, 0));
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..samples {
            // Draws of exactly 0 would make the integrand infinite; the
            // event has probability ~2^-53 per draw and the floor keeps the
            // estimate finite without bias at any achievable sample count.
            let p = (rng.f64() * a).max(1e-300);
            let v = 0.5 * ((1.0 - p) / p).ln() * (0.5 - p);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / samples as f64;
        let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
        let band = 3.0 * (var / samples as f64).sqrt();
        out.push(ExponentLimitCheck {
            a,
            samples,
            mc_mean: mean,
            band3: band,
            closed_form: closed,
            verdict: if (mean - closed).abs() <= band {
                Verdict::Holds
            } else {
                Verdict::Violated
            },
        });
    }
    Ok(out)
}

/// Grid sweep of the large-deviation inequality: lhs <= rhs * (1 + 1e-12) at
/// every point of p in {0.01, ..., 0.49} plus the p = 1/2 limit, t in
/// [-10, 10] step 0.05.
#[derive(Clone, Debug, Serialize)]
pub struct DeviationSweep {
    pub points: usize,
    pub max_ratio: f64,
    pub worst_p: f64,
    pub worst_t: f64,
    pub ok: bool,
}

pub fn large_deviation_sweep() -> Result<DeviationSweep> {
    let mut ps: Vec<f64> = (1..=49).map(|i| i as f64 / 100.0).collect();
    ps.push(0.5);
    let mut worst = f64::NEG_INFINITY;
    let (mut wp, mut wt) = (0.0, 0.0);
    let mut points = 0;
    for k in 0..=400 {
        let t = -10.0 + 0.05 * k as f64;
        for &p in &ps {
            let (lhs, rhs) = crate::bounds::large_deviation_check(p, t)?;
            let ratio = lhs / rhs;
            points += 1;
            if ratio > worst {
                worst = ratio;
                wp = p;
                wt = t;
            }
        }
    }
    Ok(DeviationSweep {
        points,
        max_ratio: worst,
        worst_p: wp,
        worst_t: wt,
        ok: worst <= 1.0 + 1e-12,
    })
}

/// Empirical mini-batch sign-flip rates against the computing-error bound
/// sigma/sqrt(B) over the (B, sigma) grid.
#[derive(Clone, Debug, Serialize)]
pub struct FlipRateCheck {
    pub batch: u64,
    pub sigma: f64,
    pub trials: u64,
    pub empirical: f64,
    pub bound: f64,
    pub band3: f64,
    pub verdict: Verdict,
}

pub fn flip_rate_grid(trials: u64, seed: u64) -> Result<Vec<FlipRateCheck>> {
    let mut out = Vec::new();
    for (bi, &batch) in [1u64, 4, 16, 64, 256].iter().enumerate() {
        for (si, &sigma) in [0.25f64, 0.5, 1.0].iter().enumerate() {
            let mut rng = RngStream::new(
                seed,
                StreamId::new(Purpose::Trial, 2000 + (bi * 3 + si) as u64, 0),
            );
            let flips = (0..trials)
                .filter(|_| crate::channel::mini_batch_sign_flip(batch, sigma, &mut rng))
                .count() as u64;
            let empirical = flips as f64 / trials as f64;
            let bound = computing_error_bound(batch, sigma)?;
            let band = band3(flips, trials);
            out.push(FlipRateCheck {
                batch,
                sigma,
                trials,
                empirical,
                bound,
                band3: band,
                verdict: verdict_for(empirical, band, bound),
            });
        }
    }
    Ok(out)
}

pub fn all_hold(checks: &[BoundCheck]) -> bool {
    checks.iter().all(|c| c.verdict != Verdict::Violated)
        && checks
            .iter()
            .all(|c| c.exact_within_band.unwrap_or(true))
}
