//! Closed-form evaluators for the decoding-error and convergence bounds.
//!
//! Everything here is a direct formula evaluation with loud precondition
//! checks; the Monte Carlo counterparts live in [`crate::montecarlo`].

use serde::Serialize;

use crate::error::{Error, Result};

fn check_p_open_half(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidArgument("need at least one probability".into()));
    }
    for (m, &pm) in p.iter().enumerate() {
        if !(pm.is_finite() && pm > 0.0 && pm < 0.5) {
            return Err(Error::Precondition(format!(
                "p[{m}] = {pm} must lie in (0, 1/2); the error exponent changes sign outside"
            )));
        }
    }
    Ok(())
}

/// Error exponent of the weighted majority vote with true LLR weights:
/// (1/2M) * sum_m ln((1-p_m)/p_m) (1/2 - p_m). Strictly positive for
/// p in (0, 1/2).
pub fn gamma_wmv(p: &[f64]) -> Result<f64> {
    check_p_open_half(p)?;
    let m = p.len() as f64;
    let sum: f64 = p
        .iter()
        .map(|&pm| ((1.0 - pm) / pm).ln() * (0.5 - pm))
        .sum();
    Ok(sum / (2.0 * m))
}

/// Decoding error bound of the weighted majority vote: exp(-M * gamma_wmv).
pub fn wmv_error_bound(p: &[f64]) -> Result<f64> {
    let g = gamma_wmv(p)?;
    Ok((-(p.len() as f64) * g).exp().min(1.0))
}

/// Limit of the error exponent when the per-worker probabilities are iid
/// uniform on [0, a]: (1/4) (1 + (1-a) ln((1-a)/a)).
pub fn asymptotic_exponent_uniform(a: f64) -> Result<f64> {
    if !(a.is_finite() && a > 0.0 && a <= 0.5) {
        return Err(Error::Precondition(format!(
            "a must lie in (0, 1/2], got {a}"
        )));
    }
    Ok(0.25 * (1.0 + (1.0 - a) * ((1.0 - a) / a).ln()))
}

/// Geometric mean of batch sizes.
pub fn batch_gm(batches: &[u64]) -> Result<f64> {
    if batches.is_empty() || batches.contains(&0) {
        return Err(Error::InvalidArgument(
            "batch sizes must be a nonempty list of positive integers".into(),
        ));
    }
    let log_mean =
        batches.iter().map(|&b| (b as f64).ln()).sum::<f64>() / batches.len() as f64;
    Ok(log_mean.exp())
}

/// The harmonic-style mean (1/M * sum_m B_m^{-1/2})^{-2} that governs the
/// majority-vote bound; dominated by the smallest batch.
pub fn batch_am(batches: &[u64]) -> Result<f64> {
    if batches.is_empty() || batches.contains(&0) {
        return Err(Error::InvalidArgument(
            "batch sizes must be a nonempty list of positive integers".into(),
        ));
    }
    let mean_inv_sqrt =
        batches.iter().map(|&b| 1.0 / (b as f64).sqrt()).sum::<f64>() / batches.len() as f64;
    Ok(mean_inv_sqrt.powi(-2))
}

/// Weighted-majority-vote error bound in terms of batch sizes:
/// exp[-(M/8) ln((3/4) sqrt(B_GM) / sigma)], valid when every implied
/// cross-over probability sigma / sqrt(B_m) stays below 1/4.
pub fn wmv_bound_batches(batches: &[u64], sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    for (m, &b) in batches.iter().enumerate() {
        if b == 0 {
            return Err(Error::InvalidArgument(format!("batch[{m}] must be >= 1")));
        }
        let p = sigma / (b as f64).sqrt();
        if p >= 0.25 {
            return Err(Error::Precondition(format!(
                "worker {m}: implied cross-over sigma/sqrt(B) = {p:.4} >= 1/4 \
                 (B = {b}, sigma = {sigma})"
            )));
        }
    }
    let gm = batch_gm(batches)?;
    let m = batches.len() as f64;
    Ok((-(m / 8.0) * (0.75 * gm.sqrt() / sigma).ln()).exp().min(1.0))
}

/// Error exponent of plain majority vote at average cross-over p_bar:
/// p_bar - (1/2) ln(2 e p_bar).
pub fn gamma_mv(p_bar: f64) -> Result<f64> {
    if !(p_bar.is_finite() && p_bar > 0.0 && p_bar < 0.5) {
        return Err(Error::Precondition(format!(
            "p_bar must lie in (0, 1/2), got {p_bar}"
        )));
    }
    Ok(p_bar - 0.5 * (2.0 * std::f64::consts::E * p_bar).ln())
}

/// Majority-vote error bound in batch terms. The bound is vacuous (>= 1)
/// unless sqrt(B_AM) exceeds 2 e sigma, which is reported rather than hidden.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MvBatchBound {
    pub bound: f64,
    pub vacuous: bool,
}

pub fn mv_bound_batches(batches: &[u64], sigma: f64) -> Result<MvBatchBound> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    let am = batch_am(batches)?;
    let m = batches.len() as f64;
    let log_term = (am.sqrt() / (2.0 * std::f64::consts::E * sigma)).ln();
    let raw = (-(m / 2.0) * log_term).exp();
    Ok(MvBatchBound {
        bound: raw.min(1.0),
        vacuous: log_term <= 0.0,
    })
}

/// Weighted-vote error bound under imperfect weights whose ratio to the true
/// LLR weights lies in [1 - delta_min, 1 + delta_max]:
/// exp(-M ((1 - delta_min)/(1 + delta_max)) gamma_wmv).
pub fn imperfect_bound(p: &[f64], delta_min: f64, delta_max: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta_min) {
        return Err(Error::Precondition(format!(
            "delta_min must lie in [0, 1), got {delta_min} (the bound is vacuous at 1)"
        )));
    }
    if !(delta_max.is_finite() && delta_max >= 0.0) {
        return Err(Error::Precondition(format!(
            "delta_max must be >= 0, got {delta_max}"
        )));
    }
    let g = gamma_wmv(p)?;
    let shrink = (1.0 - delta_min) / (1.0 + delta_max);
    Ok((-(p.len() as f64) * shrink * g).exp().min(1.0))
}

/// Both sides of the large-deviation inequality
/// (1-p) e^{-tp} + p e^{t(1-p)} <= exp(((1-2p) / (4 ln((1-p)/p))) t^2),
/// with the analytic limit coefficient 1/8 at p = 1/2.
pub fn large_deviation_check(p: f64, t: f64) -> Result<(f64, f64)> {
    if !(p.is_finite() && p > 0.0 && p < 1.0) {
        return Err(Error::Precondition(format!(
            "p must lie in (0, 1), got {p}"
        )));
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be finite, got {t}")));
    }
    let lhs = (1.0 - p) * (-t * p).exp() + p * (t * (1.0 - p)).exp();
    let coeff = if (1.0 - 2.0 * p).abs() < 1e-12 {
        0.125
    } else {
        (1.0 - 2.0 * p) / (4.0 * ((1.0 - p) / p).ln())
    };
    Ok((lhs, (coeff * t * t).exp()))
}

/// The universal convergence-rate bound on the time-averaged gradient
/// l1-norm, together with the learning rate it prescribes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateBound {
    /// (1 / (1 - 2 P_E^max)) sqrt(2 (f1 - f*) |L|_1 / T).
    pub bound: f64,
    /// The fixed step sqrt(2 (f1 - f*) / (T |L|_1)).
    pub step: f64,
}

pub fn universal_rate_bound(
    f1: f64,
    f_star: f64,
    lipschitz: &[f64],
    rounds: u64,
    pe_max: f64,
) -> Result<RateBound> {
    if !(0.0..0.5).contains(&pe_max) {
        return Err(Error::Precondition(format!(
            "the rate bound is vacuous unless P_E^max < 1/2, got {pe_max}"
        )));
    }
    if !(f1.is_finite() && f_star.is_finite() && f1 >= f_star) {
        return Err(Error::Precondition(format!(
            "need finite f1 >= f_star, got f1 = {f1}, f_star = {f_star}"
        )));
    }
    if rounds == 0 {
        return Err(Error::InvalidArgument("rounds must be >= 1".into()));
    }
    if lipschitz.is_empty() || lipschitz.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
        return Err(Error::InvalidArgument(
            "lipschitz constants must be nonnegative and finite".into(),
        ));
    }
    let l1: f64 = lipschitz.iter().sum();
    if l1 <= 0.0 {
        return Err(Error::InvalidArgument(
            "at least one lipschitz constant must be positive".into(),
        ));
    }
    let t = rounds as f64;
    let gap = 2.0 * (f1 - f_star);
    Ok(RateBound {
        bound: (gap * l1 / t).sqrt() / (1.0 - 2.0 * pe_max),
        step: (gap / (t * l1)).sqrt(),
    })
}

/// All the analytic quantities for one configuration, for reporting.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorExponentReport {
    pub workers: usize,
    pub p: Vec<f64>,
    pub batches: Vec<u64>,
    pub sigma: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub gamma_wmv: f64,
    pub gamma_mv: f64,
    pub bound_wmv: f64,
    pub bound_mv: f64,
    pub bound_imperfect: f64,
    pub b_gm: f64,
    pub b_am: f64,
    /// Batch-size form of the WMV bound; absent when its p < 1/4
    /// precondition fails (the note says why).
    pub bound_wmv_batches: Option<f64>,
    pub bound_mv_batches: Option<f64>,
    pub mv_batches_vacuous: bool,
    pub notes: Vec<String>,
}

/// Evaluate every bound for one (p, batches, sigma, delta) configuration.
pub fn exponent_report(
    p: &[f64],
    batches: &[u64],
    sigma: f64,
    delta_min: f64,
    delta_max: f64,
) -> Result<ErrorExponentReport> {
    if p.len() != batches.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} probabilities vs {} batch sizes",
            p.len(),
            batches.len()
        )));
    }
    let mut notes = Vec::new();
    let g_wmv = gamma_wmv(p)?;
    let p_bar = p.iter().sum::<f64>() / p.len() as f64;
    let g_mv = gamma_mv(p_bar)?;
    let m = p.len() as f64;
    let bound_wmv = (-m * g_wmv).exp().min(1.0);
    let bound_mv = (-m * g_mv).exp().min(1.0);
    let bound_imperfect = imperfect_bound(p, delta_min, delta_max)?;

    let bound_wmv_batches = match wmv_bound_batches(batches, sigma) {
        Ok(b) => Some(b),
        Err(e) => {
            notes.push(format!("wmv batch bound unavailable: {e}"));
            None
        }
    };
    let mv_batches = mv_bound_batches(batches, sigma)?;
    if mv_batches.vacuous {
        notes.push(
            "mv batch bound is vacuous: sqrt(B_AM) <= 2 e sigma makes its exponent nonnegative"
                .into(),
        );
    }

    Ok(ErrorExponentReport {
        workers: p.len(),
        p: p.to_vec(),
        batches: batches.to_vec(),
        sigma,
        delta_min,
        delta_max,
        gamma_wmv: g_wmv,
        gamma_mv: g_mv,
        bound_wmv,
        bound_mv,
        bound_imperfect,
        b_gm: batch_gm(batches)?,
        b_am: batch_am(batches)?,
        bound_wmv_batches,
        bound_mv_batches: Some(mv_batches.bound),
        mv_batches_vacuous: mv_batches.vacuous,
        notes,
    })
}

impl ErrorExponentReport {
    /// Plain-text table for the CLI.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let push = |out: &mut String, k: &str, v: String| {
            out.push_str(&format!("{k:<22} {v}\n"));
        };
        push(&mut out, "workers", self.workers.to_string());
        push(
            &mut out,
            "p",
            format!(
                "[{}]",
                self.p
                    .iter()
                    .map(|x| format!("{x:.4}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        );
        push(&mut out, "batches", format!("{:?}", self.batches));
        push(&mut out, "sigma", format!("{:.6}", self.sigma));
        push(&mut out, "gamma_wmv", format!("{:.6}", self.gamma_wmv));
        push(&mut out, "gamma_mv", format!("{:.6}", self.gamma_mv));
        push(&mut out, "bound_wmv", format!("{:.6e}", self.bound_wmv));
        push(&mut out, "bound_mv", format!("{:.6e}", self.bound_mv));
        push(
            &mut out,
            "bound_imperfect",
            format!(
                "{:.6e} (delta_min {}, delta_max {})",
                self.bound_imperfect, self.delta_min, self.delta_max
            ),
        );
        push(&mut out, "B_GM", format!("{:.4}", self.b_gm));
        push(&mut out, "B_AM", format!("{:.4}", self.b_am));
        push(
            &mut out,
            "bound_wmv_batches",
            self.bound_wmv_batches
                .map(|b| format!("{b:.6e}"))
                .unwrap_or_else(|| "n/a".into()),
        );
        push(
            &mut out,
            "bound_mv_batches",
            self.bound_mv_batches
                .map(|b| {
                    if self.mv_batches_vacuous {
                        format!("{b:.6e} (vacuous)")
                    } else {
                        format!("{b:.6e}")
                    }
                })
                .unwrap_or_else(|| "n/a".into()),
        );
        for note in &self.notes {
            out.push_str(&format!("note: {note}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ParallelChannels;
    use crate::decode::{decode_error_probability_exact, WeightVector};
    use crate::rng::{Purpose, RngStream, StreamId};

    #[test]
    fn gamma_wmv_examples() {
        // Uniform p = 0.1 for any M: (1/2) ln(9) * 0.4.
        for m in [1, 3, 8] {
            let g = gamma_wmv(&vec![0.1; m]).unwrap();
            assert!((g - 0.4394449154672439).abs() < 1e-12, "M={m}: {g}");
        }
        let g = gamma_wmv(&[0.1, 0.3]).unwrap();
        assert!((g - 0.2620873507529822).abs() < 1e-12);

        // Both factors vanish at p -> 1/2.
        let g = gamma_wmv(&[0.4999999]).unwrap();
        assert!(g > 0.0 && g < 1e-6);

        assert!(gamma_wmv(&[0.5]).is_err());
        assert!(gamma_wmv(&[0.0]).is_err());
        assert!(gamma_wmv(&[]).is_err());
    }

    #[test]
    fn gamma_wmv_permutation_and_monotonicity() {
        let mut rng = RngStream::new(1, StreamId::new(Purpose::ConfigSample, 0, 0));
        for _ in 0..50 {
            let m = 2 + rng.index(8);
            let mut p: Vec<f64> = (0..m).map(|_| 0.02 + 0.45 * rng.f64()).collect();
            let g = gamma_wmv(&p).unwrap();
            p.reverse();
            assert!((gamma_wmv(&p).unwrap() - g).abs() < 1e-15);

            // Decreasing any single p strictly increases the exponent.
            let k = rng.index(m);
            let mut better = p.clone();
            better[k] *= 0.5;
            assert!(gamma_wmv(&better).unwrap() > g);
        }
    }

    #[test]
    fn wmv_error_bound_examples() {
        let b = wmv_error_bound(&[0.1; 3]).unwrap();
        assert!((b - 0.2675805205867435).abs() < 1e-12);
        // Exponent -> 0 as p -> 1/2, bound -> 1.
        let b = wmv_error_bound(&[0.49999999; 4]).unwrap();
        assert!(b > 0.9999);

        // Dominates the exact enumerated error.
        let channels = ParallelChannels::from_probs(&[0.1; 3]).unwrap();
        let exact =
            decode_error_probability_exact(&channels, &WeightVector::llr_from_channels(&channels).unwrap())
                .unwrap();
        assert!((exact.average - 0.028).abs() < 1e-12);
        assert!(exact.average <= wmv_error_bound(&[0.1; 3]).unwrap());
    }

    #[test]
    fn asymptotic_exponent_examples() {
        assert_eq!(asymptotic_exponent_uniform(0.5).unwrap(), 0.25);
        let v = asymptotic_exponent_uniform(0.25).unwrap();
        assert!((v - 0.45598980412527057).abs() < 1e-12);
        // Diverges as a -> 0+ but stays finite for any positive a.
        assert!(asymptotic_exponent_uniform(1e-12).unwrap() > 6.0);
        assert!(asymptotic_exponent_uniform(0.0).is_err());
        assert!(asymptotic_exponent_uniform(0.6).is_err());
    }

    #[test]
    fn wmv_bound_batches_examples() {
        let b = wmv_bound_batches(&[64; 8], 1.0).unwrap();
        assert!((b - 1.0 / 6.0).abs() < 1e-12);

        // Permutation invariance of the geometric mean.
        let b1 = wmv_bound_batches(&[16, 64, 256], 0.9).unwrap();
        let b2 = wmv_bound_batches(&[256, 16, 64], 0.9).unwrap();
        assert!((b1 - b2).abs() < 1e-15);

        // Batch mode 3 at M = 15 has twelve B = 4 workers: sigma / 2 = 0.5
        // violates the p < 1/4 precondition and must name the worker.
        let mut batches = vec![4u64; 12];
        batches.extend_from_slice(&[304, 304, 304]);
        let err = wmv_bound_batches(&batches, 1.0).unwrap_err();
        assert!(err.to_string().contains("worker 0"), "{err}");
    }

    #[test]
    fn gamma_mv_and_batch_means() {
        let g = gamma_mv(1.0 / (2.0 * std::f64::consts::E)).unwrap();
        assert!((g - 1.0 / (2.0 * std::f64::consts::E)).abs() < 1e-12);

        // Equal batches: both means equal the common value.
        assert!((batch_gm(&[64; 5]).unwrap() - 64.0).abs() < 1e-9);
        assert!((batch_am(&[64; 5]).unwrap() - 64.0).abs() < 1e-9);

        // Fourteen small batches dominate the mv-side mean: the example
        // heterogeneous mix (14 x 4, 1 x 844) has B_AM ~ 4.55 < B_GM ~ 5.71.
        let mut batches = vec![844u64];
        batches.extend(std::iter::repeat_n(4, 14));
        let am = batch_am(&batches).unwrap();
        let gm = batch_gm(&batches).unwrap();
        assert!((am - 4.547008363142645).abs() < 1e-9);
        assert!((gm - 5.714946314141404).abs() < 1e-9);
        assert!(am < gm);
    }

    #[test]
    fn mv_bound_batches_vacuous_flag() {
        // sqrt(B_AM) = 8 > 2e sigma at sigma = 1: informative.
        let ok = mv_bound_batches(&[64; 4], 1.0).unwrap();
        assert!(!ok.vacuous && ok.bound < 1.0);
        // Small batches push sqrt(B_AM) = 2 below 2e: vacuous, clamped to 1.
        let bad = mv_bound_batches(&[4; 4], 1.0).unwrap();
        assert!(bad.vacuous);
        assert_eq!(bad.bound, 1.0);
    }

    #[test]
    fn imperfect_bound_examples() {
        let p = [0.1; 3];
        // delta = 0 reduces to the perfect-weight bound, bit for bit.
        assert_eq!(
            imperfect_bound(&p, 0.0, 0.0).unwrap(),
            wmv_error_bound(&p).unwrap()
        );
        // (1 - 0.5)/(1 + 0.5) scales the exponent by exactly 1/3.
        let b = imperfect_bound(&p, 0.5, 0.5).unwrap();
        let g = gamma_wmv(&p).unwrap();
        assert!((b - (-3.0 * g / 3.0).exp()).abs() < 1e-15);

        let b = imperfect_bound(&p, 0.1, 0.1).unwrap();
        assert!((b - 0.3400585331780089).abs() < 1e-12);

        // Imperfection can only weaken the bound.
        assert!(imperfect_bound(&p, 0.2, 0.3).unwrap() > wmv_error_bound(&p).unwrap());
        assert!(imperfect_bound(&p, 1.0, 0.0).is_err());
        assert!(imperfect_bound(&p, 0.0, -0.1).is_err());
    }

    #[test]
    fn large_deviation_examples() {
        // t = 0: both sides are exactly 1.
        let (lhs, rhs) = large_deviation_check(0.3, 0.0).unwrap();
        assert_eq!(lhs, 1.0);
        assert_eq!(rhs, 1.0);

        // p = 1/2 limit: lhs = cosh(t/2) <= exp(t^2 / 8).
        for k in 0..=40 {
            let t = -10.0 + 0.5 * k as f64;
            let (lhs, rhs) = large_deviation_check(0.5, t).unwrap();
            assert!((lhs - (t / 2.0).cosh()).abs() < 1e-9 * lhs);
            assert!(lhs <= rhs * (1.0 + 1e-12), "t={t}");
        }

        assert!(large_deviation_check(0.0, 1.0).is_err());
        assert!(large_deviation_check(0.3, f64::INFINITY).is_err());
    }

    #[test]
    fn rate_bound_examples() {
        // P_E = 0: the plain sqrt bound.
        let rb = universal_rate_bound(3.0, 1.0, &[1.0, 1.0], 100, 0.0).unwrap();
        assert!((rb.bound - (2.0 * 2.0 * 2.0 / 100.0f64).sqrt()).abs() < 1e-12);

        // Doubling T divides the bound by sqrt(2).
        let rb2 = universal_rate_bound(3.0, 1.0, &[1.0, 1.0], 200, 0.0).unwrap();
        assert!((rb.bound / rb2.bound - 2.0f64.sqrt()).abs() < 1e-12);

        // Worked example: gap 8, |L|_1 = 1, T = 4, P_E = 1/4 -> bound 4, step 2.
        let rb = universal_rate_bound(8.0, 0.0, &[1.0], 4, 0.25).unwrap();
        assert!((rb.bound - 4.0).abs() < 1e-12);
        assert!((rb.step - 2.0).abs() < 1e-12);

        assert!(universal_rate_bound(8.0, 0.0, &[1.0], 4, 0.5).is_err());
        assert!(universal_rate_bound(0.0, 1.0, &[1.0], 4, 0.0).is_err());
        assert!(universal_rate_bound(8.0, 0.0, &[0.0], 4, 0.0).is_err());
    }

    #[test]
    fn analytic_bounds_dominate_exact_errors() {
        // Random configurations, M <= 11: enumerated exact error of each
        // decoder stays below its analytic bound; with homogeneous p the two
        // decoders' exact errors coincide.
        let mut rng = RngStream::new(77, StreamId::new(Purpose::ConfigSample, 1, 0));
        for _ in 0..60 {
            let m = 1 + rng.index(11);
            let hetero: Vec<f64> = (0..m).map(|_| 0.02 + 0.46 * rng.f64()).collect();
            let channels = ParallelChannels::from_probs(&hetero).unwrap();
            let llr = WeightVector::llr_from_channels(&channels).unwrap();
            let exact_wmv = decode_error_probability_exact(&channels, &llr).unwrap();
            assert!(exact_wmv.average <= wmv_error_bound(&hetero).unwrap() + 1e-12);

            let exact_mv =
                decode_error_probability_exact(&channels, &WeightVector::uniform(m)).unwrap();
            let p_bar = hetero.iter().sum::<f64>() / m as f64;
            let mv_bound = (-(m as f64) * gamma_mv(p_bar).unwrap()).exp();
            assert!(exact_mv.average <= mv_bound + 1e-12);

            let p0 = 0.02 + 0.46 * rng.f64();
            let homo = vec![p0; m];
            let ch = ParallelChannels::from_probs(&homo).unwrap();
            let a = decode_error_probability_exact(&ch, &WeightVector::llr_from_channels(&ch).unwrap())
                .unwrap();
            let b = decode_error_probability_exact(&ch, &WeightVector::uniform(m)).unwrap();
            assert!((a.average - b.average).abs() < 1e-14);
        }
    }

    #[test]
    fn report_assembles_everything() {
        let report = exponent_report(&[0.1, 0.2, 0.3], &[64, 64, 64], 1.0, 0.1, 0.1).unwrap();
        assert_eq!(report.workers, 3);
        assert!(report.bound_wmv <= 1.0 && report.bound_wmv > 0.0);
        assert!(report.bound_imperfect >= report.bound_wmv);
        assert!(report.bound_wmv_batches.is_some());
        let table = report.to_table();
        assert!(table.contains("gamma_wmv"));
        assert!(table.contains("B_GM"));
    }
}
