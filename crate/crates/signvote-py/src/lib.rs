//! Python bindings: the decoders, bound evaluators, Monte Carlo suites, and
//! the experiment runner, exposed as plain functions on `signvote_py`.
//!
//! Signs cross the boundary as `+1` / `-1` integers; experiment configs as
//! TOML strings (the same document the CLI consumes); structured results as
//! dicts/lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use signvote::channel::ParallelChannels;
use signvote::config::ExperimentConfig;
use signvote::decode;
use signvote::decode::WeightVector;
use signvote::error::Error as SvError;
use signvote::montecarlo::{self, VerifyOptions};
use signvote::sign::{Sign, SignWord};
use signvote::simulate::{self, CommAlgorithm};
use signvote::{bounds, channel};

fn err(e: SvError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sign_from_int(v: i64) -> PyResult<Sign> {
    match v {
        1 => Ok(Sign::Plus),
        -1 => Ok(Sign::Minus),
        other => Err(PyValueError::new_err(format!(
            "signs must be +1 or -1, got {other}"
        ))),
    }
}

fn word_from_ints(word: Vec<i64>) -> PyResult<SignWord> {
    let bits = word
        .into_iter()
        .map(sign_from_int)
        .collect::<PyResult<Vec<_>>>()?;
    SignWord::new(bits).map_err(err)
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().unbind().into(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.unbind().into()
            } else {
                n.as_f64()
                    .unwrap_or(f64::NAN)
                    .into_pyobject(py)?
                    .unbind()
                    .into()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.unbind().into(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.unbind().into()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.unbind().into()
        }
    })
}

fn to_py_via_json<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value)
        .map_err(|e| PyValueError::new_err(format!("serialization failed: {e}")))?;
    json_to_py(py, &json)
}

/// Sign of a finite value with the deterministic +1 tie-break at zero.
#[pyfunction]
fn sign_of(x: f64) -> PyResult<i64> {
    Ok(signvote::sign_of(x).map_err(err)?.as_i8() as i64)
}

/// Majority vote over a word of +1/-1 signs; returns (decision, score).
#[pyfunction]
fn majority_vote(word: Vec<i64>) -> PyResult<(i64, f64)> {
    let out = decode::majority_vote(&word_from_ints(word)?);
    Ok((out.decision.as_i8() as i64, out.score))
}

/// The LLR weight ln((1-p)/p).
#[pyfunction]
fn llr_weight(p: f64) -> PyResult<f64> {
    decode::llr_weight(p).map_err(err)
}

/// Weighted majority vote; returns (decision, score).
#[pyfunction]
fn weighted_majority_vote(word: Vec<i64>, weights: Vec<f64>) -> PyResult<(i64, f64)> {
    let word = word_from_ints(word)?;
    let weights = WeightVector::new(weights).map_err(err)?;
    let out = decode::weighted_majority_vote(&word, &weights).map_err(err)?;
    Ok((out.decision.as_i8() as i64, out.score))
}

/// Maximum-likelihood decision by direct likelihood evaluation.
#[pyfunction]
fn ml_oracle(word: Vec<i64>, p: Vec<f64>) -> PyResult<i64> {
    let word = word_from_ints(word)?;
    let channels = ParallelChannels::from_probs(&p).map_err(err)?;
    Ok(decode::ml_oracle(&word, &channels).map_err(err)?.as_i8() as i64)
}

/// Exact decode error by enumeration (M <= 20). Weights default to the LLR
/// weights of `p`. Returns {"given_plus", "given_minus", "average"}.
#[pyfunction]
#[pyo3(signature = (p, weights=None))]
fn exact_decode_error<'py>(
    py: Python<'py>,
    p: Vec<f64>,
    weights: Option<Vec<f64>>,
) -> PyResult<Py<PyAny>> {
    let channels = ParallelChannels::from_probs(&p).map_err(err)?;
    let weights = match weights {
        Some(w) => WeightVector::new(w).map_err(err)?,
        None => WeightVector::llr_from_channels(&channels).map_err(err)?,
    };
    let e = decode::decode_error_probability_exact(&channels, &weights).map_err(err)?;
    to_py_via_json(py, &e)
}

#[pyfunction]
fn gamma_wmv(p: Vec<f64>) -> PyResult<f64> {
    bounds::gamma_wmv(&p).map_err(err)
}

#[pyfunction]
fn wmv_error_bound(p: Vec<f64>) -> PyResult<f64> {
    bounds::wmv_error_bound(&p).map_err(err)
}

#[pyfunction]
fn gamma_mv(p_bar: f64) -> PyResult<f64> {
    bounds::gamma_mv(p_bar).map_err(err)
}

#[pyfunction]
fn asymptotic_exponent_uniform(a: f64) -> PyResult<f64> {
    bounds::asymptotic_exponent_uniform(a).map_err(err)
}

#[pyfunction]
fn imperfect_bound(p: Vec<f64>, delta_min: f64, delta_max: f64) -> PyResult<f64> {
    bounds::imperfect_bound(&p, delta_min, delta_max).map_err(err)
}

#[pyfunction]
fn wmv_bound_batches(batches: Vec<u64>, sigma: f64) -> PyResult<f64> {
    bounds::wmv_bound_batches(&batches, sigma).map_err(err)
}

/// Returns (bound, vacuous flag).
#[pyfunction]
fn mv_bound_batches(batches: Vec<u64>, sigma: f64) -> PyResult<(f64, bool)> {
    let b = bounds::mv_bound_batches(&batches, sigma).map_err(err)?;
    Ok((b.bound, b.vacuous))
}

#[pyfunction]
fn computing_error_bound(batch: u64, sigma: f64) -> PyResult<f64> {
    channel::computing_error_bound(batch, sigma).map_err(err)
}

/// Returns (lhs, rhs) of the large-deviation inequality at (p, t).
#[pyfunction]
fn large_deviation_check(p: f64, t: f64) -> PyResult<(f64, f64)> {
    bounds::large_deviation_check(p, t).map_err(err)
}

/// Returns (bound, prescribed step).
#[pyfunction]
fn universal_rate_bound(
    f1: f64,
    f_star: f64,
    lipschitz: Vec<f64>,
    rounds: u64,
    pe_max: f64,
) -> PyResult<(f64, f64)> {
    let rb = bounds::universal_rate_bound(f1, f_star, &lipschitz, rounds, pe_max).map_err(err)?;
    Ok((rb.bound, rb.step))
}

/// Total communication cost in bits for `sgd`, `top_k`, `signsgd_mv`, or
/// `signsgd_fv`.
#[pyfunction]
#[pyo3(signature = (algorithm, workers, dim, rounds, k=None))]
fn communication_cost(
    algorithm: &str,
    workers: u64,
    dim: u64,
    rounds: u64,
    k: Option<u64>,
) -> PyResult<f64> {
    let alg = CommAlgorithm::parse(algorithm).map_err(err)?;
    simulate::communication_cost(alg, workers, dim, rounds, k).map_err(err)
}

/// Per-worker batch sizes of preset modes 1-4.
#[pyfunction]
fn batch_mode_sizes(mode: u8, workers: usize) -> PyResult<Vec<u64>> {
    Ok(simulate::BatchModePreset::new(mode, workers)
        .map_err(err)?
        .sizes())
}

/// Run one experiment from a TOML config string. Returns a dict with
/// `records` (list of per-round dicts) and `metadata` (the same document the
/// CLI writes as JSON).
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Py<PyAny>> {
    let cfg = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    let out = simulate::run(&cfg).map_err(err)?;
    let result = PyDict::new(py);
    let records = PyList::empty(py);
    for r in &out.records {
        let row = PyDict::new(py);
        row.set_item("t", r.t)?;
        row.set_item("f", r.f)?;
        row.set_item("g_l1", r.g_l1)?;
        row.set_item("err", r.err_active)?;
        row.set_item("bits_up", r.bits_up)?;
        row.set_item("bits_down", r.bits_down)?;
        records.append(row)?;
    }
    result.set_item("records", records)?;
    result.set_item("metadata", to_py_via_json(py, &out.metadata)?)?;
    result.set_item("final_x", out.final_model.x.clone())?;
    Ok(result.unbind().into())
}

/// Monte Carlo verification of the weighted-vote error bound over sampled
/// configurations; returns a list of check dicts.
#[pyfunction]
#[pyo3(signature = (trials=100_000, configs=100, seed=7))]
fn verify_wmv_bound<'py>(
    py: Python<'py>,
    trials: u64,
    configs: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let opts = VerifyOptions {
        trials,
        configs,
        seed,
        ..Default::default()
    };
    let checks = montecarlo::verify_wmv_bound(&opts).map_err(err)?;
    to_py_via_json(py, &checks)
}

/// Same channels with multiplicative weight perturbations in
/// [1 - delta_min, 1 + delta_max].
#[pyfunction]
#[pyo3(signature = (delta_min, delta_max, trials=100_000, configs=100, seed=7))]
fn verify_imperfect_bound<'py>(
    py: Python<'py>,
    delta_min: f64,
    delta_max: f64,
    trials: u64,
    configs: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let opts = VerifyOptions {
        trials,
        configs,
        seed,
        ..Default::default()
    };
    let checks = montecarlo::verify_imperfect_bound(&opts, delta_min, delta_max).map_err(err)?;
    to_py_via_json(py, &checks)
}

#[pyfunction]
fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

#[pymodule]
fn signvote_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    m.add_function(wrap_pyfunction!(sign_of, m)?)?;
    m.add_function(wrap_pyfunction!(majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(llr_weight, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(ml_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(exact_decode_error, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_wmv, m)?)?;
    m.add_function(wrap_pyfunction!(wmv_error_bound, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_mv, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_exponent_uniform, m)?)?;
    m.add_function(wrap_pyfunction!(imperfect_bound, m)?)?;
    m.add_function(wrap_pyfunction!(wmv_bound_batches, m)?)?;
    m.add_function(wrap_pyfunction!(mv_bound_batches, m)?)?;
    m.add_function(wrap_pyfunction!(computing_error_bound, m)?)?;
    m.add_function(wrap_pyfunction!(large_deviation_check, m)?)?;
    m.add_function(wrap_pyfunction!(universal_rate_bound, m)?)?;
    m.add_function(wrap_pyfunction!(communication_cost, m)?)?;
    m.add_function(wrap_pyfunction!(batch_mode_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify_wmv_bound, m)?)?;
    m.add_function(wrap_pyfunction!(verify_imperfect_bound, m)?)?;
    Ok(())
}
