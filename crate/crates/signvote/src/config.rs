//! Experiment configuration: the single self-contained document that fully
//! determines a run. All fields round-trip through TOML; defaults are listed
//! on each field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::BatchModePreset;

/// Which aggregation rule the server applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    /// Plain majority vote over worker signs.
    Mv,
    /// Weighted majority vote with the true log-likelihood-ratio weights
    /// (synthetic channel mode only, where the cross-over probabilities are known).
    WmvPerfect,
    /// Federated voting: weighted majority vote with weights learned online
    /// from mismatches against the server's own decoded signs.
    Fv,
    /// Idealized baseline that updates with the true full-data gradient signs.
    Signgd,
    /// Full-precision distributed SGD (averages raw gradients).
    Sgd,
}

impl DecoderKind {
    pub fn is_sign_based(self) -> bool {
        !matches!(self, DecoderKind::Sgd)
    }

    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Mv => "mv",
            DecoderKind::WmvPerfect => "wmv_perfect",
            DecoderKind::Fv => "fv",
            DecoderKind::Signgd => "signgd",
            DecoderKind::Sgd => "sgd",
        }
    }
}

/// How the online estimator aggregates mismatch counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// One estimate per (worker, coordinate) pair, as in the online update rule.
    #[default]
    PerCoordinate,
    /// One estimate per worker, pooled over coordinates (the computing-error
    /// bound is coordinate-independent, so pooling is a valid coarsening).
    PerWorker,
}

/// Mini-batch sizes: exactly one of the three selectors must be set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    /// Preset 1-4: mixes of small-batch (B=4) and large-batch workers at a
    /// fixed average batch size of 64.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<u8>,
    /// Explicit per-worker batch sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<u64>>,
    /// The same batch size for every worker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<u64>,
}

impl BatchConfig {
    pub fn mode(mode: u8) -> Self {
        BatchConfig {
            mode: Some(mode),
            ..Default::default()
        }
    }

    pub fn uniform(b: u64) -> Self {
        BatchConfig {
            uniform: Some(b),
            ..Default::default()
        }
    }

    pub fn explicit(sizes: Vec<u64>) -> Self {
        BatchConfig {
            sizes: Some(sizes),
            ..Default::default()
        }
    }

    /// Resolve to one batch size per worker.
    pub fn resolve(&self, workers: usize) -> Result<Vec<u64>> {
        let set = usize::from(self.mode.is_some())
            + usize::from(self.sizes.is_some())
            + usize::from(self.uniform.is_some());
        if set != 1 {
            return Err(Error::InvalidConfig(
                "batch config must set exactly one of `mode`, `sizes`, `uniform`".into(),
            ));
        }
        let sizes = if let Some(mode) = self.mode {
            BatchModePreset::new(mode, workers)?.sizes()
        } else if let Some(sizes) = &self.sizes {
            if sizes.len() != workers {
                return Err(Error::InvalidConfig(format!(
                    "batch.sizes has {} entries for {} workers",
                    sizes.len(),
                    workers
                )));
            }
            sizes.clone()
        } else {
            vec![self.uniform.unwrap(); workers]
        };
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("batch sizes must be >= 1".into()));
        }
        Ok(sizes)
    }
}

/// Objective selection plus its dataset descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    /// Separable quadratic with known optimum and exact coordinate-wise
    /// Lipschitz constants. Per-sample gradients carry multiplicative
    /// curvature noise, mean-centered so the full-batch gradient is exact.
    Quadratic {
        /// Number of per-sample noise rows. Default 256.
        #[serde(default = "default_quad_samples")]
        samples: usize,
        /// Std of the per-sample multiplicative gradient noise. Default 0.5.
        #[serde(default = "default_quad_noise")]
        noise: f64,
        /// Smallest coordinate Lipschitz constant. Default 0.5.
        #[serde(default = "default_lip_min")]
        lipschitz_min: f64,
        /// Largest coordinate Lipschitz constant. Default 2.0.
        #[serde(default = "default_lip_max")]
        lipschitz_max: f64,
        /// Nominal distance from the optimum at the start: x^1_n = x*_n +
        /// offset * u_n with u_n deterministic in [0.5, 1.5]. Default 1.0.
        #[serde(default = "default_offset")]
        initial_offset: f64,
        /// Objective value at the optimum. Default 0.0.
        #[serde(default)]
        f_star: f64,
    },
    /// Binary logistic regression on two synthetic Gaussian blobs
    /// (or an imported CSV dataset).
    Logistic {
        /// Sample count. Default 2048. Ignored when `data_csv` is set.
        #[serde(default = "default_log_samples")]
        samples: usize,
        /// Fraction of positive-class samples. Default 0.5.
        #[serde(default = "default_balance")]
        class_balance: f64,
        /// Distance of each blob center from the origin. Default 0.3.
        #[serde(default = "default_separation")]
        separation: f64,
        /// Full-batch gradient-descent iterations used to locate a best-found
        /// objective value; 0 records the trivial lower bound 0. Default 0.
        #[serde(default)]
        f_star_refine: usize,
        /// Optional CSV import: header row, feature columns then an integer
        /// `label` column in {0,1} or {-1,1}.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_csv: Option<String>,
    },
    /// One-hidden-layer tanh MLP with softmax cross-entropy on a tiny
    /// digits-style synthetic set. The model dimension is
    /// `hidden*(input_dim+1) + classes*(hidden+1)`.
    Mlp {
        #[serde(default = "default_mlp_samples")]
        samples: usize,
        #[serde(default = "default_mlp_input")]
        input_dim: usize,
        #[serde(default = "default_mlp_hidden")]
        hidden: usize,
        #[serde(default = "default_mlp_classes")]
        classes: usize,
        /// Std of the noise added to class prototypes. Default 0.3.
        #[serde(default = "default_mlp_noise")]
        noise: f64,
        #[serde(default)]
        f_star_refine: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_csv: Option<String>,
    },
}

fn default_quad_samples() -> usize {
    256
}
fn default_quad_noise() -> f64 {
    0.5
}
fn default_lip_min() -> f64 {
    0.5
}
fn default_lip_max() -> f64 {
    2.0
}
fn default_offset() -> f64 {
    1.0
}
fn default_log_samples() -> usize {
    2048
}
fn default_balance() -> f64 {
    0.5
}
fn default_separation() -> f64 {
    0.3
}
fn default_mlp_samples() -> usize {
    512
}
fn default_mlp_input() -> usize {
    16
}
fn default_mlp_hidden() -> usize {
    8
}
fn default_mlp_classes() -> usize {
    4
}
fn default_mlp_noise() -> f64 {
    0.3
}

impl ObjectiveConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ObjectiveConfig::Quadratic { .. } => "quadratic",
            ObjectiveConfig::Logistic { .. } => "logistic",
            ObjectiveConfig::Mlp { .. } => "mlp",
        }
    }

    pub fn samples(&self) -> usize {
        match self {
            ObjectiveConfig::Quadratic { samples, .. }
            | ObjectiveConfig::Logistic { samples, .. }
            | ObjectiveConfig::Mlp { samples, .. } => *samples,
        }
    }
}

/// Distribution of per-coordinate cross-over probabilities in synthetic mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateDist {
    /// p_{m,n} = p_m for every coordinate (default).
    #[default]
    Constant,
    /// p_{m,n} drawn once per coordinate, uniformly in [0, p_m].
    Uniform,
}

/// How worker sign flips arise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum ChannelConfig {
    /// Flips emerge from mini-batch sampling on the objective.
    #[default]
    Real,
    /// Worker signs are the true gradient signs passed through independent
    /// binary symmetric channels with the given per-worker cross-over
    /// probabilities; mini-batch sampling is bypassed.
    Synthetic {
        p: Vec<f64>,
        #[serde(default)]
        per_coordinate: CoordinateDist,
    },
}


/// Everything a run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of workers M.
    pub workers: usize,
    /// Model dimension N. For the MLP objective this must equal the derived
    /// parameter count.
    pub dim: usize,
    /// Total rounds T.
    pub rounds: u64,
    /// Initial phase length T_in: the federated-voting decoder uses plain
    /// majority vote while `t <= initial_rounds`. Default 0.
    #[serde(default)]
    pub initial_rounds: u64,
    /// Learning rate delta.
    pub learning_rate: f64,
    /// Master seed; every random stream in the run is keyed from it.
    pub seed: u64,
    /// Estimated cross-over probabilities are clamped to
    /// [clamp_eps, 1 - clamp_eps] so the LLR weights stay finite.
    /// Default 1e-3.
    #[serde(default = "default_clamp_eps")]
    pub clamp_eps: f64,
    pub decoder: DecoderKind,
    /// Default `per_coordinate`.
    #[serde(default)]
    pub estimator_pooling: Pooling,
    pub batch: BatchConfig,
    pub objective: ObjectiveConfig,
    /// Default `{ mode = "real" }`.
    #[serde(default)]
    pub channel: ChannelConfig,
}

fn default_clamp_eps() -> f64 {
    1e-3
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Per-worker batch sizes after resolving the batch selector.
    pub fn batch_sizes(&self) -> Result<Vec<u64>> {
        self.batch.resolve(self.workers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be >= 1".into()));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be >= 1".into()));
        }
        if self.initial_rounds > self.rounds {
            return Err(Error::InvalidConfig(format!(
                "initial_rounds ({}) must not exceed rounds ({})",
                self.initial_rounds, self.rounds
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive and finite".into(),
            ));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(Error::InvalidConfig(
                "clamp_eps must lie in (0, 0.5)".into(),
            ));
        }
        let batches = self.batch_sizes()?;

        match &self.channel {
            ChannelConfig::Real => {
                if self.decoder == DecoderKind::WmvPerfect {
                    return Err(Error::InvalidConfig(
                        "decoder wmv_perfect needs known cross-over probabilities; \
                         use the synthetic channel mode"
                            .into(),
                    ));
                }
            }
            ChannelConfig::Synthetic { p, .. } => {
                if self.decoder == DecoderKind::Sgd {
                    return Err(Error::InvalidConfig(
                        "decoder sgd averages raw gradients and has no synthetic-channel form"
                            .into(),
                    ));
                }
                if p.len() != self.workers {
                    return Err(Error::InvalidConfig(format!(
                        "channel.p has {} entries for {} workers",
                        p.len(),
                        self.workers
                    )));
                }
                for (m, &pm) in p.iter().enumerate() {
                    if !(pm.is_finite() && (0.0..=1.0).contains(&pm)) {
                        return Err(Error::InvalidConfig(format!(
                            "channel.p[{m}] = {pm} is not a probability"
                        )));
                    }
                    if self.decoder == DecoderKind::WmvPerfect && !(pm > 0.0 && pm < 1.0) {
                        return Err(Error::InvalidConfig(format!(
                            "channel.p[{m}] = {pm} gives an infinite LLR weight"
                        )));
                    }
                }
            }
        }

        match &self.objective {
            ObjectiveConfig::Quadratic {
                samples,
                noise,
                lipschitz_min,
                lipschitz_max,
                ..
            } => {
                if *samples < 2 {
                    return Err(Error::InvalidConfig(
                        "quadratic objective needs at least 2 samples".into(),
                    ));
                }
                if !(*noise >= 0.0 && noise.is_finite()) {
                    return Err(Error::InvalidConfig("noise must be >= 0".into()));
                }
                if !(*lipschitz_min > 0.0 && *lipschitz_max >= *lipschitz_min) {
                    return Err(Error::InvalidConfig(
                        "need 0 < lipschitz_min <= lipschitz_max".into(),
                    ));
                }
            }
            ObjectiveConfig::Logistic {
                samples,
                class_balance,
                separation,
                data_csv,
                ..
            } => {
                if data_csv.is_none() {
                    if *samples < 2 {
                        return Err(Error::InvalidConfig(
                            "logistic objective needs at least 2 samples".into(),
                        ));
                    }
                    if !(*class_balance > 0.0 && *class_balance < 1.0) {
                        return Err(Error::InvalidConfig(
                            "class_balance must lie in (0, 1)".into(),
                        ));
                    }
                    if !(separation.is_finite() && *separation > 0.0) {
                        return Err(Error::InvalidConfig("separation must be > 0".into()));
                    }
                }
            }
            ObjectiveConfig::Mlp {
                input_dim,
                hidden,
                classes,
                ..
            } => {
                if *hidden == 0 || *hidden > 32 {
                    return Err(Error::InvalidConfig(
                        "mlp hidden units must lie in 1..=32".into(),
                    ));
                }
                if *classes < 2 {
                    return Err(Error::InvalidConfig("mlp needs >= 2 classes".into()));
                }
                let n = hidden * (input_dim + 1) + classes * (hidden + 1);
                if n != self.dim {
                    return Err(Error::InvalidConfig(format!(
                        "mlp parameter count is {n}, but dim = {}",
                        self.dim
                    )));
                }
            }
        }

        // Real-mode batches are drawn without replacement within a round,
        // so a worker's batch cannot exceed its shard.
        if matches!(self.channel, ChannelConfig::Real)
            && !matches!(self.decoder, DecoderKind::Signgd)
        {
            let samples = self.objective.samples();
            let min_shard = samples / self.workers;
            for (m, &b) in batches.iter().enumerate() {
                if b as usize > min_shard {
                    return Err(Error::InvalidConfig(format!(
                        "worker {m} batch size {b} exceeds its shard of ~{min_shard} samples \
                         ({samples} samples over {} workers)",
                        self.workers
                    )));
                }
            }
        }
        Ok(())
    }
}
