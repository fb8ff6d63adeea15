//! Desk-scale differentiable training objectives.
//!
//! Three families, each with exact analytic gradients, per-sample stochastic
//! gradients over a finite dataset, and a deterministic seeded generator:
//!
//! * `quadratic` — separable bowl with known optimum, exact coordinate-wise
//!   Lipschitz constants, and per-sample multiplicative curvature noise
//!   (mean-centered, so the full-batch gradient is exactly the true one);
//! * `logistic` — binary logistic regression on two Gaussian blobs;
//! * `mlp` — one-hidden-layer tanh network with softmax cross-entropy on a
//!   tiny prototype-plus-noise classification set.

use serde::Serialize;

use crate::config::ObjectiveConfig;
use crate::error::{Error, Result};
use crate::rng::{Purpose, RngStream, StreamId};
use crate::sign::SignVector;

/// Model parameters at a round.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub x: Vec<f64>,
    pub round: u64,
}

/// Sample indices for one worker's mini-batch, drawn without replacement
/// from the worker's shard.
#[derive(Clone, Debug)]
pub struct MiniBatch {
    pub indices: Vec<u32>,
}

impl MiniBatch {
    /// Draw `size` distinct samples from `shard`.
    pub fn sample(shard: &[u32], size: u64, rng: &mut RngStream) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if size as usize > shard.len() {
            return Err(Error::InvalidArgument(format!(
                "batch size {size} exceeds shard of {} samples",
                shard.len()
            )));
        }
        Ok(MiniBatch {
            indices: rng.sample_distinct(shard, size as usize),
        })
    }
}

/// Empirical normalized-variance constant:
/// `sigma^2 = max_n mean_i (g_{i,n} - gbar_n)^2 / gbar_n^2`, with near-zero
/// gradient coordinates excluded because the ratio is singular there.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SigmaEstimate {
    pub sigma: f64,
    /// Coordinates skipped because |gbar_n| <= 1e-6.
    pub excluded: usize,
    /// Coordinates that entered the maximum.
    pub included: usize,
    pub samples_used: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MlpArch {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl MlpArch {
    pub fn param_count(&self) -> usize {
        self.hidden * (self.input + 1) + self.classes * (self.hidden + 1)
    }
}

#[derive(Clone, Debug)]
enum Data {
    Quadratic {
        /// Row-major S x N multiplicative noise, columns centered to zero.
        noise: Vec<f64>,
    },
    Logistic {
        /// Row-major S x N features.
        feats: Vec<f64>,
        /// Labels in {-1, +1}.
        labels: Vec<f64>,
    },
    Mlp {
        feats: Vec<f64>,
        labels: Vec<usize>,
        arch: MlpArch,
    },
}

/// A fully materialized objective: dataset, Lipschitz data, optimum info,
/// and the deterministic initial point.
#[derive(Clone, Debug)]
pub struct Objective {
    dim: usize,
    samples: usize,
    lipschitz: Vec<f64>,
    /// Guaranteed lower bound on f: exact optimum for the quadratic, 0 for
    /// the nonnegative losses.
    f_star: f64,
    /// Best objective value found by full-batch descent, when refinement ran.
    f_best_found: Option<f64>,
    x_star: Option<Vec<f64>>,
    initial: Vec<f64>,
    data: Data,
}

impl Objective {
    pub fn build(cfg: &ObjectiveConfig, dim: usize, seed: u64) -> Result<Self> {
        match cfg {
            ObjectiveConfig::Quadratic {
                samples,
                noise,
                lipschitz_min,
                lipschitz_max,
                initial_offset,
                f_star,
            } => Self::build_quadratic(
                dim,
                *samples,
                *noise,
                *lipschitz_min,
                *lipschitz_max,
                *initial_offset,
                *f_star,
                seed,
            ),
            ObjectiveConfig::Logistic {
                samples,
                class_balance,
                separation,
                f_star_refine,
                data_csv,
            } => {
                let (feats, labels) = match data_csv {
                    Some(path) => load_logistic_csv(path, dim)?,
                    None => generate_blobs(dim, *samples, *class_balance, *separation, seed),
                };
                Self::build_logistic(dim, feats, labels, *f_star_refine, seed)
            }
            ObjectiveConfig::Mlp {
                samples,
                input_dim,
                hidden,
                classes,
                noise,
                f_star_refine,
                data_csv,
            } => {
                let arch = MlpArch {
                    input: *input_dim,
                    hidden: *hidden,
                    classes: *classes,
                };
                if arch.param_count() != dim {
                    return Err(Error::InvalidConfig(format!(
                        "mlp parameter count {} != dim {dim}",
                        arch.param_count()
                    )));
                }
                let (feats, labels) = match data_csv {
                    Some(path) => load_mlp_csv(path, arch.input, arch.classes)?,
                    None => generate_prototypes(arch, *samples, *noise, seed),
                };
                Self::build_mlp(arch, feats, labels, *f_star_refine, seed)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build_quadratic(
        dim: usize,
        samples: usize,
        noise: f64,
        lip_min: f64,
        lip_max: f64,
        initial_offset: f64,
        f_star: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = RngStream::new(seed, StreamId::new(Purpose::Dataset, 0, 0));
        let x_star: Vec<f64> = (0..dim).map(|_| 2.0 * rng.f64() - 1.0).collect();
        // Log-spaced Lipschitz constants between the configured extremes.
        let lipschitz: Vec<f64> = (0..dim)
            .map(|n| {
                if dim == 1 {
                    lip_min
                } else {
                    let t = n as f64 / (dim - 1) as f64;
                    lip_min * (lip_max / lip_min).powf(t)
                }
            })
            .collect();
        // Per-sample multiplicative noise, centered per coordinate so the
        // dataset mean gradient is exactly the true gradient.
        let mut noise_mat = vec![0.0; samples * dim];
        if noise > 0.0 {
            for v in noise_mat.iter_mut() {
                *v = rng.normal(0.0, noise);
            }
            for n in 0..dim {
                let mean: f64 =
                    (0..samples).map(|i| noise_mat[i * dim + n]).sum::<f64>() / samples as f64;
                for i in 0..samples {
                    noise_mat[i * dim + n] -= mean;
                }
            }
        }
        // Stagger the start coordinate by coordinate (uniform in [0.5, 1.5]
        // of the nominal offset) so sign-descent trajectories do not move in
        // lockstep across coordinates.
        let initial: Vec<f64> = x_star
            .iter()
            .map(|&s| s + initial_offset * (0.5 + rng.f64()))
            .collect();
        Ok(Objective {
            dim,
            samples,
            lipschitz,
            f_star,
            f_best_found: Some(f_star),
            x_star: Some(x_star),
            initial,
            data: Data::Quadratic { noise: noise_mat },
        })
    }

    fn build_logistic(
        dim: usize,
        feats: Vec<f64>,
        labels: Vec<f64>,
        refine: usize,
        seed: u64,
    ) -> Result<Self> {
        let samples = labels.len();
        if samples < 2 || feats.len() != samples * dim {
            return Err(Error::InvalidConfig(
                "logistic dataset shape inconsistent".into(),
            ));
        }
        let lam = logistic_curvature_bound(&feats, samples, dim, seed);
        let mut obj = Objective {
            dim,
            samples,
            lipschitz: vec![lam; dim],
            f_star: 0.0,
            f_best_found: None,
            x_star: None,
            initial: vec![0.0; dim],
            data: Data::Logistic { feats, labels },
        };
        if refine > 0 {
            obj.f_best_found = Some(obj.refine_best_found(refine));
        }
        Ok(obj)
    }

    fn build_mlp(
        arch: MlpArch,
        feats: Vec<f64>,
        labels: Vec<usize>,
        refine: usize,
        seed: u64,
    ) -> Result<Self> {
        let samples = labels.len();
        if samples < 2 || feats.len() != samples * arch.input {
            return Err(Error::InvalidConfig("mlp dataset shape inconsistent".into()));
        }
        let dim = arch.param_count();
        let mut init_rng = RngStream::new(seed, StreamId::new(Purpose::Init, 0, 0));
        let initial: Vec<f64> = (0..dim).map(|_| init_rng.normal(0.0, 0.1)).collect();
        let mut obj = Objective {
            dim,
            samples,
            lipschitz: Vec::new(),
            f_star: 0.0,
            f_best_found: None,
            x_star: None,
            initial,
            data: Data::Mlp {
                feats,
                labels,
                arch,
            },
        };
        obj.lipschitz = vec![obj.mlp_curvature_bound(seed); dim];
        if refine > 0 {
            obj.f_best_found = Some(obj.refine_best_found(refine));
        }
        Ok(obj)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    /// Guaranteed lower bound on the objective (exact optimum value for the
    /// quadratic).
    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn f_best_found(&self) -> Option<f64> {
        self.f_best_found
    }

    pub fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }

    pub fn initial_point(&self) -> Vec<f64> {
        self.initial.clone()
    }

    pub fn kind_name(&self) -> &'static str {
        match self.data {
            Data::Quadratic { .. } => "quadratic",
            Data::Logistic { .. } => "logistic",
            Data::Mlp { .. } => "mlp",
        }
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "model of dimension {}, objective of dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Empirical loss over the full dataset.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        match &self.data {
            Data::Quadratic { .. } => {
                let xs = self.x_star.as_ref().unwrap();
                let q: f64 = (0..self.dim)
                    .map(|n| 0.5 * self.lipschitz[n] * (x[n] - xs[n]).powi(2))
                    .sum();
                Ok(self.f_star + q)
            }
            _ => {
                let mut total = 0.0;
                for i in 0..self.samples {
                    total += self.sample_loss_grad(x, i, None);
                }
                Ok(total / self.samples as f64)
            }
        }
    }

    /// Exact gradient of the empirical loss over the full dataset.
    pub fn true_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_true_gradient(x)?.1)
    }

    /// Loss and gradient in one pass (the per-round hot path).
    pub fn value_and_true_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_x(x)?;
        match &self.data {
            Data::Quadratic { .. } => {
                let xs = self.x_star.as_ref().unwrap();
                let mut g = vec![0.0; self.dim];
                let mut q = 0.0;
                for n in 0..self.dim {
                    let d = x[n] - xs[n];
                    g[n] = self.lipschitz[n] * d;
                    q += 0.5 * self.lipschitz[n] * d * d;
                }
                Ok((self.f_star + q, g))
            }
            _ => {
                let mut g = vec![0.0; self.dim];
                let scale = 1.0 / self.samples as f64;
                let mut total = 0.0;
                for i in 0..self.samples {
                    total += self.sample_loss_grad(x, i, Some((&mut g, scale)));
                }
                Ok((total * scale, g))
            }
        }
    }

    /// Mean per-sample gradient over a mini-batch.
    pub fn stochastic_gradient(&self, x: &[f64], batch: &MiniBatch) -> Result<Vec<f64>> {
        self.check_x(x)?;
        if batch.indices.is_empty() {
            return Err(Error::InvalidArgument("empty mini-batch".into()));
        }
        if let Some(&bad) = batch.indices.iter().find(|&&i| i as usize >= self.samples) {
            return Err(Error::InvalidArgument(format!(
                "batch index {bad} out of range for {} samples",
                self.samples
            )));
        }
        let mut g = vec![0.0; self.dim];
        let scale = 1.0 / batch.indices.len() as f64;
        for &i in &batch.indices {
            self.sample_loss_grad(x, i as usize, Some((&mut g, scale)));
        }
        Ok(g)
    }

    /// Loss of sample `i`; optionally accumulate `scale * grad_i` into the
    /// provided buffer.
    fn sample_loss_grad(&self, x: &[f64], i: usize, grad: Option<(&mut [f64], f64)>) -> f64 {
        match &self.data {
            Data::Quadratic { noise } => {
                let xs = self.x_star.as_ref().unwrap();
                let row = &noise[i * self.dim..(i + 1) * self.dim];
                let mut loss = 0.0;
                match grad {
                    Some((g, scale)) => {
                        for n in 0..self.dim {
                            let c = self.lipschitz[n] * (1.0 + row[n]);
                            let d = x[n] - xs[n];
                            loss += 0.5 * c * d * d;
                            g[n] += scale * c * d;
                        }
                    }
                    None => {
                        for n in 0..self.dim {
                            let c = self.lipschitz[n] * (1.0 + row[n]);
                            let d = x[n] - xs[n];
                            loss += 0.5 * c * d * d;
                        }
                    }
                }
                self.f_star + loss
            }
            Data::Logistic { feats, labels } => {
                let row = &feats[i * self.dim..(i + 1) * self.dim];
                let y = labels[i];
                let z: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                let margin = y * z;
                // softplus(-margin), stable in both tails
                let loss = if margin > 0.0 {
                    (-margin).exp().ln_1p()
                } else {
                    -margin + margin.exp().ln_1p()
                };
                if let Some((g, scale)) = grad {
                    // d/dz softplus(-yz) = -y * sigmoid(-yz)
                    let s = 1.0 / (1.0 + margin.exp());
                    let coef = -y * s * scale;
                    for n in 0..self.dim {
                        g[n] += coef * row[n];
                    }
                }
                loss
            }
            Data::Mlp {
                feats,
                labels,
                arch,
            } => mlp_sample_loss_grad(x, feats, labels, *arch, i, grad),
        }
    }

    /// Elementwise sign of the true gradient.
    pub fn true_sign_vector(&self, x: &[f64]) -> Result<SignVector> {
        SignVector::from_values(&self.true_gradient(x)?)
    }

    /// Empirical per-sample normalized variance at `x`, maximized over
    /// coordinates with non-negligible true gradient.
    pub fn estimate_sigma(&self, x: &[f64], max_samples: usize, rng: &mut RngStream) -> Result<SigmaEstimate> {
        let (_, gbar) = self.value_and_true_gradient(x)?;
        let use_all = self.samples <= max_samples;
        let chosen: Vec<u32> = if use_all {
            (0..self.samples as u32).collect()
        } else {
            let pool: Vec<u32> = (0..self.samples as u32).collect();
            rng.sample_distinct(&pool, max_samples)
        };
        let mut sq_dev = vec![0.0; self.dim];
        let mut g_i = vec![0.0; self.dim];
        for &i in &chosen {
            g_i.iter_mut().for_each(|v| *v = 0.0);
            self.sample_loss_grad(x, i as usize, Some((&mut g_i, 1.0)));
            for n in 0..self.dim {
                let d = g_i[n] - gbar[n];
                sq_dev[n] += d * d;
            }
        }
        let count = chosen.len() as f64;
        let mut max_ratio: f64 = 0.0;
        let mut excluded = 0;
        let mut included = 0;
        for n in 0..self.dim {
            if gbar[n].abs() <= 1e-6 {
                excluded += 1;
                continue;
            }
            included += 1;
            max_ratio = max_ratio.max(sq_dev[n] / count / (gbar[n] * gbar[n]));
        }
        Ok(SigmaEstimate {
            sigma: max_ratio.sqrt(),
            excluded,
            included,
            samples_used: chosen.len(),
        })
    }

    /// Best objective value reached by `iters` full-batch gradient-descent
    /// steps from the initial point, with step 1/L.
    fn refine_best_found(&self, iters: usize) -> f64 {
        let step = 1.0 / self.lipschitz[0].max(1e-12);
        let mut x = self.initial.clone();
        let mut best = f64::INFINITY;
        for _ in 0..iters {
            let (f, g) = self.value_and_true_gradient(&x).expect("dims match");
            best = best.min(f);
            for n in 0..self.dim {
                x[n] -= step * g[n];
            }
        }
        best.min(self.value(&x).expect("dims match"))
    }

    fn mlp_curvature_bound(&self, seed: u64) -> f64 {
        // Sampled second-order ratio: max over random pairs of
        // |f(y) - f(x) - <grad f(x), y - x>| / (0.5 |y - x|^2), inflated.
        let mut rng = RngStream::new(seed, StreamId::new(Purpose::Sigma, 1, 0));
        let mut worst: f64 = 1e-3;
        for _ in 0..30 {
            let xa: Vec<f64> = self
                .initial
                .iter()
                .map(|&v| v + rng.normal(0.0, 0.5))
                .collect();
            let dir: Vec<f64> = (0..self.dim).map(|_| rng.normal(0.0, 0.2)).collect();
            let xb: Vec<f64> = xa.iter().zip(&dir).map(|(a, d)| a + d).collect();
            let (fa, ga) = self.value_and_true_gradient(&xa).expect("dims");
            let fb = self.value(&xb).expect("dims");
            let lin: f64 = ga.iter().zip(&dir).map(|(g, d)| g * d).sum();
            let quad: f64 = 0.5 * dir.iter().map(|d| d * d).sum::<f64>();
            worst = worst.max((fb - fa - lin).abs() / quad);
        }
        1.5 * worst
    }
}

fn mlp_sample_loss_grad(
    x: &[f64],
    feats: &[f64],
    labels: &[usize],
    arch: MlpArch,
    i: usize,
    grad: Option<(&mut [f64], f64)>,
) -> f64 {
    let (d, h, c) = (arch.input, arch.hidden, arch.classes);
    let (w1, rest) = x.split_at(h * d);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(c * h);
    let phi = &feats[i * d..(i + 1) * d];
    let label = labels[i];

    let mut act = vec![0.0; h];
    for j in 0..h {
        let mut z = b1[j];
        let row = &w1[j * d..(j + 1) * d];
        for k in 0..d {
            z += row[k] * phi[k];
        }
        act[j] = z.tanh();
    }
    let mut logits = vec![0.0; c];
    for o in 0..c {
        let mut z = b2[o];
        let row = &w2[o * h..(o + 1) * h];
        for j in 0..h {
            z += row[j] * act[j];
        }
        logits[o] = z;
    }
    let zmax = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = logits.iter().map(|z| (z - zmax).exp()).sum();
    let loss = zmax + sum_exp.ln() - logits[label];

    if let Some((g, scale)) = grad {
        let (gw1, grest) = g.split_at_mut(h * d);
        let (gb1, grest) = grest.split_at_mut(h);
        let (gw2, gb2) = grest.split_at_mut(c * h);

        // dL/dlogit_o = softmax_o - 1{o = label}
        let mut dlogit = vec![0.0; c];
        for o in 0..c {
            dlogit[o] = (logits[o] - zmax).exp() / sum_exp;
        }
        dlogit[label] -= 1.0;

        let mut dact = vec![0.0; h];
        for o in 0..c {
            let coef = dlogit[o] * scale;
            let row = &mut gw2[o * h..(o + 1) * h];
            for j in 0..h {
                row[j] += coef * act[j];
                dact[j] += dlogit[o] * w2[o * h + j];
            }
            gb2[o] += coef;
        }
        for j in 0..h {
            let dz = dact[j] * (1.0 - act[j] * act[j]);
            let coef = dz * scale;
            let row = &mut gw1[j * d..(j + 1) * d];
            for k in 0..d {
                row[k] += coef * phi[k];
            }
            gb1[j] += coef;
        }
    }
    loss
}

/// x' = x - delta * decision, elementwise.
pub fn apply_update(x: &[f64], decision: &SignVector, delta: f64) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    apply_update_in_place(&mut out, decision, delta)?;
    Ok(out)
}

pub fn apply_update_in_place(x: &mut [f64], decision: &SignVector, delta: f64) -> Result<()> {
    if x.len() != decision.len() {
        return Err(Error::DimensionMismatch(format!(
            "model of dimension {} vs decision of dimension {}",
            x.len(),
            decision.len()
        )));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive and finite, got {delta}"
        )));
    }
    for (n, v) in x.iter_mut().enumerate() {
        *v -= delta * decision.get(n).value();
    }
    Ok(())
}

/// Partition 0..samples into `workers` disjoint shards by seeded shuffle and
/// round-robin deal; shard sizes differ by at most one.
pub fn shard_indices(samples: usize, workers: usize, seed: u64) -> Vec<Vec<u32>> {
    let mut order: Vec<u32> = (0..samples as u32).collect();
    let mut rng = RngStream::new(seed, StreamId::new(Purpose::Shard, 0, 0));
    rng.shuffle(&mut order);
    let mut shards = vec![Vec::with_capacity(samples / workers + 1); workers];
    for (pos, idx) in order.into_iter().enumerate() {
        shards[pos % workers].push(idx);
    }
    shards
}

fn generate_blobs(
    dim: usize,
    samples: usize,
    balance: f64,
    separation: f64,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = RngStream::new(seed, StreamId::new(Purpose::Dataset, 0, 0));
    // Random unit direction scaled to the requested separation.
    let mut center: Vec<f64> = (0..dim).map(|_| rng.normal(0.0, 1.0)).collect();
    let norm = center.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    center.iter_mut().for_each(|v| *v *= separation / norm);

    let positives = ((samples as f64) * balance).round() as usize;
    let mut feats = vec![0.0; samples * dim];
    let mut labels = vec![0.0; samples];
    for i in 0..samples {
        let y = if i < positives { 1.0 } else { -1.0 };
        labels[i] = y;
        for n in 0..dim {
            feats[i * dim + n] = y * center[n] + rng.normal(0.0, 1.0);
        }
    }
    (feats, labels)
}

fn generate_prototypes(arch: MlpArch, samples: usize, noise: f64, seed: u64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = RngStream::new(seed, StreamId::new(Purpose::Dataset, 0, 0));
    let protos: Vec<f64> = (0..arch.classes * arch.input)
        .map(|_| 2.0 * rng.f64() - 1.0)
        .collect();
    let mut feats = vec![0.0; samples * arch.input];
    let mut labels = vec![0usize; samples];
    for i in 0..samples {
        let c = i % arch.classes;
        labels[i] = c;
        for k in 0..arch.input {
            feats[i * arch.input + k] = protos[c * arch.input + k] + rng.normal(0.0, noise);
        }
    }
    (feats, labels)
}

fn logistic_curvature_bound(feats: &[f64], samples: usize, dim: usize, seed: u64) -> f64 {
    // Power iteration on C = (1/4S) Phi^T Phi bounds the Hessian spectrum;
    // a uniform coordinate constant equal to lambda_max satisfies the
    // coordinate-wise smoothness inequality. Small inflation covers the
    // iteration's convergence slack.
    let mut rng = RngStream::new(seed, StreamId::new(Purpose::Sigma, 0, 0));
    let mut v: Vec<f64> = (0..dim).map(|_| rng.normal(0.0, 1.0)).collect();
    let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    v.iter_mut().for_each(|x| *x /= norm0);
    let mut lambda = 0.0;
    for _ in 0..120 {
        let mut u = vec![0.0; samples];
        for i in 0..samples {
            let row = &feats[i * dim..(i + 1) * dim];
            u[i] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let mut w = vec![0.0; dim];
        for i in 0..samples {
            let row = &feats[i * dim..(i + 1) * dim];
            for n in 0..dim {
                w[n] += row[n] * u[i];
            }
        }
        let scale = 1.0 / (4.0 * samples as f64);
        w.iter_mut().for_each(|x| *x *= scale);
        // v is unit-norm, so |C v| is the current eigenvalue estimate.
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        lambda = norm;
        v = w.iter().map(|x| x / norm).collect();
    }
    1.05 * lambda.max(1e-9)
}

fn load_logistic_csv(path: &str, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot open {path}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidConfig(format!("{path}: {e}")))?
        .len();
    if headers != dim + 1 {
        return Err(Error::InvalidConfig(format!(
            "{path}: expected {dim} feature columns + label, found {headers} columns"
        )));
    }
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidConfig(format!("{path}: {e}")))?;
        for field in rec.iter().take(dim) {
            feats.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidConfig(format!("{path} row {line}: {e}")))?,
            );
        }
        let raw: i64 = rec[dim]
            .trim()
            .parse()
            .map_err(|e| Error::InvalidConfig(format!("{path} row {line}: label: {e}")))?;
        labels.push(match raw {
            1 => 1.0,
            0 | -1 => -1.0,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "{path} row {line}: binary label must be in {{0,1}} or {{-1,1}}, got {other}"
                )))
            }
        });
    }
    if labels.len() < 2 {
        return Err(Error::InvalidConfig(format!("{path}: need >= 2 samples")));
    }
    Ok((feats, labels))
}

fn load_mlp_csv(path: &str, input: usize, classes: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot open {path}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidConfig(format!("{path}: {e}")))?
        .len();
    if headers != input + 1 {
        return Err(Error::InvalidConfig(format!(
            "{path}: expected {input} feature columns + label, found {headers} columns"
        )));
    }
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidConfig(format!("{path}: {e}")))?;
        for field in rec.iter().take(input) {
            feats.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidConfig(format!("{path} row {line}: {e}")))?,
            );
        }
        let raw: usize = rec[input]
            .trim()
            .parse()
            .map_err(|e| Error::InvalidConfig(format!("{path} row {line}: label: {e}")))?;
        if raw >= classes {
            return Err(Error::InvalidConfig(format!(
                "{path} row {line}: label {raw} out of range for {classes} classes"
            )));
        }
        labels.push(raw);
    }
    if labels.len() < 2 {
        return Err(Error::InvalidConfig(format!("{path}: need >= 2 samples")));
    }
    Ok((feats, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ObjectiveConfig;
    use crate::rng::{Purpose, RngStream, StreamId};
    use crate::sign::Sign;

    fn quadratic_cfg() -> ObjectiveConfig {
        ObjectiveConfig::Quadratic {
            samples: 64,
            noise: 0.5,
            lipschitz_min: 2.0,
            lipschitz_max: 2.0,
            initial_offset: 1.0,
            f_star: 0.0,
        }
    }

    fn logistic_cfg(samples: usize) -> ObjectiveConfig {
        ObjectiveConfig::Logistic {
            samples,
            class_balance: 0.5,
            separation: 0.4,
            f_star_refine: 0,
            data_csv: None,
        }
    }

    fn mlp_cfg() -> (ObjectiveConfig, usize) {
        let arch = MlpArch {
            input: 6,
            hidden: 5,
            classes: 3,
        };
        (
            ObjectiveConfig::Mlp {
                samples: 60,
                input_dim: arch.input,
                hidden: arch.hidden,
                classes: arch.classes,
                noise: 0.3,
                f_star_refine: 0,
                data_csv: None,
            },
            arch.param_count(),
        )
    }

    #[test]
    fn quadratic_gradient_examples() {
        let obj = Objective::build(&quadratic_cfg(), 6, 3).unwrap();
        let xs = obj.x_star().unwrap().to_vec();
        // At the optimum the gradient vanishes.
        let g = obj.true_gradient(&xs).unwrap();
        assert!(g.iter().all(|&v| v.abs() < 1e-15));
        assert!((obj.value(&xs).unwrap() - obj.f_star()).abs() < 1e-15);

        // Unit offset in coordinate 0 with L_0 = 2 gives gradient (2, 0, ...).
        let mut x = xs.clone();
        x[0] += 1.0;
        let g = obj.true_gradient(&x).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-12);
        assert!(g[1..].iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn true_sign_vector_examples() {
        let obj = Objective::build(&quadratic_cfg(), 2, 5).unwrap();
        let xs = obj.x_star().unwrap().to_vec();
        // At the optimum every coordinate hits the sign(0) = +1 tie-break.
        let signs = obj.true_sign_vector(&xs).unwrap();
        assert!(signs.iter().all(|s| s == Sign::Plus));

        let mut x = xs.clone();
        x[0] += 1.0; // gradient (2, 0) -> (+, +)
        x[1] -= 1.5; // gradient (2, -3) -> (+, -)
        let g = obj.true_gradient(&x).unwrap();
        assert!(g[0] > 0.0 && g[1] < 0.0);
        let signs = obj.true_sign_vector(&x).unwrap();
        assert_eq!(signs.get(0), Sign::Plus);
        assert_eq!(signs.get(1), Sign::Minus);
    }

    #[test]
    fn full_batch_equals_true_gradient() {
        for (cfg, dim) in [
            (quadratic_cfg(), 6),
            (logistic_cfg(40), 5),
            {
                let (c, d) = mlp_cfg();
                (c, d)
            },
        ] {
            let obj = Objective::build(&cfg, dim, 11).unwrap();
            let x: Vec<f64> = (0..dim).map(|n| 0.1 * (n as f64) - 0.2).collect();
            let full = MiniBatch {
                indices: (0..obj.samples() as u32).collect(),
            };
            let sg = obj.stochastic_gradient(&x, &full).unwrap();
            let tg = obj.true_gradient(&x).unwrap();
            for (a, b) in sg.iter().zip(&tg) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn batch_expectation_is_unbiased() {
        // All 15 batches of size 2 from a 6-sample toy set average exactly
        // to the true gradient.
        let cfg = ObjectiveConfig::Quadratic {
            samples: 6,
            noise: 0.7,
            lipschitz_min: 1.0,
            lipschitz_max: 3.0,
            initial_offset: 1.0,
            f_star: 0.0,
        };
        let obj = Objective::build(&cfg, 4, 9).unwrap();
        let x = obj.initial_point();
        let tg = obj.true_gradient(&x).unwrap();

        let mut mean = [0.0; 4];
        let mut count = 0;
        for a in 0..6u32 {
            for b in (a + 1)..6u32 {
                let g = obj
                    .stochastic_gradient(&x, &MiniBatch { indices: vec![a, b] })
                    .unwrap();
                for (m, v) in mean.iter_mut().zip(&g) {
                    *m += v;
                }
                count += 1;
            }
        }
        assert_eq!(count, 15);
        for (m, t) in mean.iter().zip(&tg) {
            assert!((m / 15.0 - t).abs() <= 1e-12 * (1.0 + t.abs()));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        // Central differences at 100+ seeded (point, coordinate) pairs per
        // non-quadratic kind.
        let cases: Vec<(ObjectiveConfig, usize)> = vec![
            (logistic_cfg(50), 7),
            {
                let (c, d) = mlp_cfg();
                (c, d)
            },
        ];
        for (cfg, dim) in cases {
            let obj = Objective::build(&cfg, dim, 21).unwrap();
            let mut rng = RngStream::new(4, StreamId::new(Purpose::Trial, 9, 0));
            let mut points = 0;
            for trial in 0..20 {
                let x: Vec<f64> = (0..dim).map(|_| rng.normal(0.0, 0.6)).collect();
                let g = obj.true_gradient(&x).unwrap();
                for n in (0..dim).step_by(1.max(dim / 6)) {
                    let h = 1e-5 * (1.0 + x[n].abs());
                    let mut xp = x.clone();
                    xp[n] += h;
                    let mut xm = x.clone();
                    xm[n] -= h;
                    let fd = (obj.value(&xp).unwrap() - obj.value(&xm).unwrap()) / (2.0 * h);
                    let denom = g[n].abs().max(1e-3);
                    assert!(
                        (fd - g[n]).abs() / denom < 1e-6,
                        "{} trial {trial} coord {n}: fd {fd} vs {}",
                        obj.kind_name(),
                        g[n]
                    );
                    points += 1;
                }
            }
            assert!(points >= 100, "{}: only {points} FD points", obj.kind_name());
        }
    }

    #[test]
    fn quadratic_smoothness_has_equality_structure() {
        let obj = Objective::build(&quadratic_cfg(), 5, 13).unwrap();
        let mut rng = RngStream::new(6, StreamId::new(Purpose::Trial, 2, 0));
        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.normal(0.0, 1.0)).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.normal(0.0, 1.0)).collect();
            let (fx, gx) = obj.value_and_true_gradient(&x).unwrap();
            let fy = obj.value(&y).unwrap();
            let lin: f64 = gx.iter().zip(y.iter().zip(&x)).map(|(g, (yv, xv))| g * (yv - xv)).sum();
            let quad: f64 = obj
                .lipschitz()
                .iter()
                .zip(y.iter().zip(&x))
                .map(|(l, (yv, xv))| 0.5 * l * (yv - xv).powi(2))
                .sum();
            // For the separable quadratic the remainder equals the quadratic
            // form exactly.
            assert!((fy - fx - lin - quad).abs() < 1e-10 * (1.0 + fy.abs()));
        }
    }

    #[test]
    fn normalized_variance_stays_within_configured_noise() {
        let cfg = ObjectiveConfig::Quadratic {
            samples: 512,
            noise: 0.5,
            lipschitz_min: 1.0,
            lipschitz_max: 2.0,
            initial_offset: 1.0,
            f_star: 0.0,
        };
        let obj = Objective::build(&cfg, 8, 31).unwrap();
        let x = obj.initial_point();
        let mut rng = RngStream::new(31, StreamId::new(Purpose::Sigma, 7, 0));
        let est = obj.estimate_sigma(&x, 4096, &mut rng).unwrap();
        assert_eq!(est.excluded, 0);
        // Multiplicative noise: the per-sample normalized deviation is the
        // noise itself. The max over 8 coordinates of a 512-sample second
        // moment stays within ~3 sigma of the configured 0.5.
        assert!(est.sigma > 0.4 && est.sigma < 0.55, "sigma {}", est.sigma);
    }

    #[test]
    fn sigma_excludes_flat_coordinates() {
        let obj = Objective::build(&quadratic_cfg(), 3, 17).unwrap();
        let mut x = obj.x_star().unwrap().to_vec();
        x[0] += 1.0; // only coordinate 0 has gradient signal
        let mut rng = RngStream::new(17, StreamId::new(Purpose::Sigma, 7, 0));
        let est = obj.estimate_sigma(&x, 1024, &mut rng).unwrap();
        assert_eq!(est.excluded, 2);
        assert_eq!(est.included, 1);
    }

    #[test]
    fn apply_update_examples() {
        let x = vec![0.5, -0.25, 0.3];
        let all_plus = SignVector::filled(3, Sign::Plus);
        let stepped = apply_update(&x, &all_plus, 0.125).unwrap();
        assert_eq!(stepped, vec![0.375, -0.375, 0.175]);

        // Opposite updates cancel exactly for these values.
        let mut mixed = SignVector::filled(3, Sign::Plus);
        mixed.set(1, Sign::Minus);
        let there = apply_update(&x, &mixed, 0.1).unwrap();
        let flipped: Vec<Sign> = mixed.iter().map(|s| s.flip()).collect();
        let back = apply_update(&there, &SignVector::pack(&flipped).unwrap(), 0.1).unwrap();
        assert_eq!(back, x);

        assert!(apply_update(&x, &SignVector::filled(2, Sign::Plus), 0.1).is_err());
        assert!(apply_update(&x, &all_plus, 0.0).is_err());
    }

    #[test]
    fn shards_partition_and_reproduce() {
        let shards = shard_indices(103, 4, 77);
        assert_eq!(shards.len(), 4);
        let mut all: Vec<u32> = shards.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        for s in &shards {
            assert!(s.len() == 25 || s.len() == 26);
        }
        assert_eq!(shards, shard_indices(103, 4, 77));
        assert_ne!(shards, shard_indices(103, 4, 78));
    }

    #[test]
    fn minibatch_sampling_respects_shard() {
        let shard: Vec<u32> = (10..60).collect();
        let mut rng = RngStream::new(3, StreamId::new(Purpose::Batch, 0, 1));
        let b = MiniBatch::sample(&shard, 20, &mut rng).unwrap();
        assert_eq!(b.indices.len(), 20);
        assert!(b.indices.iter().all(|i| shard.contains(i)));
        let mut sorted = b.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 20);
        assert!(MiniBatch::sample(&shard, 51, &mut rng).is_err());
        assert!(MiniBatch::sample(&shard, 0, &mut rng).is_err());
    }

    #[test]
    fn csv_import_round_trip() {
        let dir = std::env::temp_dir().join(format!("signvote_csv_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("toy.csv");
        std::fs::write(&path, "a,b,label\n0.5,1.0,1\n-0.5,0.25,0\n1.5,-2.0,1\n0.0,0.5,0\n")
            .unwrap();
        let cfg = ObjectiveConfig::Logistic {
            samples: 0,
            class_balance: 0.5,
            separation: 0.3,
            f_star_refine: 0,
            data_csv: Some(path.to_str().unwrap().to_string()),
        };
        let obj = Objective::build(&cfg, 2, 1).unwrap();
        assert_eq!(obj.samples(), 4);
        assert!(obj.value(&[0.0, 0.0]).unwrap() > 0.0);

        std::fs::write(&path, "a,b,label\n0.5,1.0,7\n").unwrap();
        assert!(Objective::build(&cfg, 2, 1).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn best_found_refinement_descends() {
        let cfg = ObjectiveConfig::Logistic {
            samples: 80,
            class_balance: 0.5,
            separation: 0.8,
            f_star_refine: 150,
            data_csv: None,
        };
        let obj = Objective::build(&cfg, 4, 23).unwrap();
        let f1 = obj.value(&obj.initial_point()).unwrap();
        let best = obj.f_best_found().unwrap();
        assert!(best < f1);
        assert!(best >= obj.f_star());
    }
}
