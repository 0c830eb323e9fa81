//! Gradient-based training: closed-form gradients of the mini-batch
//! objective, Adam updates, the training loops for both estimators, and a
//! central-difference verifier for the analytic gradients.
//!
//! Gradients are derived by hand through the softmax likelihood, the
//! rectifier, the Gaussian densities, and the reparameterization
//! `x = mu + exp(log_sigma) .* eps` with the noise held fixed. Two
//! consequences of that chain worth noting: the posterior log density
//! evaluated at its own sample contributes nothing to the mean gradient
//! and exactly `-1` per entry to the log-scale gradient, and the
//! rectifier's sub-derivative at zero is taken to be zero, so entries the
//! sample pushed negative receive no data-term gradient.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::dataset::{TripletDataset, TripletRecord};
use crate::model::{
    batch_objective, choice_probabilities, pair_similarities, sample_embedding, triplet_log_prob,
    BatchObjective, SpikeSlabPrior, SpoSEParams, VariationalParams,
};
use crate::pruning::{select_dimensions_by_mass, selected_dim_count, StabilityTracker};
use crate::{Error, Result};

/// Gradients of the batch objective with respect to the variational
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub mu: Array2<f64>,
    pub log_sigma: Array2<f64>,
}

/// Derivative of the spike-and-slab log density with respect to each entry.
fn prior_dlogp_dx(x: &Array2<f64>, prior: &SpikeSlabPrior) -> Array2<f64> {
    let log_pi = prior.pi_spike.ln();
    let log_one_minus_pi = (1.0 - prior.pi_spike).ln();
    let (s1, s2) = (prior.sigma_spike, prior.sigma_slab);
    let (inv_var1, inv_var2) = (1.0 / (s1 * s1), 1.0 / (s2 * s2));
    x.mapv(|v| {
        let lp1 = log_pi - s1.ln() - 0.5 * v * v * inv_var1;
        let lp2 = log_one_minus_pi - s2.ln() - 0.5 * v * v * inv_var2;
        let mx = lp1.max(lp2);
        let (e1, e2) = ((lp1 - mx).exp(), (lp2 - mx).exp());
        let w1 = e1 / (e1 + e2);
        -v * (w1 * inv_var1 + (1.0 - w1) * inv_var2)
    })
}

/// Accumulate the gradient of `sum_b log p_b` with respect to the rectified
/// embedding rows. Only rows of objects present in the batch are touched.
fn data_grad_x_pos(x_pos: &Array2<f64>, batch: &[TripletRecord]) -> Array2<f64> {
    let mut grad = Array2::zeros(x_pos.dim());
    for rec in batch {
        let t = rec.triplet();
        let sims = pair_similarities(x_pos, t);
        let probs = choice_probabilities(sims);
        let mut coef = [-probs[0], -probs[1], -probs[2]];
        coef[rec.pair_index()] += 1.0;
        let [a, b, c] = t.map(|i| i as usize);
        for (u, v, w) in [(a, b, coef[0]), (a, c, coef[1]), (b, c, coef[2])] {
            for j in 0..x_pos.ncols() {
                grad[[u, j]] += w * x_pos[[v, j]];
                grad[[v, j]] += w * x_pos[[u, j]];
            }
        }
    }
    grad
}

/// Objective value and its gradients at one reparameterized sample, sharing
/// the forward pass.
pub fn batch_objective_with_grad(
    params: &VariationalParams,
    prior: &SpikeSlabPrior,
    batch: &[TripletRecord],
    n: usize,
    noise: &Array2<f64>,
) -> Result<(BatchObjective, Gradients)> {
    let objective = batch_objective(params, prior, batch, n, noise)?;
    let sample = sample_embedding(params, noise)?;

    let data_grad = data_grad_x_pos(&sample.x_pos, batch);
    let prior_dx = prior_dlogp_dx(&sample.x, prior);

    let b = batch.len() as f64;
    let n = n as f64;
    let dim = params.mu.dim();
    let mut grad_mu = Array2::zeros(dim);
    let mut grad_log_sigma = Array2::zeros(dim);
    for ((i, j), g_mu) in grad_mu.indexed_iter_mut() {
        let x = sample.x[[i, j]];
        let active = if x > 0.0 { 1.0 } else { 0.0 };
        let data_dx = data_grad[[i, j]] * active / b;
        let sigma_eps = x - params.mu[[i, j]];
        *g_mu = -prior_dx[[i, j]] / n - data_dx;
        grad_log_sigma[[i, j]] = (-1.0 - prior_dx[[i, j]] * sigma_eps) / n - data_dx * sigma_eps;
    }
    Ok((objective, Gradients { mu: grad_mu, log_sigma: grad_log_sigma }))
}

/// Analytic gradients of [`batch_objective`] with respect to `mu` and
/// `log_sigma` at the given noise.
pub fn grad_batch_objective(
    params: &VariationalParams,
    prior: &SpikeSlabPrior,
    batch: &[TripletRecord],
    n: usize,
    noise: &Array2<f64>,
) -> Result<Gradients> {
    Ok(batch_objective_with_grad(params, prior, batch, n, noise)?.1)
}

/// Central finite differences of [`batch_objective`], entry by entry. The
/// verification oracle for [`grad_batch_objective`]; quadratic cost, test
/// use only.
pub fn finite_difference_grad(
    params: &VariationalParams,
    prior: &SpikeSlabPrior,
    batch: &[TripletRecord],
    n: usize,
    noise: &Array2<f64>,
    step: f64,
) -> Result<Gradients> {
    let eval = |p: &VariationalParams| -> Result<f64> {
        Ok(batch_objective(p, prior, batch, n, noise)?.total)
    };
    let dim = params.mu.dim();
    let mut grad_mu = Array2::zeros(dim);
    let mut grad_log_sigma = Array2::zeros(dim);
    let mut work = params.clone();
    for i in 0..dim.0 {
        for j in 0..dim.1 {
            let orig = work.mu[[i, j]];
            work.mu[[i, j]] = orig + step;
            let up = eval(&work)?;
            work.mu[[i, j]] = orig - step;
            let down = eval(&work)?;
            work.mu[[i, j]] = orig;
            grad_mu[[i, j]] = (up - down) / (2.0 * step);

            let orig = work.log_sigma[[i, j]];
            work.log_sigma[[i, j]] = orig + step;
            let up = eval(&work)?;
            work.log_sigma[[i, j]] = orig - step;
            let down = eval(&work)?;
            work.log_sigma[[i, j]] = orig;
            grad_log_sigma[[i, j]] = (up - down) / (2.0 * step);
        }
    }
    Ok(Gradients { mu: grad_mu, log_sigma: grad_log_sigma })
}

/// Adam moment estimates for the two parameter tensors, plus the update
/// hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment_mu: Array2<f64>,
    pub second_moment_mu: Array2<f64>,
    pub first_moment_log_sigma: Array2<f64>,
    pub second_moment_log_sigma: Array2<f64>,
    pub step: u64,
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl AdamState {
    pub fn new(num_objects: usize, num_dims: usize, eta: f64) -> Self {
        Self {
            first_moment_mu: Array2::zeros((num_objects, num_dims)),
            second_moment_mu: Array2::zeros((num_objects, num_dims)),
            first_moment_log_sigma: Array2::zeros((num_objects, num_dims)),
            second_moment_log_sigma: Array2::zeros((num_objects, num_dims)),
            step: 0,
            eta,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
        }
    }
}

fn adam_update_tensor(
    param: &mut Array2<f64>,
    grad: &Array2<f64>,
    first: &mut Array2<f64>,
    second: &mut Array2<f64>,
    t: u64,
    eta: f64,
    beta1: f64,
    beta2: f64,
    eps_hat: f64,
) {
    let c1 = 1.0 - beta1.powi(t as i32);
    let c2 = 1.0 - beta2.powi(t as i32);
    for (((p, &g), m), v) in param
        .iter_mut()
        .zip(grad.iter())
        .zip(first.iter_mut())
        .zip(second.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= eta * m_hat / (v_hat.sqrt() + eps_hat);
    }
}

/// One bias-corrected Adam update of both parameter tensors.
pub fn adam_step(
    params: &mut VariationalParams,
    grads: &Gradients,
    state: &mut AdamState,
) -> Result<()> {
    if let Some(bad) = grads
        .mu
        .iter()
        .chain(grads.log_sigma.iter())
        .find(|g| !g.is_finite())
    {
        return Err(Error::NonFiniteGradient {
            step: state.step,
            msg: format!("gradient entry {bad}"),
        });
    }
    state.step += 1;
    adam_update_tensor(
        &mut params.mu,
        &grads.mu,
        &mut state.first_moment_mu,
        &mut state.second_moment_mu,
        state.step,
        state.eta,
        state.beta1,
        state.beta2,
        state.eps_hat,
    );
    adam_update_tensor(
        &mut params.log_sigma,
        &grads.log_sigma,
        &mut state.first_moment_log_sigma,
        &mut state.second_moment_log_sigma,
        state.step,
        state.eta,
        state.beta1,
        state.beta2,
        state.eps_hat,
    );
    Ok(())
}

/// Training-run configuration shared by both estimators.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub prior: SpikeSlabPrior,
    /// Initial (pre-pruning) embedding dimensionality.
    pub d_init: usize,
    /// Epochs the selected-dimension count must stay flat to converge.
    pub stability_window: usize,
    /// Validation cross-entropy cadence, in epochs.
    pub eval_every: usize,
    /// Adam learning rate.
    pub eta: f64,
    /// FDR level for per-epoch dimension counting.
    pub fdr_alpha: f64,
    /// A dimension needs strictly more significant objects than this.
    pub reliability_threshold: usize,
    /// When false, keep training to `max_epochs` after convergence fires
    /// (the firing epoch is still recorded).
    pub stop_on_convergence: bool,
    /// Per-object l1 mass cutoff used to count MAP dimensions.
    pub spose_mass_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            max_epochs: 2000,
            seed: 0,
            prior: SpikeSlabPrior::default(),
            d_init: 100,
            stability_window: 500,
            eval_every: 1,
            eta: 1e-3,
            fdr_alpha: 0.05,
            reliability_threshold: 5,
            stop_on_convergence: true,
            spose_mass_threshold: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if self.d_init == 0 {
            return Err(Error::InvalidArgument("d_init must be at least 1".into()));
        }
        if self.stability_window == 0 {
            return Err(Error::InvalidArgument(
                "stability_window must be at least 1".into(),
            ));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidArgument("eval_every must be at least 1".into()));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "eta must be positive and finite, got {}",
                self.eta
            )));
        }
        if !(self.fdr_alpha > 0.0 && self.fdr_alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fdr_alpha must lie in (0, 1), got {}",
                self.fdr_alpha
            )));
        }
        SpikeSlabPrior::new(
            self.prior.pi_spike,
            self.prior.sigma_spike,
            self.prior.sigma_slab,
        )?;
        Ok(())
    }
}

/// Per-epoch training statistics; one JSONL line each.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub total: f64,
    pub data_term: f64,
    pub complexity_term: f64,
    pub val_xent: Option<f64>,
    pub n_dims_selected: usize,
}

/// The full trace of a training run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
    /// Sample standard deviation of the initial means (the scale that also
    /// sets the initial log-sigma to `-1/s`).
    pub init_mu_std: f64,
    /// First epoch at which the stability criterion fired, if it did.
    pub converged_epoch: Option<usize>,
}

impl TrainLog {
    /// Stream one JSON object per epoch.
    pub fn write_jsonl<W: std::io::Write>(&self, writer: W) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(writer);
        for epoch in &self.epochs {
            serde_json::to_writer(&mut w, epoch)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// The selected-dimension count per epoch.
    pub fn dim_trajectory(&self) -> Vec<usize> {
        self.epochs.iter().map(|e| e.n_dims_selected).collect()
    }

    pub fn final_val_xent(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.val_xent)
    }
}

/// Mean negative log likelihood of a dataset under a fixed rectified
/// embedding.
pub fn cross_entropy(x_pos: &Array2<f64>, data: &TripletDataset) -> f64 {
    let total: f64 = data
        .records()
        .iter()
        .map(|rec| -triplet_log_prob(x_pos, rec))
        .sum();
    total / data.len() as f64
}

fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let values: Vec<f64> = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Array2::from_shape_vec((rows, cols), values).expect("shape matches draw count")
}

/// Gaussian fan-in initialization of the means, scale `sqrt(2 / d_init)`,
/// and a constant log-sigma of `-1 / s` where `s` is the sample standard
/// deviation of the drawn means. Returns the parameters and `s`.
fn init_params(
    num_objects: usize,
    d_init: usize,
    rng: &mut ChaCha8Rng,
) -> (VariationalParams, f64) {
    let std0 = (2.0 / d_init as f64).sqrt();
    let mu = standard_normal_matrix(num_objects, d_init, rng).mapv(|v| v * std0);
    let count = (num_objects * d_init) as f64;
    let mean = mu.sum() / count;
    let var = mu.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
    let s_mu = var.sqrt();
    let log_sigma = Array2::from_elem((num_objects, d_init), -1.0 / s_mu);
    (
        VariationalParams::new(mu, log_sigma).expect("shapes agree by construction"),
        s_mu,
    )
}

fn check_compatible(data: &TripletDataset, val: &TripletDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training data is empty".into()));
    }
    if !val.is_empty() && val.num_objects() != data.num_objects() {
        return Err(Error::InvalidArgument(format!(
            "validation set is over {} objects but training data over {}",
            val.num_objects(),
            data.num_objects()
        )));
    }
    Ok(())
}

/// Train the variational estimator.
///
/// Each epoch shuffles the data under the run seed, draws fresh noise per
/// mini-batch, applies Adam to means and log-scales, then recounts the
/// selected dimensions. Training stops at `max_epochs`, or earlier once
/// the count has been flat for `stability_window` epochs (unless
/// `stop_on_convergence` is off). A non-finite objective or gradient
/// aborts with the last finite state attached.
pub fn train(
    data: &TripletDataset,
    val: &TripletDataset,
    cfg: &TrainConfig,
) -> Result<(VariationalParams, TrainLog)> {
    cfg.validate()?;
    check_compatible(data, val)?;

    let m = data.num_objects();
    let n = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut params, init_mu_std) = init_params(m, cfg.d_init, &mut rng);
    let mut adam = AdamState::new(m, cfg.d_init, cfg.eta);
    let mut tracker = StabilityTracker::new(cfg.stability_window)?;
    let mut log = TrainLog {
        epochs: Vec::new(),
        init_mu_std,
        converged_epoch: None,
    };

    let mut indices: Vec<usize> = (0..n).collect();
    for epoch in 1..=cfg.max_epochs {
        indices.shuffle(&mut rng);
        let mut sums = BatchObjective {
            total: 0.0,
            data_term: 0.0,
            complexity_term: 0.0,
        };
        let mut batches = 0usize;
        for chunk in indices.chunks(cfg.batch_size) {
            let batch: Vec<TripletRecord> =
                chunk.iter().map(|&i| data.records()[i]).collect();
            let noise = standard_normal_matrix(m, cfg.d_init, &mut rng);
            let (objective, grads) =
                batch_objective_with_grad(&params, &cfg.prior, &batch, n, &noise)?;
            if !objective.total.is_finite() {
                return Err(diverged_vice(epoch, &params, cfg, &adam, log));
            }
            if adam_step(&mut params, &grads, &mut adam).is_err() {
                return Err(diverged_vice(epoch, &params, cfg, &adam, log));
            }
            sums.total += objective.total;
            sums.data_term += objective.data_term;
            sums.complexity_term += objective.complexity_term;
            batches += 1;
        }

        let n_dims = selected_dim_count(&params, cfg.fdr_alpha, cfg.reliability_threshold);
        tracker.push(n_dims);
        if tracker.check_convergence() && log.converged_epoch.is_none() {
            log.converged_epoch = Some(epoch);
        }
        let stopping = epoch == cfg.max_epochs
            || (cfg.stop_on_convergence && log.converged_epoch.is_some());
        // The stopping epoch always gets a validation score, so the log's
        // final cross-entropy exists regardless of where training halts.
        let val_xent = if !val.is_empty() && (epoch % cfg.eval_every == 0 || stopping) {
            Some(cross_entropy(&params.mu.mapv(|v| v.max(0.0)), val))
        } else {
            None
        };
        let scale = batches as f64;
        log.epochs.push(EpochStats {
            epoch,
            total: sums.total / scale,
            data_term: sums.data_term / scale,
            complexity_term: sums.complexity_term / scale,
            val_xent,
            n_dims_selected: n_dims,
        });
        if stopping {
            break;
        }
    }
    Ok((params, log))
}

fn diverged_vice(
    epoch: usize,
    params: &VariationalParams,
    cfg: &TrainConfig,
    adam: &AdamState,
    log: TrainLog,
) -> Error {
    Error::Diverged {
        epoch,
        checkpoint: Box::new(Checkpoint::from_variational(params, cfg.prior, adam.step)),
        log: Box::new(log),
    }
}

/// Train the MAP baseline: minimize the l1-penalized negative log
/// likelihood with Adam, projecting onto the non-negative orthant after
/// every step.
///
/// The per-batch penalty is scaled by `batch_size / n` so that one epoch's
/// batch objectives sum to the full-dataset objective. Dimension counts
/// (for the log and the stability criterion) use the per-object l1 mass
/// rule, since a MAP fit has no posterior scales.
pub fn train_spose(
    data: &TripletDataset,
    val: &TripletDataset,
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<(SpoSEParams, TrainLog)> {
    cfg.validate()?;
    check_compatible(data, val)?;
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }

    let m = data.num_objects();
    let n = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Same fan-in scale as the variational initializer, folded to the
    // non-negative orthant.
    let (init, init_mu_std) = init_params(m, cfg.d_init, &mut rng);
    let mut x = init.mu.mapv(f64::abs);
    let mut first = Array2::zeros((m, cfg.d_init));
    let mut second = Array2::zeros((m, cfg.d_init));
    let mut step = 0u64;
    let mut tracker = StabilityTracker::new(cfg.stability_window)?;
    let mut log = TrainLog {
        epochs: Vec::new(),
        init_mu_std,
        converged_epoch: None,
    };

    let mut indices: Vec<usize> = (0..n).collect();
    for epoch in 1..=cfg.max_epochs {
        indices.shuffle(&mut rng);
        let mut sums = (0.0f64, 0.0f64, 0.0f64);
        let mut batches = 0usize;
        for chunk in indices.chunks(cfg.batch_size) {
            let batch: Vec<TripletRecord> =
                chunk.iter().map(|&i| data.records()[i]).collect();
            let b = batch.len() as f64;

            let data_sum: f64 = batch.iter().map(|rec| triplet_log_prob(&x, rec)).sum();
            let data_term = data_sum / b;
            let complexity_term = lambda * x.sum() / n as f64;
            let total = complexity_term - data_term;
            if !total.is_finite() {
                return Err(diverged_spose(epoch, &x, lambda, step, log));
            }

            let data_grad = data_grad_x_pos(&x, &batch);
            let penalty = lambda * b / n as f64;
            let grad = data_grad.mapv(|g| -g / b + penalty / b);
            // Batch objective: -sum_b log p_b + (b/n) * lambda * sum(x);
            // dividing by b gives the per-record form whose gradient is
            // -data_grad/b + lambda/n.
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(diverged_spose(epoch, &x, lambda, step, log));
            }
            step += 1;
            adam_update_tensor(
                &mut x, &grad, &mut first, &mut second, step, cfg.eta, 0.9, 0.999, 1e-8,
            );
            x.mapv_inplace(|v| v.max(0.0));

            sums.0 += total;
            sums.1 += data_term;
            sums.2 += complexity_term;
            batches += 1;
        }

        let selection = select_dimensions_by_mass(&x, cfg.spose_mass_threshold);
        let n_dims = selection.iter().filter(|d| d.selected).count();
        tracker.push(n_dims);
        if tracker.check_convergence() && log.converged_epoch.is_none() {
            log.converged_epoch = Some(epoch);
        }
        let stopping = epoch == cfg.max_epochs
            || (cfg.stop_on_convergence && log.converged_epoch.is_some());
        let val_xent = if !val.is_empty() && (epoch % cfg.eval_every == 0 || stopping) {
            Some(cross_entropy(&x, val))
        } else {
            None
        };
        let scale = batches as f64;
        log.epochs.push(EpochStats {
            epoch,
            total: sums.0 / scale,
            data_term: sums.1 / scale,
            complexity_term: sums.2 / scale,
            val_xent,
            n_dims_selected: n_dims,
        });
        if stopping {
            break;
        }
    }
    let params = SpoSEParams::new(x, lambda).expect("projection keeps entries non-negative");
    Ok((params, log))
}

fn diverged_spose(epoch: usize, x: &Array2<f64>, lambda: f64, step: u64, log: TrainLog) -> Error {
    let params = SpoSEParams {
        x: x.clone(),
        lambda,
    };
    Error::Diverged {
        epoch,
        checkpoint: Box::new(Checkpoint::from_spose(&params, step)),
        log: Box::new(log),
    }
}
