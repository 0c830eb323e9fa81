//! The variational embedding model: reparameterized Gaussian posterior,
//! triplet choice likelihood, spike-and-slab prior, and the training
//! objectives for both the variational estimator and the l1 MAP baseline.
//!
//! The choice model scores a pair `{a, b}` by the dot product of the
//! rectified embedding rows and turns the three pair similarities of a
//! triplet into choice probabilities with a softmax. All log densities go
//! through log-sum-exp, so values stay finite for any finite input.

use ndarray::Array2;

use crate::dataset::{canonical_pairs, ObjectIndex, TripletDataset, TripletRecord};
use crate::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// Per-object, per-dimension Gaussian posterior: means and log standard
/// deviations. Storing `log sigma` keeps the scale positive under
/// unconstrained gradient updates.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalParams {
    pub mu: Array2<f64>,
    pub log_sigma: Array2<f64>,
}

impl VariationalParams {
    pub fn new(mu: Array2<f64>, log_sigma: Array2<f64>) -> Result<Self> {
        if mu.dim() != log_sigma.dim() {
            return Err(Error::ShapeMismatch(format!(
                "mu is {:?} but log_sigma is {:?}",
                mu.dim(),
                log_sigma.dim()
            )));
        }
        if mu.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "embedding needs at least one dimension".into(),
            ));
        }
        Ok(Self { mu, log_sigma })
    }

    /// Number of objects.
    pub fn num_objects(&self) -> usize {
        self.mu.nrows()
    }

    /// Embedding dimensionality.
    pub fn num_dims(&self) -> usize {
        self.mu.ncols()
    }

    /// Standard deviations `exp(log_sigma)`.
    pub fn sigma(&self) -> Array2<f64> {
        self.log_sigma.mapv(f64::exp)
    }
}

/// Two-component zero-mean Gaussian mixture prior: a narrow spike for
/// near-zero entries and a wide slab for active ones.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpikeSlabPrior {
    pub pi_spike: f64,
    pub sigma_spike: f64,
    pub sigma_slab: f64,
}

impl SpikeSlabPrior {
    /// Validates `0 < pi_spike < 1` and `0 < sigma_spike < sigma_slab`
    /// (strict; the spike must be the narrow component).
    pub fn new(pi_spike: f64, sigma_spike: f64, sigma_slab: f64) -> Result<Self> {
        if !(pi_spike > 0.0 && pi_spike < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pi_spike must lie strictly in (0, 1), got {pi_spike}"
            )));
        }
        if !(sigma_spike > 0.0) || !(sigma_slab > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior scales must be positive, got spike {sigma_spike}, slab {sigma_slab}"
            )));
        }
        if sigma_spike >= sigma_slab {
            return Err(Error::InvalidArgument(format!(
                "sigma_spike must be strictly smaller than sigma_slab, got {sigma_spike} >= {sigma_slab}"
            )));
        }
        Ok(Self {
            pi_spike,
            sigma_spike,
            sigma_slab,
        })
    }
}

impl Default for SpikeSlabPrior {
    /// The default hyperparameters `sigma_spike = 0.25`, `sigma_slab = 1.0`,
    /// `pi_spike = 0.5`.
    fn default() -> Self {
        Self {
            pi_spike: 0.5,
            sigma_spike: 0.25,
            sigma_slab: 1.0,
        }
    }
}

/// A reparameterized draw from the posterior: the raw sample `x` and its
/// rectification `x_pos = max(x, 0)` used by the likelihood.
#[derive(Debug, Clone)]
pub struct EmbeddingSample {
    pub x: Array2<f64>,
    pub x_pos: Array2<f64>,
}

/// Draw `x = mu + sigma .* noise` and rectify.
pub fn sample_embedding(params: &VariationalParams, noise: &Array2<f64>) -> Result<EmbeddingSample> {
    if noise.dim() != params.mu.dim() {
        return Err(Error::ShapeMismatch(format!(
            "noise is {:?} but parameters are {:?}",
            noise.dim(),
            params.mu.dim()
        )));
    }
    let x = &params.mu + &(params.log_sigma.mapv(f64::exp) * noise);
    let x_pos = x.mapv(|v| v.max(0.0));
    Ok(EmbeddingSample { x, x_pos })
}

/// Softmax over the three pair similarities of a triplet, stabilized by
/// subtracting the maximum similarity before exponentiation.
pub fn choice_probabilities(sims: [f64; 3]) -> [f64; 3] {
    let mx = sims[0].max(sims[1]).max(sims[2]);
    let exps = sims.map(|s| (s - mx).exp());
    let total: f64 = exps.iter().sum();
    exps.map(|e| e / total)
}

/// The three pairwise similarities of a triplet under a rectified
/// embedding, in canonical pair order.
pub fn pair_similarities(x_pos: &Array2<f64>, triplet: [ObjectIndex; 3]) -> [f64; 3] {
    canonical_pairs(sorted(triplet)).map(|[a, b]| {
        x_pos
            .row(a as usize)
            .iter()
            .zip(x_pos.row(b as usize).iter())
            .map(|(u, v)| u * v)
            .sum()
    })
}

/// Choice probabilities for a triplet under a rectified embedding, in
/// canonical pair order.
pub fn pair_probabilities(x_pos: &Array2<f64>, triplet: [ObjectIndex; 3]) -> [f64; 3] {
    choice_probabilities(pair_similarities(x_pos, triplet))
}

fn sorted(mut t: [ObjectIndex; 3]) -> [ObjectIndex; 3] {
    t.sort_unstable();
    t
}

/// Log probability that the record's chosen pair is picked given the
/// rectified embedding.
///
/// Panics if a record index is out of range for `x_pos`.
pub fn triplet_log_prob(x_pos: &Array2<f64>, record: &TripletRecord) -> f64 {
    let sims = pair_similarities(x_pos, record.triplet());
    let mx = sims[0].max(sims[1]).max(sims[2]);
    let lse = mx + sims.iter().map(|s| (s - mx).exp()).sum::<f64>().ln();
    sims[record.pair_index()] - lse
}

fn log_normal_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    -0.5 * LN_2PI - sigma.ln() - 0.5 * z * z
}

fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let mx = a.max(b);
    if mx == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    mx + ((a - mx).exp() + (b - mx).exp()).ln()
}

/// Log density of the spike-and-slab mixture at every entry of `x`, summed.
pub fn prior_log_density(x: &Array2<f64>, prior: &SpikeSlabPrior) -> f64 {
    let log_pi = prior.pi_spike.ln();
    let log_one_minus_pi = (1.0 - prior.pi_spike).ln();
    x.iter()
        .map(|&v| {
            log_sum_exp2(
                log_pi + log_normal_pdf(v, 0.0, prior.sigma_spike),
                log_one_minus_pi + log_normal_pdf(v, 0.0, prior.sigma_slab),
            )
        })
        .sum()
}

/// Log density of the mean-field Gaussian posterior at `x`, summed over
/// entries.
pub fn variational_log_density(x: &Array2<f64>, params: &VariationalParams) -> f64 {
    x.iter()
        .zip(params.mu.iter())
        .zip(params.log_sigma.iter())
        .map(|((&v, &mu), &ls)| {
            let z = (v - mu) * (-ls).exp();
            -0.5 * LN_2PI - ls - 0.5 * z * z
        })
        .sum()
}

/// The three terms of the single-sample mini-batch objective.
///
/// `total = complexity_term - data_term`, where the data term is the mean
/// log likelihood over the batch and the complexity term is the
/// `1/n`-scaled gap between posterior and prior log densities at the raw
/// (pre-rectification) sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchObjective {
    pub total: f64,
    pub data_term: f64,
    pub complexity_term: f64,
}

/// Evaluate the mini-batch objective at one reparameterized sample.
///
/// `n` is the full training-set size; the batch is a subset of it.
pub fn batch_objective(
    params: &VariationalParams,
    prior: &SpikeSlabPrior,
    batch: &[TripletRecord],
    n: usize,
    noise: &Array2<f64>,
) -> Result<BatchObjective> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch must contain a triplet".into()));
    }
    if n < batch.len() {
        return Err(Error::InvalidArgument(format!(
            "training-set size n = {n} is smaller than the batch ({})",
            batch.len()
        )));
    }
    let sample = sample_embedding(params, noise)?;
    let data_term = batch
        .iter()
        .map(|rec| triplet_log_prob(&sample.x_pos, rec))
        .sum::<f64>()
        / batch.len() as f64;
    let complexity_term = (variational_log_density(&sample.x, params)
        - prior_log_density(&sample.x, prior))
        / n as f64;
    Ok(BatchObjective {
        total: complexity_term - data_term,
        data_term,
        complexity_term,
    })
}

/// The MAP baseline's parameters: a non-negative embedding and the l1
/// penalty strength.
#[derive(Debug, Clone, PartialEq)]
pub struct SpoSEParams {
    pub x: Array2<f64>,
    pub lambda: f64,
}

impl SpoSEParams {
    pub fn new(x: Array2<f64>, lambda: f64) -> Result<Self> {
        if let Some(v) = x.iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "embedding entries must be non-negative, found {v}"
            )));
        }
        if lambda < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "lambda must be non-negative, got {lambda}"
            )));
        }
        Ok(Self { x, lambda })
    }
}

/// Full-dataset MAP objective: negative log likelihood plus
/// `lambda * sum(x)`. The likelihood's additive constant from uniform
/// triplet sampling is dropped.
pub fn spose_objective(params: &SpoSEParams, data: &TripletDataset) -> Result<f64> {
    if let Some(v) = params.x.iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "embedding entries must be non-negative, found {v}"
        )));
    }
    let nll: f64 = data
        .records()
        .iter()
        .map(|rec| -triplet_log_prob(&params.x, rec))
        .sum();
    Ok(nll + params.lambda * params.x.sum())
}
