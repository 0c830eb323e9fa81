//! Posterior prediction and model evaluation: Monte-Carlo choice
//! distributions, accuracy against human choices, KL divergence against
//! response distributions, cross-seed reproducibility of embedding
//! dimensions, paired significance tests, and top-k label reports.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::{canonical_pairs, ObjectIndex, ResponseDistribution, TripletDataset};
use crate::model::{choice_probabilities, pair_probabilities, VariationalParams};
use crate::pruning::PrunedEmbedding;
use crate::{Error, Result};

/// Floor applied to model probabilities before log ratios; Monte-Carlo
/// estimates can be exactly zero at small sample counts.
const PROB_FLOOR: f64 = 1e-12;

/// Correlation a dimension's best match must exceed to count as
/// reproduced.
const REPRODUCIBILITY_CUTOFF: f64 = 0.8;

/// Model choice distribution over one triplet, canonical pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    pub triplet: [ObjectIndex; 3],
    pub probabilities: [f64; 3],
}

impl PredictiveDistribution {
    /// The predicted pair: argmax probability, ties broken by canonical
    /// pair order.
    pub fn predicted_pair(&self) -> [ObjectIndex; 2] {
        let mut best = 0;
        for t in 1..3 {
            if self.probabilities[t] > self.probabilities[best] {
                best = t;
            }
        }
        canonical_pairs(self.triplet)[best]
    }
}

fn sorted_distinct(mut t: [ObjectIndex; 3]) -> Result<[ObjectIndex; 3]> {
    t.sort_unstable();
    if t[0] == t[1] || t[1] == t[2] {
        return Err(Error::InvalidArgument(format!(
            "triplet indices must be distinct, got {t:?}"
        )));
    }
    Ok(t)
}

fn predict_mc_with_rng(
    params: &VariationalParams,
    triplet: [ObjectIndex; 3],
    r: usize,
    rng: &mut ChaCha8Rng,
) -> [f64; 3] {
    let d = params.num_dims();
    let mut acc = [0.0f64; 3];
    let mut rows = [vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    for _ in 0..r {
        for (slot, &obj) in rows.iter_mut().zip(triplet.iter()) {
            let i = obj as usize;
            for j in 0..d {
                let eps: f64 = StandardNormal.sample(rng);
                let v = params.mu[[i, j]] + params.log_sigma[[i, j]].exp() * eps;
                slot[j] = v.max(0.0);
            }
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let sims = [
            dot(&rows[0], &rows[1]),
            dot(&rows[0], &rows[2]),
            dot(&rows[1], &rows[2]),
        ];
        let probs = choice_probabilities(sims);
        for (a, p) in acc.iter_mut().zip(probs) {
            *a += p;
        }
    }
    acc.map(|a| a / r as f64)
}

/// Monte-Carlo estimate of the choice distribution: average the
/// single-sample softmax over `r` reparameterized draws. Noise is drawn
/// only for the three triplet rows, ascending index order; deterministic
/// under `seed`.
pub fn predict_mc(
    params: &VariationalParams,
    triplet: [ObjectIndex; 3],
    r: usize,
    seed: u64,
) -> Result<PredictiveDistribution> {
    if r == 0 {
        return Err(Error::InvalidArgument(
            "Monte-Carlo sample count must be at least 1".into(),
        ));
    }
    let triplet = sorted_distinct(triplet)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(PredictiveDistribution {
        triplet,
        probabilities: predict_mc_with_rng(params, triplet, r, &mut rng),
    })
}

/// Monte-Carlo predictions for many triplets. Triplet `i` uses RNG stream
/// `i` of the seed, so results do not depend on evaluation order or
/// sharding.
pub fn predict_mc_many(
    params: &VariationalParams,
    triplets: &[[ObjectIndex; 3]],
    r: usize,
    seed: u64,
) -> Result<Vec<PredictiveDistribution>> {
    if r == 0 {
        return Err(Error::InvalidArgument(
            "Monte-Carlo sample count must be at least 1".into(),
        ));
    }
    triplets
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let triplet = sorted_distinct(t)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            Ok(PredictiveDistribution {
                triplet,
                probabilities: predict_mc_with_rng(params, triplet, r, &mut rng),
            })
        })
        .collect()
}

/// Deterministic argmax prediction from a fixed non-negative embedding;
/// ties resolve to the earliest canonical pair.
pub fn predict_map(x_pos: &Array2<f64>, triplet: [ObjectIndex; 3]) -> [ObjectIndex; 2] {
    let t = {
        let mut t = triplet;
        t.sort_unstable();
        t
    };
    let probs = pair_probabilities(x_pos, t);
    let mut best = 0;
    for i in 1..3 {
        if probs[i] > probs[best] {
            best = i;
        }
    }
    canonical_pairs(t)[best]
}

/// Fraction of records whose predicted pair matches the human choice.
/// `predictions` must align with `data.records()`.
pub fn accuracy(predictions: &[PredictiveDistribution], data: &TripletDataset) -> Result<f64> {
    if predictions.len() != data.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} records",
            predictions.len(),
            data.len()
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput("no records to score".into()));
    }
    let mut hits = 0usize;
    for (pred, rec) in predictions.iter().zip(data.records()) {
        if pred.triplet != rec.triplet() {
            return Err(Error::InvalidArgument(format!(
                "prediction triplet {:?} does not match record triplet {:?}",
                pred.triplet,
                rec.triplet()
            )));
        }
        if pred.predicted_pair() == rec.chosen() {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Accuracy of the deterministic argmax predictor over a dataset.
pub fn accuracy_map(x_pos: &Array2<f64>, data: &TripletDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("no records to score".into()));
    }
    let hits = data
        .records()
        .iter()
        .filter(|rec| predict_map(x_pos, rec.triplet()) == rec.chosen())
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// Which way the KL divergence is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// `KL(human || model)`: penalizes the model for assigning low
    /// probability to observed behavior. The default.
    HumanModel,
    /// `KL(model || human)`, for sensitivity checks.
    ModelHuman,
}

/// Mean KL divergence between matched human and model distributions.
/// The two sequences must cover exactly the same triplets.
pub fn mean_kl(
    model: &[PredictiveDistribution],
    human: &[ResponseDistribution],
    direction: KlDirection,
) -> Result<f64> {
    if model.len() != human.len() {
        return Err(Error::InvalidArgument(format!(
            "{} model distributions vs {} human distributions",
            model.len(),
            human.len()
        )));
    }
    if model.is_empty() {
        return Err(Error::EmptyInput("no distributions to compare".into()));
    }
    let mut by_triplet: Vec<(&PredictiveDistribution, &ResponseDistribution)> = Vec::new();
    let mut model_sorted: Vec<&PredictiveDistribution> = model.iter().collect();
    let mut human_sorted: Vec<&ResponseDistribution> = human.iter().collect();
    model_sorted.sort_by_key(|p| p.triplet);
    human_sorted.sort_by_key(|h| h.triplet());
    for (p, h) in model_sorted.iter().zip(human_sorted.iter()) {
        if p.triplet != h.triplet() {
            return Err(Error::InvalidArgument(format!(
                "triplet sets differ: model has {:?}, human has {:?}",
                p.triplet,
                h.triplet()
            )));
        }
        by_triplet.push((p, h));
    }

    let kl = |p: [f64; 3], q: [f64; 3]| -> f64 {
        p.iter()
            .zip(q)
            .map(|(&pi, qi)| {
                if pi == 0.0 {
                    0.0
                } else {
                    pi * (pi / qi.max(PROB_FLOOR)).ln()
                }
            })
            .sum()
    };
    let total: f64 = by_triplet
        .iter()
        .map(|(p, h)| match direction {
            KlDirection::HumanModel => kl(h.probabilities(), p.probabilities),
            KlDirection::ModelHuman => kl(p.probabilities, h.probabilities()),
        })
        .sum();
    Ok(total / by_triplet.len() as f64)
}

/// Pearson correlation; either column constant means zero correlation.
fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - mean_a) * (y - mean_b);
        var_a += (x - mean_a) * (x - mean_a);
        var_b += (y - mean_b) * (y - mean_b);
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    cov / (var_a * var_b).sqrt()
}

/// Cross-run dimension reproducibility.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReproducibilityReport {
    /// Per run: fraction of its dimensions whose best-match correlation,
    /// averaged over the other runs, exceeds 0.8.
    pub per_run_scores: Vec<f64>,
    pub mean_score: f64,
    pub mean_dims: f64,
    pub sd_dims: f64,
}

/// Score how well each run's dimensions are recovered by the other runs.
///
/// For every dimension of every run, find the most correlated dimension in
/// each other run, average those best-match correlations, and count the
/// dimension as reproduced when the average exceeds 0.8.
pub fn reproducibility(runs: &[PrunedEmbedding]) -> Result<ReproducibilityReport> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument(
            "reproducibility needs at least two runs".into(),
        ));
    }
    let m = runs[0].num_objects();
    if runs.iter().any(|r| r.num_objects() != m) {
        return Err(Error::InvalidArgument(
            "all runs must embed the same objects".into(),
        ));
    }

    let columns: Vec<Vec<Vec<f64>>> = runs
        .iter()
        .map(|run| {
            (0..run.num_dims())
                .map(|j| run.mu_selected.column(j).to_vec())
                .collect()
        })
        .collect();

    let mut per_run_scores = Vec::with_capacity(runs.len());
    for (r, own) in columns.iter().enumerate() {
        if own.is_empty() {
            per_run_scores.push(0.0);
            continue;
        }
        let mut reproduced = 0usize;
        for col in own {
            let mut sum_best = 0.0;
            let mut others = 0usize;
            for (r2, other) in columns.iter().enumerate() {
                if r2 == r {
                    continue;
                }
                let best = other
                    .iter()
                    .map(|c| pearson(col, c))
                    .fold(f64::NEG_INFINITY, f64::max);
                sum_best += if best.is_finite() { best } else { 0.0 };
                others += 1;
            }
            if sum_best / others as f64 > REPRODUCIBILITY_CUTOFF {
                reproduced += 1;
            }
        }
        per_run_scores.push(reproduced as f64 / own.len() as f64);
    }

    let counts: Vec<f64> = runs.iter().map(|r| r.num_dims() as f64).collect();
    let mean_dims = counts.iter().sum::<f64>() / counts.len() as f64;
    let sd_dims = (counts
        .iter()
        .map(|c| (c - mean_dims) * (c - mean_dims))
        .sum::<f64>()
        / (counts.len() - 1) as f64)
        .sqrt();
    let mean_score = per_run_scores.iter().sum::<f64>() / per_run_scores.len() as f64;
    Ok(ReproducibilityReport {
        per_run_scores,
        mean_score,
        mean_dims,
        sd_dims,
    })
}

/// Two-sided paired t-test over per-item losses. Identical inputs give
/// `(0, 1)`; any other zero-variance difference vector is degenerate.
pub fn paired_ttest(losses_a: &[f64], losses_b: &[f64]) -> Result<(f64, f64)> {
    let (t, df) = paired_t_statistic(losses_a, losses_b)?;
    if df == 0.0 {
        // all differences identically zero
        return Ok((0.0, 1.0));
    }
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidArgument(format!("t-distribution: {e}")))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok((t, p))
}

/// One-sided paired t-test of `mean(a - b) > 0`.
pub fn paired_ttest_one_sided(losses_a: &[f64], losses_b: &[f64]) -> Result<(f64, f64)> {
    let (t, df) = paired_t_statistic(losses_a, losses_b)?;
    if df == 0.0 {
        return Ok((0.0, 0.5));
    }
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidArgument(format!("t-distribution: {e}")))?;
    Ok((t, 1.0 - dist.cdf(t)))
}

/// Returns `(t, df)`, with `df = 0` marking the all-zero-differences
/// special case.
fn paired_t_statistic(losses_a: &[f64], losses_b: &[f64]) -> Result<(f64, f64)> {
    if losses_a.len() != losses_b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired test needs equal lengths, got {} and {}",
            losses_a.len(),
            losses_b.len()
        )));
    }
    let n = losses_a.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "paired test needs at least two pairs".into(),
        ));
    }
    let diffs: Vec<f64> = losses_a.iter().zip(losses_b).map(|(a, b)| a - b).collect();
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok((0.0, 0.0));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Err(Error::DegenerateInput(
            "differences have zero variance".into(),
        ));
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok((t, (n - 1) as f64))
}

/// Top-k object labels per kept dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionTopK {
    /// Original dimension index.
    pub dim: usize,
    /// Labels of the k largest-mean objects, descending, ties by lower
    /// object index.
    pub labels: Vec<String>,
}

/// For every kept dimension, the labels of the objects with the largest
/// mean embedding values. `k` is clamped to the object count.
pub fn topk_report(
    pruned: &PrunedEmbedding,
    labels: &[String],
    k: usize,
) -> Result<Vec<DimensionTopK>> {
    let m = pruned.num_objects();
    if labels.len() != m {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} objects",
            labels.len(),
            m
        )));
    }
    let k = k.min(m);
    let mut report = Vec::with_capacity(pruned.num_dims());
    for (col, &dim) in pruned.kept_dims.iter().enumerate() {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            pruned.mu_selected[[b, col]]
                .total_cmp(&pruned.mu_selected[[a, col]])
                .then(a.cmp(&b))
        });
        report.push(DimensionTopK {
            dim,
            labels: order[..k].iter().map(|&i| labels[i].clone()).collect(),
        });
    }
    Ok(report)
}

/// Distinct triplets of a dataset, sorted; the shape expected by
/// [`predict_mc_many`] when evaluating against aggregated responses.
pub fn distinct_triplets(data: &TripletDataset) -> Vec<[ObjectIndex; 3]> {
    let set: BTreeSet<[ObjectIndex; 3]> = data.records().iter().map(|r| r.triplet()).collect();
    set.into_iter().collect()
}
