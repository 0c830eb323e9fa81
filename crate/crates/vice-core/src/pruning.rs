//! Dimension importance scoring and pruning.
//!
//! For each embedding entry the posterior probability of being truncated to
//! zero is the Gaussian left tail at zero, `Phi(-mu/sigma)`. Treating these
//! as p-values per dimension, Benjamini-Hochberg controls the false
//! discovery rate across objects, and a dimension's importance is the
//! number of objects that both survive the FDR test and carry at least
//! 0.95 posterior mass above zero. Dimensions with too few such objects
//! are pruned, and training stops once the selected count has been flat
//! for a full stability window.

use ndarray::Array2;

use crate::model::VariationalParams;
use crate::{Error, Result};

/// Posterior mass above zero required to call an object significant in a
/// dimension; the matching p-value filter is `p <= 1 - POSTERIOR_MASS`.
const POSTERIOR_MASS: f64 = 0.95;

/// Posterior probability that an embedding weight is truncated to zero:
/// the left tail `Phi(0; mu, sigma^2) = Phi(-mu/sigma)`, evaluated through
/// the complementary error function (sub-ulp accurate; well inside the
/// 1e-12 absolute tolerance the selection procedure assumes).
pub fn zero_probability(mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(0.5 * libm::erfc(mu / (sigma * std::f64::consts::SQRT_2)))
}

/// How to count significant objects within a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountRule {
    /// Benjamini-Hochberg rejection and posterior mass above zero >= 0.95.
    BhAndPosterior,
    /// Benjamini-Hochberg rejection only (sensitivity analysis).
    BhOnly,
}

/// Benjamini-Hochberg step-up rejections at level `alpha`, computed via
/// adjusted q-values (reverse cumulative minimum of `p * m / rank`).
fn benjamini_hochberg(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));

    let mut q = vec![0.0f64; m];
    let mut running = f64::INFINITY;
    for rank in (0..m).rev() {
        let idx = order[rank];
        running = running.min(p_values[idx] * m as f64 / (rank + 1) as f64);
        q[idx] = running;
    }
    q.iter().map(|&qv| qv <= alpha).collect()
}

/// Number of objects significant in one dimension, given that dimension's
/// zero-probabilities as p-values.
pub fn significant_object_count(p_values: &[f64], alpha: f64) -> usize {
    significant_object_count_with(p_values, alpha, CountRule::BhAndPosterior)
}

/// As [`significant_object_count`], with an explicit counting rule.
pub fn significant_object_count_with(p_values: &[f64], alpha: f64, rule: CountRule) -> usize {
    let rejected = benjamini_hochberg(p_values, alpha);
    p_values
        .iter()
        .zip(rejected)
        .filter(|&(&p, rej)| {
            rej && match rule {
                CountRule::BhAndPosterior => p <= 1.0 - POSTERIOR_MASS,
                CountRule::BhOnly => true,
            }
        })
        .count()
}

/// Importance of one embedding dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimensionImportance {
    /// Column index in the unpruned parameter matrices.
    pub dim_index: usize,
    /// Objects confidently non-zero in this dimension.
    pub significant_objects: usize,
    /// Whether the dimension survives the reliability threshold.
    pub selected: bool,
}

/// Score every dimension and sort by significant-object count, descending,
/// ties broken by lower original dimension index. A dimension is selected
/// when its count strictly exceeds `reliability_threshold`.
pub fn select_dimensions(
    params: &VariationalParams,
    alpha: f64,
    reliability_threshold: usize,
) -> Vec<DimensionImportance> {
    select_dimensions_with(
        params,
        alpha,
        reliability_threshold,
        CountRule::BhAndPosterior,
    )
}

/// As [`select_dimensions`], with an explicit counting rule.
pub fn select_dimensions_with(
    params: &VariationalParams,
    alpha: f64,
    reliability_threshold: usize,
    rule: CountRule,
) -> Vec<DimensionImportance> {
    let m = params.num_objects();
    let mut importances: Vec<DimensionImportance> = (0..params.num_dims())
        .map(|j| {
            let p_values: Vec<f64> = (0..m)
                .map(|i| {
                    zero_probability(params.mu[[i, j]], params.log_sigma[[i, j]].exp())
                        .expect("exp(log_sigma) is positive")
                })
                .collect();
            let count = significant_object_count_with(&p_values, alpha, rule);
            DimensionImportance {
                dim_index: j,
                significant_objects: count,
                selected: count > reliability_threshold,
            }
        })
        .collect();
    importances.sort_by(|a, b| {
        b.significant_objects
            .cmp(&a.significant_objects)
            .then(a.dim_index.cmp(&b.dim_index))
    });
    importances
}

/// Count of selected dimensions; the per-epoch statistic the convergence
/// criterion watches.
pub fn selected_dim_count(
    params: &VariationalParams,
    alpha: f64,
    reliability_threshold: usize,
) -> usize {
    select_dimensions(params, alpha, reliability_threshold)
        .iter()
        .filter(|d| d.selected)
        .count()
}

/// Mean and scale columns restricted to the selected dimensions, ordered by
/// descending importance.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedEmbedding {
    pub mu_selected: Array2<f64>,
    pub sigma_selected: Array2<f64>,
    pub kept_dims: Vec<usize>,
}

impl PrunedEmbedding {
    pub fn num_objects(&self) -> usize {
        self.mu_selected.nrows()
    }

    pub fn num_dims(&self) -> usize {
        self.kept_dims.len()
    }

    /// Wrap a MAP embedding whose columns were selected elsewhere; MAP fits
    /// carry no posterior scales, so `sigma_selected` is zero.
    pub fn from_map(x_selected: Array2<f64>, kept_dims: Vec<usize>) -> Self {
        let sigma_selected = Array2::zeros(x_selected.dim());
        Self {
            mu_selected: x_selected,
            sigma_selected,
            kept_dims,
        }
    }
}

/// Copy the selected columns, in the selection's order. Returns an empty
/// embedding (with a warning) when nothing was selected.
pub fn prune(params: &VariationalParams, selection: &[DimensionImportance]) -> PrunedEmbedding {
    let kept: Vec<usize> = selection
        .iter()
        .filter(|d| d.selected)
        .map(|d| d.dim_index)
        .collect();
    if kept.is_empty() {
        log::warn!("no dimensions selected; returning an empty embedding");
    }
    let m = params.num_objects();
    let mut mu_selected = Array2::zeros((m, kept.len()));
    let mut sigma_selected = Array2::zeros((m, kept.len()));
    for (out_col, &j) in kept.iter().enumerate() {
        for i in 0..m {
            mu_selected[[i, out_col]] = params.mu[[i, j]];
            sigma_selected[[i, out_col]] = params.log_sigma[[i, j]].exp();
        }
    }
    PrunedEmbedding {
        mu_selected,
        sigma_selected,
        kept_dims: kept,
    }
}

/// Importance of a MAP-embedding dimension, ranked by l1 mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassImportance {
    pub dim_index: usize,
    /// Column l1 mass divided by the number of objects.
    pub mass_per_object: f64,
    pub selected: bool,
}

/// Dimension selection for MAP embeddings. A MAP fit has no posterior
/// scales for the FDR machinery, so this is a reimplementation choice: a
/// dimension is kept when its l1 mass per object exceeds `threshold`.
pub fn select_dimensions_by_mass(x: &Array2<f64>, threshold: f64) -> Vec<MassImportance> {
    let m = x.nrows() as f64;
    let mut importances: Vec<MassImportance> = (0..x.ncols())
        .map(|j| {
            let mass = x.column(j).iter().map(|v| v.abs()).sum::<f64>() / m;
            MassImportance {
                dim_index: j,
                mass_per_object: mass,
                selected: mass > threshold,
            }
        })
        .collect();
    importances.sort_by(|a, b| {
        b.mass_per_object
            .total_cmp(&a.mass_per_object)
            .then(a.dim_index.cmp(&b.dim_index))
    });
    importances
}

/// Restrict a MAP embedding to the selected columns.
pub fn prune_map(x: &Array2<f64>, selection: &[MassImportance]) -> PrunedEmbedding {
    let kept: Vec<usize> = selection
        .iter()
        .filter(|d| d.selected)
        .map(|d| d.dim_index)
        .collect();
    if kept.is_empty() {
        log::warn!("no dimensions selected; returning an empty embedding");
    }
    let m = x.nrows();
    let mut x_selected = Array2::zeros((m, kept.len()));
    for (out_col, &j) in kept.iter().enumerate() {
        for i in 0..m {
            x_selected[[i, out_col]] = x[[i, j]];
        }
    }
    PrunedEmbedding::from_map(x_selected, kept)
}

/// Selected-dimension counts per epoch, watched for representational
/// stability: converged once the last `window` entries are identical.
#[derive(Debug, Clone)]
pub struct StabilityTracker {
    history: Vec<usize>,
    window: usize,
}

impl StabilityTracker {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument(
                "stability window must be at least 1".into(),
            ));
        }
        Ok(Self {
            history: Vec::new(),
            window,
        })
    }

    pub fn push(&mut self, selected_dims: usize) {
        self.history.push(selected_dims);
    }

    pub fn history(&self) -> &[usize] {
        &self.history
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// True once at least `window` epochs were recorded and the last
    /// `window` counts are all equal.
    pub fn check_convergence(&self) -> bool {
        if self.history.len() < self.window {
            return false;
        }
        let tail = &self.history[self.history.len() - self.window..];
        tail.windows(2).all(|w| w[0] == w[1])
    }
}

/// First epoch index (0-based) at which a run of `window` identical counts
/// completes, scanning a recorded trajectory.
pub fn first_convergence_epoch(history: &[usize], window: usize) -> Option<usize> {
    if window == 0 || history.len() < window {
        return None;
    }
    if window == 1 {
        return Some(0);
    }
    let mut run = 1;
    for t in 1..history.len() {
        if history[t] == history[t - 1] {
            run += 1;
        } else {
            run = 1;
        }
        if run >= window {
            return Some(t);
        }
    }
    None
}
