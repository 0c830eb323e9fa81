//! Sample-complexity planning and retrospective generalization bounds for
//! quantized embeddings.
//!
//! Restricting embedding entries to a finite grid `{0, delta, ..., k*delta}`
//! turns the model class into a finite hypothesis set, so a Hoeffding plus
//! union-bound argument gives, with probability `1 - delta_conf`,
//!
//! ```text
//!   R(X) <= Rhat(X) + sqrt((m*d*ln(k+1) + ln(1/delta_conf)) / (2n))
//! ```
//!
//! for the zero-one error of the argmax predictor. Read backwards the same
//! inequality yields the sample size needed for a target tolerance. The
//! retrospective search evaluates a pre-determined set of quantization
//! scales, splits the confidence budget evenly across them, and reports
//! the scale with the smallest upper bound.
//!
//! Sidedness: the concentration argument is symmetric, and this module
//! implements the `R <= Rhat + epsilon` tail that the retrospective
//! search uses (the guarantee that the true error is not much worse than
//! the measured one). The mirrored tail, bounding how optimistic the
//! training error can be, holds with the same constants.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::TripletDataset;
use crate::eval::predict_map;
use crate::{Error, Result};

/// A non-negative quantization grid `{0, delta, ..., k*delta}` with
/// `k = ceil(max_value / delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationSpec {
    pub delta: f64,
    pub max_value: f64,
    pub k: usize,
}

impl QuantizationSpec {
    pub fn new(delta: f64, max_value: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "delta must be positive and finite, got {delta}"
            )));
        }
        if !(max_value > 0.0) || !max_value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "max_value must be positive and finite, got {max_value}"
            )));
        }
        if delta > max_value {
            return Err(Error::InvalidArgument(format!(
                "delta {delta} exceeds max_value {max_value}"
            )));
        }
        Ok(Self {
            delta,
            max_value,
            k: (max_value / delta).ceil() as usize,
        })
    }
}

/// Round every entry to the nearest grid multiple; exact midpoints round
/// up. Entries must lie in `[0, max_value]`.
pub fn quantize(x: &Array2<f64>, spec: &QuantizationSpec) -> Result<Array2<f64>> {
    for ((i, j), &v) in x.indexed_iter() {
        if v < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "entry ({i}, {j}) = {v} is negative"
            )));
        }
        if v > spec.max_value {
            return Err(Error::InvalidArgument(format!(
                "entry ({i}, {j}) = {v} exceeds max_value {}",
                spec.max_value
            )));
        }
    }
    Ok(x.mapv(|v| (v / spec.delta + 0.5).floor() * spec.delta))
}

/// Hoeffding tolerance for `n` samples of an `m x d` embedding on a
/// `k + 1`-level grid: `sqrt((m*d*ln(k+1) + ln(1/delta_conf)) / (2n))`.
///
/// Panics if `n = 0` or `delta_conf` is outside `(0, 1]`.
pub fn hoeffding_epsilon(n: usize, m: usize, d: usize, k: usize, delta_conf: f64) -> f64 {
    assert!(n >= 1, "sample size must be at least 1");
    assert!(
        delta_conf > 0.0 && delta_conf <= 1.0,
        "confidence level must lie in (0, 1], got {delta_conf}"
    );
    let complexity = (m * d) as f64 * ((k + 1) as f64).ln() + (1.0 / delta_conf).ln();
    (complexity / (2.0 * n as f64)).sqrt()
}

/// Samples needed to certify tolerance `epsilon` at confidence
/// `1 - delta_conf`: the Hoeffding inequality inverted and rounded up.
///
/// Panics if `epsilon <= 0` or `delta_conf` is outside `(0, 1]`.
pub fn prospective_sample_size(m: usize, d: usize, k: usize, delta_conf: f64, epsilon: f64) -> u64 {
    assert!(epsilon > 0.0, "epsilon must be positive");
    assert!(
        delta_conf > 0.0 && delta_conf <= 1.0,
        "confidence level must lie in (0, 1], got {delta_conf}"
    );
    let complexity = (m * d) as f64 * ((k + 1) as f64).ln() + (1.0 / delta_conf).ln();
    (complexity / (2.0 * epsilon * epsilon)).ceil() as u64
}

/// Zero-one training error of the argmax predictor under a fixed
/// embedding.
pub fn empirical_error(x_quant: &Array2<f64>, data: &TripletDataset) -> f64 {
    let misses = data
        .records()
        .iter()
        .filter(|rec| predict_map(x_quant, rec.triplet()) != rec.chosen())
        .count();
    misses as f64 / data.len() as f64
}

/// The winning row of a retrospective bound search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub delta: f64,
    pub empirical_error: f64,
    pub epsilon: f64,
    pub upper_bound: f64,
    /// Per-scale confidence after splitting `alpha` across the grid.
    pub delta_confidence: f64,
}

/// One evaluated quantization scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub delta: f64,
    pub k: usize,
    pub empirical_error: f64,
    pub epsilon: f64,
    pub upper_bound: f64,
    pub best: bool,
}

/// Full result of the adaptive quantization search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub max_value: f64,
    pub delta_confidence: f64,
    pub rows: Vec<BoundRow>,
    pub best: BoundReport,
}

impl BoundTable {
    /// CSV with header `delta,k,empirical_error,epsilon,upper_bound,best`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(writer);
        writeln!(w, "delta,k,empirical_error,epsilon,upper_bound,best")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                row.delta, row.k, row.empirical_error, row.epsilon, row.upper_bound, row.best
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The default quantization grid `{0.05, 0.10, ..., 1.0}`.
pub fn default_delta_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).collect()
}

/// Evaluate the generalization bound over a grid of quantization scales
/// and return the scale minimizing the upper bound.
///
/// The confidence budget `alpha` is split evenly across the grid, so the
/// winning bound holds with probability at least `1 - alpha`. Scales
/// larger than the embedding's maximum entry cannot form a grid and are
/// skipped (the budget split keeps the original grid size, which is only
/// conservative). An all-zero embedding degenerates to the single-point
/// class: `k = 0` and only the confidence term remains.
pub fn retrospective_bound(
    mu_pruned: &Array2<f64>,
    data: &TripletDataset,
    deltas: &[f64],
    alpha: f64,
) -> Result<BoundTable> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("delta grid is empty".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput("bound needs training records".into()));
    }
    if let Some(v) = mu_pruned.iter().find(|v| **v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "embedding entries must be finite and non-negative, found {v}"
        )));
    }

    let n = data.len();
    let (m, d) = mu_pruned.dim();
    let delta_confidence = alpha / deltas.len() as f64;
    let max_value = mu_pruned.iter().cloned().fold(0.0f64, f64::max);

    if max_value == 0.0 {
        log::warn!("all-zero embedding: bound degenerates to the single-point class (k = 0)");
        let err = empirical_error(mu_pruned, data);
        let epsilon = hoeffding_epsilon(n, m, d, 0, delta_confidence);
        let best = BoundReport {
            delta: deltas[0],
            empirical_error: err,
            epsilon,
            upper_bound: err + epsilon,
            delta_confidence,
        };
        return Ok(BoundTable {
            max_value,
            delta_confidence,
            rows: vec![BoundRow {
                delta: deltas[0],
                k: 0,
                empirical_error: err,
                epsilon,
                upper_bound: err + epsilon,
                best: true,
            }],
            best,
        });
    }

    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if delta > max_value {
            log::debug!("skipping delta {delta}: larger than the maximum entry {max_value}");
            continue;
        }
        let spec = QuantizationSpec::new(delta, max_value)?;
        let quantized = quantize(mu_pruned, &spec)?;
        let err = empirical_error(&quantized, data);
        let epsilon = hoeffding_epsilon(n, m, d, spec.k, delta_confidence);
        rows.push(BoundRow {
            delta,
            k: spec.k,
            empirical_error: err,
            epsilon,
            upper_bound: err + epsilon,
            best: false,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "every quantization scale exceeds the maximum entry {max_value}"
        )));
    }

    let best_index = rows
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.upper_bound.total_cmp(&b.upper_bound))
        .map(|(i, _)| i)
        .expect("rows is non-empty");
    rows[best_index].best = true;
    let winner = rows[best_index];
    Ok(BoundTable {
        max_value,
        delta_confidence,
        rows,
        best: BoundReport {
            delta: winner.delta,
            empirical_error: winner.empirical_error,
            epsilon: winner.epsilon,
            upper_bound: winner.upper_bound,
            delta_confidence,
        },
    })
}
