//! Seeded ground-truth generators and brute-force oracles.
//!
//! A ground truth is a sparse non-negative embedding from which triplet
//! responses are sampled through the same choice model the estimators fit,
//! so the generator's exhaustive Bayes accuracy is the ceiling any trained
//! model can be scored against.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{canonical_pairs, TripletDataset, TripletRecord};
use crate::model::pair_probabilities;
use crate::{Error, Result};

/// Default minimum value an entry must reach to make its object count as
/// visibly active in a dimension.
pub const DEFAULT_VISIBILITY_FLOOR: f64 = 0.5;

/// Default number of visibly active objects every true dimension gets;
/// one more than the reliability threshold, so each dimension is in
/// principle selectable.
pub const DEFAULT_MIN_VISIBLE: usize = 6;

/// Cap on exhaustive triplet enumeration.
const MAX_ENUMERABLE_OBJECTS: usize = 60;

/// A sparse non-negative generating embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub x_true: Array2<f64>,
    pub sparsity: f64,
    pub seed: u64,
}

/// Generate a ground truth with the default visibility settings.
///
/// Exactly `round(sparsity * m * d_star)` entries are zero. Non-zero
/// entries are drawn from the slab half of a spike-and-slab (the absolute
/// value of a unit Gaussian); each dimension first receives
/// [`DEFAULT_MIN_VISIBLE`] entries conditioned to lie above the visibility
/// floor.
pub fn generate_ground_truth(m: usize, d_star: usize, sparsity: f64, seed: u64) -> Result<GroundTruth> {
    generate_ground_truth_with(
        m,
        d_star,
        sparsity,
        seed,
        DEFAULT_VISIBILITY_FLOOR,
        DEFAULT_MIN_VISIBLE,
    )
}

/// As [`generate_ground_truth`] with explicit visibility floor and per-
/// dimension visible-object quota.
pub fn generate_ground_truth_with(
    m: usize,
    d_star: usize,
    sparsity: f64,
    seed: u64,
    visibility_floor: f64,
    min_visible: usize,
) -> Result<GroundTruth> {
    if m < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 objects, got {m}"
        )));
    }
    if d_star == 0 {
        return Err(Error::InvalidArgument("d_star must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::InvalidArgument(format!(
            "sparsity must lie in [0, 1), got {sparsity}"
        )));
    }
    if min_visible > m {
        return Err(Error::InvalidArgument(format!(
            "cannot place {min_visible} visible objects among {m}"
        )));
    }
    let cells = m * d_star;
    let zeros = (sparsity * cells as f64).round() as usize;
    let nonzeros = cells - zeros;
    if nonzeros < min_visible * d_star {
        return Err(Error::InvalidArgument(format!(
            "sparsity {sparsity} leaves {nonzeros} non-zero cells, \
             but {d_star} dimensions need {min_visible} visible objects each"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((m, d_star));

    // Quota pass: every dimension gets `min_visible` entries above the
    // floor, at seeded object positions.
    for j in 0..d_star {
        for i in index_sample(&mut rng, m, min_visible) {
            x[[i, j]] = slab_above(&mut rng, visibility_floor);
        }
    }

    // Spread the remaining non-zero budget over the still-empty cells.
    let mut empty: Vec<(usize, usize)> = Vec::with_capacity(cells - min_visible * d_star);
    for i in 0..m {
        for j in 0..d_star {
            if x[[i, j]] == 0.0 {
                empty.push((i, j));
            }
        }
    }
    let extra = nonzeros - min_visible * d_star;
    for idx in index_sample(&mut rng, empty.len(), extra) {
        let (i, j) = empty[idx];
        let draw: f64 = StandardNormal.sample(&mut rng);
        x[[i, j]] = draw.abs();
    }

    Ok(GroundTruth {
        x_true: x,
        sparsity,
        seed,
    })
}

/// Absolute value of a unit Gaussian conditioned to lie at or above
/// `floor`, by rejection.
fn slab_above(rng: &mut ChaCha8Rng, floor: f64) -> f64 {
    loop {
        let draw: f64 = StandardNormal.sample(rng);
        let v = draw.abs();
        if v >= floor {
            return v;
        }
    }
}

/// Sample `n` judgments: triplets uniform over all 3-subsets, responses
/// from the choice model at the true embedding.
pub fn sample_triplets(gt: &GroundTruth, n: usize, seed: u64) -> Result<TripletDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one triplet".into()));
    }
    let m = gt.x_true.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let picked = index_sample(&mut rng, m, 3);
        let mut triplet = [
            picked.index(0) as u32,
            picked.index(1) as u32,
            picked.index(2) as u32,
        ];
        triplet.sort_unstable();
        let probs = pair_probabilities(&gt.x_true, triplet);
        let u: f64 = rng.gen();
        let mut pick = 2;
        let mut acc = 0.0;
        for (t, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = t;
                break;
            }
        }
        let pair = canonical_pairs(triplet)[pick];
        let odd = triplet
            .iter()
            .find(|i| !pair.contains(i))
            .copied()
            .expect("one triplet element is outside the pair");
        records.push(TripletRecord::new((pair[0], pair[1]), odd)?);
    }
    TripletDataset::new(records, m)
}

/// Exact Bayes-optimal accuracy of the generating model: the mean over all
/// `C(m, 3)` triplets of the largest choice probability, by full
/// enumeration. Errors above 60 objects; estimate from samples instead.
pub fn bayes_accuracy(gt: &GroundTruth) -> Result<f64> {
    let m = gt.x_true.nrows();
    if m > MAX_ENUMERABLE_OBJECTS {
        return Err(Error::InvalidArgument(format!(
            "{m} objects means {} triplets; enumeration is capped at {MAX_ENUMERABLE_OBJECTS} \
             objects, use a sampled estimate instead",
            m * (m - 1) * (m - 2) / 6
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..m as u32 {
        for j in (i + 1)..m as u32 {
            for k in (j + 1)..m as u32 {
                let probs = pair_probabilities(&gt.x_true, [i, j, k]);
                total += probs.iter().cloned().fold(f64::MIN, f64::max);
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

/// Serialized ground truth (JSON sidecar next to the triplet file).
#[derive(Debug, Serialize, Deserialize)]
struct GroundTruthFile {
    num_objects: usize,
    num_dims: usize,
    sparsity: f64,
    seed: u64,
    x_true: Vec<f64>,
}

pub fn write_ground_truth<W: Write>(gt: &GroundTruth, writer: W) -> Result<()> {
    let file = GroundTruthFile {
        num_objects: gt.x_true.nrows(),
        num_dims: gt.x_true.ncols(),
        sparsity: gt.sparsity,
        seed: gt.seed,
        x_true: gt.x_true.iter().cloned().collect(),
    };
    let mut w = BufWriter::new(writer);
    serde_json::to_writer(&mut w, &file)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn save_ground_truth(gt: &GroundTruth, path: &Path) -> Result<()> {
    write_ground_truth(gt, File::create(path)?)
}

pub fn read_ground_truth<R: Read>(reader: R) -> Result<GroundTruth> {
    let file: GroundTruthFile = serde_json::from_reader(BufReader::new(reader))?;
    if file.x_true.len() != file.num_objects * file.num_dims {
        return Err(Error::CheckpointFormat(format!(
            "ground truth holds {} values, expected {} x {}",
            file.x_true.len(),
            file.num_objects,
            file.num_dims
        )));
    }
    let x_true = Array2::from_shape_vec((file.num_objects, file.num_dims), file.x_true)
        .map_err(|e| Error::CheckpointFormat(e.to_string()))?;
    Ok(GroundTruth {
        x_true,
        sparsity: file.sparsity,
        seed: file.seed,
    })
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    read_ground_truth(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::aggregate_repeats;
    use crate::eval::accuracy_map;

    #[test]
    fn zero_fraction_is_exactly_the_requested_sparsity() {
        for (m, d, sparsity) in [(30, 5, 0.8), (20, 3, 0.7), (12, 2, 0.5)] {
            let gt = generate_ground_truth(m, d, sparsity, 7).unwrap();
            let zeros = gt.x_true.iter().filter(|v| **v == 0.0).count();
            let cells = m * d;
            assert_eq!(zeros, (sparsity * cells as f64).round() as usize);
            assert!(gt.x_true.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn every_dimension_is_selectable() {
        let gt = generate_ground_truth(30, 5, 0.8, 3).unwrap();
        for j in 0..5 {
            let visible = gt
                .x_true
                .column(j)
                .iter()
                .filter(|&&v| v >= DEFAULT_VISIBILITY_FLOOR)
                .count();
            assert!(visible >= DEFAULT_MIN_VISIBLE, "dimension {j}: {visible}");
        }
    }

    #[test]
    fn dense_generation_and_single_dimension() {
        let gt = generate_ground_truth(10, 1, 0.0, 1).unwrap();
        assert_eq!(gt.x_true.iter().filter(|v| **v == 0.0).count(), 0);
        assert_eq!(gt.x_true.ncols(), 1);
    }

    #[test]
    fn infeasible_configurations_error() {
        // Too few objects for the visible quota.
        assert!(generate_ground_truth(4, 2, 0.0, 0).is_err());
        // Sparsity leaves too few non-zero cells.
        assert!(generate_ground_truth(10, 3, 0.9, 0).is_err());
        assert!(generate_ground_truth(10, 3, 1.0, 0).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_ground_truth(15, 3, 0.6, 42).unwrap();
        let b = generate_ground_truth(15, 3, 0.6, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_ground_truth(15, 3, 0.6, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ground_truth_reads_back_from_sidecar() {
        let gt = generate_ground_truth(8, 2, 0.25, 5).unwrap();
        let mut buf = Vec::new();
        write_ground_truth(&gt, &mut buf).unwrap();
        let loaded = read_ground_truth(buf.as_slice()).unwrap();
        assert_eq!(loaded, gt);
    }

    #[test]
    fn zero_embedding_responses_are_uniform() {
        // All-zero embedding: the three responses should be equally likely.
        let gt = GroundTruth {
            x_true: Array2::zeros((5, 2)),
            sparsity: 1.0,
            seed: 0,
        };
        let data = sample_triplets(&gt, 30_000, 11).unwrap();
        let mut counts = [0usize; 3];
        for rec in data.records() {
            counts[rec.pair_index()] += 1;
        }
        // Chi-square test at alpha = 0.01, two degrees of freedom.
        let expected = 10_000.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 9.21, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let gt = generate_ground_truth(12, 3, 0.5, 9).unwrap();
        let a = sample_triplets(&gt, 500, 21).unwrap();
        let b = sample_triplets(&gt, 500, 21).unwrap();
        assert_eq!(a, b);
        let c = sample_triplets(&gt, 500, 22).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn response_frequencies_converge_to_model_probabilities() {
        // Three objects admit a single triplet, so every record repeats it.
        let x_true = ndarray::array![[1.2, 0.0], [0.9, 0.4], [0.0, 1.1]];
        let gt = GroundTruth {
            x_true: x_true.clone(),
            sparsity: 0.0,
            seed: 0,
        };
        let data = sample_triplets(&gt, 100_000, 33).unwrap();
        let dists = aggregate_repeats(&data);
        assert_eq!(dists.len(), 1);
        let expected = pair_probabilities(&x_true, [0, 1, 2]);
        let tv: f64 = dists[0]
            .probabilities()
            .iter()
            .zip(expected)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "total variation {tv}");
    }

    #[test]
    fn triplet_marginal_is_uniform_over_subsets() {
        let gt = generate_ground_truth_with(6, 2, 0.4, 13, 0.5, 3).unwrap();
        let n = 20_000;
        let data = sample_triplets(&gt, n, 17).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for rec in data.records() {
            *counts.entry(rec.triplet()).or_insert(0usize) += 1;
        }
        // C(6,3) = 20 cells; chi-square at alpha = 0.01, df 19.
        assert_eq!(counts.len(), 20);
        let expected = n as f64 / 20.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 36.19, "chi2 = {chi2}");
    }

    #[test]
    fn bayes_accuracy_of_zero_embedding_is_one_third() {
        let gt = GroundTruth {
            x_true: Array2::zeros((10, 2)),
            sparsity: 1.0,
            seed: 0,
        };
        let bayes = bayes_accuracy(&gt).unwrap();
        assert!((bayes - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bayes_accuracy_matches_hand_checked_triplet() {
        // One dominant dimension separating objects 0 and 1 from object 2.
        let x_true = ndarray::array![[2.0], [1.0], [0.0]];
        let gt = GroundTruth {
            x_true,
            sparsity: 0.0,
            seed: 0,
        };
        // Single triplet: p({0,1}) = e^2 / (e^2 + 2), the max probability.
        let expected = 2.0f64.exp() / (2.0f64.exp() + 2.0);
        let bayes = bayes_accuracy(&gt).unwrap();
        assert!((bayes - expected).abs() < 1e-12);
    }

    #[test]
    fn bayes_accuracy_rejects_huge_enumerations() {
        let gt = GroundTruth {
            x_true: Array2::zeros((61, 2)),
            sparsity: 1.0,
            seed: 0,
        };
        assert!(bayes_accuracy(&gt).is_err());
    }

    #[test]
    fn bayes_accuracy_dominates_arbitrary_predictors() {
        let gt = generate_ground_truth_with(12, 3, 0.6, 19, 0.5, 4).unwrap();
        let bayes = bayes_accuracy(&gt).unwrap();
        assert!(bayes >= 1.0 / 3.0);
        let fresh = sample_triplets(&gt, 4_000, 23).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10 {
            let x = Array2::from_shape_fn((12, 3), |_| rng.gen_range(0.0..1.5));
            let acc = accuracy_map(&x, &fresh).unwrap();
            // Two standard errors of slack for the finite sample.
            let slack = 2.0 * (0.25f64 / 4_000.0).sqrt();
            assert!(
                acc <= bayes + slack,
                "predictor accuracy {acc} exceeds Bayes {bayes} + {slack}"
            );
        }
    }
}
