//! Shared fixtures for the benchmark targets.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vice_core::dataset::TripletRecord;
use vice_core::model::{SpikeSlabPrior, VariationalParams};

pub struct Fixture {
    pub params: VariationalParams,
    pub prior: SpikeSlabPrior,
    pub batch: Vec<TripletRecord>,
    pub noise: Array2<f64>,
    pub n: usize,
}

/// A mid-sized instance resembling a real training step: `m` objects,
/// `d` dimensions, a 128-triplet batch.
pub fn training_fixture(m: usize, d: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = Array2::from_shape_fn((m, d), |_| rng.gen_range(-0.5..1.5));
    let log_sigma = Array2::from_shape_fn((m, d), |_| rng.gen_range(-3.0..-0.5));
    let noise = Array2::from_shape_fn((m, d), |_| rng.gen_range(-2.0..2.0));
    let batch = (0..128)
        .map(|_| {
            let mut idx: Vec<u32> = (0..m as u32).collect();
            idx.partial_shuffle(&mut rng, 3);
            TripletRecord::new((idx[0], idx[1]), idx[2]).unwrap()
        })
        .collect();
    Fixture {
        params: VariationalParams::new(mu, log_sigma).unwrap(),
        prior: SpikeSlabPrior::default(),
        batch,
        noise,
        n: 100_000,
    }
}
