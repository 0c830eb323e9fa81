//! Sparse, non-negative, interpretable concept embeddings learned from human
//! triplet odd-one-out judgments.
//!
//! The crate implements two estimators over the same choice model:
//!
//! * **VICE** — mean-field Gaussian variational inference with a
//!   spike-and-slab prior, dimension selection by false-discovery-rate
//!   control on per-entry posterior zero-probabilities, and a
//!   representational-stability convergence criterion.
//! * **SPoSE** — the MAP baseline: an l1-penalized, non-negativity-projected
//!   maximum likelihood embedding.
//!
//! Supporting machinery: triplet dataset handling ([`dataset`]), analytic
//! gradients and the Adam training loop ([`optim`]), Monte-Carlo posterior
//! prediction and evaluation metrics ([`eval`]), PAC generalization bounds
//! for quantized embeddings ([`pac`]), and seeded ground-truth generators
//! with exhaustive oracles for desk-scale verification ([`synthetic`]).

pub mod checkpoint;
pub mod dataset;
pub mod eval;
pub mod model;
pub mod optim;
pub mod pac;
pub mod pruning;
pub mod synthetic;

mod error;

pub use checkpoint::{Checkpoint, CheckpointModel, CHECKPOINT_MAGIC};
pub use dataset::{ObjectIndex, ResponseDistribution, TripletDataset, TripletRecord};
pub use error::{Error, Result};
pub use eval::{KlDirection, PredictiveDistribution, ReproducibilityReport};
pub use model::{
    BatchObjective, EmbeddingSample, SpikeSlabPrior, SpoSEParams, VariationalParams,
};
pub use optim::{AdamState, EpochStats, Gradients, TrainConfig, TrainLog};
pub use pac::{BoundReport, BoundTable, QuantizationSpec};
pub use pruning::{DimensionImportance, PrunedEmbedding, StabilityTracker};
pub use synthetic::GroundTruth;
