//! Run configuration: a versioned JSON schema whose values command-line
//! flags override. The fully resolved configuration is re-emitted next to
//! the run outputs so any run can be reproduced from its artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vice_core::eval::KlDirection;
use vice_core::model::SpikeSlabPrior;
use vice_core::optim::TrainConfig;
use vice_core::pac::default_delta_grid;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Which estimator a training run fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vice,
    Spose,
}

/// Hyperparameter grid for `vice grid`: the Cartesian product of the three
/// lists, filtered by the strict spike < slab constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub pi_spike: Vec<f64>,
    pub sigma_spike: Vec<f64>,
    pub sigma_slab: Vec<f64>,
}

impl Default for GridSpec {
    /// The full search grid: 9 mixture weights by 5 spike scales by 6 slab
    /// scales, 180 combinations after the constraint filter.
    fn default() -> Self {
        Self {
            pi_spike: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            sigma_spike: vec![0.125, 0.25, 0.5, 1.0, 2.0],
            sigma_slab: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
        }
    }
}

impl GridSpec {
    /// Valid combinations in ascending lexicographic (pi, spike, slab)
    /// order; grid selection breaks mean-cross-entropy ties by taking the
    /// first, so this order is the documented tie rule.
    pub fn combinations(&self) -> Vec<SpikeSlabPrior> {
        let sorted = |values: &[f64]| {
            let mut v = values.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let mut combos = Vec::new();
        for &pi in &sorted(&self.pi_spike) {
            for &spike in &sorted(&self.sigma_spike) {
                for &slab in &sorted(&self.sigma_slab) {
                    if let Ok(prior) = SpikeSlabPrior::new(pi, spike, slab) {
                        combos.push(prior);
                    }
                }
            }
        }
        combos
    }
}

/// Everything a run needs; serialized as `resolved-config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub method: Method,

    /// Triplet file with the training judgments.
    pub data: PathBuf,
    pub num_objects: usize,
    /// Predefined validation triplet file; mutually exclusive with
    /// `val_fraction`.
    #[serde(default)]
    pub val_data: Option<PathBuf>,
    /// Fraction of `data` to split off as validation.
    #[serde(default)]
    pub val_fraction: Option<f64>,
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,

    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,

    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_d_init")]
    pub d_init: usize,
    #[serde(default = "default_stability_window")]
    pub stability_window: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_stop_on_convergence")]
    pub stop_on_convergence: bool,

    #[serde(default)]
    pub prior: SpikeSlabPrior,
    /// l1 strength for the MAP baseline.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_spose_mass_threshold")]
    pub spose_mass_threshold: f64,

    #[serde(default = "default_fdr_alpha")]
    pub fdr_alpha: f64,
    #[serde(default = "default_reliability_threshold")]
    pub reliability_threshold: usize,

    #[serde(default = "default_r_samples")]
    pub r_samples: usize,
    #[serde(default = "default_kl_direction")]
    pub kl_direction: KlDirection,

    #[serde(default = "default_bound_alpha")]
    pub bound_alpha: f64,
    #[serde(default = "default_delta_grid")]
    pub deltas: Vec<f64>,

    #[serde(default)]
    pub grid: Option<GridSpec>,
}

fn default_split_seed() -> u64 {
    7
}
fn default_seeds() -> Vec<u64> {
    (1..=20).collect()
}
fn default_jobs() -> usize {
    1
}
fn default_batch_size() -> usize {
    128
}
fn default_max_epochs() -> usize {
    2000
}
fn default_d_init() -> usize {
    100
}
fn default_stability_window() -> usize {
    500
}
fn default_eval_every() -> usize {
    1
}
fn default_eta() -> f64 {
    1e-3
}
fn default_stop_on_convergence() -> bool {
    true
}
fn default_lambda() -> f64 {
    1.0
}
fn default_spose_mass_threshold() -> f64 {
    0.05
}
fn default_fdr_alpha() -> f64 {
    0.05
}
fn default_reliability_threshold() -> usize {
    5
}
fn default_r_samples() -> usize {
    50
}
fn default_kl_direction() -> KlDirection {
    KlDirection::HumanModel
}
fn default_bound_alpha() -> f64 {
    0.05
}

impl RunConfig {
    /// A fully defaulted configuration over the given data file.
    pub fn new(data: PathBuf, num_objects: usize, output: PathBuf) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            method: Method::Vice,
            data,
            num_objects,
            val_data: None,
            val_fraction: None,
            split_seed: default_split_seed(),
            seeds: default_seeds(),
            output,
            jobs: default_jobs(),
            batch_size: default_batch_size(),
            max_epochs: default_max_epochs(),
            d_init: default_d_init(),
            stability_window: default_stability_window(),
            eval_every: default_eval_every(),
            eta: default_eta(),
            stop_on_convergence: default_stop_on_convergence(),
            prior: SpikeSlabPrior::default(),
            lambda: default_lambda(),
            spose_mass_threshold: default_spose_mass_threshold(),
            fdr_alpha: default_fdr_alpha(),
            reliability_threshold: default_reliability_threshold(),
            r_samples: default_r_samples(),
            kl_direction: default_kl_direction(),
            bound_alpha: default_bound_alpha(),
            deltas: default_delta_grid(),
            grid: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "config schema version {} unsupported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::config(format!("serializing config: {e}")))?;
        std::fs::write(path, text + "\n")
            .map_err(|e| CliError::config(format!("writing {}: {e}", path.display())))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train_config(0)
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        if self.num_objects < 3 {
            return Err(CliError::config(format!(
                "num_objects must be at least 3, got {}",
                self.num_objects
            )));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seed list is empty".into()));
        }
        if self.jobs == 0 {
            return Err(CliError::config("jobs must be at least 1".into()));
        }
        if self.val_data.is_some() && self.val_fraction.is_some() {
            return Err(CliError::config(
                "val_data and val_fraction are mutually exclusive".into(),
            ));
        }
        if let Some(f) = self.val_fraction {
            if !(0.0..1.0).contains(&f) {
                return Err(CliError::config(format!(
                    "val_fraction must lie in [0, 1), got {f}"
                )));
            }
        }
        if self.lambda < 0.0 {
            return Err(CliError::config(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.bound_alpha > 0.0 && self.bound_alpha < 1.0) {
            return Err(CliError::config(format!(
                "bound_alpha must lie in (0, 1), got {}",
                self.bound_alpha
            )));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| *d <= 0.0) {
            return Err(CliError::config(
                "quantization scales must be positive and non-empty".into(),
            ));
        }
        if self.r_samples == 0 {
            return Err(CliError::config("r_samples must be at least 1".into()));
        }
        Ok(())
    }

    /// The per-seed training configuration this run config describes.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            seed,
            prior: self.prior,
            d_init: self.d_init,
            stability_window: self.stability_window,
            eval_every: self.eval_every,
            eta: self.eta,
            fdr_alpha: self.fdr_alpha,
            reliability_threshold: self.reliability_threshold,
            stop_on_convergence: self.stop_on_convergence,
            spose_mass_threshold: self.spose_mass_threshold,
        }
    }
}

/// `VICE_SEED` provides the seed when a command does not specify one.
pub fn env_fallback_seed() -> Result<Option<u64>, CliError> {
    match std::env::var("VICE_SEED") {
        Ok(text) => text
            .parse::<u64>()
            .map(Some)
            .map_err(|_| CliError::config(format!("VICE_SEED is not an integer: {text:?}"))),
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_has_180_combinations() {
        assert_eq!(GridSpec::default().combinations().len(), 180);
    }

    #[test]
    fn grid_filters_non_strict_pairs() {
        let spec = GridSpec {
            pi_spike: vec![0.5],
            sigma_spike: vec![0.25, 1.0],
            sigma_slab: vec![0.25, 1.0],
        };
        let combos = spec.combinations();
        assert_eq!(combos.len(), 1);
        assert_eq!((combos[0].sigma_spike, combos[0].sigma_slab), (0.25, 1.0));
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig::new("data.txt".into(), 30, "out".into());
        let text = serde_json::to_string(&cfg).unwrap();
        let parsed: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let cfg = RunConfig::new("data.txt".into(), 30, "out".into());
        let mut value: serde_json::Value = serde_json::to_value(&cfg).unwrap();
        value["typo_field"] = serde_json::json!(1);
        assert!(serde_json::from_value::<RunConfig>(value).is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = RunConfig::new("data.txt".into(), 30, "out".into());
        cfg.val_fraction = Some(1.5);
        assert!(cfg.validate().is_err());
        cfg.val_fraction = Some(0.1);
        assert!(cfg.validate().is_ok());
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
    }
}
