//! Versioned JSON checkpoints for trained models.
//!
//! A checkpoint stores the parameter matrices row-major together with the
//! prior (or penalty) hyperparameters and the optimizer step counter. The
//! magic string identifies the format version.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::model::{SpikeSlabPrior, SpoSEParams, VariationalParams};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "VICE1";

/// Serialized model state plus training progress.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub magic: String,
    pub step: u64,
    #[serde(flatten)]
    pub model: CheckpointModel,
}

/// The two trainable model families.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckpointModel {
    Vice {
        num_objects: usize,
        num_dims: usize,
        mu: Vec<f64>,
        log_sigma: Vec<f64>,
        prior: SpikeSlabPrior,
    },
    Spose {
        num_objects: usize,
        num_dims: usize,
        x: Vec<f64>,
        lambda: f64,
    },
}

impl Checkpoint {
    pub fn from_variational(params: &VariationalParams, prior: SpikeSlabPrior, step: u64) -> Self {
        Self {
            magic: CHECKPOINT_MAGIC.to_string(),
            step,
            model: CheckpointModel::Vice {
                num_objects: params.num_objects(),
                num_dims: params.num_dims(),
                mu: params.mu.iter().cloned().collect(),
                log_sigma: params.log_sigma.iter().cloned().collect(),
                prior,
            },
        }
    }

    pub fn from_spose(params: &SpoSEParams, step: u64) -> Self {
        Self {
            magic: CHECKPOINT_MAGIC.to_string(),
            step,
            model: CheckpointModel::Spose {
                num_objects: params.x.nrows(),
                num_dims: params.x.ncols(),
                x: params.x.iter().cloned().collect(),
                lambda: params.lambda,
            },
        }
    }

    /// Recover variational parameters; errors if this is a MAP checkpoint.
    pub fn to_variational(&self) -> Result<(VariationalParams, SpikeSlabPrior)> {
        match &self.model {
            CheckpointModel::Vice {
                num_objects,
                num_dims,
                mu,
                log_sigma,
                prior,
            } => {
                let mu = matrix_from_raw(*num_objects, *num_dims, mu, "mu")?;
                let log_sigma = matrix_from_raw(*num_objects, *num_dims, log_sigma, "log_sigma")?;
                Ok((VariationalParams::new(mu, log_sigma)?, *prior))
            }
            CheckpointModel::Spose { .. } => Err(Error::CheckpointFormat(
                "expected a variational checkpoint, found a MAP checkpoint".into(),
            )),
        }
    }

    /// Recover MAP parameters; errors if this is a variational checkpoint.
    pub fn to_spose(&self) -> Result<SpoSEParams> {
        match &self.model {
            CheckpointModel::Spose {
                num_objects,
                num_dims,
                x,
                lambda,
            } => {
                let x = matrix_from_raw(*num_objects, *num_dims, x, "x")?;
                SpoSEParams::new(x, *lambda)
            }
            CheckpointModel::Vice { .. } => Err(Error::CheckpointFormat(
                "expected a MAP checkpoint, found a variational checkpoint".into(),
            )),
        }
    }

    /// The rectified mean embedding (variational) or the embedding itself
    /// (MAP); this is the deterministic predictor both families expose.
    pub fn mean_embedding(&self) -> Result<Array2<f64>> {
        match &self.model {
            CheckpointModel::Vice { .. } => {
                let (params, _) = self.to_variational()?;
                Ok(params.mu.mapv(|v| v.max(0.0)))
            }
            CheckpointModel::Spose { .. } => Ok(self.to_spose()?.x),
        }
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(File::create(path)?)
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(reader))?;
        if ckpt.magic != CHECKPOINT_MAGIC {
            return Err(Error::CheckpointFormat(format!(
                "bad magic {:?}, expected {CHECKPOINT_MAGIC:?}",
                ckpt.magic
            )));
        }
        Ok(ckpt)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(File::open(path)?)
    }
}

fn matrix_from_raw(rows: usize, cols: usize, raw: &[f64], name: &str) -> Result<Array2<f64>> {
    if raw.len() != rows * cols {
        return Err(Error::CheckpointFormat(format!(
            "{name} holds {} values, expected {rows} x {cols}",
            raw.len()
        )));
    }
    Array2::from_shape_vec((rows, cols), raw.to_vec())
        .map_err(|e| Error::CheckpointFormat(e.to_string()))
}
