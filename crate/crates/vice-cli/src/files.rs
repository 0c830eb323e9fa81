//! On-disk formats owned by the CLI: dense embedding matrices, the
//! kept-dimension sidecar, selection tables, and label lists.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use vice_core::pruning::{DimensionImportance, MassImportance, PrunedEmbedding};

use crate::CliError;

/// Write a matrix as plain text, one object per row, space-separated.
pub fn write_matrix(path: &Path, matrix: &Array2<f64>) -> Result<(), CliError> {
    let mut text = String::new();
    for row in matrix.rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&fields.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::data(format!("writing {}: {e}", path.display())))
}

/// Read a plain-text matrix; every row must have the same width.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("reading {}: {e}", path.display())))?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    CliError::data(format!(
                        "{} line {}: not a number: {f:?}",
                        path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(CliError::data(format!(
                    "{} line {}: expected {w} columns, got {}",
                    path.display(),
                    lineno + 1,
                    fields.len()
                )));
            }
            _ => {}
        }
        values.extend(fields);
        rows += 1;
    }
    let width = width.ok_or_else(|| CliError::data(format!("{} is empty", path.display())))?;
    Array2::from_shape_vec((rows, width), values)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Sidecar describing which original dimensions a pruned matrix kept.
#[derive(Debug, Serialize, Deserialize)]
pub struct KeptDims {
    pub kept_dims: Vec<usize>,
}

pub fn write_kept_dims(path: &Path, kept_dims: &[usize]) -> Result<(), CliError> {
    let text = serde_json::to_string(&KeptDims {
        kept_dims: kept_dims.to_vec(),
    })
    .expect("kept-dims sidecar serializes");
    fs::write(path, text + "\n")
        .map_err(|e| CliError::data(format!("writing {}: {e}", path.display())))
}

pub fn read_kept_dims(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("reading {}: {e}", path.display())))?;
    let sidecar: KeptDims = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(sidecar.kept_dims)
}

/// Load a pruned embedding from its matrix file plus optional sidecar;
/// without a sidecar the columns are numbered 0..d.
pub fn read_pruned_embedding(
    matrix_path: &Path,
    kept_dims_path: Option<&Path>,
) -> Result<PrunedEmbedding, CliError> {
    let matrix = read_matrix(matrix_path)?;
    let kept = match kept_dims_path {
        Some(path) => {
            let kept = read_kept_dims(path)?;
            if kept.len() != matrix.ncols() {
                return Err(CliError::data(format!(
                    "sidecar lists {} dimensions but the matrix has {} columns",
                    kept.len(),
                    matrix.ncols()
                )));
            }
            kept
        }
        None => (0..matrix.ncols()).collect(),
    };
    Ok(PrunedEmbedding::from_map(matrix, kept))
}

/// Selection table: `dim,significant_objects,selected`.
pub fn write_selection_csv(path: &Path, selection: &[DimensionImportance]) -> Result<(), CliError> {
    let mut text = String::from("dim,significant_objects,selected\n");
    for imp in selection {
        text.push_str(&format!(
            "{},{},{}\n",
            imp.dim_index, imp.significant_objects, imp.selected
        ));
    }
    fs::write(path, text).map_err(|e| CliError::data(format!("writing {}: {e}", path.display())))
}

/// Selection table for MAP embeddings: `dim,mass_per_object,selected`.
pub fn write_mass_selection_csv(path: &Path, selection: &[MassImportance]) -> Result<(), CliError> {
    let mut text = String::from("dim,mass_per_object,selected\n");
    for imp in selection {
        text.push_str(&format!(
            "{},{},{}\n",
            imp.dim_index, imp.mass_per_object, imp.selected
        ));
    }
    fs::write(path, text).map_err(|e| CliError::data(format!("writing {}: {e}", path.display())))
}

/// One label per line, index order.
pub fn read_labels(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("reading {}: {e}", path.display())))?;
    Ok(text.lines().map(|l| l.trim().to_string()).collect())
}
