//! Hyperparameter grid search: network shape and learning-rate sweeps, and
//! ensemble-size/depth sweeps, scored by validation MSE.
//!
//! Every cell trains from its own derived seed, so the grid's outcome does
//! not depend on evaluation order. A cell whose training diverges is
//! recorded as such and skipped in the final selection rather than aborting
//! the sweep.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Matrix;
use crate::models::forest::{self, ForestConfig};
use crate::models::mlp::{self, MlpConfig};
use crate::util::derive_seed;

/// Which hyperparameters a sweep varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// Depth x total-width sweep: each cell spreads `total_width` neurons
    /// over `layers` hidden layers as evenly as possible.
    MlpArchitecture {
        layer_counts: Vec<usize>,
        total_widths: Vec<usize>,
    },
    /// Learning-rate sweep at a fixed architecture.
    MlpLearningRate { rates: Vec<f64> },
    /// Tree-count x depth sweep.
    ForestShape {
        tree_counts: Vec<usize>,
        depths: Vec<usize>,
    },
}

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    /// Cell coordinates as name -> value, e.g. {"layers": 4, "width": 90}.
    pub params: BTreeMap<String, f64>,
    pub validation_mse: Option<f64>,
    pub diverged: bool,
    /// Per-epoch training losses. Empty for ensemble cells (which train in
    /// one shot) and for diverged cells.
    #[serde(default)]
    pub train_curve: Vec<f64>,
    /// Per-epoch validation losses, parallel to `train_curve`.
    #[serde(default)]
    pub validation_curve: Vec<f64>,
}

/// Outcome of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub spec: GridSpec,
    pub cells: Vec<GridCell>,
    /// Index of the best non-diverged cell (lowest validation MSE, first on
    /// ties), or `None` when every cell diverged.
    pub best: Option<usize>,
}

impl TuneReport {
    pub fn best_cell(&self) -> Option<&GridCell> {
        self.best.map(|i| &self.cells[i])
    }
}

/// Spreads `total` neurons over `layers` hidden layers as evenly as
/// possible, giving earlier layers the remainder: 90 over 4 is
/// `[23, 23, 22, 22]`.
pub fn allocate_widths(total: usize, layers: usize) -> Result<Vec<usize>> {
    if layers == 0 {
        return Err(Error::InvalidConfig("layer count must be positive".into()));
    }
    if total < layers {
        return Err(Error::InvalidConfig(format!(
            "cannot spread {total} neurons over {layers} layers"
        )));
    }
    let base = total / layers;
    let extra = total % layers;
    Ok((0..layers)
        .map(|i| if i < extra { base + 1 } else { base })
        .collect())
}

fn pick_best(cells: &[GridCell]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, cell) in cells.iter().enumerate() {
        let Some(mse) = cell.validation_mse else {
            continue;
        };
        if best.is_none_or(|(_, b)| mse < b) {
            best = Some((i, mse));
        }
    }
    best.map(|(i, _)| i)
}

/// Runs a sweep. `base_mlp` supplies the fixed MLP settings (epochs, batch
/// size, and the architecture for learning-rate sweeps); `base_forest` the
/// fixed forest settings. Cell seeds derive from `master_seed` and the cell
/// index.
pub fn run_grid(
    train_x: &Matrix,
    train_y: &Matrix,
    val_x: &Matrix,
    val_y: &Matrix,
    spec: &GridSpec,
    base_mlp: &MlpConfig,
    base_forest: &ForestConfig,
    master_seed: u64,
) -> Result<TuneReport> {
    let mut cells = Vec::new();
    match spec {
        GridSpec::MlpArchitecture {
            layer_counts,
            total_widths,
        } => {
            if layer_counts.is_empty() || total_widths.is_empty() {
                return Err(Error::EmptyInput("architecture grid axes"));
            }
            for &layers in layer_counts {
                for &width in total_widths {
                    let index = cells.len() as u64;
                    let hidden = allocate_widths(width, layers)?;
                    let config = MlpConfig {
                        hidden_layers: hidden,
                        seed: derive_seed(master_seed, "grid-cell", index),
                        ..base_mlp.clone()
                    };
                    let mut params = BTreeMap::new();
                    params.insert("layers".to_string(), layers as f64);
                    params.insert("width".to_string(), width as f64);
                    cells.push(mlp_cell(train_x, train_y, val_x, val_y, &config, params)?);
                }
            }
        }
        GridSpec::MlpLearningRate { rates } => {
            if rates.is_empty() {
                return Err(Error::EmptyInput("learning-rate grid axis"));
            }
            for &rate in rates {
                let index = cells.len() as u64;
                let config = MlpConfig {
                    learning_rate: rate,
                    seed: derive_seed(master_seed, "grid-cell", index),
                    ..base_mlp.clone()
                };
                let mut params = BTreeMap::new();
                params.insert("learning_rate".to_string(), rate);
                cells.push(mlp_cell(train_x, train_y, val_x, val_y, &config, params)?);
            }
        }
        GridSpec::ForestShape {
            tree_counts,
            depths,
        } => {
            if tree_counts.is_empty() || depths.is_empty() {
                return Err(Error::EmptyInput("forest grid axes"));
            }
            for &n_trees in tree_counts {
                for &depth in depths {
                    let index = cells.len() as u64;
                    let config = ForestConfig {
                        n_trees,
                        max_depth: depth,
                        seed: derive_seed(master_seed, "grid-cell", index),
                        ..*base_forest
                    };
                    let model = forest::train(train_x, train_y, &config)?;
                    let pred = model.predict_matrix(val_x);
                    let mse = matrix_mse(&pred, val_y);
                    let mut params = BTreeMap::new();
                    params.insert("n_trees".to_string(), n_trees as f64);
                    params.insert("depth".to_string(), depth as f64);
                    cells.push(GridCell {
                        params,
                        validation_mse: Some(mse),
                        diverged: false,
                        train_curve: Vec::new(),
                        validation_curve: Vec::new(),
                    });
                }
            }
        }
    }
    let best = pick_best(&cells);
    Ok(TuneReport {
        spec: spec.clone(),
        cells,
        best,
    })
}

fn mlp_cell(
    train_x: &Matrix,
    train_y: &Matrix,
    val_x: &Matrix,
    val_y: &Matrix,
    config: &MlpConfig,
    params: BTreeMap<String, f64>,
) -> Result<GridCell> {
    match mlp::train(train_x, train_y, val_x, val_y, config) {
        Ok((_, report)) => Ok(GridCell {
            params,
            validation_mse: Some(report.best_validation_loss),
            diverged: false,
            train_curve: report.train_loss,
            validation_curve: report.validation_loss,
        }),
        Err(Error::Divergence { .. }) => Ok(GridCell {
            params,
            validation_mse: None,
            diverged: true,
            train_curve: Vec::new(),
            validation_curve: Vec::new(),
        }),
        Err(other) => Err(other),
    }
}

fn matrix_mse(pred: &Matrix, truth: &Matrix) -> f64 {
    let mut total = 0.0;
    for (p, t) in pred.data.iter().zip(&truth.data) {
        let e = p - t;
        total += e * e;
    }
    total / truth.data.len() as f64
}

/// Picks the smallest ensemble size whose validation MSE is within 1% of
/// the sweep's minimum — the plateau point where more trees stop paying.
///
/// Errors: [`Error::EmptyInput`] when no point has a finite MSE.
pub fn select_forest_size(points: &[(usize, f64)]) -> Result<usize> {
    let min = points
        .iter()
        .filter(|(_, mse)| mse.is_finite())
        .map(|&(_, mse)| mse)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::EmptyInput("forest size sweep"));
    }
    let threshold = min * 1.01;
    points
        .iter()
        .filter(|(_, mse)| mse.is_finite() && *mse <= threshold)
        .map(|&(n, _)| n)
        .min()
        .ok_or(Error::EmptyInput("forest size sweep"))
}

/// Writes a sweep as tidy CSV: one row per cell, one column per parameter,
/// then the score columns.
pub fn write_grid_csv(path: &Path, report: &TuneReport) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let param_names: Vec<String> = report
        .cells
        .first()
        .map(|c| c.params.keys().cloned().collect())
        .unwrap_or_default();
    writeln!(out, "{},validation_mse,diverged,best", param_names.join(","))?;
    for (i, cell) in report.cells.iter().enumerate() {
        let params: Vec<String> = param_names
            .iter()
            .map(|name| cell.params.get(name).map_or(String::new(), |v| v.to_string()))
            .collect();
        let mse = cell
            .validation_mse
            .map_or(String::new(), |v| v.to_string());
        writeln!(
            out,
            "{},{},{},{}",
            params.join(","),
            mse,
            cell.diverged,
            (report.best == Some(i)) as u8
        )?;
    }
    out.flush()?;
    Ok(())
}
