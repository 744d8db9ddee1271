//! Bagged ensembles of multi-output regression trees.
//!
//! Each tree trains on a bootstrap resample drawn from its own
//! seed-derived random stream, so the forest is reproducible bit for bit
//! regardless of how the trees are scheduled across threads. Predictions
//! average the trees in index order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Matrix;
use crate::models::tree::{fit_tree, MaxFeatures, SortedColumns, TreeConfig, TreeModel};
use crate::util::derive_seed;

/// Forest training configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: u64,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 50,
            max_depth: 12,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            seed: 7,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("forest needs at least one tree".into()));
        }
        self.tree_config().validate()
    }

    fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            max_features: self.max_features,
        }
    }
}

/// A fitted forest. Prediction is the mean of the trees' leaf vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_features: usize,
    pub n_outputs: usize,
    pub trees: Vec<TreeModel>,
}

impl ForestModel {
    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_outputs];
        for tree in &self.trees {
            tree.accumulate_row(row, &mut acc);
        }
        let inv = 1.0 / self.trees.len() as f64;
        for v in &mut acc {
            *v *= inv;
        }
        acc
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows, self.n_outputs);
        for i in 0..x.rows {
            let row = self.predict_row(x.row(i));
            out.row_mut(i).copy_from_slice(&row);
        }
        out
    }
}

/// Trains a forest on the full supervised matrices.
///
/// Errors: [`Error::ShapeMismatch`] on inconsistent dimensions,
/// [`Error::EmptyInput`] on empty data, plus configuration errors.
pub fn train(x: &Matrix, y: &Matrix, config: &ForestConfig) -> Result<ForestModel> {
    config.validate()?;
    if x.rows == 0 || x.cols == 0 {
        return Err(Error::EmptyInput("forest training data"));
    }
    if y.rows != x.rows {
        return Err(Error::ShapeMismatch {
            context: "forest targets",
            expected: x.rows,
            got: y.rows,
        });
    }
    let sorted = SortedColumns::new(x);
    let tree_config = config.tree_config();
    let trees: Vec<TreeModel> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "tree", t as u64));
            let weights = bootstrap_weights(x.rows, &mut rng);
            fit_tree(x, y, &weights, &tree_config, &sorted, &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(ForestModel {
        n_features: x.cols,
        n_outputs: y.cols,
        trees,
    })
}

/// Draws `n` rows with replacement and returns per-row multiplicities.
fn bootstrap_weights<R: Rng>(n: usize, rng: &mut R) -> Vec<u32> {
    let mut weights = vec![0u32; n];
    for _ in 0..n {
        weights[rng.random_range(0..n)] += 1;
    }
    weights
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_problem(n: usize) -> (Matrix, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let x = Matrix::from_rows(
            (0..n)
                .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
                .collect(),
        );
        let y = Matrix::from_rows(
            (0..n)
                .map(|i| {
                    let r = x.row(i);
                    vec![3.0 * r[0] - r[2], r[1] * r[3]]
                })
                .collect(),
        );
        (x, y)
    }

    #[test]
    fn bootstrap_weights_total_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = bootstrap_weights(500, &mut rng);
        assert_eq!(w.iter().map(|&v| u64::from(v)).sum::<u64>(), 500);
        // About 1/e of the rows should be left out.
        let left_out = w.iter().filter(|&&v| v == 0).count();
        assert!((130..=230).contains(&left_out), "left out {left_out}");
    }

    #[test]
    fn forest_beats_the_mean_predictor() {
        let (x, y) = toy_problem(300);
        let forest = train(&x, &y, &ForestConfig::default()).unwrap();
        let pred = forest.predict_matrix(&x);
        let mut mse = 0.0;
        let mut mean_mse = 0.0;
        let mean0: f64 = (0..y.rows).map(|i| y.row(i)[0]).sum::<f64>() / y.rows as f64;
        let mean1: f64 = (0..y.rows).map(|i| y.row(i)[1]).sum::<f64>() / y.rows as f64;
        for i in 0..y.rows {
            mse += (pred.row(i)[0] - y.row(i)[0]).powi(2) + (pred.row(i)[1] - y.row(i)[1]).powi(2);
            mean_mse += (mean0 - y.row(i)[0]).powi(2) + (mean1 - y.row(i)[1]).powi(2);
        }
        assert!(
            mse < mean_mse * 0.2,
            "forest in-sample error {mse} vs mean-only {mean_mse}"
        );
    }

    #[test]
    fn training_is_bitwise_deterministic_across_schedulers() {
        let (x, y) = toy_problem(120);
        let config = ForestConfig {
            n_trees: 8,
            max_depth: 6,
            ..ForestConfig::default()
        };
        let a = train(&x, &y, &config).unwrap();
        let b = train(&x, &y, &config).unwrap();
        assert_eq!(a, b, "same ambient thread pool");

        // A single-threaded pool schedules the trees completely differently;
        // the result must not change.
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| train(&x, &y, &config)).unwrap();
        assert_eq!(a, c, "single-threaded pool");
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap(),
            "serialized bytes"
        );
    }

    #[test]
    fn trees_differ_from_each_other() {
        let (x, y) = toy_problem(150);
        let config = ForestConfig {
            n_trees: 4,
            ..ForestConfig::default()
        };
        let forest = train(&x, &y, &config).unwrap();
        assert!(
            forest.trees.windows(2).any(|w| w[0] != w[1]),
            "bootstrap must differentiate the trees"
        );
    }

    #[test]
    fn empty_and_mismatched_inputs_are_rejected() {
        let (x, y) = toy_problem(10);
        let bad = Matrix::zeros(5, 2);
        assert!(matches!(
            train(&x, &bad, &ForestConfig::default()),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            train(&Matrix::zeros(0, 3), &Matrix::zeros(0, 2), &ForestConfig::default()),
            Err(Error::EmptyInput(_))
        ));
        let zero_trees = ForestConfig {
            n_trees: 0,
            ..ForestConfig::default()
        };
        assert!(matches!(
            train(&x, &y, &zero_trees),
            Err(Error::InvalidConfig(_))
        ));
    }
}
