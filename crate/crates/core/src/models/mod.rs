//! Forecasting models: a from-scratch feed-forward network, bagged
//! regression trees, and the naive reference forecasters.
//!
//! A [`TrainedModel`] binds fitted parameters to the feature schema digest
//! and configuration digest they were produced under, so downstream
//! consumers can refuse mismatched inputs. Models persist inside the
//! digest-checked artifact container.

pub mod forest;
pub mod mlp;
pub mod naive;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{HorizonGrid, Matrix, TargetKind};
use crate::util;

/// The trainable model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    Forest,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Forest => "forest",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "forest" => Ok(ModelKind::Forest),
            other => Err(Error::InvalidConfig(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Fitted parameters of either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParams {
    Mlp(mlp::MlpModel),
    Forest(forest::ForestModel),
}

/// A trained multi-horizon model for one target, with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub target: TargetKind,
    pub horizons: HorizonGrid,
    /// Digest of the feature schema rows must be encoded with.
    pub schema_digest: String,
    /// Digest of the configuration the model was trained under.
    pub config_digest: String,
    pub params: ModelParams,
}

const MODEL_ARTIFACT_KIND: &str = "trained-model";
const MODEL_ARTIFACT_VERSION: u32 = 1;

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::Mlp(_) => ModelKind::Mlp,
            ModelParams::Forest(_) => ModelKind::Forest,
        }
    }

    /// Expected feature-row width.
    pub fn n_inputs(&self) -> usize {
        match &self.params {
            ModelParams::Mlp(m) => m.n_inputs(),
            ModelParams::Forest(f) => f.n_features,
        }
    }

    /// Predicts all horizons for one encoded feature row.
    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        match &self.params {
            ModelParams::Mlp(m) => m.predict_row(row),
            ModelParams::Forest(f) => f.predict_row(row),
        }
    }

    /// Predicts all horizons for every row of `x`.
    pub fn predict_matrix(&self, x: &Matrix) -> Matrix {
        match &self.params {
            ModelParams::Mlp(m) => m.predict_matrix(x),
            ModelParams::Forest(f) => f.predict_matrix(x),
        }
    }

    /// Writes the model to `path` inside the digest-checked container.
    pub fn save(&self, path: &Path) -> Result<()> {
        util::save_artifact(path, MODEL_ARTIFACT_KIND, MODEL_ARTIFACT_VERSION, self)
    }

    /// Loads a model saved by [`TrainedModel::save`], verifying its digest.
    pub fn load(path: &Path) -> Result<Self> {
        util::load_artifact(path, MODEL_ARTIFACT_KIND)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_trained_forest() -> (TrainedModel, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 80;
        let x = Matrix::from_rows(
            (0..n)
                .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
                .collect(),
        );
        let y = Matrix::from_rows(
            (0..n)
                .map(|i| {
                    let r = x.row(i);
                    vec![r[0] + r[1], r[2] * 2.0]
                })
                .collect(),
        );
        let config = forest::ForestConfig {
            n_trees: 5,
            max_depth: 6,
            ..forest::ForestConfig::default()
        };
        let params = forest::train(&x, &y, &config).unwrap();
        let model = TrainedModel {
            target: TargetKind::Occupancy,
            horizons: HorizonGrid(vec![5, 10]),
            schema_digest: "abc".into(),
            config_digest: "def".into(),
            params: ModelParams::Forest(params),
        };
        (model, x)
    }

    #[test]
    fn save_load_round_trip_preserves_predictions_exactly() {
        let (model, x) = toy_trained_forest();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = TrainedModel::load(&path).unwrap();
        assert_eq!(loaded.kind(), ModelKind::Forest);
        assert_eq!(loaded.target, TargetKind::Occupancy);
        assert_eq!(loaded.schema_digest, "abc");
        let before = model.predict_matrix(&x);
        let after = loaded.predict_matrix(&x);
        assert_eq!(before.data, after.data, "bit-identical predictions");
    }

    #[test]
    fn tampering_is_detected_on_load() {
        let (model, _) = toy_trained_forest();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // Flip the stored target; the digest no longer matches.
        let tampered = text.replace("\"occupancy\"", "\"influx\"");
        assert_ne!(text, tampered);
        std::fs::write(&path, tampered).unwrap();
        let err = TrainedModel::load(&path).unwrap_err();
        assert!(matches!(err, Error::DigestMismatch { .. }), "{err:?}");
    }

    #[test]
    fn mlp_round_trips_too() {
        let x = Matrix::from_rows((0..32).map(|i| vec![i as f64 / 16.0]).collect());
        let y = Matrix::from_rows((0..32).map(|i| vec![(i as f64 / 16.0) * 3.0]).collect());
        let config = mlp::MlpConfig {
            hidden_layers: vec![4],
            learning_rate: 1e-2,
            epochs: 10,
            batch_size: 8,
            seed: 3,
        };
        let (params, _) = mlp::train(&x, &y, &x, &y, &config).unwrap();
        let model = TrainedModel {
            target: TargetKind::Influx,
            horizons: HorizonGrid::default(),
            schema_digest: "s".into(),
            config_digest: "c".into(),
            params: ModelParams::Mlp(params),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mlp.json");
        model.save(&path).unwrap();
        let loaded = TrainedModel::load(&path).unwrap();
        assert_eq!(loaded.kind(), ModelKind::Mlp);
        assert_eq!(
            model.predict_row(&[0.3]),
            loaded.predict_row(&[0.3]),
            "bit-identical after round trip"
        );
    }
}
