//! Shared state the post-`prepare` stages rebuild from the persisted
//! dataset: feature inputs, the schema fitted on the training span, and
//! supervised sets per target and split segment.

use log::warn;

use parkcast_core::features::{
    build_feature_inputs, build_supervised, build_target_series, fit_schema, FeatureInputs,
    FeatureSchema, HorizonGrid, SupervisedSet, TargetKind, TargetSeries,
};

use crate::config::Effective;
use crate::error::CliResult;
use crate::store::{self, Layout, PreparedDataset};

pub struct Context {
    pub layout: Layout,
    pub prepared: PreparedDataset,
    pub inputs: FeatureInputs,
    pub schema: FeatureSchema,
    pub horizons: HorizonGrid,
}

/// Keeps every `stride`-th row (stride 1 keeps all).
pub fn strided(rows: &[usize], stride: usize) -> Vec<usize> {
    rows.iter().step_by(stride.max(1)).copied().collect()
}

impl Context {
    /// Loads the prepared dataset and refits the feature schema on its
    /// training rows, exactly as `train` saw them.
    pub fn load(eff: &Effective) -> CliResult<Self> {
        let layout = Layout::new(&eff.config);
        let prepared = store::load_prepared(&layout)?;
        if prepared.config_digest != eff.digest {
            warn!(
                "dataset at {} was prepared under config digest {}, current is {}",
                layout.dataset_path().display(),
                prepared.config_digest,
                eff.digest
            );
        }
        let inputs = build_feature_inputs(&prepared.dataset, &eff.config.features)?;
        let schema = fit_schema(&inputs, &eff.config.features, &prepared.split.train)?;
        let horizons = HorizonGrid(eff.config.horizons.clone());
        Ok(Self {
            layout,
            prepared,
            inputs,
            schema,
            horizons,
        })
    }

    pub fn series(&self, target: TargetKind) -> CliResult<TargetSeries> {
        Ok(build_target_series(&self.prepared.dataset.garage, target)?)
    }

    /// Supervised set over the given candidate rows for one target.
    pub fn supervised(
        &self,
        series: &TargetSeries,
        rows: &[usize],
        stride: usize,
    ) -> CliResult<SupervisedSet> {
        let rows = strided(rows, stride);
        Ok(build_supervised(
            &self.inputs,
            series,
            &self.schema,
            &self.horizons,
            &rows,
        )?)
    }
}
