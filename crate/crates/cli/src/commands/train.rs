//! `train`: fit every configured family on every configured target and
//! save the artifacts.

use log::info;
use serde::Serialize;
use serde_json::json;

use parkcast_core::features::TargetKind;
use parkcast_core::models::{forest, mlp, ModelParams, TrainedModel};
use parkcast_core::util::derive_seed;

use crate::config::{Effective, Family};
use crate::context::Context;
use crate::error::CliResult;
use crate::store::write_json;

/// Stable per-target index so seeds do not depend on the order targets are
/// listed in the configuration.
fn target_index(target: TargetKind) -> u64 {
    TargetKind::ALL
        .iter()
        .position(|&t| t == target)
        .expect("target is one of the known kinds") as u64
}

#[derive(Serialize)]
struct TrainedEntry {
    family: String,
    target: String,
    path: String,
    train_rows: usize,
    validation_rows: usize,
    feature_width: usize,
    best_epoch: Option<usize>,
    best_validation_loss: Option<f64>,
}

#[derive(Serialize)]
struct TrainSummary {
    config_digest: String,
    schema_digest: String,
    models: Vec<TrainedEntry>,
}

pub fn run(eff: &Effective) -> CliResult<serde_json::Value> {
    let ctx = Context::load(eff)?;
    let cfg = &eff.config;
    let mut entries = Vec::new();

    for &target in &cfg.train.targets {
        let series = ctx.series(target)?;
        let train_set = ctx.supervised(&series, &ctx.prepared.split.train, cfg.train.train_stride)?;
        let val_set = ctx.supervised(
            &series,
            &ctx.prepared.split.validation,
            cfg.train.validation_stride,
        )?;

        for &family in &cfg.train.families {
            let idx = target_index(target);
            let (params, best_epoch, best_loss) = match family {
                Family::Forest => {
                    let config = cfg
                        .train
                        .forest
                        .to_core(derive_seed(cfg.seed, "train-forest", idx));
                    let model = forest::train(&train_set.x, &train_set.y, &config)?;
                    (ModelParams::Forest(model), None, None)
                }
                Family::Network => {
                    let config = cfg
                        .train
                        .network
                        .to_core(derive_seed(cfg.seed, "train-network", idx));
                    let (model, report) =
                        mlp::train(&train_set.x, &train_set.y, &val_set.x, &val_set.y, &config)?;
                    (
                        ModelParams::Mlp(model),
                        Some(report.best_epoch),
                        Some(report.best_validation_loss),
                    )
                }
            };
            let model = TrainedModel {
                target,
                horizons: ctx.horizons.clone(),
                schema_digest: ctx.schema.digest(),
                config_digest: eff.digest.clone(),
                params,
            };
            let path = ctx.layout.model_path(family, target);
            model.save(&path)?;
            info!(
                "trained {} {} on {} rows -> {}",
                family.as_str(),
                target.as_str(),
                train_set.len(),
                path.display()
            );
            entries.push(TrainedEntry {
                family: family.as_str().to_string(),
                target: target.as_str().to_string(),
                path: path.display().to_string(),
                train_rows: train_set.len(),
                validation_rows: val_set.len(),
                feature_width: ctx.schema.width(),
                best_epoch,
                best_validation_loss: best_loss,
            });
        }
    }

    let summary = TrainSummary {
        config_digest: eff.digest.clone(),
        schema_digest: ctx.schema.digest(),
        models: entries,
    };
    write_json(&ctx.layout.train_summary(), &summary)?;

    Ok(json!({
        "ok": true,
        "command": "train",
        "config_digest": eff.digest,
        "schema_digest": summary.schema_digest,
        "models": summary.models.len(),
        "summary_path": ctx.layout.train_summary(),
    }))
}
