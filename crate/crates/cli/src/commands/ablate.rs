//! `ablate`: feature-elimination and data-halving studies.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use log::info;
use serde::Serialize;
use serde_json::json;

use parkcast_core::analysis::{
    data_halving_study, feature_elimination_study, EliminationStudy, HalvingStudy,
};
use parkcast_core::features::{FeatureCategory, FeatureSchema, SupervisedSet, TargetKind};
use parkcast_core::models::{forest, mlp, ModelParams, TrainedModel};
use parkcast_core::util::derive_seed;
use parkcast_core::Result as CoreResult;

use crate::config::{Effective, Family, Study};
use crate::context::Context;
use crate::error::CliResult;
use crate::store::write_json;

/// Trains one model of the configured family with a fixed seed, so every
/// study entry differs only in the data it saw.
fn fit_model(
    eff: &Effective,
    family: Family,
    seed: u64,
    train: &SupervisedSet,
    validation: &SupervisedSet,
    schema_digest: String,
) -> CoreResult<TrainedModel> {
    let params = match family {
        Family::Forest => {
            let config = eff.config.train.forest.to_core(seed);
            ModelParams::Forest(forest::train(&train.x, &train.y, &config)?)
        }
        Family::Network => {
            let config = eff.config.train.network.to_core(seed);
            let (model, _) = mlp::train(
                &train.x,
                &train.y,
                &validation.x,
                &validation.y,
                &config,
            )?;
            ModelParams::Mlp(model)
        }
    };
    Ok(TrainedModel {
        target: train.target,
        horizons: train.horizons.clone(),
        schema_digest,
        config_digest: eff.digest.clone(),
        params,
    })
}

/// `category,test_mse,delta` — delta relative to the full-featured row.
fn write_features_csv(path: &Path, study: &EliminationStudy) -> CliResult<()> {
    let reference = study
        .entries
        .first()
        .map(|e| e.pooled_mse)
        .unwrap_or_default();
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "category,test_mse,delta")?;
    for entry in &study.entries {
        writeln!(
            out,
            "{},{},{}",
            entry.eliminated,
            entry.pooled_mse,
            entry.pooled_mse - reference
        )?;
    }
    out.flush()?;
    Ok(())
}

/// `halving_level,rows,target,test_mase` over every studied target.
fn write_halving_csv(path: &Path, studies: &[HalvingStudy]) -> CliResult<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "halving_level,rows,target,test_mase")?;
    for study in studies {
        for (level, entry) in study.levels.iter().enumerate() {
            let mase = entry
                .pooled_mase
                .map(|m| format!("{m}"))
                .unwrap_or_default();
            writeln!(
                out,
                "{level},{rows},{target},{mase}",
                rows = entry.train_rows,
                target = study.target
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EliminationArtifact {
    config_digest: String,
    family: String,
    study: EliminationStudy,
}

#[derive(Serialize)]
struct HalvingArtifact {
    config_digest: String,
    family: String,
    studies: Vec<HalvingStudy>,
}

pub fn run(eff: &Effective) -> CliResult<serde_json::Value> {
    let ctx = Context::load(eff)?;
    let cfg = &eff.config;
    let family = cfg.ablate.family;
    let naive = cfg.evaluate.naive.to_core();
    let fit_seed = derive_seed(cfg.seed, "ablate", 0);
    let dir = ctx.layout.analysis_dir();
    fs::create_dir_all(&dir)?;

    let sets_for = |target: TargetKind| -> CliResult<(
        parkcast_core::features::TargetSeries,
        SupervisedSet,
        SupervisedSet,
        SupervisedSet,
    )> {
        let series = ctx.series(target)?;
        let train = ctx.supervised(&series, &ctx.prepared.split.train, cfg.train.train_stride)?;
        let validation = ctx.supervised(
            &series,
            &ctx.prepared.split.validation,
            cfg.train.validation_stride,
        )?;
        let test = ctx.supervised(&series, &ctx.prepared.split.test, cfg.evaluate.test_stride)?;
        Ok((series, train, validation, test))
    };

    let mut summary = serde_json::Map::new();
    summary.insert("ok".into(), json!(true));
    summary.insert("command".into(), json!("ablate"));
    summary.insert("config_digest".into(), json!(eff.digest));
    summary.insert("family".into(), json!(family.as_str()));

    if matches!(cfg.ablate.study, Study::Features | Study::Both) {
        let target = cfg.ablate.elimination_target;
        let (series, train, validation, test) = sets_for(target)?;
        let study = feature_elimination_study(
            &train,
            &validation,
            &test,
            &ctx.schema,
            &series,
            naive,
            &FeatureCategory::ALL,
            |tr, va, schema: &FeatureSchema| {
                fit_model(eff, family, fit_seed, tr, va, schema.digest())
            },
        )?;
        write_features_csv(&dir.join("ablation_features.csv"), &study)?;
        write_json(
            &dir.join("elimination.json"),
            &EliminationArtifact {
                config_digest: eff.digest.clone(),
                family: family.as_str().to_string(),
                study: study.clone(),
            },
        )?;
        info!(
            "elimination study on {}: {} entries",
            target.as_str(),
            study.entries.len()
        );
        summary.insert(
            "elimination".into(),
            json!({
                "target": target.as_str(),
                "entries": study
                    .entries
                    .iter()
                    .map(|e| json!({
                        "eliminated": e.eliminated,
                        "test_mse": e.pooled_mse,
                        "mase_delta": e.mase_delta,
                    }))
                    .collect::<Vec<_>>(),
            }),
        );
    }

    if matches!(cfg.ablate.study, Study::Data | Study::Both) {
        let schema_digest = ctx.schema.digest();
        let mut studies = Vec::new();
        for &target in &cfg.ablate.halving_targets {
            let (series, train, validation, test) = sets_for(target)?;
            let study = data_halving_study(
                &train,
                &validation,
                &test,
                &series,
                naive,
                cfg.ablate.halving_levels,
                |tr, va| fit_model(eff, family, fit_seed, tr, va, schema_digest.clone()),
            )?;
            info!(
                "halving study on {}: {} levels",
                target.as_str(),
                study.levels.len()
            );
            studies.push(study);
        }
        write_halving_csv(&dir.join("ablation_data.csv"), &studies)?;
        write_json(
            &dir.join("halving.json"),
            &HalvingArtifact {
                config_digest: eff.digest.clone(),
                family: family.as_str().to_string(),
                studies: studies.clone(),
            },
        )?;
        summary.insert(
            "halving".into(),
            json!({
                "levels": cfg.ablate.halving_levels,
                "targets": studies
                    .iter()
                    .map(|s| json!({
                        "target": s.target,
                        "mase_by_level": s
                            .levels
                            .iter()
                            .map(|l| l.pooled_mase)
                            .collect::<Vec<_>>(),
                    }))
                    .collect::<Vec<_>>(),
            }),
        );
    }

    summary.insert("out_dir".into(), json!(dir));
    Ok(serde_json::Value::Object(summary))
}
