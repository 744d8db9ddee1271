//! `evaluate`: score trained artifacts on the held-out test span, write the
//! full report plus a per-instance scaled-error CSV, and refuse artifacts
//! that were produced under a different configuration than the dataset.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use log::info;
use serde::Serialize;
use serde_json::json;

use parkcast_core::eval::{evaluate_model, measure_latency, AlignedEvaluation, MetricSet};
use parkcast_core::features::TargetKind;
use parkcast_core::models::TrainedModel;

use crate::config::{Effective, Family};
use crate::context::Context;
use crate::error::{CliError, CliResult};
use crate::store::write_json;

/// One line per (timestamp, horizon): the absolute error divided by the
/// naive benchmark's MAE at that horizon. Horizons where the benchmark has
/// zero error leave the scaled column empty.
fn write_scaled_errors_csv(
    path: &Path,
    aligned: &AlignedEvaluation,
    metrics: &MetricSet,
) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "timestamp,horizon_min,scaled_error")?;
    for i in 0..aligned.timestamps.len() {
        let t = aligned.timestamps[i].to_iso8601();
        for (j, hm) in metrics.per_horizon.iter().enumerate() {
            let err = (aligned.predictions.row(i)[j] - aligned.actuals.row(i)[j]).abs();
            let scaled = if hm.naive_zero {
                String::new()
            } else {
                format!("{}", err / hm.naive_mae)
            };
            writeln!(out, "{t},{h},{scaled}", h = hm.horizon_min)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Loads a model artifact and enforces the artifact/dataset pairing rule.
pub fn load_paired_model(
    ctx: &Context,
    family: Family,
    target: TargetKind,
) -> CliResult<TrainedModel> {
    let path = ctx.layout.model_path(family, target);
    if !path.exists() {
        return Err(CliError::one_violation(format!(
            "model artifact not found at {}; run `parkcast train` first",
            path.display()
        )));
    }
    let model = TrainedModel::load(&path)?;
    if model.config_digest != ctx.prepared.config_digest {
        return Err(CliError::Pipeline {
            code: "DigestMismatch",
            message: format!(
                "refusing mismatched artifact/dataset pair: model {} was trained under config digest {}, dataset was prepared under {}",
                path.display(),
                model.config_digest,
                ctx.prepared.config_digest
            ),
        });
    }
    Ok(model)
}

#[derive(Serialize)]
struct SummaryRow {
    family: String,
    target: String,
    n_rows: usize,
    pooled_mse: f64,
    pooled_mae: f64,
    pooled_mase: Option<f64>,
    report_path: String,
}

#[derive(Serialize)]
struct EvaluateSummary {
    config_digest: String,
    naive_reference: String,
    rows: Vec<SummaryRow>,
}

pub fn run(eff: &Effective) -> CliResult<serde_json::Value> {
    let ctx = Context::load(eff)?;
    let cfg = &eff.config;
    let naive = cfg.evaluate.naive.to_core();
    let mut rows = Vec::new();

    for &target in &cfg.train.targets {
        let series = ctx.series(target)?;
        let test_set =
            ctx.supervised(&series, &ctx.prepared.split.test, cfg.evaluate.test_stride)?;

        for &family in &cfg.train.families {
            let model = load_paired_model(&ctx, family, target)?;
            let (mut report, aligned) = evaluate_model(&model, &test_set, &series, naive)?;
            if cfg.evaluate.measure_latency {
                report.latency = Some(measure_latency(
                    &model,
                    &test_set.x,
                    cfg.evaluate.latency_repeats,
                ));
            }

            let dir = ctx.layout.report_dir(family, target);
            let report_path = dir.join("report.json");
            write_json(&report_path, &report)?;
            write_scaled_errors_csv(&dir.join("errors.csv"), &aligned, &report.metrics)?;

            info!(
                "{} {}: pooled MASE {:?} over {} rows",
                family.as_str(),
                target.as_str(),
                report.metrics.pooled_mase,
                report.metrics.n_rows
            );
            rows.push(SummaryRow {
                family: family.as_str().to_string(),
                target: target.as_str().to_string(),
                n_rows: report.metrics.n_rows,
                pooled_mse: report.metrics.pooled_mse,
                pooled_mae: report.metrics.pooled_mae,
                pooled_mase: report.metrics.pooled_mase,
                report_path: report_path.display().to_string(),
            });
        }
    }

    let summary = EvaluateSummary {
        config_digest: eff.digest.clone(),
        naive_reference: naive.as_str().to_string(),
        rows,
    };
    write_json(&ctx.layout.evaluate_summary(), &summary)?;

    Ok(json!({
        "ok": true,
        "command": "evaluate",
        "config_digest": eff.digest,
        "naive_reference": summary.naive_reference,
        "models": summary.rows.len(),
        "pooled_mase": summary
            .rows
            .iter()
            .map(|r| json!({
                "family": r.family,
                "target": r.target,
                "pooled_mase": r.pooled_mase,
            }))
            .collect::<Vec<_>>(),
        "summary_path": ctx.layout.evaluate_summary(),
    }))
}
