//! `tune`: run the configured hyperparameter sweep and export the
//! validation-MSE heatmap plus per-epoch learning curves.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use log::info;
use serde::Serialize;
use serde_json::json;

use parkcast_core::tune::{run_grid, select_forest_size, GridSpec, TuneReport};
use parkcast_core::util::derive_seed;

use crate::config::{Effective, Sweep};
use crate::context::Context;
use crate::error::CliResult;
use crate::store::write_json;

/// `(axis1, axis2)` of one cell: the two swept coordinates, second empty
/// for one-dimensional sweeps.
fn cell_axes(sweep: Sweep, params: &std::collections::BTreeMap<String, f64>) -> (String, String) {
    let get = |key: &str| params.get(key).map(|v| format!("{v}")).unwrap_or_default();
    match sweep {
        Sweep::Architecture => (get("layers"), get("width")),
        Sweep::LearningRate => (get("learning_rate"), String::new()),
        Sweep::ForestShape => (get("n_trees"), get("depth")),
    }
}

fn write_heatmap_csv(path: &Path, sweep: Sweep, report: &TuneReport) -> CliResult<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "axis1,axis2,validation_mse")?;
    for cell in &report.cells {
        let (a1, a2) = cell_axes(sweep, &cell.params);
        let mse = cell
            .validation_mse
            .map(|m| format!("{m}"))
            .unwrap_or_default();
        writeln!(out, "{a1},{a2},{mse}")?;
    }
    out.flush()?;
    Ok(())
}

fn write_curves_csv(path: &Path, report: &TuneReport) -> CliResult<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "cell,epoch,train_mse,val_mse")?;
    for (i, cell) in report.cells.iter().enumerate() {
        for (epoch, (train, val)) in cell
            .train_curve
            .iter()
            .zip(&cell.validation_curve)
            .enumerate()
        {
            writeln!(out, "{i},{epoch},{train},{val}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// For tree-count sweeps: the smallest ensemble within 1% of the best
/// validation MSE at the best cell's depth.
#[derive(Serialize)]
struct ForestSelection {
    depth: usize,
    n_trees: usize,
}

fn forest_selection(report: &TuneReport) -> Option<ForestSelection> {
    let best = report.best_cell()?;
    let depth = *best.params.get("depth")? as usize;
    let points: Vec<(usize, f64)> = report
        .cells
        .iter()
        .filter(|c| c.params.get("depth") == best.params.get("depth"))
        .filter_map(|c| Some((*c.params.get("n_trees")? as usize, c.validation_mse?)))
        .collect();
    let n_trees = select_forest_size(&points).ok()?;
    Some(ForestSelection { depth, n_trees })
}

#[derive(Serialize)]
struct TuneArtifact {
    config_digest: String,
    target: String,
    sweep: String,
    report: TuneReport,
    /// Present only for tree-count sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    selected_forest: Option<ForestSelection>,
}

pub fn run(eff: &Effective) -> CliResult<serde_json::Value> {
    let ctx = Context::load(eff)?;
    let cfg = &eff.config;
    let tune = &cfg.tune;

    let series = ctx.series(tune.target)?;
    let train_set = ctx.supervised(&series, &ctx.prepared.split.train, cfg.train.train_stride)?;
    let val_set = ctx.supervised(
        &series,
        &ctx.prepared.split.validation,
        cfg.train.validation_stride,
    )?;

    let spec = match tune.sweep {
        Sweep::Architecture => GridSpec::MlpArchitecture {
            layer_counts: tune.layers.clone(),
            total_widths: tune.neurons.clone(),
        },
        Sweep::LearningRate => GridSpec::MlpLearningRate {
            rates: tune.learning_rates.clone(),
        },
        Sweep::ForestShape => GridSpec::ForestShape {
            tree_counts: tune.trees.clone(),
            depths: tune.depths.clone(),
        },
    };
    // Cell seeds derive from this master inside the sweep, one per cell.
    let master = derive_seed(cfg.seed, "tune", 0);
    let base_mlp = cfg.train.network.to_core(master);
    let base_forest = cfg.train.forest.to_core(master);

    let report = run_grid(
        &train_set.x,
        &train_set.y,
        &val_set.x,
        &val_set.y,
        &spec,
        &base_mlp,
        &base_forest,
        master,
    )?;

    let dir = ctx.layout.tune_dir(tune.sweep.as_str());
    fs::create_dir_all(&dir)?;
    write_heatmap_csv(&dir.join("tune_heatmap.csv"), tune.sweep, &report)?;
    write_curves_csv(&dir.join("tune_curves.csv"), &report)?;

    let selected_forest = match tune.sweep {
        Sweep::ForestShape => forest_selection(&report),
        _ => None,
    };
    let best = report.best_cell().map(|c| {
        json!({
            "params": c.params,
            "validation_mse": c.validation_mse,
        })
    });
    let diverged = report.cells.iter().filter(|c| c.diverged).count();
    let artifact = TuneArtifact {
        config_digest: eff.digest.clone(),
        target: tune.target.as_str().to_string(),
        sweep: tune.sweep.as_str().to_string(),
        report,
        selected_forest,
    };
    write_json(&dir.join("tune_report.json"), &artifact)?;

    info!(
        "swept {} cells ({} diverged) on {}",
        artifact.report.cells.len(),
        diverged,
        artifact.target
    );

    Ok(json!({
        "ok": true,
        "command": "tune",
        "config_digest": eff.digest,
        "sweep": artifact.sweep,
        "target": artifact.target,
        "cells": artifact.report.cells.len(),
        "diverged": diverged,
        "best": best,
        "out_dir": dir,
    }))
}
