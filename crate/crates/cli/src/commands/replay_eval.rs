//! `replay-eval`: replay a held-out window at full speed, score the emitted
//! bundles against ground truth, and compare with the same artifacts'
//! offline scores.

use std::fs;

use log::info;
use serde::Serialize;
use serde_json::json;

use parkcast_core::eval::{evaluate_model, MetricSet};
use parkcast_core::models::naive::NaiveKind;
use parkcast_core::realtime::replay::build_feed_events;
use parkcast_core::realtime::serve::{
    serve_replay, FanoutSink, JsonlSink, MemorySink, ReplaySpeed, ServeConfig, ServeSummary, Sink,
};
use parkcast_core::realtime::{realtime_evaluate, FeedState, PredictionBundle};

use crate::commands::evaluate::load_paired_model;
use crate::commands::serve::{replay_window, serving_models};
use crate::config::Effective;
use crate::context::Context;
use crate::error::CliResult;
use crate::store::write_json;

/// MASE pooled over a subset of horizons. Offline sets score every horizon
/// on every row, so the per-horizon MAEs carry equal weight and the pooled
/// ratio is the sum of model MAEs over the sum of benchmark MAEs.
fn pooled_mase_over(metrics: &MetricSet, horizons: &[u32]) -> Option<f64> {
    let mut mae = 0.0;
    let mut naive = 0.0;
    let mut any = false;
    for hm in &metrics.per_horizon {
        if horizons.contains(&hm.horizon_min) {
            mae += hm.mae;
            naive += hm.naive_mae;
            any = true;
        }
    }
    (any && naive > 0.0).then(|| mae / naive)
}

#[derive(Serialize)]
struct TargetComparison {
    target: String,
    bundles: usize,
    realtime_pooled_mase: Option<f64>,
    /// Same artifact on the offline test span, pooled over the served
    /// horizons only.
    offline_pooled_mase_served: Option<f64>,
    /// Offline pooled score over the full trained horizon grid.
    offline_pooled_mase_full: Option<f64>,
    realtime: MetricSet,
}

#[derive(Serialize)]
struct ReplayArtifact {
    config_digest: String,
    family: String,
    window_start: String,
    window_minutes: usize,
    summary: ServeSummary,
    targets: Vec<TargetComparison>,
}

pub fn run(eff: &Effective) -> CliResult<serde_json::Value> {
    let ctx = Context::load(eff)?;
    let cfg = &eff.config;
    let settings = &cfg.serve;
    let dir = ctx.layout.serve_dir();
    fs::create_dir_all(&dir)?;

    let models = serving_models(&ctx, eff)?;
    // The window must end early enough that every served horizon still has
    // ground truth inside the grid.
    let margin = settings.horizons.last().copied().unwrap_or(0) as usize;
    let window = replay_window(ctx.prepared.dataset.grid(), settings.window_days, margin)?;
    let events = build_feed_events(
        &ctx.prepared.dataset,
        &settings.replay_config(cfg.seed),
        &window,
    )?;
    let mut state = FeedState::new(&ctx.schema, &ctx.prepared.holidays)?;
    let serve_config = ServeConfig {
        tick_interval_min: settings.tick_interval_min,
        horizons: settings.horizons.clone(),
        // Scoring runs offline, so the replay never sleeps.
        speed: ReplaySpeed::Instant,
    };

    let garage = ctx.prepared.dataset.garage.garage.clone();
    let mut memory = MemorySink::default();
    let mut jsonl = JsonlSink::create(&dir.join("replay_bundles.jsonl"))?;
    let summary = {
        let mut fanout = FanoutSink {
            sinks: vec![&mut jsonl as &mut dyn Sink, &mut memory as &mut dyn Sink],
        };
        serve_replay(
            &events,
            &mut state,
            &models,
            &garage,
            &serve_config,
            &mut fanout,
        )?
    };
    info!(
        "replayed {} ticks, emitted {} bundles ({} warmup skips, {} stale skips)",
        summary.ticks, summary.emitted, summary.skipped_incomplete, summary.skipped_stale
    );

    let mut comparisons = Vec::new();
    for &target in &cfg.train.targets {
        let bundles: Vec<PredictionBundle> = memory
            .bundles
            .iter()
            .filter(|b| b.target == target)
            .cloned()
            .collect();
        let series = ctx.series(target)?;
        // The realtime scorer pins the weekly copy as its benchmark, so the
        // offline comparison uses the same reference.
        let (realtime, _) = realtime_evaluate(&bundles, &series)?;

        let model = load_paired_model(&ctx, settings.family, target)?;
        let test_set =
            ctx.supervised(&series, &ctx.prepared.split.test, cfg.evaluate.test_stride)?;
        let (offline_report, _) =
            evaluate_model(&model, &test_set, &series, NaiveKind::SeasonalWeekly)?;

        comparisons.push(TargetComparison {
            target: target.as_str().to_string(),
            bundles: bundles.len(),
            realtime_pooled_mase: realtime.pooled_mase,
            offline_pooled_mase_served: pooled_mase_over(
                &offline_report.metrics,
                &settings.horizons,
            ),
            offline_pooled_mase_full: offline_report.metrics.pooled_mase,
            realtime,
        });
    }

    let artifact = ReplayArtifact {
        config_digest: eff.digest.clone(),
        family: settings.family.as_str().to_string(),
        window_start: window.start.to_iso8601(),
        window_minutes: window.len,
        summary,
        targets: comparisons,
    };
    write_json(&dir.join("replay_report.json"), &artifact)?;

    Ok(json!({
        "ok": true,
        "command": "replay-eval",
        "config_digest": eff.digest,
        "window_start": artifact.window_start,
        "window_minutes": artifact.window_minutes,
        "emitted": artifact.summary.emitted,
        "targets": artifact
            .targets
            .iter()
            .map(|t| json!({
                "target": t.target,
                "bundles": t.bundles,
                "realtime_pooled_mase": t.realtime_pooled_mase,
                "offline_pooled_mase_served": t.offline_pooled_mase_served,
            }))
            .collect::<Vec<_>>(),
        "report_path": dir.join("replay_report.json"),
    }))
}
