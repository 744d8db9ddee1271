//! `serve`: replay the feed over the configured window and emit prediction
//! bundles to the selected sinks (JSONL file and/or HTTP endpoint).

use std::fs;

use log::info;
use serde::Serialize;
use serde_json::json;

use parkcast_core::datamodel::MinuteGrid;
use parkcast_core::realtime::replay::build_feed_events;
use parkcast_core::realtime::serve::{
    serve_replay, FanoutSink, HttpServer, JsonlSink, ServeConfig, ServeStatus, ServeSummary, Sink,
};
use parkcast_core::realtime::{FeedState, ServingModel};

use crate::commands::evaluate::load_paired_model;
use crate::config::Effective;
use crate::context::Context;
use crate::error::{CliError, CliResult};
use crate::store::write_json;

/// The replay window: the last `window_days` of the dataset grid, ending
/// `end_margin_min` minutes before the grid runs out.
pub fn replay_window(
    grid: &MinuteGrid,
    window_days: f64,
    end_margin_min: usize,
) -> CliResult<MinuteGrid> {
    let requested = (window_days * 1440.0).round() as usize;
    let available = grid.len.saturating_sub(end_margin_min);
    let len = requested.min(available);
    if len == 0 {
        return Err(CliError::one_violation(format!(
            "replay window of {window_days} days does not fit a dataset of {} minutes",
            grid.len
        )));
    }
    let start_idx = available - len;
    Ok(MinuteGrid::new(
        grid.start.plus_minutes(start_idx as i64),
        len,
    )?)
}

/// Builds the serving models for every configured target of one family.
pub fn serving_models(ctx: &Context, eff: &Effective) -> CliResult<Vec<ServingModel>> {
    let mut models = Vec::new();
    for &target in &eff.config.train.targets {
        let model = load_paired_model(ctx, eff.config.serve.family, target)?;
        models.push(ServingModel::new(model)?);
    }
    Ok(models)
}

#[derive(Serialize)]
struct ServeArtifact {
    config_digest: String,
    family: String,
    window_start: String,
    window_minutes: usize,
    summary: ServeSummary,
}

pub fn run(eff: &Effective) -> CliResult<serde_json::Value> {
    let ctx = Context::load(eff)?;
    let cfg = &eff.config;
    let settings = &cfg.serve;
    let dir = ctx.layout.serve_dir();
    fs::create_dir_all(&dir)?;

    let models = serving_models(&ctx, eff)?;
    let window = replay_window(ctx.prepared.dataset.grid(), settings.window_days, 0)?;
    let events = build_feed_events(
        &ctx.prepared.dataset,
        &settings.replay_config(cfg.seed),
        &window,
    )?;
    let mut state = FeedState::new(&ctx.schema, &ctx.prepared.holidays)?;
    let serve_config = ServeConfig {
        tick_interval_min: settings.tick_interval_min,
        horizons: settings.horizons.clone(),
        speed: settings.speed.to_core(),
    };

    let bundles_path = dir.join("bundles.jsonl");
    let mut jsonl = if settings.sink.wants_jsonl() {
        Some(JsonlSink::create(&bundles_path)?)
    } else {
        None
    };
    let (mut status, server) = if settings.sink.wants_http() {
        let status = ServeStatus::new();
        let server = HttpServer::start(&settings.bind, status.clone())?;
        let addr = server.addr();
        fs::write(dir.join("http_addr.txt"), format!("{addr}\n"))?;
        info!("http endpoint listening on {addr}");
        (Some(status), Some(server))
    } else {
        (None, None)
    };

    let garage = ctx.prepared.dataset.garage.garage.clone();
    let summary = {
        let mut sinks: Vec<&mut dyn Sink> = Vec::new();
        if let Some(sink) = jsonl.as_mut() {
            sinks.push(sink);
        }
        if let Some(status) = status.as_mut() {
            sinks.push(status);
        }
        let mut fanout = FanoutSink { sinks };
        serve_replay(
            &events,
            &mut state,
            &models,
            &garage,
            &serve_config,
            &mut fanout,
        )?
    };

    if server.is_some() && settings.linger_s > 0 {
        info!("replay done; keeping the endpoint up {}s", settings.linger_s);
        std::thread::sleep(std::time::Duration::from_secs(settings.linger_s));
    }
    let http_addr = server.as_ref().map(|s| s.addr().to_string());
    if let Some(server) = server {
        server.stop();
    }

    let artifact = ServeArtifact {
        config_digest: eff.digest.clone(),
        family: settings.family.as_str().to_string(),
        window_start: window.start.to_iso8601(),
        window_minutes: window.len,
        summary,
    };
    write_json(&dir.join("serve_summary.json"), &artifact)?;
    info!(
        "served {} bundles over {} ticks ({} warmup skips, {} stale skips)",
        summary.emitted, summary.ticks, summary.skipped_incomplete, summary.skipped_stale
    );

    let model_digests: Vec<String> = models.iter().map(|m| m.digest.clone()).collect();

    Ok(json!({
        "ok": true,
        "command": "serve",
        "config_digest": eff.digest,
        "window_start": artifact.window_start,
        "window_minutes": artifact.window_minutes,
        "ticks": summary.ticks,
        "emitted": summary.emitted,
        "skipped_incomplete": summary.skipped_incomplete,
        "skipped_stale": summary.skipped_stale,
        "bundles_path": if settings.sink.wants_jsonl() { Some(&bundles_path) } else { None },
        "http_addr": http_addr,
        "model_digests": model_digests,
    }))
}
