//! `synth`: generate a deterministic synthetic city as raw CSVs.

use std::fs;

use log::info;
use serde::Serialize;
use serde_json::json;

use parkcast_core::ingest::synth::generate_synthetic_city;
use parkcast_core::ingest::{
    write_holidays_csv, write_traffic_csv, write_transactions_csv, write_weather_csv,
    TrafficObservation,
};

use crate::config::Effective;
use crate::error::CliResult;
use crate::store::{write_json, Layout};

/// Sidecar describing what the generator produced, tied to the config.
#[derive(Serialize)]
struct SynthManifest {
    config_digest: String,
    garage: String,
    start: String,
    days: u32,
    capacity: u32,
    locations: u32,
    transactions: usize,
    traffic_observations: usize,
    weather_observations: usize,
    holidays: usize,
    rejected_arrivals: u64,
}

pub fn run(eff: &Effective) -> CliResult<serde_json::Value> {
    let layout = Layout::new(&eff.config);
    let synth = &eff.config.synth;
    let city = generate_synthetic_city(synth)?;

    fs::create_dir_all(&layout.data_dir)?;
    write_transactions_csv(&layout.transactions_csv(), &city.transactions)?;

    // Location-major, time-ordered within each loop: deterministic.
    let traffic: Vec<TrafficObservation> = city
        .traffic
        .values()
        .flat_map(|obs| obs.iter().cloned())
        .collect();
    write_traffic_csv(&layout.traffic_csv(), &traffic)?;
    write_weather_csv(&layout.weather_csv(), &city.weather)?;
    write_holidays_csv(&layout.holidays_csv(), &city.holidays)?;

    let manifest = SynthManifest {
        config_digest: eff.digest.clone(),
        garage: synth.garage.to_string(),
        start: synth.start.clone(),
        days: synth.days,
        capacity: synth.capacity,
        locations: synth.locations,
        transactions: city.transactions.len(),
        traffic_observations: traffic.len(),
        weather_observations: city.weather.len(),
        holidays: city.holidays.len(),
        rejected_arrivals: city.rejected_arrivals,
    };
    write_json(&layout.synth_manifest(), &manifest)?;

    info!(
        "synthesized {} days: {} stays, {} turned away at capacity {}",
        synth.days,
        city.transactions.len(),
        city.rejected_arrivals,
        synth.capacity
    );

    Ok(json!({
        "ok": true,
        "command": "synth",
        "config_digest": eff.digest,
        "data_dir": layout.data_dir,
        "transactions": city.transactions.len(),
        "traffic_observations": traffic.len(),
        "weather_observations": city.weather.len(),
        "rejected_arrivals": city.rejected_arrivals,
    }))
}
