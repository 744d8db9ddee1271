//! `prepare`: parse the raw CSVs, derive minute-resolution garage state,
//! assemble the cleaned dataset, split it chronologically, and persist it.

use std::collections::BTreeMap;

use log::{info, warn};
use serde_json::json;

use parkcast_core::datamodel::{
    assemble_dataset, chronological_split, derive_states_from_transactions, GarageId, LocationId,
    MinuteGrid, Timestamp, MINUTES_PER_DAY,
};
use parkcast_core::ingest::{
    parse_holidays_csv, parse_traffic_csv, parse_transactions_csv, parse_weather_csv,
    TrafficObservation,
};

use crate::config::Effective;
use crate::error::{CliError, CliResult};
use crate::store::{save_prepared, Layout, PreparedDataset, RejectedCounts};

pub fn run(eff: &Effective) -> CliResult<serde_json::Value> {
    let layout = Layout::new(&eff.config);
    let cfg = &eff.config;

    let mut missing = Vec::new();
    for path in [
        layout.transactions_csv(),
        layout.traffic_csv(),
        layout.weather_csv(),
        layout.holidays_csv(),
    ] {
        if !path.exists() {
            missing.push(format!(
                "input file not found at {}; run `parkcast synth` or point paths.data_dir at raw data",
                path.display()
            ));
        }
    }
    if !missing.is_empty() {
        return Err(CliError::invalid(missing));
    }

    let transactions = parse_transactions_csv(&layout.transactions_csv())?;
    let traffic = parse_traffic_csv(&layout.traffic_csv())?;
    let weather = parse_weather_csv(&layout.weather_csv())?;
    let (holidays, holidays_rejected) = parse_holidays_csv(&layout.holidays_csv())?;
    let rejected = RejectedCounts {
        transactions: transactions.rejected,
        traffic: traffic.rejected,
        weather: weather.rejected,
        holidays: holidays_rejected,
    };

    // Null prepare fields fall back to the synthesizer section, so the
    // synthetic pipeline is configured in exactly one place.
    let garage = GarageId(
        cfg.prepare
            .garage
            .clone()
            .unwrap_or_else(|| cfg.synth.garage.0.clone()),
    );
    let capacity = cfg.prepare.capacity.unwrap_or(cfg.synth.capacity);
    let start_text = cfg
        .prepare
        .start
        .clone()
        .unwrap_or_else(|| cfg.synth.start.clone());
    let days = cfg.prepare.days.unwrap_or(cfg.synth.days);
    let start = Timestamp::from_iso8601(&start_text)?;
    let grid = MinuteGrid::new(start, days as usize * MINUTES_PER_DAY as usize)?;

    let mut stays = Vec::with_capacity(transactions.records.len());
    let mut foreign = 0usize;
    for record in &transactions.records {
        if record.garage == garage {
            stays.push((record.entry_time, record.exit_time));
        } else {
            foreign += 1;
        }
    }
    if foreign > 0 {
        warn!("ignored {foreign} stays recorded for other garages");
    }

    let states = derive_states_from_transactions(
        garage,
        capacity,
        cfg.prepare.initial_occupancy,
        grid,
        &stays,
    )?;

    let mut traffic_by_location: BTreeMap<LocationId, Vec<TrafficObservation>> = BTreeMap::new();
    for obs in traffic.records {
        traffic_by_location
            .entry(obs.location.clone())
            .or_default()
            .push(obs);
    }

    let dataset = assemble_dataset(states, &traffic_by_location, &weather.records, &holidays)?;
    let split = chronological_split(&dataset, &cfg.split)?;

    info!(
        "prepared {} minutes: {} valid rows ({:.2}% deleted), split {}/{}/{}",
        dataset.grid().len,
        dataset.valid_rows().len(),
        dataset.deleted_fraction * 100.0,
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );

    let prepared = PreparedDataset {
        config_digest: eff.digest.clone(),
        dataset,
        split,
        holidays,
        rejected,
    };
    save_prepared(&layout, &prepared)?;

    Ok(json!({
        "ok": true,
        "command": "prepare",
        "config_digest": eff.digest,
        "dataset_path": layout.dataset_path(),
        "grid_minutes": prepared.dataset.grid().len,
        "valid_rows": prepared.dataset.valid_rows().len(),
        "deleted_fraction": prepared.dataset.deleted_fraction,
        "split_rows": {
            "train": prepared.split.train.len(),
            "validation": prepared.split.validation.len(),
            "test": prepared.split.test.len(),
        },
        "rejected_rows": {
            "transactions": rejected.transactions,
            "traffic": rejected.traffic,
            "weather": rejected.weather,
            "holidays": rejected.holidays,
        },
    }))
}
