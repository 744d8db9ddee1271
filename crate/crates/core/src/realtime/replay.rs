//! Deterministic reconstruction of a live feed from a recorded dataset.
//!
//! Each stream fires at its deployment cadence: traffic every minute,
//! weather on the ten-minute grid lattice, occupancy on a seeded jittered
//! walk around its nominal cadence. Pacing (real-time, scaled, or
//! as-fast-as-possible) is a concern of the serving loop; the event
//! sequence itself is pacing-independent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sort_events, FeedEvent, FeedPayload};
use crate::datamodel::{Dataset, MinuteGrid};
use crate::error::{Error, Result};
use crate::util::derive_seed;

/// Cadences and jitter for the reconstructed streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayConfig {
    /// Nominal gap between occupancy updates, minutes.
    pub occupancy_cadence_min: i64,
    /// Uniform jitter on each occupancy gap: `cadence ± jitter`.
    pub occupancy_jitter_min: i64,
    /// Gap between traffic samples, minutes.
    pub traffic_cadence_min: i64,
    /// Gap between weather observations, minutes.
    pub weather_cadence_min: i64,
    /// Seed for the jitter sequence.
    pub seed: u64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            occupancy_cadence_min: 11,
            occupancy_jitter_min: 2,
            traffic_cadence_min: 1,
            weather_cadence_min: 10,
            seed: 7,
        }
    }
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<()> {
        for (label, cadence) in [
            ("occupancy", self.occupancy_cadence_min),
            ("traffic", self.traffic_cadence_min),
            ("weather", self.weather_cadence_min),
        ] {
            if cadence < 1 {
                return Err(Error::InvalidConfig(format!(
                    "{label} cadence must be at least one minute, got {cadence}"
                )));
            }
        }
        if self.occupancy_jitter_min < 0 || self.occupancy_jitter_min >= self.occupancy_cadence_min
        {
            return Err(Error::InvalidConfig(format!(
                "occupancy jitter must lie in [0, cadence), got {}",
                self.occupancy_jitter_min
            )));
        }
        Ok(())
    }
}

/// Expands a recorded dataset into the event stream a deployment would
/// have seen over `window`.
///
/// Traffic and weather fire on lattices anchored at the recording start,
/// so their step-held values agree with the recorded per-minute series at
/// every instant. Occupancy fires on a jittered walk from the window
/// start. Minutes where a recorded series has no value yet emit nothing.
///
/// Errors: [`Error::WindowUncovered`] when `window` leaves the recording.
pub fn build_feed_events(
    dataset: &Dataset,
    config: &ReplayConfig,
    window: &MinuteGrid,
) -> Result<Vec<FeedEvent>> {
    config.validate()?;
    let grid = dataset.grid();
    if window.start.0 < grid.start.0 || window.end().0 > grid.end().0 {
        return Err(Error::WindowUncovered {
            window: window.len,
            len: grid.len,
        });
    }
    let first = (window.start.0 - grid.start.0) as usize;
    let mut events = Vec::new();

    for (location, values) in &dataset.exogenous.traffic_flow {
        for i in (first..first + window.len).step_by(config.traffic_cadence_min as usize) {
            let flow = values[i];
            if flow.is_finite() {
                events.push(FeedEvent {
                    time: grid.timestamp_at(i),
                    payload: FeedPayload::Traffic {
                        location: location.clone(),
                        flow,
                    },
                });
            }
        }
    }

    for i in first..first + window.len {
        if i as i64 % config.weather_cadence_min != 0 {
            continue;
        }
        let temp = dataset.exogenous.temperature_tenth_c[i];
        let rain = dataset.exogenous.rain[i];
        if temp.is_finite() && rain.is_finite() {
            events.push(FeedEvent {
                time: grid.timestamp_at(i),
                payload: FeedPayload::Weather {
                    temperature_tenth_c: temp,
                    rain: rain != 0.0,
                },
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "occupancy", 0));
    let mut i = first;
    while i < first + window.len {
        let rate = dataset.garage.occupancy_rate[i];
        if rate.is_finite() {
            events.push(FeedEvent {
                time: grid.timestamp_at(i),
                payload: FeedPayload::Occupancy { rate },
            });
        }
        let jitter = if config.occupancy_jitter_min == 0 {
            0
        } else {
            rng.random_range(-config.occupancy_jitter_min..=config.occupancy_jitter_min)
        };
        i += (config.occupancy_cadence_min + jitter) as usize;
    }

    sort_events(&mut events);
    Ok(events)
}
