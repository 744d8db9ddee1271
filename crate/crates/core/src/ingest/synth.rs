//! Seeded synthetic city generator.
//!
//! Produces a parking garage's transaction log together with coupled loop
//! traffic, weather and a holiday calendar, all driven by one seed. Arrivals
//! follow an inhomogeneous count process with a daily profile, weekly
//! multipliers, event-day boosts and a slowly wandering busyness factor that
//! also modulates loop traffic — so traffic carries real information about
//! the garage's near future. Stay durations are log-normal. Arrivals that
//! would overfill the garage are rejected and counted, never recorded.
//!
//! The emitted ground truth is, by construction, exactly what
//! [`derive_states_from_transactions`] yields on the emitted transactions:
//! the generator runs that derivation itself.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    derive_states_from_transactions, GarageId, GarageStateSeries, LocationId, MinuteGrid,
    Timestamp, MINUTES_PER_DAY,
};
use crate::error::{Error, Result};
use crate::ingest::{TrafficObservation, TransactionRecord, WeatherObservation};
use crate::util::derive_seed;

/// A special day: arrivals are multiplied by `intensity` and the day is
/// marked as a holiday in the emitted calendar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventDay {
    /// Day offset from the start of the run (0 = first day).
    pub day: u32,
    /// Arrival-rate multiplier for that day, e.g. 1.8.
    pub intensity: f64,
}

/// Full description of a synthetic city run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCityConfig {
    pub seed: u64,
    /// First minute of the run, ISO-8601 UTC.
    pub start: String,
    pub days: u32,
    pub garage: GarageId,
    pub capacity: u32,
    /// Base arrival rate per minute for each hour of the day.
    pub hourly_arrivals_per_min: [f64; 24],
    /// Multiplier per weekday, Monday first.
    pub weekday_multipliers: [f64; 7],
    pub event_days: Vec<EventDay>,
    /// Standard deviation of the slow log-normal busyness modulation.
    pub noise_level: f64,
    /// Correlation time of the busyness modulation, in minutes.
    pub noise_correlation_min: f64,
    /// Median stay duration in minutes.
    pub stay_median_min: f64,
    /// Log-space sigma of the stay duration distribution.
    pub stay_log_sigma: f64,
    /// Stationary probability that it is raining.
    pub rain_probability: f64,
    /// Per-10-minute persistence of the rain state, in [0, 1).
    pub rain_persistence: f64,
    /// Arrival-rate multiplier applied while it rains.
    pub rain_arrival_damping: f64,
    pub temperature_mean_tenth_c: f64,
    pub temperature_daily_amplitude_tenth_c: f64,
    /// Number of traffic measurement loops.
    pub locations: u32,
    /// Ambient loop flow scale in vehicles per hour.
    pub flow_ambient_veh_per_hour: f64,
    /// Added loop flow in veh/h per garage entry or exit in a minute.
    pub flow_coupling: f64,
    /// Standard deviation of per-minute loop flow noise, veh/h.
    pub flow_noise_sd: f64,
}

impl Default for SyntheticCityConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            start: "2024-01-01T00:00:00Z".to_string(),
            days: 28,
            garage: GarageId::from("synthetic-central"),
            capacity: 400,
            hourly_arrivals_per_min: [
                0.30, 0.20, 0.15, 0.15, 0.25, 0.60, // 00..05
                1.20, 2.20, 3.00, 2.80, 2.40, 2.20, // 06..11
                2.30, 2.40, 2.60, 2.80, 2.60, 2.20, // 12..17
                1.80, 1.50, 1.20, 0.90, 0.60, 0.40, // 18..23
            ],
            weekday_multipliers: [1.0, 0.95, 0.95, 1.0, 1.15, 1.30, 0.55],
            event_days: Vec::new(),
            noise_level: 0.20,
            noise_correlation_min: 50.0,
            stay_median_min: 75.0,
            stay_log_sigma: 0.5,
            rain_probability: 0.15,
            rain_persistence: 0.85,
            rain_arrival_damping: 0.90,
            temperature_mean_tenth_c: 150.0,
            temperature_daily_amplitude_tenth_c: 60.0,
            locations: 11,
            flow_ambient_veh_per_hour: 600.0,
            flow_coupling: 25.0,
            flow_noise_sd: 30.0,
        }
    }
}

impl SyntheticCityConfig {
    /// Validates ranges and resolves the start timestamp.
    pub fn validate(&self) -> Result<Timestamp> {
        if self.days == 0 {
            return Err(Error::InvalidConfig("days must be positive".into()));
        }
        if self.capacity == 0 {
            return Err(Error::InvalidConfig("capacity must be positive".into()));
        }
        if self.locations == 0 {
            return Err(Error::InvalidConfig("locations must be positive".into()));
        }
        if self.hourly_arrivals_per_min.iter().any(|r| *r < 0.0)
            || self.weekday_multipliers.iter().any(|m| *m < 0.0)
        {
            return Err(Error::InvalidConfig(
                "arrival rates and multipliers must be non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.rain_probability)
            || !(0.0..1.0).contains(&self.rain_persistence)
        {
            return Err(Error::InvalidConfig(
                "rain probability and persistence must lie in [0, 1)".into(),
            ));
        }
        if self.stay_median_min <= 0.0 || self.stay_log_sigma < 0.0 {
            return Err(Error::InvalidConfig(
                "stay duration parameters must be positive".into(),
            ));
        }
        if self.noise_level < 0.0 || self.noise_correlation_min <= 0.0 {
            return Err(Error::InvalidConfig(
                "noise parameters must be positive".into(),
            ));
        }
        for event in &self.event_days {
            if event.day >= self.days || event.intensity < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "event day {} outside run of {} days or negative intensity",
                    event.day, self.days
                )));
            }
        }
        Timestamp::from_iso8601(&self.start)
    }
}

/// Everything a synthetic run produces.
#[derive(Debug, Clone)]
pub struct SyntheticCity {
    pub grid: MinuteGrid,
    pub transactions: Vec<TransactionRecord>,
    pub traffic: BTreeMap<LocationId, Vec<TrafficObservation>>,
    pub weather: Vec<WeatherObservation>,
    pub holidays: BTreeMap<String, bool>,
    /// Derived from the emitted transactions; the reference the pipeline
    /// must reproduce.
    pub ground_truth: GarageStateSeries,
    /// Arrivals that found the garage full and were turned away.
    pub rejected_arrivals: u64,
}

/// Generates a synthetic city. Bit-identical output for identical configs.
pub fn generate_synthetic_city(config: &SyntheticCityConfig) -> Result<SyntheticCity> {
    let start = config.validate()?;
    let len = config.days as usize * MINUTES_PER_DAY as usize;
    let grid = MinuteGrid::new(start, len)?;

    // Independent streams so one stream's draw count never shifts another.
    let mut rng_busy = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "busyness", 0));
    let mut rng_weather = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "weather", 0));
    let mut rng_arrivals = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "arrivals", 0));
    let mut rng_traffic = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "traffic", 0));

    // Slow AR(1) busyness in log space, unit stationary variance.
    let phi = (-1.0 / config.noise_correlation_min).exp();
    let innovation = (1.0 - phi * phi).sqrt();
    let mut busyness = vec![0.0f64; len];
    let mut g: f64 = standard_normal(&mut rng_busy);
    for slot in busyness.iter_mut() {
        *slot = (config.noise_level * g - config.noise_level * config.noise_level / 2.0).exp();
        g = phi * g + innovation * standard_normal(&mut rng_busy);
    }

    // Rain as a two-state Markov chain per 10-minute step with the requested
    // stationary probability, plus a daily temperature cycle.
    let p = config.rain_probability;
    let rho = config.rain_persistence;
    let mut weather = Vec::with_capacity(len / 10 + 1);
    let mut raining = rng_weather.random::<f64>() < p;
    let mut rain_by_minute = vec![false; len];
    for step_start in (0..len).step_by(10) {
        let t = grid.timestamp_at(step_start);
        let minute_of_day = t.minute_of_day() as f64;
        let angle =
            2.0 * std::f64::consts::PI * (minute_of_day - 9.0 * 60.0) / MINUTES_PER_DAY as f64;
        let temperature = config.temperature_mean_tenth_c
            + config.temperature_daily_amplitude_tenth_c * angle.sin()
            + 15.0 * standard_normal(&mut rng_weather);
        weather.push(WeatherObservation {
            time: t,
            temperature_tenth_c: temperature.round() as i32,
            rain: raining,
        });
        for slot in rain_by_minute.iter_mut().skip(step_start).take(10) {
            *slot = raining;
        }
        // Transition kernel with stationary probability `p`:
        // P(rain->rain) = rho + (1-rho)p, P(dry->rain) = (1-rho)p.
        let p_next_rain = if raining {
            rho + (1.0 - rho) * p
        } else {
            (1.0 - rho) * p
        };
        raining = rng_weather.random::<f64>() < p_next_rain;
    }

    // Event days double as the holiday calendar.
    let mut event_multiplier = vec![1.0f64; config.days as usize];
    let mut holidays = BTreeMap::new();
    for event in &config.event_days {
        event_multiplier[event.day as usize] = event.intensity;
        let date = grid
            .timestamp_at(event.day as usize * MINUTES_PER_DAY as usize)
            .to_date_string();
        holidays.insert(date, true);
    }

    // Arrival process with capacity rejection; exits tracked per minute so
    // loop traffic can couple to total garage activity.
    let mut transactions = Vec::new();
    let mut arrivals_per_min = vec![0u32; len];
    let mut departures_per_min = vec![0u32; len];
    let mut exit_heap = std::collections::BinaryHeap::new();
    let mut occupancy: u32 = 0;
    let mut rejected_arrivals: u64 = 0;
    let stay_dist = LogNormal::new(config.stay_median_min.ln(), config.stay_log_sigma)
        .map_err(|e| Error::InvalidConfig(format!("stay distribution: {e}")))?;

    for i in 0..len {
        let t = grid.timestamp_at(i);
        while let Some(std::cmp::Reverse(exit_at)) = exit_heap.peek().copied() {
            if exit_at > i as i64 {
                break;
            }
            exit_heap.pop();
            occupancy -= 1;
        }
        let day = i / MINUTES_PER_DAY as usize;
        let hour = (t.minute_of_day() / 60) as usize;
        let rate = config.hourly_arrivals_per_min[hour]
            * config.weekday_multipliers[t.weekday_index()]
            * event_multiplier[day]
            * busyness[i]
            * if rain_by_minute[i] {
                config.rain_arrival_damping
            } else {
                1.0
            };
        let arrivals = if rate > 0.0 {
            Poisson::new(rate)
                .map_err(|e| Error::InvalidConfig(format!("arrival rate {rate}: {e}")))?
                .sample(&mut rng_arrivals) as u64
        } else {
            0
        };
        for _ in 0..arrivals {
            if occupancy >= config.capacity {
                rejected_arrivals += 1;
                continue;
            }
            let duration = stay_dist.sample(&mut rng_arrivals).round().max(1.0) as i64;
            let exit_time = t.plus_minutes(duration);
            occupancy += 1;
            arrivals_per_min[i] += 1;
            if let Some(j) = grid.index_of(exit_time) {
                departures_per_min[j] += 1;
            }
            exit_heap.push(std::cmp::Reverse(i as i64 + duration));
            transactions.push(TransactionRecord {
                garage: config.garage.clone(),
                entry_time: t,
                exit_time,
            });
        }
    }

    // Loop traffic: ambient daily shape scaled by the shared busyness,
    // plus a location-weighted echo of garage activity, plus noise.
    let mut traffic = BTreeMap::new();
    for loc_idx in 0..config.locations {
        let location = LocationId(format!("loop-{:02}", loc_idx + 1));
        let phase = f64::from(loc_idx) / f64::from(config.locations);
        let weight = 0.5 + f64::from(loc_idx + 1) / f64::from(config.locations);
        let mut observations = Vec::with_capacity(len);
        for i in 0..len {
            let t = grid.timestamp_at(i);
            let minute_of_day = t.minute_of_day() as f64;
            let angle = 2.0 * std::f64::consts::PI
                * (minute_of_day - (7.0 + 10.0 * phase) * 60.0)
                / MINUTES_PER_DAY as f64;
            let ambient =
                config.flow_ambient_veh_per_hour * (0.6 + 0.4 * angle.sin()) * busyness[i];
            let activity = f64::from(arrivals_per_min[i] + departures_per_min[i]);
            let noise = config.flow_noise_sd * standard_normal(&mut rng_traffic);
            let flow = (ambient + config.flow_coupling * weight * activity + noise).max(0.0);
            observations.push(TrafficObservation {
                location: location.clone(),
                time: t,
                flow_veh_per_hour: flow,
            });
        }
        traffic.insert(location, observations);
    }

    let stays: Vec<(Timestamp, Timestamp)> = transactions
        .iter()
        .map(|r| (r.entry_time, r.exit_time))
        .collect();
    let ground_truth = derive_states_from_transactions(
        config.garage.clone(),
        config.capacity,
        0,
        grid,
        &stays,
    )?;

    Ok(SyntheticCity {
        grid,
        transactions,
        traffic,
        weather,
        holidays,
        ground_truth,
        rejected_arrivals,
    })
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}
