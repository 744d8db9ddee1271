//! Online serving: incremental feed state, staleness-aware prediction
//! bundles, and evaluation of emitted bundles against later ground truth.
//!
//! The feed delivers traffic every minute, weather every ten, and occupancy
//! at an irregular cadence. Features anchor at the newest occupancy update
//! `t0`, exactly like the offline encoder anchors rows at their own
//! timestamp. To serve a forecast `h` minutes from *now*, the model is read
//! at the smallest trained horizon that covers `h` plus the current
//! staleness `now - t0`, so a bundle's promises are always met or exceeded.
//! Feeds staler than the budget refuse to serve rather than degrade
//! silently.

pub mod replay;
pub mod serve;

use std::collections::{BTreeMap, VecDeque};

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::datamodel::{GarageId, LocationId, Timestamp, MINUTES_PER_WEEK};
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, AlignedEvaluation, MetricSet};
use crate::features::{self, FeatureSchema, HorizonGrid, Matrix, TargetKind, TargetSeries};
use crate::models::naive::NaiveKind;
use crate::models::TrainedModel;
use crate::signal::{FilterCoefficients, StreamingFilter, FLOW_LAG_COUNT, FLOW_LAG_STEP_MIN, OCCUPANCY_LAG_COUNT};
use crate::util::sha256_hex;

/// Maximum tolerated age of the newest occupancy update at serve time.
pub const STALENESS_BUDGET_MIN: i64 = 30;

/// Cadence of the serving loop.
pub const TICK_INTERVAL_MIN: i64 = 5;

/// Horizons (relative to now) a bundle promises: 5, 10, ..., 60 minutes.
pub fn service_horizons() -> Vec<u32> {
    (1..=12).map(|k| k * 5).collect()
}

/// One observation arriving on the feed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedEvent {
    pub time: Timestamp,
    pub payload: FeedPayload,
}

/// What arrived.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedPayload {
    Traffic { location: LocationId, flow: f64 },
    Weather { temperature_tenth_c: f64, rain: bool },
    Occupancy { rate: f64 },
}

impl FeedEvent {
    /// Total order for same-minute events: traffic, then weather, then
    /// occupancy — so a prediction tick (which runs after ingestion) sees
    /// the freshest possible anchor.
    pub fn order_class(&self) -> u8 {
        match self.payload {
            FeedPayload::Traffic { .. } => 0,
            FeedPayload::Weather { .. } => 1,
            FeedPayload::Occupancy { .. } => 2,
        }
    }
}

/// Sorts events by time, breaking minute ties by [`FeedEvent::order_class`].
pub fn sort_events(events: &mut [FeedEvent]) {
    events.sort_by(|a, b| {
        a.time
            .0
            .cmp(&b.time.0)
            .then_with(|| a.order_class().cmp(&b.order_class()))
            .then_with(|| match (&a.payload, &b.payload) {
                (
                    FeedPayload::Traffic { location: la, .. },
                    FeedPayload::Traffic { location: lb, .. },
                ) => la.cmp(lb),
                _ => std::cmp::Ordering::Equal,
            })
    });
}

/// Per-location streaming state: the causal filter plus a short ring of
/// filtered per-minute values, deep enough for every lagged rolling sum.
struct LocationState {
    filter: StreamingFilter,
    /// `(minute, filtered value)`, newest at the back.
    ring: VecDeque<(Timestamp, f64)>,
}

/// How many filtered minutes each location must retain: the rolling window
/// ending at the oldest lag reaches back `window - 1` minutes before it,
/// and the whole lag pattern anchors at the occupancy time, which may trail
/// the newest traffic sample by up to the staleness budget.
fn ring_depth(flow_window_min: usize) -> usize {
    flow_window_min
        + (FLOW_LAG_COUNT - 1) * FLOW_LAG_STEP_MIN as usize
        + STALENESS_BUDGET_MIN as usize
}

/// Incrementally maintained serving state, mirroring the offline encoder.
pub struct FeedState {
    schema: FeatureSchema,
    coeffs: FilterCoefficients,
    holidays: BTreeMap<String, bool>,
    locations: BTreeMap<LocationId, LocationState>,
    /// `(time, temperature, rain)` observations, newest at the back.
    weather: VecDeque<(Timestamp, f64, f64)>,
    /// `(time, rate)` occupancy updates, newest at the back.
    occupancy: VecDeque<(Timestamp, f64)>,
}

impl FeedState {
    /// Builds an empty state for the given schema. The holiday calendar is
    /// known ahead of time, like the offline encoder's.
    pub fn new(schema: &FeatureSchema, holidays: &BTreeMap<String, bool>) -> Result<Self> {
        let coeffs =
            crate::signal::butterworth_design(schema.filter_order, schema.filter_cutoff)?;
        let locations = schema
            .locations
            .iter()
            .map(|loc| {
                (
                    loc.clone(),
                    LocationState {
                        filter: StreamingFilter::new(coeffs),
                        ring: VecDeque::with_capacity(ring_depth(schema.flow_window_min) + 1),
                    },
                )
            })
            .collect();
        Ok(Self {
            schema: schema.clone(),
            coeffs,
            holidays: holidays.clone(),
            locations,
            weather: VecDeque::with_capacity(8),
            occupancy: VecDeque::with_capacity(OCCUPANCY_LAG_COUNT + 1),
        })
    }

    /// Applies one feed event. Out-of-order arrivals within a stream are
    /// logged and dropped; they never corrupt the state.
    pub fn ingest(&mut self, event: &FeedEvent) -> Result<()> {
        match &event.payload {
            FeedPayload::Traffic { location, flow } => {
                let Some(state) = self.locations.get_mut(location) else {
                    log::warn!("traffic for unknown location {location}, ignored");
                    return Ok(());
                };
                if let Some(&(last, _)) = state.ring.back() {
                    if event.time.0 <= last.0 {
                        log::warn!("stale traffic sample for {location} at {}", event.time);
                        return Ok(());
                    }
                }
                let filtered = state.filter.push(*flow);
                state.ring.push_back((event.time, filtered));
                let depth = ring_depth(self.schema.flow_window_min);
                while state.ring.len() > depth {
                    state.ring.pop_front();
                }
            }
            FeedPayload::Weather {
                temperature_tenth_c,
                rain,
            } => {
                if let Some(&(last, _, _)) = self.weather.back() {
                    if event.time.0 <= last.0 {
                        log::warn!("stale weather sample at {}", event.time);
                        return Ok(());
                    }
                }
                self.weather
                    .push_back((event.time, *temperature_tenth_c, f64::from(u8::from(*rain))));
                while self.weather.len() > 8 {
                    self.weather.pop_front();
                }
            }
            FeedPayload::Occupancy { rate } => {
                if let Some(&(last, _)) = self.occupancy.back() {
                    if event.time.0 < last.0 {
                        log::warn!("stale occupancy update at {}", event.time);
                        return Ok(());
                    }
                    if event.time.0 == last.0 {
                        self.occupancy.pop_back();
                    }
                }
                self.occupancy.push_back((event.time, *rate));
                while self.occupancy.len() > OCCUPANCY_LAG_COUNT {
                    self.occupancy.pop_front();
                }
            }
        }
        Ok(())
    }

    /// Time of the newest occupancy update — the feature anchor.
    pub fn anchor(&self) -> Option<Timestamp> {
        self.occupancy.back().map(|&(t, _)| t)
    }

    /// Minutes since the newest occupancy update.
    pub fn staleness(&self, now: Timestamp) -> Option<i64> {
        self.anchor().map(|t| now.0 - t.0)
    }

    /// The rolling flow sum ending at minute `t` for one location's ring.
    ///
    /// Summed oldest-first so the result is bit-identical to the offline
    /// windowed sum over the same filtered values.
    fn flow_sum_at(&self, state: &LocationState, t: Timestamp) -> Option<f64> {
        let window = self.schema.flow_window_min as i64;
        let mut sum = 0.0;
        let mut covered = 0i64;
        for &(time, value) in &state.ring {
            if time.0 <= t.0 - window {
                continue;
            }
            if time.0 > t.0 {
                break;
            }
            // Entries are strictly increasing, so each minute appears once.
            sum += value;
            covered += 1;
        }
        (covered == window).then_some(sum)
    }

    /// Encodes the feature row anchored at the newest occupancy update.
    ///
    /// Errors: [`Error::IncompleteState`] when any stream has not delivered
    /// enough history yet.
    pub fn encode_features(&self) -> Result<(Timestamp, Vec<f64>)> {
        let missing = |what: &str| Error::IncompleteState(what.to_string());
        if self.occupancy.len() < OCCUPANCY_LAG_COUNT {
            return Err(missing("occupancy history"));
        }
        let t0 = self.anchor().expect("occupancy nonempty");
        let mut row = Vec::with_capacity(self.schema.width());

        let angle = 2.0 * std::f64::consts::PI * t0.minute_of_day() as f64
            / crate::datamodel::MINUTES_PER_DAY as f64;
        row.push(angle.sin());
        row.push(angle.cos());
        let holiday = self
            .holidays
            .get(&t0.to_date_string())
            .copied()
            .unwrap_or(false);
        row.push(f64::from(u8::from(holiday)));

        let weekday = t0.weekday_index();
        for d in 0..7 {
            row.push(if d == weekday { 1.0 } else { 0.0 });
        }

        // Newest weather at or before the anchor, matching the offline
        // step-hold semantics.
        let weather = self
            .weather
            .iter()
            .rev()
            .find(|(t, _, _)| t.0 <= t0.0)
            .ok_or_else(|| missing("weather"))?;
        row.push(weather.1);
        row.push(weather.2);

        for (loc, state) in &self.locations {
            for lag in 0..FLOW_LAG_COUNT as i64 {
                let at = Timestamp(t0.0 - lag * FLOW_LAG_STEP_MIN);
                let sum = self
                    .flow_sum_at(state, at)
                    .ok_or_else(|| missing(&format!("traffic history for {loc}")))?;
                row.push(sum);
            }
        }

        for &(_, rate) in self.occupancy.iter().rev() {
            row.push(rate);
        }

        features::apply_scaling(&self.schema, &mut row);
        Ok((t0, row))
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    /// The filter design in use (exposed for tests).
    pub fn coefficients(&self) -> FilterCoefficients {
        self.coeffs
    }
}

/// Ceiling division for positive divisors.
pub(crate) fn ceil_div(a: i64, b: i64) -> i64 {
    (a + b - 1).div_euclid(b)
}

/// Smallest trained horizon that still covers `h` minutes from now given
/// the anchor staleness.
///
/// Errors: [`Error::StaleFeed`] when even the largest trained horizon falls
/// short.
pub fn effective_horizon(h: u32, staleness_min: i64, max_trained: u32) -> Result<u32> {
    let needed = i64::from(h) + staleness_min;
    let rounded = ceil_div(needed, TICK_INTERVAL_MIN) * TICK_INTERVAL_MIN;
    if rounded > i64::from(max_trained) {
        return Err(Error::StaleFeed {
            staleness_min,
            budget_min: STALENESS_BUDGET_MIN,
        });
    }
    Ok(rounded as u32)
}

/// A model plus the digest a bundle advertises, computed once.
pub struct ServingModel {
    pub model: TrainedModel,
    pub digest: String,
}

impl ServingModel {
    pub fn new(model: TrainedModel) -> Result<Self> {
        let value = serde_json::to_value(&model)?;
        let digest = sha256_hex(serde_json::to_string(&value)?.as_bytes());
        Ok(Self { model, digest })
    }
}

/// One emitted forecast set.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle {
    pub issued: Timestamp,
    pub garage: GarageId,
    pub target: TargetKind,
    pub staleness_min: i64,
    /// `(horizon from now, predicted value)`, ascending horizons.
    pub predictions: Vec<(u32, f64)>,
    pub model_digest: String,
}

impl Serialize for PredictionBundle {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Predictions<'a>(&'a [(u32, f64)]);
        impl Serialize for Predictions<'_> {
            fn serialize<S: Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                // Keys emitted in ascending numeric order, not string order.
                let mut map = serializer.serialize_map(Some(self.0.len()))?;
                for (h, v) in self.0 {
                    map.serialize_entry(&h.to_string(), v)?;
                }
                map.end()
            }
        }
        let mut s = serializer.serialize_struct("PredictionBundle", 6)?;
        s.serialize_field("issued", &self.issued.to_iso8601())?;
        s.serialize_field("garage", &self.garage)?;
        s.serialize_field("target", &self.target)?;
        s.serialize_field("staleness_min", &self.staleness_min)?;
        s.serialize_field("predictions", &Predictions(&self.predictions))?;
        s.serialize_field("model_digest", &self.model_digest)?;
        s.end()
    }
}

impl PredictionBundle {
    /// One-line JSON with predictions in ascending horizon order.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }

    /// Parses a bundle serialized by [`PredictionBundle::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let bad = |what: &str| Error::InvalidConfig(format!("bundle field {what} malformed"));
        let issued = Timestamp::from_iso8601(
            value.get("issued").and_then(|v| v.as_str()).ok_or_else(|| bad("issued"))?,
        )?;
        let garage = GarageId(
            value
                .get("garage")
                .and_then(|v| v.as_str())
                .ok_or_else(|| bad("garage"))?
                .to_string(),
        );
        let target = TargetKind::parse(
            value.get("target").and_then(|v| v.as_str()).ok_or_else(|| bad("target"))?,
        )?;
        let staleness_min = value
            .get("staleness_min")
            .and_then(serde_json::Value::as_i64)
            .ok_or_else(|| bad("staleness_min"))?;
        let obj = value
            .get("predictions")
            .and_then(|v| v.as_object())
            .ok_or_else(|| bad("predictions"))?;
        let mut predictions = Vec::with_capacity(obj.len());
        for (k, v) in obj {
            let h: u32 = k.parse().map_err(|_| bad("predictions key"))?;
            let p = v.as_f64().ok_or_else(|| bad("predictions value"))?;
            predictions.push((h, p));
        }
        predictions.sort_by_key(|&(h, _)| h);
        let model_digest = value
            .get("model_digest")
            .and_then(|v| v.as_str())
            .ok_or_else(|| bad("model_digest"))?
            .to_string();
        Ok(Self {
            issued,
            garage,
            target,
            staleness_min,
            predictions,
            model_digest,
        })
    }
}

/// Produces a bundle from the current feed state.
///
/// Horizons are relative to `now`; each is served by the smallest trained
/// horizon covering it from the anchor. Occupancy rates clamp to `[0, 1]`
/// at emission.
///
/// Errors: [`Error::IncompleteState`] before the feed has warmed up,
/// [`Error::StaleFeed`] when the anchor is older than the budget,
/// [`Error::DigestMismatch`] when the model's schema is not the state's.
pub fn predict_now(
    state: &FeedState,
    serving: &ServingModel,
    garage: &GarageId,
    now: Timestamp,
    horizons_from_now: &[u32],
) -> Result<PredictionBundle> {
    let model = &serving.model;
    if model.schema_digest != state.schema.digest() {
        return Err(Error::DigestMismatch {
            expected: model.schema_digest.clone(),
            got: state.schema.digest(),
        });
    }
    // Staleness is judged before encoding: a too-old anchor is reported as
    // stale even when its lag windows have already slid out of the rings.
    let t0 = state
        .anchor()
        .ok_or_else(|| Error::IncompleteState("occupancy history".to_string()))?;
    let staleness = now.0 - t0.0;
    if staleness < 0 {
        return Err(Error::IncompleteState(format!(
            "anchor {t0} lies after now {now}"
        )));
    }
    if staleness > STALENESS_BUDGET_MIN {
        return Err(Error::StaleFeed {
            staleness_min: staleness,
            budget_min: STALENESS_BUDGET_MIN,
        });
    }
    let (_, row) = state.encode_features()?;
    let max_trained = *model
        .horizons
        .minutes()
        .last()
        .expect("nonempty horizon grid");
    let outputs = model.predict_row(&row);
    let mut predictions = Vec::with_capacity(horizons_from_now.len());
    for &h in horizons_from_now {
        let effective = effective_horizon(h, staleness, max_trained)?;
        let idx = model
            .horizons
            .index_of(effective)
            .ok_or_else(|| Error::InvalidConfig(format!(
                "model lacks a {effective}-minute horizon"
            )))?;
        let mut value = outputs[idx];
        if model.target == TargetKind::Occupancy && !(0.0..=1.0).contains(&value) {
            // Clamp at emission only; the raw value stays visible in logs.
            log::debug!("occupancy at +{h} min clamped from {value}");
            value = value.clamp(0.0, 1.0);
        }
        predictions.push((h, value));
    }
    Ok(PredictionBundle {
        issued: now,
        garage: garage.clone(),
        target: model.target,
        staleness_min: staleness,
        predictions,
        model_digest: serving.digest.clone(),
    })
}

/// Scores emitted bundles against later ground truth, with the weekly
/// seasonal copy as the scale reference (evaluated at the bundle's own
/// issue time, exactly like the offline scorer).
///
/// Bundles whose truth is missing raise [`Error::CoverageGap`]; bundles the
/// reference cannot serve are excluded and counted.
pub fn realtime_evaluate(
    bundles: &[PredictionBundle],
    series: &TargetSeries,
) -> Result<(MetricSet, AlignedEvaluation)> {
    if bundles.is_empty() {
        return Err(Error::EmptyInput("no bundles to evaluate"));
    }
    let horizons: Vec<u32> = bundles[0].predictions.iter().map(|&(h, _)| h).collect();
    let h_count = horizons.len();
    let target = bundles[0].target;
    let mut timestamps = Vec::new();
    let mut actuals = Vec::new();
    let mut preds = Vec::new();
    let mut naives = Vec::new();
    let mut excluded = 0usize;
    'bundles: for bundle in bundles {
        let bundle_hs: Vec<u32> = bundle.predictions.iter().map(|&(h, _)| h).collect();
        if bundle_hs != horizons {
            return Err(Error::InvalidConfig(
                "bundles disagree on served horizons".into(),
            ));
        }
        let tc = bundle.issued;
        let mut row_truth = Vec::with_capacity(h_count);
        let mut row_naive = Vec::with_capacity(h_count);
        for &(h, _) in &bundle.predictions {
            let target_instant = tc.plus_minutes(i64::from(h));
            let Some(truth) = series.value_at(target_instant) else {
                return Err(Error::CoverageGap { at: target_instant });
            };
            row_truth.push(truth);
            match series.value_at(target_instant.plus_minutes(-MINUTES_PER_WEEK)) {
                Some(v) => row_naive.push(v),
                None => {
                    excluded += 1;
                    continue 'bundles;
                }
            }
        }
        timestamps.push(tc);
        actuals.extend_from_slice(&row_truth);
        naives.extend_from_slice(&row_naive);
        preds.extend(bundle.predictions.iter().map(|&(_, v)| v));
    }
    if timestamps.is_empty() {
        return Err(Error::EmptyResult("no bundles with reference history"));
    }
    let rows = timestamps.len();
    let aligned = AlignedEvaluation {
        horizons: HorizonGrid(horizons),
        timestamps,
        actuals: Matrix {
            rows,
            cols: h_count,
            data: actuals,
        },
        predictions: Matrix {
            rows,
            cols: h_count,
            data: preds,
        },
        naive_predictions: Matrix {
            rows,
            cols: h_count,
            data: naives,
        },
        excluded_rows: excluded,
    };
    let metrics = compute_metrics(&aligned, "realtime", target, NaiveKind::SeasonalWeekly);
    Ok((metrics, aligned))
}
