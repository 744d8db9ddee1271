//! Feature engineering: schema with named, categorized, scaled features;
//! row encoding; target series; supervised set construction; category
//! elimination.
//!
//! A row encoded at time `t` uses only information available at or before
//! `t`: cyclic time-of-day, weekday one-hot, holiday flag, step-held weather,
//! smoothed rolling-sum traffic lags and occupancy lags at the feed cadence.
//! Scaling constants come from the training split alone. Targets look
//! forward along the horizon grid; occupancy targets are the rate at `t+h`,
//! flux targets the 5-minute interval sum ending at `t+h`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, GarageStateSeries, LocationId, MinuteGrid, Timestamp, MINUTES_PER_DAY};
use crate::error::{Error, Result};
use crate::signal;
use crate::util::sha256_hex;

/// Which quantity a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Occupancy,
    Influx,
    Outflux,
}

impl TargetKind {
    pub const ALL: [TargetKind; 3] = [
        TargetKind::Occupancy,
        TargetKind::Influx,
        TargetKind::Outflux,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Occupancy => "occupancy",
            TargetKind::Influx => "influx",
            TargetKind::Outflux => "outflux",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "occupancy" => Ok(TargetKind::Occupancy),
            "influx" => Ok(TargetKind::Influx),
            "outflux" => Ok(TargetKind::Outflux),
            other => Err(Error::InvalidConfig(format!("unknown target {other:?}"))),
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Feature categories; ablation studies eliminate one whole category at a
/// time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCategory {
    Time,
    Weather,
    TrafficFlow,
    OccupancyLookback,
    Calendar,
}

impl FeatureCategory {
    pub const ALL: [FeatureCategory; 5] = [
        FeatureCategory::Time,
        FeatureCategory::Weather,
        FeatureCategory::TrafficFlow,
        FeatureCategory::OccupancyLookback,
        FeatureCategory::Calendar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureCategory::Time => "time",
            FeatureCategory::Weather => "weather",
            FeatureCategory::TrafficFlow => "traffic_flow",
            FeatureCategory::OccupancyLookback => "occupancy_lookback",
            FeatureCategory::Calendar => "calendar",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownCategory(s.to_string()))
    }
}

impl fmt::Display for FeatureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Horizons in minutes ahead, ascending. The default is 5, 10, ..., 90.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HorizonGrid(pub Vec<u32>);

impl Default for HorizonGrid {
    fn default() -> Self {
        Self((1..=18).map(|k| k * 5).collect())
    }
}

impl HorizonGrid {
    pub fn minutes(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of horizon `h`, or `None` if the grid does not contain it.
    pub fn index_of(&self, h: u32) -> Option<usize> {
        self.0.iter().position(|&x| x == h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidConfig("horizon grid is empty".into()));
        }
        if self.0[0] == 0 || self.0.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "horizons must be positive and strictly ascending".into(),
            ));
        }
        Ok(())
    }
}

/// Minutes covered by one flux target: the interval sum ending at `t+h`.
pub const FLUX_TARGET_WINDOW_MIN: usize = 5;

/// One named feature with its category and optional min-max scaling
/// constants (fitted on the training split).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub category: FeatureCategory,
    /// `(min, max)` such that the encoded value is `(raw - min) / (max - min)`.
    pub scaling: Option<(f64, f64)>,
}

/// Structural constants of the feature pipeline. Everything that decides
/// *which* values a row contains, as opposed to how they are scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaConfig {
    /// Spacing of occupancy lags in minutes (the feed cadence).
    pub occupancy_cadence_min: i64,
    /// Low-pass cutoff for traffic smoothing, as a fraction of Nyquist.
    pub filter_cutoff: f64,
    /// Butterworth order for traffic smoothing.
    pub filter_order: usize,
    /// Rolling-sum window over smoothed traffic, minutes.
    pub flow_window_min: usize,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        Self {
            occupancy_cadence_min: 11,
            filter_cutoff: 0.05,
            filter_order: 2,
            flow_window_min: 10,
        }
    }
}

/// Complete description of a feature row: ordered feature definitions plus
/// the structural constants needed to rebuild identical rows anywhere (in
/// particular in the realtime path).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureDef>,
    pub locations: Vec<LocationId>,
    pub occupancy_cadence_min: i64,
    pub filter_cutoff: f64,
    pub filter_order: usize,
    pub flow_window_min: usize,
}

impl FeatureSchema {
    /// Number of features per row.
    pub fn width(&self) -> usize {
        self.features.len()
    }

    /// Content digest; any change to names, order, categories, scaling or
    /// structural constants changes it.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("schema serializes");
        sha256_hex(json.as_bytes())
    }

    /// Indices of the features belonging to `category`.
    pub fn category_columns(&self, category: FeatureCategory) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.category == category)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Grid-aligned series the encoder reads from. Built deterministically from
/// a [`Dataset`] by [`build_feature_inputs`].
#[derive(Debug, Clone)]
pub struct FeatureInputs {
    pub grid: MinuteGrid,
    pub occupancy: Vec<f64>,
    /// Smoothed, rolling-summed traffic per location.
    pub flow_sums: BTreeMap<LocationId, Vec<f64>>,
    pub temperature: Vec<f64>,
    pub rain: Vec<f64>,
    pub holiday: Vec<f64>,
    pub row_mask: Vec<bool>,
}

/// Runs the signal-conditioning chain over a dataset: causal Butterworth on
/// each traffic series, then trailing rolling sums.
pub fn build_feature_inputs(dataset: &Dataset, config: &SchemaConfig) -> Result<FeatureInputs> {
    let coeffs = signal::butterworth_design(config.filter_order, config.filter_cutoff)?;
    let mut flow_sums = BTreeMap::new();
    for (loc, series) in &dataset.exogenous.traffic_flow {
        let filtered = signal::filter_apply_causal(coeffs, series)?;
        let sums = signal::rolling_sum(&filtered, config.flow_window_min)?;
        flow_sums.insert(loc.clone(), sums);
    }
    Ok(FeatureInputs {
        grid: *dataset.grid(),
        occupancy: dataset.garage.occupancy_rate.clone(),
        flow_sums,
        temperature: dataset.exogenous.temperature_tenth_c.clone(),
        rain: dataset.exogenous.rain.clone(),
        holiday: dataset.exogenous.holiday.clone(),
        row_mask: dataset.row_mask.clone(),
    })
}

/// Builds the unfitted schema (no scaling constants) for the given inputs.
pub fn schema_template(inputs: &FeatureInputs, config: &SchemaConfig) -> FeatureSchema {
    let locations: Vec<LocationId> = inputs.flow_sums.keys().cloned().collect();
    let mut features = Vec::new();
    for name in ["tod_sin", "tod_cos", "holiday"] {
        features.push(FeatureDef {
            name: name.to_string(),
            category: FeatureCategory::Time,
            scaling: None,
        });
    }
    for d in 0..7 {
        features.push(FeatureDef {
            name: format!("weekday_{d}"),
            category: FeatureCategory::Calendar,
            scaling: None,
        });
    }
    features.push(FeatureDef {
        name: "temperature".to_string(),
        category: FeatureCategory::Weather,
        scaling: Some((0.0, 1.0)),
    });
    features.push(FeatureDef {
        name: "rain".to_string(),
        category: FeatureCategory::Weather,
        scaling: None,
    });
    for loc in &locations {
        for lag in 0..signal::FLOW_LAG_COUNT {
            features.push(FeatureDef {
                name: format!("flow_{loc}_lag{lag}"),
                category: FeatureCategory::TrafficFlow,
                scaling: Some((0.0, 1.0)),
            });
        }
    }
    for lag in 0..signal::OCCUPANCY_LAG_COUNT {
        features.push(FeatureDef {
            name: format!("occupancy_lag_{lag}"),
            category: FeatureCategory::OccupancyLookback,
            scaling: None,
        });
    }
    FeatureSchema {
        features,
        locations,
        occupancy_cadence_min: config.occupancy_cadence_min,
        filter_cutoff: config.filter_cutoff,
        filter_order: config.filter_order,
        flow_window_min: config.flow_window_min,
    }
}

/// Raw (unscaled) feature values at `t`, in schema order.
///
/// Errors: [`Error::IncompleteRow`] when any required value is missing.
fn raw_feature_values(
    inputs: &FeatureInputs,
    schema: &FeatureSchema,
    t: Timestamp,
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    let i = inputs.grid.index_of(t).ok_or_else(|| Error::IncompleteRow {
        at: t,
        missing: "timestamp outside grid".to_string(),
    })?;
    let missing = |what: &str| Error::IncompleteRow {
        at: t,
        missing: what.to_string(),
    };
    // Whole categories may be absent (ablated schemas); block order matches
    // the template's feature order.
    let has = |cat: FeatureCategory| schema.features.iter().any(|f| f.category == cat);

    if has(FeatureCategory::Time) {
        let angle =
            2.0 * std::f64::consts::PI * t.minute_of_day() as f64 / MINUTES_PER_DAY as f64;
        out.push(angle.sin());
        out.push(angle.cos());
        let holiday = inputs.holiday[i];
        if holiday.is_nan() {
            return Err(missing("holiday"));
        }
        out.push(holiday);
    }

    if has(FeatureCategory::Calendar) {
        let weekday = t.weekday_index();
        for d in 0..7 {
            out.push(if d == weekday { 1.0 } else { 0.0 });
        }
    }

    if has(FeatureCategory::Weather) {
        let temperature = inputs.temperature[i];
        if temperature.is_nan() {
            return Err(missing("temperature"));
        }
        out.push(temperature);
        let rain = inputs.rain[i];
        if rain.is_nan() {
            return Err(missing("rain"));
        }
        out.push(rain);
    }

    if has(FeatureCategory::TrafficFlow) {
        for loc in &schema.locations {
            let sums = inputs
                .flow_sums
                .get(loc)
                .ok_or_else(|| missing(&format!("traffic location {loc}")))?;
            let lags = signal::sample_lags(
                sums,
                &inputs.grid,
                t,
                signal::FLOW_LAG_COUNT,
                signal::FLOW_LAG_STEP_MIN,
            )?;
            out.extend_from_slice(&lags);
        }
    }

    if has(FeatureCategory::OccupancyLookback) {
        let occ_lags = signal::sample_lags(
            &inputs.occupancy,
            &inputs.grid,
            t,
            signal::OCCUPANCY_LAG_COUNT,
            schema.occupancy_cadence_min,
        )?;
        out.extend_from_slice(&occ_lags);
    }
    debug_assert_eq!(out.len(), schema.width(), "encode matches the schema");
    Ok(())
}

/// Encodes one feature row at `t` with the schema's scaling applied.
///
/// Errors: [`Error::IncompleteRow`] when any input is missing at `t`.
pub fn encode_row(inputs: &FeatureInputs, schema: &FeatureSchema, t: Timestamp) -> Result<Vec<f64>> {
    let mut raw = Vec::with_capacity(schema.width());
    raw_feature_values(inputs, schema, t, &mut raw)?;
    apply_scaling(schema, &mut raw);
    Ok(raw)
}

pub(crate) fn apply_scaling(schema: &FeatureSchema, values: &mut [f64]) {
    for (value, def) in values.iter_mut().zip(&schema.features) {
        if let Some((min, max)) = def.scaling {
            let range = max - min;
            *value = if range > 0.0 { (*value - min) / range } else { 0.0 };
        }
    }
}

/// Fits scaling constants on the training rows: per-feature min/max for the
/// features that declare scaling (temperature and flow sums).
///
/// Errors: [`Error::EmptyResult`] when no training row encodes completely.
pub fn fit_schema(
    inputs: &FeatureInputs,
    config: &SchemaConfig,
    train_rows: &[usize],
) -> Result<FeatureSchema> {
    let mut schema = schema_template(inputs, config);
    let width = schema.width();
    let mut mins = vec![f64::INFINITY; width];
    let mut maxs = vec![f64::NEG_INFINITY; width];
    let mut raw = Vec::with_capacity(width);
    let mut fitted_on = 0usize;
    for &i in train_rows {
        if !inputs.row_mask[i] {
            continue;
        }
        let t = inputs.grid.timestamp_at(i);
        if raw_feature_values(inputs, &schema, t, &mut raw).is_err() {
            continue;
        }
        for (j, v) in raw.iter().enumerate() {
            mins[j] = mins[j].min(*v);
            maxs[j] = maxs[j].max(*v);
        }
        fitted_on += 1;
    }
    if fitted_on == 0 {
        return Err(Error::EmptyResult("no complete training rows to fit scaling"));
    }
    for (j, def) in schema.features.iter_mut().enumerate() {
        if def.scaling.is_some() {
            def.scaling = Some((mins[j], maxs[j]));
        }
    }
    Ok(schema)
}

/// Dense row-major matrix of f64s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(&row);
        }
        Self { rows: n, cols, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// A supervised dataset: feature matrix, multi-horizon target matrix and the
/// row timestamps, bound to the schema that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedSet {
    pub schema_digest: String,
    pub target: TargetKind,
    pub horizons: HorizonGrid,
    pub timestamps: Vec<Timestamp>,
    pub x: Matrix,
    pub y: Matrix,
}

impl SupervisedSet {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// The chronologically newest `fraction` of the rows (used by the
    /// data-halving study). `fraction` in (0, 1].
    pub fn newest_fraction(&self, fraction: f64) -> Result<SupervisedSet> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "fraction {fraction} outside (0, 1]"
            )));
        }
        let keep = ((self.len() as f64) * fraction).round().max(1.0) as usize;
        let from = self.len() - keep;
        Ok(SupervisedSet {
            schema_digest: self.schema_digest.clone(),
            target: self.target,
            horizons: self.horizons.clone(),
            timestamps: self.timestamps[from..].to_vec(),
            x: Matrix {
                rows: keep,
                cols: self.x.cols,
                data: self.x.data[from * self.x.cols..].to_vec(),
            },
            y: Matrix {
                rows: keep,
                cols: self.y.cols,
                data: self.y.data[from * self.y.cols..].to_vec(),
            },
        })
    }
}

/// Per-minute series of one target quantity: occupancy rate as-is, flux as
/// the trailing 5-minute interval sum ending at each minute.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSeries {
    pub target: TargetKind,
    pub grid: MinuteGrid,
    pub values: Vec<f64>,
}

impl TargetSeries {
    pub fn value_at(&self, t: Timestamp) -> Option<f64> {
        self.grid
            .index_of(t)
            .map(|i| self.values[i])
            .filter(|v| !v.is_nan())
    }
}

/// Builds the target series for one quantity from the garage ground truth.
pub fn build_target_series(garage: &GarageStateSeries, target: TargetKind) -> Result<TargetSeries> {
    let values = match target {
        TargetKind::Occupancy => garage.occupancy_rate.clone(),
        TargetKind::Influx => {
            let per_min: Vec<f64> = garage.influx.iter().map(|&v| f64::from(v)).collect();
            signal::rolling_sum(&per_min, FLUX_TARGET_WINDOW_MIN)?
        }
        TargetKind::Outflux => {
            let per_min: Vec<f64> = garage.outflux.iter().map(|&v| f64::from(v)).collect();
            signal::rolling_sum(&per_min, FLUX_TARGET_WINDOW_MIN)?
        }
    };
    Ok(TargetSeries {
        target,
        grid: garage.grid,
        values,
    })
}

/// Builds a supervised set over the candidate rows.
///
/// A candidate row survives when it passes the dataset's row mask, encodes
/// completely, and has a target value at every horizon. Rows near the end of
/// the grid drop out because their targets would leave the grid.
///
/// Errors: [`Error::EmptyResult`] when no row survives,
/// [`Error::GridMismatch`] when inputs and targets disagree on the grid.
pub fn build_supervised(
    inputs: &FeatureInputs,
    targets: &TargetSeries,
    schema: &FeatureSchema,
    horizons: &HorizonGrid,
    candidate_rows: &[usize],
) -> Result<SupervisedSet> {
    horizons.validate()?;
    if targets.grid != inputs.grid {
        return Err(Error::GridMismatch {
            context: "target series grid",
            expected: inputs.grid.len,
            got: targets.grid.len,
        });
    }
    let width = schema.width();
    let mut timestamps = Vec::new();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut raw = Vec::with_capacity(width);
    let mut row_targets = Vec::with_capacity(horizons.len());
    'rows: for &i in candidate_rows {
        if !inputs.row_mask[i] {
            continue;
        }
        let t = inputs.grid.timestamp_at(i);
        row_targets.clear();
        for &h in horizons.minutes() {
            match targets.value_at(t.plus_minutes(i64::from(h))) {
                Some(v) => row_targets.push(v),
                None => continue 'rows,
            }
        }
        if raw_feature_values(inputs, schema, t, &mut raw).is_err() {
            continue;
        }
        apply_scaling(schema, &mut raw);
        timestamps.push(t);
        x.extend_from_slice(&raw);
        y.extend_from_slice(&row_targets);
    }
    if timestamps.is_empty() {
        return Err(Error::EmptyResult("no supervised rows survive"));
    }
    let rows = timestamps.len();
    Ok(SupervisedSet {
        schema_digest: schema.digest(),
        target: targets.target,
        horizons: horizons.clone(),
        timestamps,
        x: Matrix {
            rows,
            cols: width,
            data: x,
        },
        y: Matrix {
            rows,
            cols: horizons.len(),
            data: y,
        },
    })
}

/// Removes a whole feature category from a set and its schema.
///
/// The remaining columns keep their scaling constants, so the result is
/// byte-identical to re-encoding from scratch with the reduced schema.
///
/// Errors: [`Error::UnknownCategory`] when the schema has no features of
/// that category (e.g. it was already eliminated).
pub fn eliminate_category(
    set: &SupervisedSet,
    schema: &FeatureSchema,
    category: FeatureCategory,
) -> Result<(SupervisedSet, FeatureSchema)> {
    let dropped = schema.category_columns(category);
    if dropped.is_empty() {
        return Err(Error::UnknownCategory(category.as_str().to_string()));
    }
    let keep: Vec<usize> = (0..schema.width()).filter(|i| !dropped.contains(i)).collect();
    let mut reduced_schema = schema.clone();
    reduced_schema.features = keep
        .iter()
        .map(|&i| schema.features[i].clone())
        .collect();
    if category == FeatureCategory::TrafficFlow {
        // No flow features left, so the location list is meaningless and
        // would only haunt the digest.
        reduced_schema.locations.clear();
    }
    let mut x = Vec::with_capacity(set.len() * keep.len());
    for r in 0..set.len() {
        let row = set.x.row(r);
        x.extend(keep.iter().map(|&c| row[c]));
    }
    let reduced = SupervisedSet {
        schema_digest: reduced_schema.digest(),
        target: set.target,
        horizons: set.horizons.clone(),
        timestamps: set.timestamps.clone(),
        x: Matrix {
            rows: set.len(),
            cols: keep.len(),
            data: x,
        },
        y: set.y.clone(),
    };
    Ok((reduced, reduced_schema))
}
