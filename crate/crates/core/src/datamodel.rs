//! Core data model: minute-resolution timestamps, grids, garage state
//! series, exogenous series, dataset assembly and chronological splitting.
//!
//! Everything downstream (features, models, evaluation, realtime) works on
//! the types defined here. All series are aligned to a [`MinuteGrid`]; a
//! missing value in an aligned numeric series is represented as `f64::NAN`
//! and surfaces in [`Dataset::row_mask`] after assembly.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{TrafficObservation, WeatherObservation};

/// Minutes in a day.
pub const MINUTES_PER_DAY: i64 = 1440;
/// Minutes in a week; the seasonal baseline looks back exactly this far.
pub const MINUTES_PER_WEEK: i64 = 7 * MINUTES_PER_DAY;

/// A point in time with minute precision, stored as whole minutes since the
/// Unix epoch (1970-01-01T00:00:00Z).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    /// Parses an ISO-8601 UTC timestamp with minute precision.
    ///
    /// Seconds must be zero and the offset must be UTC; anything else is a
    /// schema violation at the call site.
    pub fn from_iso8601(s: &str) -> Result<Self> {
        let parsed = DateTime::parse_from_rfc3339(s)
            .map_err(|e| Error::InvalidConfig(format!("bad timestamp {s:?}: {e}")))?;
        if parsed.offset().local_minus_utc() != 0 {
            return Err(Error::InvalidConfig(format!(
                "timestamp {s:?} is not in UTC"
            )));
        }
        let utc = parsed.with_timezone(&Utc);
        if utc.second() != 0 || utc.nanosecond() != 0 {
            return Err(Error::InvalidConfig(format!(
                "timestamp {s:?} is not minute-aligned"
            )));
        }
        Ok(Self(utc.timestamp() / 60))
    }

    /// Formats as ISO-8601 UTC with minute precision, e.g. `2024-01-01T08:30:00Z`.
    pub fn to_iso8601(self) -> String {
        let dt = Utc
            .timestamp_opt(self.0 * 60, 0)
            .single()
            .expect("minute timestamps are always representable");
        dt.format("%Y-%m-%dT%H:%M:%SZ").to_string()
    }

    /// Calendar date `YYYY-MM-DD` of this instant (UTC).
    pub fn to_date_string(self) -> String {
        let dt = Utc
            .timestamp_opt(self.0 * 60, 0)
            .single()
            .expect("minute timestamps are always representable");
        dt.format("%Y-%m-%d").to_string()
    }

    /// Minute within the day, `0..1440`.
    pub fn minute_of_day(self) -> i64 {
        self.0.rem_euclid(MINUTES_PER_DAY)
    }

    /// Whole days since the epoch.
    pub fn day_index(self) -> i64 {
        self.0.div_euclid(MINUTES_PER_DAY)
    }

    /// Day of week with Monday = 0 .. Sunday = 6.
    ///
    /// 1970-01-01 was a Thursday, hence the +3 offset.
    pub fn weekday_index(self) -> usize {
        (self.day_index() + 3).rem_euclid(7) as usize
    }

    /// This timestamp shifted by `minutes` (may be negative).
    pub fn plus_minutes(self, minutes: i64) -> Self {
        Self(self.0 + minutes)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso8601())
    }
}

/// Identifier of a parking garage.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GarageId(pub String);

impl fmt::Display for GarageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for GarageId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Identifier of a traffic measurement location (an induction loop).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationId(pub String);

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LocationId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// A contiguous range of minutes: `start`, `start + 1`, ..., `start + len - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinuteGrid {
    pub start: Timestamp,
    pub len: usize,
}

impl MinuteGrid {
    /// A grid covering `len` minutes from `start`.
    pub fn new(start: Timestamp, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { start, len })
    }

    /// Index of `t` within the grid, or `None` if `t` falls outside.
    pub fn index_of(&self, t: Timestamp) -> Option<usize> {
        let offset = t.0 - self.start.0;
        if offset >= 0 && (offset as usize) < self.len {
            Some(offset as usize)
        } else {
            None
        }
    }

    /// Timestamp of grid slot `i`. Panics if `i >= len`.
    pub fn timestamp_at(&self, i: usize) -> Timestamp {
        assert!(i < self.len, "grid index {i} out of range {}", self.len);
        Timestamp(self.start.0 + i as i64)
    }

    /// One past the last minute of the grid.
    pub fn end(&self) -> Timestamp {
        Timestamp(self.start.0 + self.len as i64)
    }

    /// Iterator over all grid timestamps in order.
    pub fn iter(&self) -> impl Iterator<Item = Timestamp> + '_ {
        (0..self.len).map(|i| self.timestamp_at(i))
    }
}

/// Minute-resolution state of one garage: occupancy rate plus per-minute
/// influx/outflux counts, all aligned to `grid`.
///
/// Invariants: `occupancy_rate` values lie in `[0, 1]`; the three series have
/// the grid's length; for transaction-derived series the vehicle counts
/// ([`GarageStateSeries::occupancy_count`]) obey exact conservation:
/// `occupancy_count(t) - occupancy_count(t-1) == influx[t] - outflux[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarageStateSeries {
    pub garage: GarageId,
    pub capacity: u32,
    pub grid: MinuteGrid,
    pub occupancy_rate: Vec<f64>,
    pub influx: Vec<u32>,
    pub outflux: Vec<u32>,
}

impl GarageStateSeries {
    /// Occupancy expressed as a vehicle count at grid slot `i`.
    ///
    /// Rates are stored as `count / capacity`; multiplying back can be off
    /// by an ulp for capacities that are not powers of two, so the product
    /// is rounded to the integer it provably lies within half a unit of.
    pub fn occupancy_count(&self, i: usize) -> f64 {
        (self.occupancy_rate[i] * f64::from(self.capacity)).round()
    }
}

/// Exogenous inputs aligned to the same grid as the garage series.
///
/// `f64::NAN` marks minutes not covered by any observation; `holiday` is
/// always fully populated (days absent from the calendar count as regular
/// days).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSeries {
    pub grid: MinuteGrid,
    pub traffic_flow: BTreeMap<LocationId, Vec<f64>>,
    pub temperature_tenth_c: Vec<f64>,
    pub rain: Vec<f64>,
    pub holiday: Vec<f64>,
}

/// A garage series joined with exogenous series on one grid, with
/// complete-case bookkeeping.
///
/// `row_mask[i]` is true when every aligned series has a value at slot `i`;
/// `deleted_fraction` is the share of rows where it is false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub garage: GarageStateSeries,
    pub exogenous: ExogenousSeries,
    pub row_mask: Vec<bool>,
    pub deleted_fraction: f64,
}

impl Dataset {
    /// The shared minute grid.
    pub fn grid(&self) -> &MinuteGrid {
        &self.garage.grid
    }

    /// Indices of rows that survived complete-case deletion, in time order.
    pub fn valid_rows(&self) -> Vec<usize> {
        (0..self.row_mask.len())
            .filter(|&i| self.row_mask[i])
            .collect()
    }
}

/// Fractions of valid rows assigned to train/validation/test, in time order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.72,
            validation: 0.08,
            test: 0.20,
        }
    }
}

impl SplitSpec {
    /// Checks that all fractions are non-negative and sum to 1.
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "split fractions must be non-negative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Chronologically contiguous partitions of the valid rows of a dataset.
/// Values are grid indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Derives per-minute garage state from stay records.
///
/// A stay occupies the garage during minutes `[entry, exit)`: it contributes
/// `influx[entry] += 1` and `outflux[exit] += 1`, and `occupancy_rate[t]` is
/// the occupancy after processing all events of minute `t`, scaled by
/// capacity. `initial_occupancy` is the count present just before the grid
/// starts.
///
/// Preconditions: `entry <= exit`; `entry >= grid.start` (cars present at
/// grid start belong in `initial_occupancy` instead). Stays entering after
/// the grid end are ignored; exits beyond the grid end simply never occur
/// within the grid.
///
/// Errors: [`Error::InvalidStay`] on a precondition violation,
/// [`Error::OccupancyOutOfBounds`] if the running count leaves
/// `[0, capacity]`.
pub fn derive_states_from_transactions(
    garage: GarageId,
    capacity: u32,
    initial_occupancy: u32,
    grid: MinuteGrid,
    stays: &[(Timestamp, Timestamp)],
) -> Result<GarageStateSeries> {
    if capacity == 0 {
        return Err(Error::InvalidConfig("capacity must be positive".into()));
    }
    let mut influx = vec![0u32; grid.len];
    let mut outflux = vec![0u32; grid.len];
    for &(entry, exit) in stays {
        if exit < entry || entry < grid.start {
            return Err(Error::InvalidStay { entry, exit });
        }
        if let Some(i) = grid.index_of(entry) {
            influx[i] += 1;
        }
        if let Some(i) = grid.index_of(exit) {
            outflux[i] += 1;
        }
    }
    let mut occupancy_rate = vec![0.0; grid.len];
    let mut running = i64::from(initial_occupancy);
    let cap = f64::from(capacity);
    for i in 0..grid.len {
        running += i64::from(influx[i]) - i64::from(outflux[i]);
        if running < 0 || running > i64::from(capacity) {
            return Err(Error::OccupancyOutOfBounds {
                at: grid.timestamp_at(i),
                count: running,
                capacity,
            });
        }
        occupancy_rate[i] = running as f64 / cap;
    }
    Ok(GarageStateSeries {
        garage,
        capacity,
        grid,
        occupancy_rate,
        influx,
        outflux,
    })
}

/// Aligns exogenous observations to the garage's grid and applies
/// complete-case deletion bookkeeping.
///
/// Traffic and weather observations are step-held onto the grid (each minute
/// takes the most recent observation at or before it); minutes before the
/// first observation stay missing. The holiday calendar maps dates to flags;
/// absent dates count as 0.
///
/// The returned dataset's `row_mask` marks minutes where every traffic
/// location, temperature and rain all have values. The garage series itself
/// is always complete per construction.
pub fn assemble_dataset(
    garage: GarageStateSeries,
    traffic: &BTreeMap<LocationId, Vec<TrafficObservation>>,
    weather: &[WeatherObservation],
    holidays: &BTreeMap<String, bool>,
) -> Result<Dataset> {
    let grid = garage.grid;
    if garage.occupancy_rate.len() != grid.len {
        return Err(Error::GridMismatch {
            context: "garage series length",
            expected: grid.len,
            got: garage.occupancy_rate.len(),
        });
    }

    let mut traffic_flow = BTreeMap::new();
    for (loc, obs) in traffic {
        let pairs: Vec<(Timestamp, f64)> = obs.iter().map(|o| (o.time, o.flow_veh_per_hour)).collect();
        traffic_flow.insert(loc.clone(), crate::signal::resample_to_minutes(&pairs, &grid));
    }

    let temp_pairs: Vec<(Timestamp, f64)> = weather
        .iter()
        .map(|w| (w.time, f64::from(w.temperature_tenth_c)))
        .collect();
    let rain_pairs: Vec<(Timestamp, f64)> = weather
        .iter()
        .map(|w| (w.time, if w.rain { 1.0 } else { 0.0 }))
        .collect();
    let temperature_tenth_c = crate::signal::resample_to_minutes(&temp_pairs, &grid);
    let rain = crate::signal::resample_to_minutes(&rain_pairs, &grid);

    let holiday: Vec<f64> = grid
        .iter()
        .map(|t| {
            let flag = holidays.get(&t.to_date_string()).copied().unwrap_or(false);
            if flag {
                1.0
            } else {
                0.0
            }
        })
        .collect();

    let mut row_mask = vec![true; grid.len];
    for series in traffic_flow.values() {
        for (i, v) in series.iter().enumerate() {
            if v.is_nan() {
                row_mask[i] = false;
            }
        }
    }
    for (i, m) in row_mask.iter_mut().enumerate() {
        if temperature_tenth_c[i].is_nan() || rain[i].is_nan() {
            *m = false;
        }
    }
    let deleted = row_mask.iter().filter(|&&m| !m).count();
    let deleted_fraction = deleted as f64 / grid.len as f64;

    Ok(Dataset {
        garage,
        exogenous: ExogenousSeries {
            grid,
            traffic_flow,
            temperature_tenth_c,
            rain,
            holiday,
        },
        row_mask,
        deleted_fraction,
    })
}

/// Splits the valid rows of a dataset chronologically.
///
/// Train gets `floor(n * train)` rows, validation `floor(n * validation)`,
/// and test the remainder, so test is never empty for positive fractions.
/// Every train timestamp precedes every validation timestamp, which precede
/// every test timestamp.
///
/// Errors: [`Error::TooFewRows`] when fewer than 3 valid rows exist,
/// [`Error::InvalidConfig`] for bad fractions.
pub fn chronological_split(dataset: &Dataset, spec: &SplitSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    let rows = dataset.valid_rows();
    if rows.len() < 3 {
        return Err(Error::TooFewRows {
            needed: 3,
            have: rows.len(),
        });
    }
    let n = rows.len();
    let n_train = (n as f64 * spec.train).floor() as usize;
    let n_val = (n as f64 * spec.validation).floor() as usize;
    let train = rows[..n_train].to_vec();
    let validation = rows[n_train..n_train + n_val].to_vec();
    let test = rows[n_train + n_val..].to_vec();
    Ok(DatasetSplit {
        train,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::WeatherObservation;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(start: i64, len: usize) -> MinuteGrid {
        MinuteGrid::new(Timestamp(start), len).unwrap()
    }

    #[test]
    fn timestamp_iso_round_trip() {
        let t = Timestamp::from_iso8601("2024-01-01T08:30:00Z").unwrap();
        assert_eq!(t.to_iso8601(), "2024-01-01T08:30:00Z");
        assert_eq!(t.minute_of_day(), 8 * 60 + 30);
        // 2024-01-01 is a Monday.
        assert_eq!(t.weekday_index(), 0);
    }

    #[test]
    fn timestamp_rejects_non_minute_precision() {
        assert!(Timestamp::from_iso8601("2024-01-01T08:30:30Z").is_err());
        assert!(Timestamp::from_iso8601("2024-01-01T08:30:00+01:00").is_err());
        assert!(Timestamp::from_iso8601("not a time").is_err());
    }

    #[test]
    fn weekday_is_monday_zero_based() {
        // 1970-01-01 was a Thursday.
        assert_eq!(Timestamp(0).weekday_index(), 3);
        // Epoch + 4 days: Monday 1970-01-05.
        assert_eq!(Timestamp(4 * MINUTES_PER_DAY).weekday_index(), 0);
        // Wednesday maps to index 2.
        let wed = Timestamp::from_iso8601("2024-01-03T12:00:00Z").unwrap();
        assert_eq!(wed.weekday_index(), 2);
    }

    #[test]
    fn grid_indexing() {
        let g = grid(100, 10);
        assert_eq!(g.index_of(Timestamp(100)), Some(0));
        assert_eq!(g.index_of(Timestamp(109)), Some(9));
        assert_eq!(g.index_of(Timestamp(110)), None);
        assert_eq!(g.index_of(Timestamp(99)), None);
        assert_eq!(g.timestamp_at(3), Timestamp(103));
        assert!(matches!(
            MinuteGrid::new(Timestamp(0), 0),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn conservation_by_hand() {
        // One entry at t=0, one exit at t=2, capacity 10, initially empty.
        let g = grid(0, 5);
        let series = derive_states_from_transactions(
            GarageId::from("g"),
            10,
            0,
            g,
            &[(Timestamp(0), Timestamp(2))],
        )
        .unwrap();
        let counts: Vec<f64> = (0..5).map(|i| series.occupancy_count(i)).collect();
        assert_eq!(counts, vec![1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(series.influx, vec![1, 0, 0, 0, 0]);
        assert_eq!(series.outflux, vec![0, 0, 1, 0, 0]);
    }

    #[test]
    fn no_transactions_holds_initial_occupancy() {
        let g = grid(0, 4);
        let series =
            derive_states_from_transactions(GarageId::from("g"), 10, 5, g, &[]).unwrap();
        assert!(series.occupancy_rate.iter().all(|&r| r == 0.5));
        assert!(series.influx.iter().all(|&v| v == 0));
    }

    #[test]
    fn occupancy_out_of_bounds_is_detected() {
        let g = grid(0, 3);
        // Two cars entering a capacity-1 garage.
        let err = derive_states_from_transactions(
            GarageId::from("g"),
            1,
            0,
            g,
            &[(Timestamp(0), Timestamp(2)), (Timestamp(0), Timestamp(2))],
        )
        .unwrap_err();
        assert!(matches!(err, Error::OccupancyOutOfBounds { count: 2, .. }));
        // An exit for a car that was never there.
        let err = derive_states_from_transactions(
            GarageId::from("g"),
            1,
            0,
            grid(0, 3),
            &[(Timestamp(-5), Timestamp(1))],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidStay { .. }));
    }

    #[test]
    fn exit_before_entry_is_rejected() {
        let err = derive_states_from_transactions(
            GarageId::from("g"),
            1,
            0,
            grid(0, 3),
            &[(Timestamp(2), Timestamp(1))],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidStay { .. }));
    }

    /// Independent oracle: occupancy during minute `t` is the number of
    /// stays whose half-open interval `[entry, exit)` covers `t`; flux
    /// counts come from counting boundary events per minute.
    fn interval_counting_oracle(
        stays: &[(Timestamp, Timestamp)],
        grid: &MinuteGrid,
        initial: u32,
    ) -> (Vec<i64>, Vec<u32>, Vec<u32>) {
        let mut occ = vec![0i64; grid.len];
        let mut influx = vec![0u32; grid.len];
        let mut outflux = vec![0u32; grid.len];
        for (i, t) in grid.iter().enumerate() {
            occ[i] = i64::from(initial)
                + stays
                    .iter()
                    .filter(|(e, x)| *e <= t && t < *x)
                    .count() as i64;
            // Cars that entered at or before t and already left count into
            // initial-adjusted occupancy implicitly; the filter above is the
            // textbook interval count for stays starting within the grid.
            influx[i] = stays.iter().filter(|(e, _)| *e == t).count() as u32;
            outflux[i] = stays.iter().filter(|(_, x)| *x == t).count() as u32;
        }
        (occ, influx, outflux)
    }

    #[test]
    fn derivation_matches_interval_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = grid(0, 600);
        for _ in 0..20 {
            let stays: Vec<(Timestamp, Timestamp)> = (0..80)
                .map(|_| {
                    let entry = rng.random_range(0..550i64);
                    let dur = rng.random_range(0..120i64);
                    (Timestamp(entry), Timestamp(entry + dur))
                })
                .collect();
            let series = derive_states_from_transactions(
                GarageId::from("g"),
                200,
                0,
                g,
                &stays,
            )
            .unwrap();
            let (occ, influx, outflux) = interval_counting_oracle(&stays, &g, 0);
            for i in 0..g.len {
                assert_eq!(
                    series.occupancy_count(i).round() as i64,
                    occ[i],
                    "occupancy mismatch at slot {i}"
                );
            }
            assert_eq!(series.influx, influx);
            assert_eq!(series.outflux, outflux);
            // Conservation: delta occupancy equals influx - outflux.
            for i in 1..g.len {
                let delta = series.occupancy_count(i) - series.occupancy_count(i - 1);
                let net = f64::from(series.influx[i]) - f64::from(series.outflux[i]);
                assert_eq!(delta, net, "conservation violated at slot {i}");
            }
        }
    }

    fn tiny_dataset(len: usize, traffic_from: i64) -> Dataset {
        let g = grid(0, len);
        let garage = derive_states_from_transactions(GarageId::from("g"), 10, 2, g, &[]).unwrap();
        let mut traffic = BTreeMap::new();
        traffic.insert(
            LocationId::from("loop-1"),
            vec![TrafficObservation {
                location: LocationId::from("loop-1"),
                time: Timestamp(traffic_from),
                flow_veh_per_hour: 120.0,
            }],
        );
        let weather = vec![WeatherObservation {
            time: Timestamp(0),
            temperature_tenth_c: 150,
            rain: false,
        }];
        assemble_dataset(garage, &traffic, &weather, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn assembly_masks_rows_before_first_observation() {
        let ds = tiny_dataset(10, 4);
        assert_eq!(
            ds.row_mask,
            vec![false, false, false, false, true, true, true, true, true, true]
        );
        assert!((ds.deleted_fraction - 0.4).abs() < 1e-12);
        assert_eq!(ds.valid_rows(), vec![4, 5, 6, 7, 8, 9]);
        // Step-hold: every valid minute carries the last observation.
        let flow = &ds.exogenous.traffic_flow[&LocationId::from("loop-1")];
        assert!(flow[..4].iter().all(|v| v.is_nan()));
        assert!(flow[4..].iter().all(|&v| v == 120.0));
    }

    #[test]
    fn split_sizes_match_floor_floor_remainder() {
        let ds = tiny_dataset(100, 0);
        let split = chronological_split(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(split.train.len(), 72);
        assert_eq!(split.validation.len(), 8);
        assert_eq!(split.test.len(), 20);

        let ds = tiny_dataset(10, 0);
        let spec = SplitSpec {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        };
        let split = chronological_split(&ds, &spec).unwrap();
        assert_eq!(
            (split.train.len(), split.validation.len(), split.test.len()),
            (8, 1, 1)
        );
    }

    #[test]
    fn split_is_chronological() {
        let ds = tiny_dataset(50, 5);
        let split = chronological_split(&ds, &SplitSpec::default()).unwrap();
        let max_train = split.train.iter().max().unwrap();
        let min_val = split.validation.iter().min().unwrap();
        let max_val = split.validation.iter().max().unwrap();
        let min_test = split.test.iter().min().unwrap();
        assert!(max_train < min_val);
        assert!(max_val < min_test);
    }

    #[test]
    fn split_rejects_tiny_and_invalid_inputs() {
        let ds = tiny_dataset(10, 8);
        // Only 2 valid rows survive the mask.
        assert!(matches!(
            chronological_split(&ds, &SplitSpec::default()),
            Err(Error::TooFewRows { have: 2, .. })
        ));
        let ds = tiny_dataset(10, 0);
        let bad = SplitSpec {
            train: 0.9,
            validation: 0.2,
            test: 0.2,
        };
        assert!(matches!(
            chronological_split(&ds, &bad),
            Err(Error::InvalidConfig(_))
        ));
    }
}
