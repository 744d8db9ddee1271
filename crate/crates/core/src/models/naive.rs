//! Naive reference forecasters: the weekly seasonal copy and the random
//! walk. Both read the per-minute target series directly, so they apply
//! uniformly to occupancy rates and 5-minute flux sums.

use serde::{Deserialize, Serialize};

use crate::datamodel::{Timestamp, MINUTES_PER_WEEK};
use crate::error::{Error, Result};
use crate::features::TargetSeries;

/// Which reference forecaster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaiveKind {
    /// Copies the value observed exactly one week before the target instant.
    SeasonalWeekly,
    /// Copies the newest value available at forecast time, for any horizon.
    RandomWalk,
}

impl NaiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NaiveKind::SeasonalWeekly => "seasonal_weekly",
            NaiveKind::RandomWalk => "random_walk",
        }
    }
}

/// Value the forecaster predicts for target instant `t + h`, issued at `t`.
///
/// Errors: [`Error::InsufficientHistory`] when the value it would copy lies
/// before the series or is not yet defined (e.g. the first minutes of a flux
/// sum series).
pub fn predict(
    kind: NaiveKind,
    series: &TargetSeries,
    t: Timestamp,
    horizon_min: u32,
) -> Result<f64> {
    let source = match kind {
        NaiveKind::SeasonalWeekly => t
            .plus_minutes(i64::from(horizon_min))
            .plus_minutes(-MINUTES_PER_WEEK),
        NaiveKind::RandomWalk => t,
    };
    series
        .value_at(source)
        .ok_or(Error::InsufficientHistory {
            at: source,
            start: series.grid.start,
        })
}
