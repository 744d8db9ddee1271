//! Signal conditioning: low-pass Butterworth design, causal filtering,
//! step-hold resampling, rolling sums and lookback windows.
//!
//! Traffic flows are noisy, so the feature pipeline smooths them with a
//! causal low-pass filter before summarizing them into 10-minute rolling
//! sums. All operations here are deterministic and allocation-light; the
//! streaming filter form is shared between offline preparation and the
//! realtime feed state so both paths produce identical values.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::datamodel::{LocationId, MinuteGrid, Timestamp};
use crate::error::{Error, Result};

/// Biquad filter coefficients in direct form:
/// `y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]`.
///
/// `a[0]` is always 1. First-order designs leave `b[2]` and `a[2]` at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl FilterCoefficients {
    /// Gain at zero frequency: `sum(b) / sum(a)`.
    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Poles of the transfer function in the z-plane.
    pub fn poles(&self) -> Vec<Complex64> {
        // Roots of z^2 + a1 z + a2 (or z + a1 for first order).
        let a1 = self.a[1];
        let a2 = self.a[2];
        if a2 == 0.0 {
            if a1 == 0.0 {
                return Vec::new();
            }
            return vec![Complex64::new(-a1, 0.0)];
        }
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        vec![
            (Complex64::new(-a1, 0.0) + disc) / 2.0,
            (Complex64::new(-a1, 0.0) - disc) / 2.0,
        ]
    }

    /// Magnitude response at a frequency given as a fraction of Nyquist
    /// (`0.0` = DC, `1.0` = Nyquist).
    pub fn magnitude_at(&self, fraction_of_nyquist: f64) -> f64 {
        let omega = std::f64::consts::PI * fraction_of_nyquist;
        let z_inv = Complex64::from_polar(1.0, -omega);
        let num = Complex64::new(self.b[0], 0.0) + self.b[1] * z_inv + self.b[2] * z_inv * z_inv;
        let den = Complex64::new(self.a[0], 0.0) + self.a[1] * z_inv + self.a[2] * z_inv * z_inv;
        (num / den).norm()
    }
}

/// Designs a low-pass Butterworth filter of the given order.
///
/// `cutoff` is the -3 dB frequency as a fraction of Nyquist and must lie
/// strictly in `(0, 1)`. The design prewarps the cutoff, places the analog
/// Butterworth poles, and maps them with the bilinear transform; zeros land
/// at the Nyquist frequency and the gain is normalized to exactly 1 at DC.
///
/// The resulting filter is always stable: all poles lie strictly inside the
/// unit circle.
///
/// Errors: [`Error::InvalidCutoff`] for cutoffs outside `(0, 1)`,
/// [`Error::UnsupportedOrder`] for orders other than 1 or 2 (higher orders
/// do not fit a single biquad).
pub fn butterworth_design(order: usize, cutoff: f64) -> Result<FilterCoefficients> {
    if !(cutoff.is_finite() && 0.0 < cutoff && cutoff < 1.0) {
        return Err(Error::InvalidCutoff { cutoff });
    }
    if order == 0 || order > 2 {
        return Err(Error::UnsupportedOrder { order });
    }
    // Prewarped analog cutoff for a bilinear transform with T = 2.
    let warped = (std::f64::consts::PI * cutoff / 2.0).tan();

    // Analog Butterworth poles on the circle of radius `warped`, then the
    // bilinear map z = (1 + s) / (1 - s).
    let digital_poles: Vec<Complex64> = (0..order)
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            let s = warped * Complex64::from_polar(1.0, theta);
            (1.0 + s) / (1.0 - s)
        })
        .collect();

    let mut a = [1.0, 0.0, 0.0];
    match order {
        1 => {
            a[1] = -digital_poles[0].re;
        }
        2 => {
            a[1] = -(digital_poles[0] + digital_poles[1]).re;
            a[2] = (digital_poles[0] * digital_poles[1]).re;
        }
        _ => unreachable!("order validated above"),
    }

    // `order` zeros at z = -1, scaled so the DC gain is exactly 1.
    let gain = a.iter().sum::<f64>() / (1 << order) as f64;
    let b = match order {
        1 => [gain, gain, 0.0],
        _ => [gain, 2.0 * gain, gain],
    };

    let coeffs = FilterCoefficients { b, a };
    debug_assert!(coeffs.poles().iter().all(|p| p.norm() < 1.0));
    Ok(coeffs)
}

/// Incremental causal filter in direct form II transposed.
///
/// On the first sample the internal state is set to the steady state for
/// that value, so a constant input produces a constant output from the very
/// first sample. [`StreamingFilter::zeroed`] skips that initialization for
/// callers that need the raw impulse response.
#[derive(Debug, Clone)]
pub struct StreamingFilter {
    coeffs: FilterCoefficients,
    state: Option<[f64; 2]>,
}

impl StreamingFilter {
    /// A filter that will initialize to steady state on its first sample.
    pub fn new(coeffs: FilterCoefficients) -> Self {
        Self {
            coeffs,
            state: None,
        }
    }

    /// A filter starting from zero internal state.
    pub fn zeroed(coeffs: FilterCoefficients) -> Self {
        Self {
            coeffs,
            state: Some([0.0, 0.0]),
        }
    }

    /// Feeds one sample and returns the filtered value.
    pub fn push(&mut self, x: f64) -> f64 {
        let FilterCoefficients { b, a } = self.coeffs;
        let state = self.state.get_or_insert_with(|| {
            // Steady state for a constant input x: the output settles at
            // G*x, and the two delay registers settle accordingly.
            let y = self.coeffs.dc_gain() * x;
            let z2 = b[2] * x - a[2] * y;
            let z1 = b[1] * x - a[1] * y + z2;
            [z1, z2]
        });
        let y = b[0] * x + state[0];
        state[0] = b[1] * x - a[1] * y + state[1];
        state[1] = b[2] * x - a[2] * y;
        y
    }
}

/// Applies a causal filter over a grid-aligned series in a single forward
/// pass with steady-state initialization at the first finite value.
///
/// A leading run of missing values (`NaN`) is preserved untouched; the
/// filter starts at the first finite sample. Missing values after that point
/// violate the step-hold contract of aligned series.
///
/// Errors: [`Error::InvalidConfig`] if a missing value appears after the
/// first finite sample.
pub fn filter_apply_causal(coeffs: FilterCoefficients, series: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![f64::NAN; series.len()];
    let Some(first) = series.iter().position(|v| !v.is_nan()) else {
        return Ok(out);
    };
    let mut filter = StreamingFilter::new(coeffs);
    for (i, &x) in series.iter().enumerate().skip(first) {
        if x.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "missing value at offset {i} after series became live at {first}"
            )));
        }
        out[i] = filter.push(x);
    }
    Ok(out)
}

/// Step-holds irregular observations onto a minute grid.
///
/// Each grid minute takes the most recent observation at or before it;
/// minutes before the first observation are missing (`NaN`). Observations
/// sharing a timestamp resolve to the last one in input order.
pub fn resample_to_minutes(observations: &[(Timestamp, f64)], grid: &MinuteGrid) -> Vec<f64> {
    let mut sorted: Vec<(Timestamp, f64)> = observations.to_vec();
    sorted.sort_by_key(|(t, _)| *t);
    let mut out = vec![f64::NAN; grid.len];
    let mut held = f64::NAN;
    let mut next = 0usize;
    for (i, t) in grid.iter().enumerate() {
        while next < sorted.len() && sorted[next].0 <= t {
            held = sorted[next].1;
            next += 1;
        }
        out[i] = held;
    }
    out
}

/// Rolling sum over trailing windows of `window` minutes.
///
/// `out[t] = sum(series[t - window + 1 ..= t])`; the first `window - 1`
/// slots are missing, and any missing input inside a window makes that
/// window's sum missing.
///
/// Errors: [`Error::WindowUncovered`] if the window exceeds the series
/// length, [`Error::InvalidConfig`] for a zero window.
pub fn rolling_sum(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidConfig("rolling window must be positive".into()));
    }
    if window > series.len() {
        return Err(Error::WindowUncovered {
            window,
            len: series.len(),
        });
    }
    let mut out = vec![f64::NAN; series.len()];
    for t in (window - 1)..series.len() {
        // Direct summation keeps the result exact and independent of any
        // sliding-update rounding.
        out[t] = series[(t + 1 - window)..=t].iter().sum();
    }
    Ok(out)
}

/// Samples a grid-aligned series at `count` lags spaced `step` minutes
/// apart, newest first: values at `t, t - step, ..., t - (count-1)*step`.
///
/// Errors: [`Error::IncompleteRow`] when a lag falls outside the grid or on
/// a missing value.
pub fn sample_lags(
    series: &[f64],
    grid: &MinuteGrid,
    t: Timestamp,
    count: usize,
    step: i64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let at = t.plus_minutes(-(k as i64) * step);
        let value = grid
            .index_of(at)
            .map(|i| series[i])
            .filter(|v| !v.is_nan())
            .ok_or_else(|| Error::IncompleteRow {
                at: t,
                missing: format!("lag {k} at {at}"),
            })?;
        out.push(value);
    }
    Ok(out)
}

/// Recent-history snapshot used as model input: occupancy values at the feed
/// cadence and smoothed flow sums per location, each newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct LookbackWindow {
    /// Time the window is anchored at (the newest occupancy observation).
    pub anchor: Timestamp,
    /// 5 most recent occupancy rates, newest first.
    pub occupancy: Vec<f64>,
    /// Per location: rolling-sum flow values at the anchor and multiples of
    /// the flow lag step before it, newest first.
    pub flows: BTreeMap<LocationId, Vec<f64>>,
}

/// How many occupancy observations a lookback window holds.
pub const OCCUPANCY_LAG_COUNT: usize = 5;
/// How many rolling-sum flow values per location a lookback window holds.
pub const FLOW_LAG_COUNT: usize = 3;
/// Spacing in minutes between consecutive flow lags (one rolling window).
pub const FLOW_LAG_STEP_MIN: i64 = 10;

/// Builds a lookback window at time `t` from an occupancy update feed and
/// grid-aligned rolling-sum flow series.
///
/// Occupancy lags are the values of the 5 most recent feed updates at or
/// before `t`, newest first, whatever their exact spacing; the window is
/// anchored at the newest update. Flow lags are the rolling-sum values at
/// the anchor, anchor-10 and anchor-20 minutes.
///
/// Errors: [`Error::IncompleteRow`] when fewer than 5 updates exist at or
/// before `t`, or a flow lag is unavailable.
pub fn build_lookbacks(
    occupancy_feed: &[(Timestamp, f64)],
    flow_sums: &BTreeMap<LocationId, Vec<f64>>,
    grid: &MinuteGrid,
    t: Timestamp,
) -> Result<LookbackWindow> {
    let mut recent: Vec<&(Timestamp, f64)> = occupancy_feed.iter().filter(|(u, _)| *u <= t).collect();
    recent.sort_by_key(|(u, _)| *u);
    if recent.len() < OCCUPANCY_LAG_COUNT {
        return Err(Error::IncompleteRow {
            at: t,
            missing: format!(
                "occupancy feed has {} of {OCCUPANCY_LAG_COUNT} updates",
                recent.len()
            ),
        });
    }
    let newest = &recent[recent.len() - OCCUPANCY_LAG_COUNT..];
    let anchor = newest[OCCUPANCY_LAG_COUNT - 1].0;
    let occupancy: Vec<f64> = newest.iter().rev().map(|(_, v)| *v).collect();

    let mut flows = BTreeMap::new();
    for (loc, sums) in flow_sums {
        let lags = sample_lags(sums, grid, anchor, FLOW_LAG_COUNT, FLOW_LAG_STEP_MIN)?;
        flows.insert(loc.clone(), lags);
    }
    Ok(LookbackWindow {
        anchor,
        occupancy,
        flows,
    })
}
