//! Crate-wide error type and result alias.
//!
//! Every fallible operation in this crate returns [`Result`]. Variants are
//! grouped by the subsystem that raises them; messages carry enough context
//! to be actionable without a debugger.

use thiserror::Error;

use crate::datamodel::Timestamp;

/// All errors raised by this crate.
#[derive(Debug, Error)]
pub enum Error {
    // ---- data model ----
    /// A derived occupancy count left the physical range `[0, capacity]`.
    #[error("occupancy out of bounds at {at}: count {count} not in [0, {capacity}]")]
    OccupancyOutOfBounds {
        at: Timestamp,
        count: i64,
        capacity: u32,
    },

    /// A minute grid with zero length was requested.
    #[error("minute grid is empty")]
    EmptyGrid,

    /// Two grid-aligned series disagree on grid or length.
    #[error("grid mismatch: {context} (expected {expected}, got {got})")]
    GridMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Not enough valid rows to perform the requested split or study.
    #[error("too few rows: need at least {needed}, have {have}")]
    TooFewRows { needed: usize, have: usize },

    /// A stay violates the transaction contract (entry after exit, or entry
    /// before the grid start).
    #[error("invalid stay: entry {entry}, exit {exit}")]
    InvalidStay { entry: Timestamp, exit: Timestamp },

    // ---- ingest ----
    /// A file could not be opened or read.
    #[error("unreadable file {path}: {source}")]
    FileUnreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A delimited file does not have the expected header or column count.
    #[error("schema mismatch in {path}: expected columns {expected}")]
    SchemaMismatch { path: String, expected: String },

    /// A configuration value is out of range or inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    // ---- signal ----
    /// Filter cutoff must lie strictly inside (0, 1) as a fraction of Nyquist.
    #[error("invalid cutoff {cutoff}: must satisfy 0 < cutoff < 1")]
    InvalidCutoff { cutoff: f64 },

    /// Only filter orders expressible as a single biquad are supported.
    #[error("unsupported filter order {order}: supported orders are 1 and 2")]
    UnsupportedOrder { order: usize },

    /// A rolling window longer than the series it is applied to.
    #[error("window of {window} minutes cannot cover a series of {len} minutes")]
    WindowUncovered { window: usize, len: usize },

    // ---- features ----
    /// A feature row could not be completed at the requested time.
    #[error("incomplete row at {at}: missing {missing}")]
    IncompleteRow { at: Timestamp, missing: String },

    /// A feature category name that the schema does not contain.
    #[error("unknown feature category {0:?}")]
    UnknownCategory(String),

    /// An operation produced no rows.
    #[error("empty result: {0}")]
    EmptyResult(&'static str),

    // ---- models ----
    /// Input width or output width does not match the model.
    #[error("shape mismatch: {context} (expected {expected}, got {got})")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Training loss became non-finite.
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    /// A stored digest does not match the recomputed one.
    #[error("digest mismatch: expected {expected}, got {got}")]
    DigestMismatch { expected: String, got: String },

    /// An artifact file exists but cannot be decoded.
    #[error("corrupt artifact {path}: {reason}")]
    CorruptArtifact { path: String, reason: String },

    // ---- evaluation ----
    /// Metrics over an empty set are undefined.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// The naive baseline has (near-)zero error, so MASE is undefined.
    #[error("naive baseline MAE is zero at horizon {horizon_min} min; MASE undefined")]
    NaiveZero { horizon_min: u32 },

    /// The series does not reach far enough into the past for the baseline.
    #[error("insufficient history: need value at {at}, series starts at {start}")]
    InsufficientHistory { at: Timestamp, start: Timestamp },

    // ---- realtime ----
    /// The occupancy feed is older than the staleness budget allows.
    #[error("stale feed: staleness {staleness_min} min exceeds budget {budget_min} min")]
    StaleFeed { staleness_min: i64, budget_min: i64 },

    /// The feed state has not yet accumulated every input the model needs.
    #[error("incomplete feed state: missing {0}")]
    IncompleteState(String),

    /// Ground truth does not cover an instant a bundle was evaluated at.
    #[error("coverage gap: no ground truth at {at}")]
    CoverageGap { at: Timestamp },

    // ---- io plumbing ----
    /// Any other I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV encode/decode failure outside row-level rejects.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// JSON encode/decode failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
