//! Parking-garage state forecasting.
//!
//! This crate turns a garage's raw transaction log plus exogenous city data
//! (loop traffic, weather, holidays) into minute-resolution state series,
//! builds leakage-free supervised datasets over an 18-step horizon grid
//! (5 to 90 minutes ahead), trains feed-forward and random-forest
//! multi-output regressors from scratch, evaluates them against naive
//! baselines with MASE-centric metrics, and serves predictions from
//! replayed or live feeds with explicit staleness handling.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`datamodel`]: timestamps, grids, state series, dataset assembly, splits
//! - [`ingest`]: CSV parsing/writing and the synthetic city generator
//! - [`signal`]: Butterworth smoothing, resampling, rolling sums, lookbacks
//! - [`features`]: feature schema, encoding, supervised set construction
//! - [`models`]: feed-forward network, random forest, naive baselines,
//!   artifact persistence
//! - [`eval`]: MSE/MAE/MASE metrics, reports, error distributions, latency
//! - [`tune`]: grid search and forest-size selection
//! - [`analysis`]: feature-elimination and data-halving studies
//! - [`realtime`]: feed replay, live feed state, prediction bundles, serving

pub mod analysis;
pub mod datamodel;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
pub mod realtime;
pub mod signal;
pub mod tune;
pub mod util;

pub use error::{Error, Result};
