//! One JSON document configures every pipeline stage. Flags override the
//! file, the merged result is validated as a whole (every violation is
//! reported, not just the first), and its digest is embedded in every
//! artifact and report so mismatched pairs are detected downstream.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use parkcast_core::datamodel::{SplitSpec, Timestamp};
use parkcast_core::features::{HorizonGrid, SchemaConfig, TargetKind};
use parkcast_core::ingest::synth::SyntheticCityConfig;
use parkcast_core::models::forest::ForestConfig;
use parkcast_core::models::mlp::MlpConfig;
use parkcast_core::models::naive::NaiveKind;
use parkcast_core::models::tree::MaxFeatures;
use parkcast_core::realtime::serve::ReplaySpeed;
use parkcast_core::realtime::{replay::ReplayConfig, service_horizons};
use parkcast_core::util::{derive_seed, sha256_hex};

use crate::error::{CliError, CliResult};

/// Model family selector used across subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Network,
    Forest,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Network => "network",
            Family::Forest => "forest",
        }
    }
}

/// `--family` flag values: one family or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyChoice {
    Network,
    Forest,
    Both,
}

impl FamilyChoice {
    pub fn families(self) -> Vec<Family> {
        match self {
            FamilyChoice::Network => vec![Family::Network],
            FamilyChoice::Forest => vec![Family::Forest],
            FamilyChoice::Both => vec![Family::Network, Family::Forest],
        }
    }
}

/// Prediction target selector for flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Occupancy,
    Influx,
    Outflux,
}

impl From<TargetArg> for TargetKind {
    fn from(value: TargetArg) -> Self {
        match value {
            TargetArg::Occupancy => TargetKind::Occupancy,
            TargetArg::Influx => TargetKind::Influx,
            TargetArg::Outflux => TargetKind::Outflux,
        }
    }
}

/// Naive benchmark selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NaiveArg {
    SeasonalWeekly,
    RandomWalk,
}

impl NaiveArg {
    pub fn to_core(self) -> NaiveKind {
        match self {
            NaiveArg::SeasonalWeekly => NaiveKind::SeasonalWeekly,
            NaiveArg::RandomWalk => NaiveKind::RandomWalk,
        }
    }
}

/// Which hyperparameter sweep `tune` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    Architecture,
    LearningRate,
    ForestShape,
}

impl Sweep {
    pub fn as_str(self) -> &'static str {
        match self {
            Sweep::Architecture => "architecture",
            Sweep::LearningRate => "learning_rate",
            Sweep::ForestShape => "forest_shape",
        }
    }
}

/// Which ablation study `ablate` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Features,
    Data,
    Both,
}

/// Bundle sink selector for `serve`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SinkChoice {
    Jsonl,
    Http,
    Both,
}

impl SinkChoice {
    pub fn wants_jsonl(self) -> bool {
        matches!(self, SinkChoice::Jsonl | SinkChoice::Both)
    }
    pub fn wants_http(self) -> bool {
        matches!(self, SinkChoice::Http | SinkChoice::Both)
    }
}

/// Replay pacing: the literal string `"instant"` or a positive factor
/// (simulated minutes per wall-clock minute).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedSetting {
    Instant,
    Factor(f64),
}

impl SpeedSetting {
    pub fn to_core(self) -> ReplaySpeed {
        match self {
            SpeedSetting::Instant => ReplaySpeed::Instant,
            SpeedSetting::Factor(f) => ReplaySpeed::Factor(f),
        }
    }

    /// Parser for the `--speed` flag.
    pub fn parse_flag(text: &str) -> Result<Self, String> {
        if text == "instant" {
            return Ok(SpeedSetting::Instant);
        }
        match text.parse::<f64>() {
            Ok(f) if f.is_finite() && f > 0.0 => Ok(SpeedSetting::Factor(f)),
            _ => Err(format!(
                "expected \"instant\" or a positive number, got {text:?}"
            )),
        }
    }
}

impl Serialize for SpeedSetting {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            SpeedSetting::Instant => serializer.serialize_str("instant"),
            SpeedSetting::Factor(f) => serializer.serialize_f64(*f),
        }
    }
}

impl<'de> Deserialize<'de> for SpeedSetting {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(s) if s == "instant" => Ok(SpeedSetting::Instant),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "speed must be \"instant\" or a positive number, got {s:?}"
            ))),
            Raw::Number(f) if f.is_finite() && f > 0.0 => Ok(SpeedSetting::Factor(f)),
            Raw::Number(f) => Err(serde::de::Error::custom(format!(
                "speed factor must be positive and finite, got {f}"
            ))),
        }
    }
}

/// Storage locations. Excluded from the config digest: where results live
/// does not change what they are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out_dir: PathBuf,
    /// Raw CSV directory; `<out_dir>/data` when null.
    pub data_dir: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            data_dir: None,
        }
    }
}

impl PathsConfig {
    pub fn data_dir(&self) -> PathBuf {
        match &self.data_dir {
            Some(dir) => dir.clone(),
            None => self.out_dir.join("data"),
        }
    }
}

/// Dataset assembly parameters. Fields left null fall back to the
/// synthesizer section, so a purely synthetic pipeline needs no duplication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    /// Garage to model; the synthesizer's garage when null.
    pub garage: Option<String>,
    /// Parking spaces; the synthesizer's capacity when null.
    pub capacity: Option<u32>,
    /// Cars already inside at the first grid minute.
    pub initial_occupancy: u32,
    /// First grid minute, ISO-8601 UTC; the synthesizer's start when null.
    pub start: Option<String>,
    /// Grid length in days; the synthesizer's day count when null.
    pub days: Option<u32>,
}

/// Feed-forward network settings (the training seed derives from the
/// master seed and is not part of this section).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSettings {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        let d = MlpConfig::default();
        Self {
            hidden_layers: d.hidden_layers,
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
        }
    }
}

impl NetworkSettings {
    pub fn to_core(&self, seed: u64) -> MlpConfig {
        MlpConfig {
            hidden_layers: self.hidden_layers.clone(),
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
        }
    }
}

/// Random-forest settings (the training seed derives from the master seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSettings {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: u64,
    pub max_features: MaxFeatures,
}

impl Default for ForestSettings {
    fn default() -> Self {
        let d = ForestConfig::default();
        Self {
            n_trees: d.n_trees,
            max_depth: d.max_depth,
            min_samples_leaf: d.min_samples_leaf,
            max_features: d.max_features,
        }
    }
}

impl ForestSettings {
    pub fn to_core(&self, seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            max_features: self.max_features,
            seed,
        }
    }
}

/// Training stage parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub families: Vec<Family>,
    pub targets: Vec<TargetKind>,
    pub network: NetworkSettings,
    pub forest: ForestSettings,
    /// Keep every n-th candidate training row (1 keeps all).
    pub train_stride: usize,
    /// Keep every n-th candidate validation row.
    pub validation_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            families: vec![Family::Network, Family::Forest],
            targets: TargetKind::ALL.to_vec(),
            network: NetworkSettings::default(),
            forest: ForestSettings::default(),
            train_stride: 1,
            validation_stride: 1,
        }
    }
}

/// Hyperparameter sweep grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub sweep: Sweep,
    pub target: TargetKind,
    /// Total hidden neurons per architecture-sweep cell.
    pub neurons: Vec<usize>,
    /// Hidden layer counts per architecture-sweep cell.
    pub layers: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub trees: Vec<usize>,
    pub depths: Vec<usize>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            sweep: Sweep::Architecture,
            target: TargetKind::Occupancy,
            neurons: (1..=10).map(|i| i * 10).collect(),
            layers: (1..=6).collect(),
            learning_rates: vec![1e-2, 1e-3, 1e-4, 1e-5],
            trees: vec![1, 5, 10, 25, 50, 100],
            depths: (1..=10).map(|i| i * 2).collect(),
        }
    }
}

/// Offline evaluation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub naive: NaiveArg,
    /// Keep every n-th candidate test row.
    pub test_stride: usize,
    /// Measure single-row prediction latency and embed it in the report.
    /// Off by default so reports stay byte-reproducible across reruns.
    pub measure_latency: bool,
    pub latency_repeats: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            naive: NaiveArg::SeasonalWeekly,
            test_stride: 1,
            measure_latency: false,
            latency_repeats: 200,
        }
    }
}

/// Ablation study parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub family: Family,
    pub study: Study,
    /// Target for the feature-elimination study.
    pub elimination_target: TargetKind,
    /// Number of halving levels (level k trains on the newest 1/2^k).
    pub halving_levels: usize,
    pub halving_targets: Vec<TargetKind>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self {
            family: Family::Forest,
            study: Study::Both,
            elimination_target: TargetKind::Occupancy,
            halving_levels: 7,
            halving_targets: TargetKind::ALL.to_vec(),
        }
    }
}

/// Feed replay and serving parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSettings {
    pub family: Family,
    /// Replay window length in days, taken from the end of the dataset.
    pub window_days: f64,
    pub occupancy_cadence_min: i64,
    /// Uniform jitter on each occupancy gap: cadence ± jitter.
    pub occupancy_jitter_min: i64,
    pub traffic_cadence_min: i64,
    pub weather_cadence_min: i64,
    /// Explicit jitter seed; derived from the master seed when null.
    pub jitter_seed: Option<u64>,
    /// Minutes between prediction ticks.
    pub tick_interval_min: i64,
    /// Horizons each bundle serves, minutes from the tick.
    pub horizons: Vec<u32>,
    pub speed: SpeedSetting,
    pub sink: SinkChoice,
    /// Bind address for the HTTP sink; port 0 picks an ephemeral port.
    pub bind: String,
    /// Seconds to keep the HTTP endpoint up after the replay finishes.
    pub linger_s: u64,
}

impl Default for ServeSettings {
    fn default() -> Self {
        let replay = ReplayConfig::default();
        Self {
            family: Family::Forest,
            window_days: 7.0,
            occupancy_cadence_min: replay.occupancy_cadence_min,
            occupancy_jitter_min: replay.occupancy_jitter_min,
            traffic_cadence_min: replay.traffic_cadence_min,
            weather_cadence_min: replay.weather_cadence_min,
            jitter_seed: None,
            tick_interval_min: 5,
            horizons: service_horizons(),
            speed: SpeedSetting::Instant,
            sink: SinkChoice::Jsonl,
            bind: "127.0.0.1:0".to_string(),
            linger_s: 0,
        }
    }
}

impl ServeSettings {
    /// Core replay config with the effective jitter seed.
    pub fn replay_config(&self, master_seed: u64) -> ReplayConfig {
        ReplayConfig {
            occupancy_cadence_min: self.occupancy_cadence_min,
            occupancy_jitter_min: self.occupancy_jitter_min,
            traffic_cadence_min: self.traffic_cadence_min,
            weather_cadence_min: self.weather_cadence_min,
            seed: self
                .jitter_seed
                .unwrap_or_else(|| derive_seed(master_seed, "replay-jitter", 0)),
        }
    }
}

/// The whole configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    /// Master seed; every internal random stream derives from it.
    pub seed: u64,
    pub paths: PathsConfig,
    pub synth: SyntheticCityConfig,
    pub prepare: PrepareConfig,
    pub features: SchemaConfig,
    pub split: SplitSpec,
    /// Trained horizon grid, minutes ahead.
    pub horizons: Vec<u32>,
    pub train: TrainConfig,
    pub tune: TuneConfig,
    pub evaluate: EvaluateConfig,
    pub ablate: AblateConfig,
    pub serve: ServeSettings,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            paths: PathsConfig::default(),
            synth: SyntheticCityConfig::default(),
            prepare: PrepareConfig::default(),
            features: SchemaConfig::default(),
            split: SplitSpec::default(),
            horizons: HorizonGrid::default().minutes().to_vec(),
            train: TrainConfig::default(),
            tune: TuneConfig::default(),
            evaluate: EvaluateConfig::default(),
            ablate: AblateConfig::default(),
            serve: ServeSettings::default(),
        }
    }
}

/// Digest view: everything that defines the experiment, nothing that only
/// says where files live.
#[derive(Serialize)]
struct DigestView<'a> {
    seed: u64,
    synth: &'a SyntheticCityConfig,
    prepare: &'a PrepareConfig,
    features: &'a SchemaConfig,
    split: &'a SplitSpec,
    horizons: &'a [u32],
    train: &'a TrainConfig,
    tune: &'a TuneConfig,
    evaluate: &'a EvaluateConfig,
    ablate: &'a AblateConfig,
    serve: &'a ServeSettings,
}

impl AppConfig {
    /// Reads the document, or returns pure defaults when no path is given.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(AppConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::one_violation(format!("config file {} unreadable: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::one_violation(format!("config file {}: {e}", path.display())))
    }

    /// Folds the master seed into the sections that carry their own.
    /// Called once after flag merging, before the digest is taken.
    pub fn normalize(&mut self) {
        self.synth.seed = self.seed;
    }

    /// Hex SHA-256 over the canonical JSON form of the experiment-defining
    /// sections (paths excluded).
    pub fn digest(&self) -> String {
        let view = DigestView {
            seed: self.seed,
            synth: &self.synth,
            prepare: &self.prepare,
            features: &self.features,
            split: &self.split,
            horizons: &self.horizons,
            train: &self.train,
            tune: &self.tune,
            evaluate: &self.evaluate,
            ablate: &self.ablate,
            serve: &self.serve,
        };
        let bytes = serde_json::to_vec(&view).expect("config serializes");
        sha256_hex(&bytes)
    }

    /// Collects every violated constraint; an empty list means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Err(e) = self.synth.validate() {
            v.push(format!("synth: {e}"));
        }

        if let Some(start) = &self.prepare.start {
            if Timestamp::from_iso8601(start).is_err() {
                v.push(format!(
                    "prepare: start {start:?} is not an ISO-8601 UTC timestamp"
                ));
            }
        }
        if self.prepare.days == Some(0) {
            v.push("prepare: days must be positive".to_string());
        }
        if self.prepare.capacity == Some(0) {
            v.push("prepare: capacity must be positive".to_string());
        }
        let capacity = self.prepare.capacity.unwrap_or(self.synth.capacity);
        if capacity > 0 && self.prepare.initial_occupancy > capacity {
            v.push(format!(
                "prepare: initial occupancy {} exceeds capacity {}",
                self.prepare.initial_occupancy, capacity
            ));
        }

        if !(self.features.filter_cutoff > 0.0 && self.features.filter_cutoff < 1.0) {
            v.push(format!(
                "features: filter cutoff must lie strictly between 0 and 1, got {}",
                self.features.filter_cutoff
            ));
        }
        if !(1..=2).contains(&self.features.filter_order) {
            v.push(format!(
                "features: filter order must be 1 or 2, got {}",
                self.features.filter_order
            ));
        }
        if self.features.occupancy_cadence_min < 1 {
            v.push(format!(
                "features: occupancy cadence must be at least one minute, got {}",
                self.features.occupancy_cadence_min
            ));
        }
        if self.features.flow_window_min < 1 {
            v.push("features: flow window must be at least one minute".to_string());
        }

        if let Err(e) = self.split.validate() {
            v.push(format!("split: {e}"));
        }
        if let Err(e) = HorizonGrid(self.horizons.clone()).validate() {
            v.push(format!("horizons: {e}"));
        }

        if self.train.families.is_empty() {
            v.push("train: at least one model family is required".to_string());
        }
        if self.train.targets.is_empty() {
            v.push("train: at least one target is required".to_string());
        }
        if self.train.train_stride == 0 {
            v.push("train: train stride must be at least 1".to_string());
        }
        if self.train.validation_stride == 0 {
            v.push("train: validation stride must be at least 1".to_string());
        }
        let net = &self.train.network;
        if net.epochs == 0 {
            v.push("train.network: epochs must be at least 1".to_string());
        }
        if net.batch_size == 0 {
            v.push("train.network: batch size must be at least 1".to_string());
        }
        if !(net.learning_rate.is_finite() && net.learning_rate > 0.0) {
            v.push(format!(
                "train.network: learning rate must be positive and finite, got {}",
                net.learning_rate
            ));
        }
        if net.hidden_layers.is_empty() || net.hidden_layers.iter().any(|&w| w == 0) {
            v.push("train.network: hidden layers must be nonempty with positive widths".to_string());
        }
        let forest = &self.train.forest;
        if forest.n_trees == 0 {
            v.push("train.forest: tree count must be at least 1".to_string());
        }
        if forest.max_depth == 0 {
            v.push("train.forest: max depth must be at least 1".to_string());
        }
        if forest.min_samples_leaf == 0 {
            v.push("train.forest: min samples per leaf must be at least 1".to_string());
        }
        if forest.max_features == MaxFeatures::Fixed(0) {
            v.push("train.forest: fixed feature count must be at least 1".to_string());
        }

        let tune = &self.tune;
        match tune.sweep {
            Sweep::Architecture => {
                if tune.neurons.is_empty() || tune.layers.is_empty() {
                    v.push("tune: architecture sweep needs nonempty neuron and layer lists".to_string());
                } else if tune.layers.iter().any(|&l| l == 0) {
                    v.push("tune: layer counts must be positive".to_string());
                } else if let (Some(&min_n), Some(&max_l)) =
                    (tune.neurons.iter().min(), tune.layers.iter().max())
                {
                    if min_n < max_l {
                        v.push(format!(
                            "tune: cannot spread {min_n} neurons over {max_l} layers"
                        ));
                    }
                }
            }
            Sweep::LearningRate => {
                if tune.learning_rates.is_empty() {
                    v.push("tune: learning-rate sweep needs a nonempty rate list".to_string());
                } else if tune
                    .learning_rates
                    .iter()
                    .any(|r| !(r.is_finite() && *r > 0.0))
                {
                    v.push("tune: learning rates must be positive and finite".to_string());
                }
            }
            Sweep::ForestShape => {
                if tune.trees.is_empty() || tune.depths.is_empty() {
                    v.push("tune: forest sweep needs nonempty tree and depth lists".to_string());
                } else if tune.trees.iter().any(|&n| n == 0) || tune.depths.iter().any(|&d| d == 0)
                {
                    v.push("tune: tree counts and depths must be positive".to_string());
                }
            }
        }

        if self.evaluate.test_stride == 0 {
            v.push("evaluate: test stride must be at least 1".to_string());
        }
        if self.evaluate.latency_repeats == 0 {
            v.push("evaluate: latency repeats must be at least 1".to_string());
        }

        if self.ablate.halving_levels == 0 {
            v.push("ablate: at least one halving level is required".to_string());
        }
        if self.ablate.halving_targets.is_empty() {
            v.push("ablate: at least one halving target is required".to_string());
        }

        let serve = &self.serve;
        if !(serve.window_days.is_finite() && serve.window_days > 0.0) {
            v.push(format!(
                "serve: window must be a positive number of days, got {}",
                serve.window_days
            ));
        }
        if serve.tick_interval_min < 1 {
            v.push("serve: tick interval must be at least one minute".to_string());
        }
        for (label, cadence) in [
            ("occupancy", serve.occupancy_cadence_min),
            ("traffic", serve.traffic_cadence_min),
            ("weather", serve.weather_cadence_min),
        ] {
            if cadence < 1 {
                v.push(format!(
                    "serve: {label} cadence must be at least one minute, got {cadence}"
                ));
            }
        }
        if serve.occupancy_jitter_min < 0 || serve.occupancy_jitter_min >= serve.occupancy_cadence_min
        {
            v.push(format!(
                "serve: occupancy jitter must satisfy 0 <= jitter < cadence, got {} with cadence {}",
                serve.occupancy_jitter_min, serve.occupancy_cadence_min
            ));
        }
        if let Err(e) = HorizonGrid(serve.horizons.clone()).validate() {
            v.push(format!("serve: horizons: {e}"));
        } else {
            let max_served = *serve.horizons.last().expect("nonempty after validate");
            if let Some(&max_trained) = self.horizons.last() {
                if max_served > max_trained {
                    v.push(format!(
                        "serve: cannot serve {max_served}-minute horizons from models trained up to {max_trained} minutes"
                    ));
                }
            }
        }

        v
    }
}

/// The validated configuration plus the digest artifacts embed.
#[derive(Debug, Clone)]
pub struct Effective {
    pub config: AppConfig,
    pub digest: String,
}

impl Effective {
    /// Normalizes, validates (collecting every violation), and digests.
    pub fn resolve(mut config: AppConfig) -> CliResult<Self> {
        config.normalize();
        let violations = config.validate();
        if !violations.is_empty() {
            return Err(CliError::invalid(violations));
        }
        let digest = config.digest();
        Ok(Self { config, digest })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_digest_is_stable() {
        let eff = Effective::resolve(AppConfig::default()).unwrap();
        let again = Effective::resolve(AppConfig::default()).unwrap();
        assert_eq!(eff.digest, again.digest);
        assert_eq!(eff.digest.len(), 64);
    }

    #[test]
    fn digest_ignores_paths_but_tracks_experiment_knobs() {
        let base = Effective::resolve(AppConfig::default()).unwrap();

        let mut moved = AppConfig::default();
        moved.paths.out_dir = PathBuf::from("/somewhere/else");
        moved.paths.data_dir = Some(PathBuf::from("/raw"));
        assert_eq!(Effective::resolve(moved).unwrap().digest, base.digest);

        let mut reseeded = AppConfig::default();
        reseeded.seed = 8;
        assert_ne!(Effective::resolve(reseeded).unwrap().digest, base.digest);

        let mut retuned = AppConfig::default();
        retuned.train.forest.n_trees += 1;
        assert_ne!(Effective::resolve(retuned).unwrap().digest, base.digest);
    }

    #[test]
    fn validation_lists_every_violation_at_once() {
        let mut cfg = AppConfig::default();
        cfg.features.filter_cutoff = 2.0;
        cfg.features.filter_order = 9;
        cfg.train.train_stride = 0;
        cfg.serve.tick_interval_min = 0;
        cfg.horizons = vec![10, 5];
        let err = Effective::resolve(cfg).unwrap_err();
        match err {
            CliError::ConfigInvalid { violations } => {
                assert!(violations.len() >= 5, "got {violations:?}");
                assert!(violations.iter().any(|m| m.contains("filter cutoff")));
                assert!(violations.iter().any(|m| m.contains("filter order")));
                assert!(violations.iter().any(|m| m.contains("train stride")));
                assert!(violations.iter().any(|m| m.contains("tick interval")));
                assert!(violations.iter().any(|m| m.contains("horizons")));
            }
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn master_seed_flows_into_the_synthesizer_section() {
        let mut cfg = AppConfig::default();
        cfg.seed = 1234;
        cfg.synth.seed = 9; // stale value in the file is overridden
        let eff = Effective::resolve(cfg).unwrap();
        assert_eq!(eff.config.synth.seed, 1234);
    }

    #[test]
    fn speed_setting_round_trips_both_forms() {
        let instant: SpeedSetting = serde_json::from_str("\"instant\"").unwrap();
        assert_eq!(instant, SpeedSetting::Instant);
        let factor: SpeedSetting = serde_json::from_str("12.5").unwrap();
        assert_eq!(factor, SpeedSetting::Factor(12.5));
        assert!(serde_json::from_str::<SpeedSetting>("\"fast\"").is_err());
        assert!(serde_json::from_str::<SpeedSetting>("-3").is_err());
        assert_eq!(serde_json::to_string(&SpeedSetting::Instant).unwrap(), "\"instant\"");
        assert_eq!(serde_json::to_string(&SpeedSetting::Factor(2.0)).unwrap(), "2.0");
    }

    #[test]
    fn unknown_top_level_keys_are_rejected() {
        let err = serde_json::from_str::<AppConfig>("{\"sneaky\": 1}").unwrap_err();
        assert!(err.to_string().contains("sneaky"));
    }
}
