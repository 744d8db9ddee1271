//! On-disk layout and the prepared-dataset artifact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use parkcast_core::datamodel::{Dataset, DatasetSplit};
use parkcast_core::features::TargetKind;
use parkcast_core::util::{load_artifact, save_artifact};

use crate::config::{AppConfig, Family};
use crate::error::{CliError, CliResult};

pub const PREPARED_KIND: &str = "prepared-dataset";

/// Bumped whenever [`PreparedDataset`]'s on-disk layout changes.
const PREPARED_VERSION: u32 = 1;

/// Rows each parser rejected while reading the raw CSVs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedCounts {
    pub transactions: usize,
    pub traffic: usize,
    pub weather: usize,
    pub holidays: usize,
}

/// Everything `prepare` persists: the cleaned dataset, its chronological
/// split, the holiday calendar, and the digest of the configuration that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedDataset {
    pub config_digest: String,
    pub dataset: Dataset,
    pub split: DatasetSplit,
    pub holidays: BTreeMap<String, bool>,
    pub rejected: RejectedCounts,
}

/// Where every stage reads and writes.
#[derive(Debug, Clone)]
pub struct Layout {
    pub out_dir: PathBuf,
    pub data_dir: PathBuf,
}

impl Layout {
    pub fn new(config: &AppConfig) -> Self {
        Self {
            out_dir: config.paths.out_dir.clone(),
            data_dir: config.paths.data_dir(),
        }
    }

    pub fn transactions_csv(&self) -> PathBuf {
        self.data_dir.join("transactions.csv")
    }
    pub fn traffic_csv(&self) -> PathBuf {
        self.data_dir.join("traffic.csv")
    }
    pub fn weather_csv(&self) -> PathBuf {
        self.data_dir.join("weather.csv")
    }
    pub fn holidays_csv(&self) -> PathBuf {
        self.data_dir.join("holidays.csv")
    }
    pub fn synth_manifest(&self) -> PathBuf {
        self.data_dir.join("manifest.json")
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.out_dir.join("dataset.json")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out_dir.join("models")
    }
    pub fn model_path(&self, family: Family, target: TargetKind) -> PathBuf {
        self.models_dir()
            .join(format!("{}-{}.json", family.as_str(), target.as_str()))
    }
    pub fn train_summary(&self) -> PathBuf {
        self.models_dir().join("train_summary.json")
    }

    pub fn report_dir(&self, family: Family, target: TargetKind) -> PathBuf {
        self.out_dir
            .join("reports")
            .join(format!("{}-{}", family.as_str(), target.as_str()))
    }
    pub fn evaluate_summary(&self) -> PathBuf {
        self.out_dir.join("reports").join("summary.json")
    }

    pub fn tune_dir(&self, sweep: &str) -> PathBuf {
        self.out_dir.join("tune").join(sweep)
    }

    pub fn analysis_dir(&self) -> PathBuf {
        self.out_dir.join("analysis")
    }

    pub fn serve_dir(&self) -> PathBuf {
        self.out_dir.join("serve")
    }
}

/// Saves the prepared dataset inside a digest-checked wrapper.
pub fn save_prepared(layout: &Layout, prepared: &PreparedDataset) -> CliResult<()> {
    fs::create_dir_all(&layout.out_dir)?;
    save_artifact(&layout.dataset_path(), PREPARED_KIND, PREPARED_VERSION, prepared)?;
    Ok(())
}

/// Loads the prepared dataset; a missing file is a configuration error that
/// names the missing artifact and the command that creates it.
pub fn load_prepared(layout: &Layout) -> CliResult<PreparedDataset> {
    let path = layout.dataset_path();
    if !path.exists() {
        return Err(CliError::one_violation(format!(
            "prepared dataset not found at {}; run `parkcast prepare` first",
            path.display()
        )));
    }
    Ok(load_artifact(&path, PREPARED_KIND)?)
}

/// Writes pretty-printed JSON, creating parent directories.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

