//! Ablation studies: what a feature category contributes, and how much
//! history the models actually need.
//!
//! Both studies hold everything except the studied variable fixed — same
//! seeds, same configuration, same test rows — so differences in the scores
//! are attributable to the ablation alone. The naive reference always keeps
//! its full history, even when the model's training set is truncated.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::evaluate_model;
use crate::features::{eliminate_category, FeatureCategory, FeatureSchema, SupervisedSet, TargetSeries};
use crate::models::naive::NaiveKind;
use crate::models::TrainedModel;

/// Scores with one feature category removed (or none, for the reference).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationEntry {
    /// Category removed, or "none" for the full-featured reference row.
    pub eliminated: String,
    /// Features remaining in the encoding.
    pub width: usize,
    pub pooled_mse: f64,
    pub pooled_mae: f64,
    pub pooled_mase: Option<f64>,
    /// Change in pooled scale-free score relative to the reference row;
    /// positive means removing the category hurt.
    pub mase_delta: Option<f64>,
}

/// Full elimination study for one model family on one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationStudy {
    pub model_label: String,
    pub target: String,
    pub entries: Vec<EliminationEntry>,
}

/// Trains and evaluates once per eliminated category, plus a full-featured
/// reference. `fit` receives the (possibly reduced) train/validation sets
/// and schema, and must apply the same configuration and seed every time.
pub fn feature_elimination_study<F>(
    train: &SupervisedSet,
    validation: &SupervisedSet,
    test: &SupervisedSet,
    schema: &FeatureSchema,
    series: &TargetSeries,
    naive_kind: NaiveKind,
    categories: &[FeatureCategory],
    mut fit: F,
) -> Result<EliminationStudy>
where
    F: FnMut(&SupervisedSet, &SupervisedSet, &FeatureSchema) -> Result<TrainedModel>,
{
    let mut entries = Vec::with_capacity(categories.len() + 1);
    let reference = {
        let model = fit(train, validation, schema)?;
        let (report, _) = evaluate_model(&model, test, series, naive_kind)?;
        entries.push(EliminationEntry {
            eliminated: "none".to_string(),
            width: schema.width(),
            pooled_mse: report.metrics.pooled_mse,
            pooled_mae: report.metrics.pooled_mae,
            pooled_mase: report.metrics.pooled_mase,
            mase_delta: Some(0.0),
        });
        report.metrics.pooled_mase
    };
    let mut label = None;
    for &category in categories {
        let (reduced_train, reduced_schema) = eliminate_category(train, schema, category)?;
        let (reduced_val, _) = eliminate_category(validation, schema, category)?;
        let (reduced_test, _) = eliminate_category(test, schema, category)?;
        let model = fit(&reduced_train, &reduced_val, &reduced_schema)?;
        label.get_or_insert_with(|| model.kind().as_str().to_string());
        let (report, _) = evaluate_model(&model, &reduced_test, series, naive_kind)?;
        let mase = report.metrics.pooled_mase;
        entries.push(EliminationEntry {
            eliminated: category.as_str().to_string(),
            width: reduced_schema.width(),
            pooled_mse: report.metrics.pooled_mse,
            pooled_mae: report.metrics.pooled_mae,
            pooled_mase: mase,
            mase_delta: match (mase, reference) {
                (Some(m), Some(r)) => Some(m - r),
                _ => None,
            },
        });
    }
    Ok(EliminationStudy {
        model_label: label.unwrap_or_else(|| "model".to_string()),
        target: test.target.as_str().to_string(),
        entries,
    })
}

/// Scores at one training-history level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvingLevel {
    /// Share of the training rows kept (newest first): 1, 1/2, 1/4, ...
    pub fraction: f64,
    pub train_rows: usize,
    pub pooled_mse: f64,
    pub pooled_mae: f64,
    pub pooled_mase: Option<f64>,
}

/// Training-set halving study for one model family on one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvingStudy {
    pub model_label: String,
    pub target: String,
    pub levels: Vec<HalvingLevel>,
}

/// Trains on the newest `1/2^k` of the training rows for `k` in
/// `0..levels`, evaluating each model on the unchanged test set. The naive
/// reference inside the scale-free score keeps the full series history at
/// every level.
pub fn data_halving_study<F>(
    train: &SupervisedSet,
    validation: &SupervisedSet,
    test: &SupervisedSet,
    series: &TargetSeries,
    naive_kind: NaiveKind,
    levels: usize,
    mut fit: F,
) -> Result<HalvingStudy>
where
    F: FnMut(&SupervisedSet, &SupervisedSet) -> Result<TrainedModel>,
{
    let mut out = Vec::with_capacity(levels);
    let mut label = None;
    for k in 0..levels {
        let fraction = 0.5f64.powi(k as i32);
        let level_train = train.newest_fraction(fraction)?;
        let model = fit(&level_train, validation)?;
        label.get_or_insert_with(|| model.kind().as_str().to_string());
        let (report, _) = evaluate_model(&model, test, series, naive_kind)?;
        out.push(HalvingLevel {
            fraction,
            train_rows: level_train.len(),
            pooled_mse: report.metrics.pooled_mse,
            pooled_mae: report.metrics.pooled_mae,
            pooled_mase: report.metrics.pooled_mase,
        });
    }
    Ok(HalvingStudy {
        model_label: label.unwrap_or_else(|| "model".to_string()),
        target: test.target.as_str().to_string(),
        levels: out,
    })
}

fn optional(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

/// One row per elimination entry.
pub fn write_elimination_csv(path: &Path, study: &EliminationStudy) -> Result<()> {
    let mut out = create(path)?;
    writeln!(
        out,
        "model,target,eliminated,width,pooled_mse,pooled_mae,pooled_mase,mase_delta"
    )?;
    for e in &study.entries {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            study.model_label,
            study.target,
            e.eliminated,
            e.width,
            e.pooled_mse,
            e.pooled_mae,
            optional(e.pooled_mase),
            optional(e.mase_delta)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// One row per halving level.
pub fn write_halving_csv(path: &Path, study: &HalvingStudy) -> Result<()> {
    let mut out = create(path)?;
    writeln!(
        out,
        "model,target,fraction,train_rows,pooled_mse,pooled_mae,pooled_mase"
    )?;
    for l in &study.levels {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            study.model_label,
            study.target,
            l.fraction,
            l.train_rows,
            l.pooled_mse,
            l.pooled_mae,
            optional(l.pooled_mase)
        )?;
    }
    out.flush()?;
    Ok(())
}
