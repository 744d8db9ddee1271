//! Forecast evaluation: squared and absolute errors per horizon, scale-free
//! comparison against a naive reference, scaled-error distributions, and
//! CSV/JSON exports.
//!
//! The scale-free score divides the model's mean absolute error by the mean
//! absolute error a naive forecaster achieves on the same rows. Rows where
//! the naive forecaster lacks history (e.g. the first week, for the weekly
//! copy) are excluded from the comparison — and counted — so both sides see
//! identical rows. Horizons where the naive error is exactly zero are
//! flagged rather than silently dropped or divided through.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datamodel::Timestamp;
use crate::error::{Error, Result};
use crate::features::{HorizonGrid, Matrix, SupervisedSet, TargetKind, TargetSeries};
use crate::models::naive::{self, NaiveKind};
use crate::models::TrainedModel;

/// Error statistics for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub horizon_min: u32,
    pub mse: f64,
    pub mae: f64,
    /// Naive reference MAE on the same rows.
    pub naive_mae: f64,
    /// `mae / naive_mae`; `None` when the naive error is exactly zero.
    pub mase: Option<f64>,
    /// True when the naive reference is error-free at this horizon, which
    /// makes the ratio undefined.
    pub naive_zero: bool,
}

/// Error statistics over all horizons of one model on one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub model_label: String,
    pub target: TargetKind,
    pub naive_reference: NaiveKind,
    /// Rows that entered the comparison.
    pub n_rows: usize,
    /// Rows dropped because the naive reference had no history for them.
    pub excluded_rows: usize,
    pub per_horizon: Vec<HorizonMetrics>,
    pub pooled_mse: f64,
    pub pooled_mae: f64,
    pub pooled_naive_mae: f64,
    /// Ratio of pooled MAEs, the primary headline number.
    pub pooled_mase: Option<f64>,
    pub pooled_naive_zero: bool,
}

/// Five-number summary plus mean of the per-instance scaled errors
/// `|error| / naive_mae(horizon)`, pooled over all rows and horizons whose
/// naive MAE is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledErrorSummary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Everything the offline evaluator produces for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_label: String,
    pub target: TargetKind,
    pub horizons: HorizonGrid,
    pub schema_digest: String,
    pub config_digest: String,
    pub metrics: MetricSet,
    pub scaled_errors: Option<ScaledErrorSummary>,
    /// Present only when latency measurement was explicitly requested;
    /// wall-clock numbers never participate in digests.
    pub latency: Option<LatencyStats>,
}

/// Model predictions, naive predictions and actuals on the surviving rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedEvaluation {
    pub horizons: HorizonGrid,
    pub timestamps: Vec<Timestamp>,
    pub actuals: Matrix,
    pub predictions: Matrix,
    pub naive_predictions: Matrix,
    pub excluded_rows: usize,
}

/// Joins model predictions with naive references row by row, dropping (and
/// counting) rows where the naive forecaster has no history.
///
/// Errors: [`Error::ShapeMismatch`] when `predictions` does not line up with
/// `set`, [`Error::EmptyResult`] when no row survives.
pub fn align_with_naive(
    set: &SupervisedSet,
    predictions: &Matrix,
    series: &TargetSeries,
    naive_kind: NaiveKind,
) -> Result<AlignedEvaluation> {
    if predictions.rows != set.len() || predictions.cols != set.horizons.len() {
        return Err(Error::ShapeMismatch {
            context: "prediction matrix",
            expected: set.len() * set.horizons.len(),
            got: predictions.rows * predictions.cols,
        });
    }
    let h_count = set.horizons.len();
    let mut timestamps = Vec::new();
    let mut actuals = Vec::new();
    let mut preds = Vec::new();
    let mut naives = Vec::new();
    let mut excluded = 0usize;
    let mut naive_row = Vec::with_capacity(h_count);
    'rows: for (i, &t) in set.timestamps.iter().enumerate() {
        naive_row.clear();
        for &h in set.horizons.minutes() {
            match naive::predict(naive_kind, series, t, h) {
                Ok(v) => naive_row.push(v),
                Err(_) => {
                    excluded += 1;
                    continue 'rows;
                }
            }
        }
        timestamps.push(t);
        actuals.extend_from_slice(set.y.row(i));
        preds.extend_from_slice(predictions.row(i));
        naives.extend_from_slice(&naive_row);
    }
    if timestamps.is_empty() {
        return Err(Error::EmptyResult("no rows with naive history to compare"));
    }
    let rows = timestamps.len();
    Ok(AlignedEvaluation {
        horizons: set.horizons.clone(),
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
    })
}

/// Computes the full metric set from aligned predictions.
pub fn compute_metrics(
    aligned: &AlignedEvaluation,
    model_label: &str,
    target: TargetKind,
    naive_reference: NaiveKind,
) -> MetricSet {
    let rows = aligned.actuals.rows;
    let h_count = aligned.horizons.len();
    let n = rows as f64;
    let mut per_horizon = Vec::with_capacity(h_count);
    let mut pooled_se = 0.0;
    let mut pooled_ae = 0.0;
    let mut pooled_naive_ae = 0.0;
    for (j, &h) in aligned.horizons.minutes().iter().enumerate() {
        let mut se = 0.0;
        let mut ae = 0.0;
        let mut naive_ae = 0.0;
        for i in 0..rows {
            let actual = aligned.actuals.row(i)[j];
            let err = aligned.predictions.row(i)[j] - actual;
            let nerr = aligned.naive_predictions.row(i)[j] - actual;
            se += err * err;
            ae += err.abs();
            naive_ae += nerr.abs();
        }
        pooled_se += se;
        pooled_ae += ae;
        pooled_naive_ae += naive_ae;
        let mae = ae / n;
        let naive_mae = naive_ae / n;
        let naive_zero = naive_mae == 0.0;
        per_horizon.push(HorizonMetrics {
            horizon_min: h,
            mse: se / n,
            mae,
            naive_mae,
            mase: if naive_zero { None } else { Some(mae / naive_mae) },
            naive_zero,
        });
    }
    let cells = n * h_count as f64;
    let pooled_mae = pooled_ae / cells;
    let pooled_naive_mae = pooled_naive_ae / cells;
    let pooled_naive_zero = pooled_naive_mae == 0.0;
    MetricSet {
        model_label: model_label.to_string(),
        target,
        naive_reference,
        n_rows: rows,
        excluded_rows: aligned.excluded_rows,
        per_horizon,
        pooled_mse: pooled_se / cells,
        pooled_mae,
        pooled_naive_mae,
        pooled_mase: if pooled_naive_zero {
            None
        } else {
            Some(pooled_mae / pooled_naive_mae)
        },
        pooled_naive_zero,
    }
}

/// Linear-interpolation quantile of an ascending-sorted slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Summarizes per-instance scaled errors. Returns `None` when every horizon
/// has a zero naive MAE (nothing to scale by).
pub fn scaled_error_summary(
    aligned: &AlignedEvaluation,
    metrics: &MetricSet,
) -> Option<ScaledErrorSummary> {
    let mut scaled = Vec::new();
    for (j, hm) in metrics.per_horizon.iter().enumerate() {
        if hm.naive_zero {
            continue;
        }
        for i in 0..aligned.actuals.rows {
            let err = aligned.predictions.row(i)[j] - aligned.actuals.row(i)[j];
            scaled.push(err.abs() / hm.naive_mae);
        }
    }
    if scaled.is_empty() {
        return None;
    }
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    scaled.sort_by(f64::total_cmp);
    Some(ScaledErrorSummary {
        count: scaled.len(),
        mean,
        min: scaled[0],
        q1: quantile(&scaled, 0.25),
        median: quantile(&scaled, 0.5),
        q3: quantile(&scaled, 0.75),
        max: *scaled.last().expect("nonempty"),
    })
}

/// Wall-clock latency of single-row predictions, microseconds. Only runs
/// when asked for; results are informational and excluded from digests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub n: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p95_us: f64,
    pub max_us: f64,
}

/// Times `model.predict_row` over the rows of `x`.
pub fn measure_latency(model: &TrainedModel, x: &Matrix, repeats: usize) -> LatencyStats {
    let mut samples = Vec::with_capacity(x.rows * repeats.max(1));
    for _ in 0..repeats.max(1) {
        for i in 0..x.rows {
            let start = Instant::now();
            let out = model.predict_row(x.row(i));
            let micros = start.elapsed().as_secs_f64() * 1e6;
            std::hint::black_box(out);
            samples.push(micros);
        }
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.sort_by(f64::total_cmp);
    LatencyStats {
        n: samples.len(),
        mean_us: mean,
        p50_us: quantile(&samples, 0.5),
        p95_us: quantile(&samples, 0.95),
        max_us: *samples.last().expect("nonempty"),
    }
}

/// Evaluates a trained model on a supervised set against a naive reference.
///
/// Refuses sets whose schema digest differs from the one the model was
/// trained under ([`Error::DigestMismatch`]) and mismatched targets or
/// horizon grids ([`Error::InvalidConfig`]).
pub fn evaluate_model(
    model: &TrainedModel,
    set: &SupervisedSet,
    series: &TargetSeries,
    naive_kind: NaiveKind,
) -> Result<(EvaluationReport, AlignedEvaluation)> {
    if model.schema_digest != set.schema_digest {
        return Err(Error::DigestMismatch {
            expected: model.schema_digest.clone(),
            got: set.schema_digest.clone(),
        });
    }
    if model.target != set.target {
        return Err(Error::InvalidConfig(format!(
            "model predicts {}, set holds {}",
            model.target, set.target
        )));
    }
    if model.horizons != set.horizons {
        return Err(Error::InvalidConfig(
            "model and set disagree on the horizon grid".into(),
        ));
    }
    let predictions = model.predict_matrix(&set.x);
    let aligned = align_with_naive(set, &predictions, series, naive_kind)?;
    let label = model.kind().as_str().to_string();
    let metrics = compute_metrics(&aligned, &label, set.target, naive_kind);
    let scaled = scaled_error_summary(&aligned, &metrics);
    Ok((
        EvaluationReport {
            model_label: label,
            target: set.target,
            horizons: set.horizons.clone(),
            schema_digest: set.schema_digest.clone(),
            config_digest: model.config_digest.clone(),
            metrics,
            scaled_errors: scaled,
            latency: None,
        },
        aligned,
    ))
}

/// Evaluates a naive forecaster as if it were a model, against a (possibly
/// different) naive reference. Rows where either forecaster lacks history
/// are excluded.
pub fn evaluate_naive(
    forecaster: NaiveKind,
    set: &SupervisedSet,
    series: &TargetSeries,
    reference: NaiveKind,
) -> Result<(MetricSet, AlignedEvaluation)> {
    // Build the forecaster's own predictions, excluding rows it cannot
    // serve; then align those with the reference.
    let h_count = set.horizons.len();
    let mut rows = Vec::new();
    let mut preds = Vec::new();
    let mut row_buf = Vec::with_capacity(h_count);
    'rows: for (i, &t) in set.timestamps.iter().enumerate() {
        row_buf.clear();
        for &h in set.horizons.minutes() {
            match naive::predict(forecaster, series, t, h) {
                Ok(v) => row_buf.push(v),
                Err(_) => continue 'rows,
            }
        }
        rows.push(i);
        preds.extend_from_slice(&row_buf);
    }
    if rows.is_empty() {
        return Err(Error::EmptyResult("no rows the naive forecaster can serve"));
    }
    let subset = SupervisedSet {
        schema_digest: set.schema_digest.clone(),
        target: set.target,
        horizons: set.horizons.clone(),
        timestamps: rows.iter().map(|&i| set.timestamps[i]).collect(),
        x: Matrix::zeros(rows.len(), 0),
        y: Matrix {
            rows: rows.len(),
            cols: h_count,
            data: rows
                .iter()
                .flat_map(|&i| set.y.row(i).iter().copied())
                .collect(),
        },
    };
    let skipped = set.len() - rows.len();
    let predictions = Matrix {
        rows: rows.len(),
        cols: h_count,
        data: preds,
    };
    let mut aligned = align_with_naive(&subset, &predictions, series, reference)?;
    aligned.excluded_rows += skipped;
    let metrics = compute_metrics(&aligned, forecaster.as_str(), set.target, reference);
    Ok((metrics, aligned))
}

/// Writes one row per (timestamp, horizon) with raw and scaled errors.
/// The scaled column is empty at horizons flagged as naive-zero.
pub fn write_errors_csv(
    path: &Path,
    aligned: &AlignedEvaluation,
    metrics: &MetricSet,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(
        out,
        "time,horizon_min,actual,prediction,naive_prediction,error,scaled_error"
    )?;
    for i in 0..aligned.timestamps.len() {
        let t = aligned.timestamps[i].to_iso8601();
        for (j, hm) in metrics.per_horizon.iter().enumerate() {
            let actual = aligned.actuals.row(i)[j];
            let pred = aligned.predictions.row(i)[j];
            let naive = aligned.naive_predictions.row(i)[j];
            let err = pred - actual;
            let scaled = if hm.naive_zero {
                String::new()
            } else {
                format!("{}", err.abs() / hm.naive_mae)
            };
            writeln!(
                out,
                "{t},{h},{actual},{pred},{naive},{err},{scaled}",
                h = hm.horizon_min
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{MinuteGrid, MINUTES_PER_WEEK};
    use rand::{Rng as _, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn aligned_from(
        actuals: Vec<Vec<f64>>,
        predictions: Vec<Vec<f64>>,
        naive: Vec<Vec<f64>>,
        horizons: Vec<u32>,
    ) -> AlignedEvaluation {
        let rows = actuals.len();
        AlignedEvaluation {
            horizons: HorizonGrid(horizons),
            timestamps: (0..rows as i64).map(Timestamp).collect(),
            actuals: Matrix::from_rows(actuals),
            predictions: Matrix::from_rows(predictions),
            naive_predictions: Matrix::from_rows(naive),
            excluded_rows: 0,
        }
    }

    #[test]
    fn hand_computed_metrics() {
        // Two rows, one horizon: errors 1 and -3; naive errors 2 and 2.
        let aligned = aligned_from(
            vec![vec![10.0], vec![20.0]],
            vec![vec![11.0], vec![17.0]],
            vec![vec![12.0], vec![22.0]],
            vec![5],
        );
        let m = compute_metrics(&aligned, "demo", TargetKind::Occupancy, NaiveKind::RandomWalk);
        let h = &m.per_horizon[0];
        assert_eq!(h.mse, (1.0 + 9.0) / 2.0);
        assert_eq!(h.mae, 2.0);
        assert_eq!(h.naive_mae, 2.0);
        assert_eq!(h.mase, Some(1.0));
        assert!(!h.naive_zero);
        assert_eq!(m.pooled_mase, Some(1.0));
        assert_eq!(m.n_rows, 2);
    }

    #[test]
    fn naive_zero_is_flagged_not_dropped() {
        // Horizon 10: naive is perfect -> flagged; horizon 5 is normal.
        let aligned = aligned_from(
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![vec![1.5, 2.0], vec![3.5, 4.5]],
            vec![vec![2.0, 2.0], vec![4.0, 4.0]],
            vec![5, 10],
        );
        let m = compute_metrics(&aligned, "demo", TargetKind::Influx, NaiveKind::SeasonalWeekly);
        assert_eq!(m.per_horizon.len(), 2, "flagged horizon still reported");
        assert!(!m.per_horizon[0].naive_zero);
        assert!(m.per_horizon[1].naive_zero);
        assert_eq!(m.per_horizon[1].mase, None);
        assert!(m.per_horizon[1].mae > 0.0);
        // Pooled ratio still defined because horizon 5 contributes.
        assert!(m.pooled_mase.is_some());
        // Scaled errors only cover the unflagged horizon.
        let s = scaled_error_summary(&aligned, &m).unwrap();
        assert_eq!(s.count, 2);
    }

    #[test]
    fn resummation_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let rows = rng.random_range(1..40);
            let hs = rng.random_range(1..5);
            let gen = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
                (0..rows)
                    .map(|_| (0..hs).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect())
                    .collect()
            };
            let actuals = gen(&mut rng);
            let preds = gen(&mut rng);
            let naive = gen(&mut rng);
            let aligned = aligned_from(
                actuals.clone(),
                preds.clone(),
                naive.clone(),
                (1..=hs as u32).map(|i| i * 5).collect(),
            );
            let m = compute_metrics(&aligned, "x", TargetKind::Occupancy, NaiveKind::RandomWalk);
            // Independent recomputation per horizon from the raw vectors.
            for j in 0..hs {
                let errs: Vec<f64> = (0..rows).map(|i| preds[i][j] - actuals[i][j]).collect();
                let nerrs: Vec<f64> = (0..rows).map(|i| naive[i][j] - actuals[i][j]).collect();
                let mse = errs.iter().map(|e| e * e).sum::<f64>() / rows as f64;
                let mae = errs.iter().map(|e| e.abs()).sum::<f64>() / rows as f64;
                let nmae = nerrs.iter().map(|e| e.abs()).sum::<f64>() / rows as f64;
                let hm = &m.per_horizon[j];
                assert!((hm.mse - mse).abs() < 1e-12);
                assert!((hm.mae - mae).abs() < 1e-12);
                assert!((hm.naive_mae - nmae).abs() < 1e-12);
                if nmae > 0.0 {
                    assert!((hm.mase.unwrap() - mae / nmae).abs() < 1e-12);
                }
            }
            // Pooled values equal the flat means over all cells.
            let flat_mae: f64 = (0..rows)
                .flat_map(|i| (0..hs).map(move |j| (i, j)))
                .map(|(i, j)| (preds[i][j] - actuals[i][j]).abs())
                .sum::<f64>()
                / (rows * hs) as f64;
            assert!((m.pooled_mae - flat_mae).abs() < 1e-12);
            // Pooled MASE is the ratio of pooled MAEs, not a mean of ratios.
            if let Some(pm) = m.pooled_mase {
                assert!((pm - m.pooled_mae / m.pooled_naive_mae).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&[7.0], 0.5), 7.0);
    }

    fn weekly_series(weeks: usize) -> TargetSeries {
        let len = weeks * MINUTES_PER_WEEK as usize;
        let grid = MinuteGrid::new(Timestamp(0), len).unwrap();
        TargetSeries {
            target: TargetKind::Occupancy,
            grid,
            // Weekly-periodic plus slow drift, so the seasonal copy is good
            // but not perfect.
            values: (0..len)
                .map(|i| {
                    let phase = (i as f64 / MINUTES_PER_WEEK as f64) * std::f64::consts::TAU;
                    (phase * 7.0).sin() + i as f64 * 1e-6
                })
                .collect(),
        }
    }

    fn toy_set(series: &TargetSeries, from: i64, rows: usize) -> SupervisedSet {
        let horizons = HorizonGrid(vec![5, 10]);
        let timestamps: Vec<Timestamp> = (0..rows as i64).map(|i| Timestamp(from + i)).collect();
        let y = Matrix::from_rows(
            timestamps
                .iter()
                .map(|t| {
                    horizons
                        .minutes()
                        .iter()
                        .map(|&h| series.value_at(t.plus_minutes(i64::from(h))).unwrap())
                        .collect()
                })
                .collect(),
        );
        SupervisedSet {
            schema_digest: "d".into(),
            target: TargetKind::Occupancy,
            horizons,
            timestamps,
            x: Matrix::zeros(rows, 0),
            y,
        }
    }

    #[test]
    fn seasonal_naive_scores_exactly_one_against_itself() {
        let series = weekly_series(3);
        let set = toy_set(&series, MINUTES_PER_WEEK + 100, 200);
        let (metrics, _) =
            evaluate_naive(NaiveKind::SeasonalWeekly, &set, &series, NaiveKind::SeasonalWeekly)
                .unwrap();
        for hm in &metrics.per_horizon {
            assert!(!hm.naive_zero, "drift keeps the reference imperfect");
            assert_eq!(hm.mase, Some(1.0));
        }
        assert_eq!(metrics.pooled_mase, Some(1.0));
        assert_eq!(metrics.excluded_rows, 0);
    }

    #[test]
    fn rows_without_history_are_excluded_and_counted() {
        let series = weekly_series(3);
        // 50 rows sit before the one-week boundary, 150 after.
        let set = toy_set(&series, MINUTES_PER_WEEK - 55, 200);
        let (metrics, aligned) =
            evaluate_naive(NaiveKind::RandomWalk, &set, &series, NaiveKind::SeasonalWeekly)
                .unwrap();
        assert_eq!(metrics.excluded_rows, 50);
        assert_eq!(metrics.n_rows, 150);
        assert_eq!(aligned.timestamps.len(), 150);
        assert!(aligned.timestamps[0].0 >= MINUTES_PER_WEEK - 10);
    }

    #[test]
    fn errors_csv_has_one_row_per_cell() {
        let aligned = aligned_from(
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![vec![1.5, 2.0], vec![3.5, 4.5]],
            vec![vec![2.0, 2.0], vec![4.0, 4.0]],
            vec![5, 10],
        );
        let m = compute_metrics(&aligned, "demo", TargetKind::Influx, NaiveKind::SeasonalWeekly);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("errors.csv");
        write_errors_csv(&path, &aligned, &m).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 4);
        assert!(lines[0].starts_with("time,horizon_min"));
        // Naive-zero horizon rows leave the scaled column empty.
        let h10: Vec<&str> = lines[1..].iter().copied().filter(|l| l.contains(",10,")).collect();
        assert!(h10.iter().all(|l| l.ends_with(',')));
    }

    #[test]
    fn latency_measurement_reports_sane_numbers() {
        let x = Matrix::from_rows((0..16).map(|i| vec![i as f64]).collect());
        let y = Matrix::from_rows((0..16).map(|i| vec![i as f64 * 2.0]).collect());
        let params = crate::models::forest::train(
            &x,
            &y,
            &crate::models::forest::ForestConfig {
                n_trees: 2,
                max_depth: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let model = TrainedModel {
            target: TargetKind::Occupancy,
            horizons: HorizonGrid(vec![5]),
            schema_digest: "s".into(),
            config_digest: "c".into(),
            params: crate::models::ModelParams::Forest(params),
        };
        let stats = measure_latency(&model, &x, 2);
        assert_eq!(stats.n, 32);
        assert!(stats.mean_us >= 0.0);
        assert!(stats.max_us >= stats.p50_us);
    }
}
