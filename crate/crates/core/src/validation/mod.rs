//! Expanding-window walk-forward evaluation of the Markov chain.
//!
//! Fold `k` fits on everything up to its training end and scores the next
//! window of days by comparing expected and observed shares of delayed
//! trains at fixed distances.

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariates::CovariateSpec;
use crate::ctmc::{
    fit_ctmc, predict_delay_rate, CtmcDataset, CtmcOptions, CtmcParams, ObservedPath, OriginConvention, SegmentScheme,
};
use crate::error::{Error, Result};
use crate::ingest::AnalysisDataset;

/// `{50, 100, …, 700}` km.
pub fn default_eval_points() -> Vec<f64> {
    (1..=14).map(|i| 50.0 * i as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    /// 1-based.
    pub index: usize,
    pub training_start: NaiveDate,
    pub training_end: NaiveDate,
    pub validation_start: NaiveDate,
    pub validation_end: NaiveDate,
}

/// Folds over `range` (inclusive dates). Fold 1 trains through
/// `first_training_end`; each later fold extends training by one window
/// and validates the following `window_days`.
pub fn walk_forward_split(
    range: (NaiveDate, NaiveDate),
    first_training_end: NaiveDate,
    window_days: u32,
    folds: usize,
) -> Result<Vec<FoldSpec>> {
    if folds == 0 || window_days == 0 {
        return Err(Error::InvalidInput(
            "need at least one fold and a window of at least one day".into(),
        ));
    }
    if first_training_end < range.0 {
        return Err(Error::InvalidInput(format!(
            "first training end {first_training_end} precedes the data start {}",
            range.0
        )));
    }
    let w = i64::from(window_days);
    let needed = first_training_end + Duration::days(w * folds as i64);
    if range.1 < needed {
        return Err(Error::InsufficientRange {
            needed,
            available: range.1,
            shortfall_days: (needed - range.1).num_days(),
        });
    }
    Ok((0..folds)
        .map(|k| {
            let training_end = first_training_end + Duration::days(w * k as i64);
            FoldSpec {
                index: k + 1,
                training_start: range.0,
                training_end,
                validation_start: training_end + Duration::days(1),
                validation_end: training_end + Duration::days(w),
            }
        })
        .collect())
}

/// Share of delayed trains at one distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedRate {
    pub rate: f64,
    pub trains: usize,
}

/// A train's state at `point` is its state at the last measuring spot at
/// or before the point; trains whose observed run ends before the point
/// are left out.
pub fn observed_delay_rate(paths: &[ObservedPath], point: f64) -> Result<ObservedRate> {
    let mut trains = 0;
    let mut delayed = 0;
    for state in paths.iter().filter_map(|p| p.state_at(point)) {
        trains += 1;
        delayed += state.index();
    }
    if trains == 0 {
        return Err(Error::UndefinedRate { point });
    }
    Ok(ObservedRate {
        rate: delayed as f64 / trains as f64,
        trains,
    })
}

/// Mean absolute difference.
pub fn mae(expected: &[f64], observed: &[f64]) -> Result<f64> {
    if expected.len() != observed.len() {
        return Err(Error::LengthMismatch {
            expected: expected.len(),
            found: observed.len(),
        });
    }
    if expected.is_empty() {
        return Err(Error::InvalidInput("mean absolute error of empty vectors".into()));
    }
    let sum: f64 = expected.iter().zip(observed).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / expected.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldConfig {
    /// Defaults to the data end minus `folds × window_days`.
    pub first_training_end: Option<NaiveDate>,
    pub window_days: u32,
    pub folds: usize,
    pub eval_points: Vec<f64>,
    pub origin: OriginConvention,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self {
            first_training_end: None,
            window_days: 7,
            folds: 4,
            eval_points: default_eval_points(),
            origin: OriginConvention::Punctual,
        }
    }
}

/// How each fold obtains its parameters.
#[derive(Debug, Clone)]
pub enum ValidationMode {
    /// Fit on the fold's training range.
    Fit(CtmcOptions),
    /// Use the given parameters for every fold (no fitting).
    Fixed(CtmcParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointComparison {
    pub distance: f64,
    pub expected: Option<f64>,
    pub observed: Option<f64>,
    /// Validation trains reaching the point.
    pub trains: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FoldStatus {
    Completed,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: FoldSpec,
    pub status: FoldStatus,
    pub training_trains: usize,
    pub validation_trains: usize,
    pub params: Option<CtmcParams>,
    pub points: Vec<PointComparison>,
    pub mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub scheme: SegmentScheme,
    pub covariates: Vec<String>,
    pub fitted: bool,
    pub folds: Vec<FoldResult>,
    /// Mean of the completed folds' MAE.
    pub averaged_mae: Option<f64>,
    pub completed_folds: usize,
    pub failed_folds: Vec<usize>,
}

/// Runs every fold (in parallel) and assembles the report in fold order.
/// A fold whose fit fails is marked failed; the average then covers the
/// completed folds only and the failure is logged.
pub fn run_validation(
    dataset: &AnalysisDataset,
    scheme: &SegmentScheme,
    spec: &CovariateSpec,
    config: &FoldConfig,
    mode: &ValidationMode,
) -> Result<ValidationReport> {
    let range = dataset
        .date_range()
        .ok_or_else(|| Error::InvalidInput("validation needs a non-empty dataset".into()))?;
    let window = i64::from(config.window_days);
    let first_end = config
        .first_training_end
        .unwrap_or(range.1 - Duration::days(window * config.folds as i64));
    let folds = walk_forward_split(range, first_end, config.window_days, config.folds)?;
    if let ValidationMode::Fixed(params) = mode {
        if params.covariate_count() != spec.len() || params.boundary_count() != scheme.boundaries().len() {
            return Err(Error::InvalidInput(
                "fixed parameters do not match the covariates and scheme".into(),
            ));
        }
    }

    let results: Vec<FoldResult> = folds
        .par_iter()
        .map(|fold| run_fold(dataset, scheme, spec, config, mode, *fold))
        .collect::<Result<_>>()?;

    let completed: Vec<f64> = results.iter().filter_map(|f| f.mae).collect();
    let failed_folds: Vec<usize> = results
        .iter()
        .filter(|f| f.status != FoldStatus::Completed)
        .map(|f| f.fold.index)
        .collect();
    if !failed_folds.is_empty() {
        log::warn!(
            "folds {failed_folds:?} failed; the averaged MAE covers {} of {} folds",
            completed.len(),
            results.len()
        );
    }
    Ok(ValidationReport {
        scheme: scheme.clone(),
        covariates: spec.iter().map(|c| c.key().to_string()).collect(),
        fitted: matches!(mode, ValidationMode::Fit(_)),
        averaged_mae: (!completed.is_empty()).then(|| completed.iter().sum::<f64>() / completed.len() as f64),
        completed_folds: completed.len(),
        failed_folds,
        folds: results,
    })
}

fn run_fold(
    dataset: &AnalysisDataset,
    scheme: &SegmentScheme,
    spec: &CovariateSpec,
    config: &FoldConfig,
    mode: &ValidationMode,
    fold: FoldSpec,
) -> Result<FoldResult> {
    let training = CtmcDataset::from_sections(
        &dataset.between(fold.training_start, fold.training_end),
        spec,
        config.origin,
    )?;
    let validation = CtmcDataset::from_sections(
        &dataset.between(fold.validation_start, fold.validation_end),
        spec,
        config.origin,
    )?;
    let mut result = FoldResult {
        fold,
        status: FoldStatus::Completed,
        training_trains: training.len(),
        validation_trains: validation.len(),
        params: None,
        points: Vec::new(),
        mae: None,
    };
    let params = match mode {
        ValidationMode::Fixed(p) => p.clone(),
        ValidationMode::Fit(opts) => match fit_ctmc(&training, scheme, opts) {
            Ok(fit) => fit.params,
            Err(e) => {
                log::warn!("fold {}: fit failed: {e}", fold.index);
                result.status = FoldStatus::Failed { reason: e.to_string() };
                return Ok(result);
            }
        },
    };
    let expected = predict_delay_rate(&params, scheme, &validation.paths, &config.eval_points)?;
    let mut pairs = (Vec::new(), Vec::new());
    for (pred, &distance) in expected.iter().zip(&config.eval_points) {
        let observed = match observed_delay_rate(&validation.paths, distance) {
            Ok(o) => Some(o.rate),
            Err(e) => {
                log::warn!("fold {}: {e}; point excluded", fold.index);
                None
            }
        };
        if let (Some(e), Some(o)) = (pred.rate, observed) {
            pairs.0.push(e);
            pairs.1.push(o);
        }
        result.points.push(PointComparison {
            distance,
            expected: pred.rate,
            observed,
            trains: pred.trains,
        });
    }
    result.params = Some(params);
    if pairs.0.is_empty() {
        result.status = FoldStatus::Failed {
            reason: "no evaluation point has validation trains".into(),
        };
    } else {
        result.mae = Some(mae(&pairs.0, &pairs.1)?);
    }
    Ok(result)
}
