use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{ColumnScaling, HazardRatioRow};
use crate::numerics::{maximize, SquareMatrix};

use super::likelihood::CtmcProblem;
use super::model::{CtmcParams, SegmentScheme, Transition};
use super::path::{CtmcDataset, ObservedPath};
use super::predict::{predict_delay_rate, PredictedRate};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CtmcOptions {
    /// Gradient tolerance on the internal standardized scale.
    pub tol: f64,
}

impl Default for CtmcOptions {
    fn default() -> Self {
        Self { tol: 1e-6 }
    }
}

/// Hazard ratios of one transition: covariates first, then one row per
/// segment after the first (relative to the first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable {
    pub transition: Transition,
    pub baseline_intensity: f64,
    pub rows: Vec<HazardRatioRow>,
}

/// Intensity ratio between a segment and the first one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentContrast {
    pub transition: Transition,
    pub segment: String,
    pub reference: String,
    pub hazard_ratio: f64,
    /// Delta-method standard error of the ratio.
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovFit {
    pub scheme: SegmentScheme,
    pub params: CtmcParams,
    /// Covariance of the flat parameter vector.
    pub covariance: SquareMatrix,
    pub parameter_names: Vec<String>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub trains: usize,
    /// Observed punctual→delayed and delayed→punctual changes.
    pub transition_counts: [usize; 2],
    pub tables: Vec<TransitionTable>,
    pub segment_contrasts: Vec<SegmentContrast>,
}

impl MarkovFit {
    pub fn standard_errors(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.sqrt()).collect()
    }

    pub fn table(&self, t: Transition) -> &TransitionTable {
        self.tables
            .iter()
            .find(|tab| tab.transition == t)
            .expect("both transitions tabulated")
    }

    pub fn predict(&self, cohort: &[ObservedPath], eval_points: &[f64]) -> Result<Vec<PredictedRate>> {
        predict_delay_rate(&self.params, &self.scheme, cohort, eval_points)
    }
}

/// Maximum likelihood fit of the chain to panel-observed paths.
pub fn fit_ctmc(ds: &CtmcDataset, scheme: &SegmentScheme, opts: &CtmcOptions) -> Result<MarkovFit> {
    let p = ds.names.len();
    let m = scheme.boundaries().len();
    let problem = CtmcProblem::new(&ds.paths, p, scheme)?;

    let counts = problem.transition_counts();
    for (t, n) in Transition::ALL.iter().zip(counts) {
        if n == 0 {
            return Err(Error::Unidentifiable(format!("no {} transition observed", t.key())));
        }
    }
    for (k, exposure) in problem.segment_exposure().into_iter().enumerate() {
        if exposure == 0.0 {
            return Err(Error::Unidentifiable(format!(
                "segment {} is not covered by any observation",
                scheme.label(k)
            )));
        }
    }

    let scaling = ColumnScaling::fit(problem.rows(), &ds.names)?;
    let scaled = problem.rescaled(&scaling);
    let block = 1 + p + m;
    let crude = problem.crude_rates();
    let mut init = vec![0.0; 2 * block];
    init[0] = crude[0].ln();
    init[block] = crude[1].ln();

    let res = maximize(&scaled, &init, opts.tol)?;
    if !res.converged {
        return Err(Error::NotConverged {
            iterations: res.iterations,
            gradient_norm: res.gradient_norm,
        });
    }
    let names_probe = CtmcParams::from_vec(ds.names.clone(), m, &res.argmax)?;
    let parameter_names = names_probe.parameter_names();
    let cov_scaled = res.hessian.inverse_spd().map_err(|pivot| Error::SingularInformation {
        columns: vec![parameter_names[pivot].clone()],
    })?;

    // back to raw covariate units: β = β̃/s, log q⁰ = c̃ − Σ β̃·mean/s
    let dim = 2 * block;
    let mut t = SquareMatrix::identity(dim);
    for offset in [0, block] {
        for j in 0..p {
            t[(offset, offset + 1 + j)] = -scaling.mean[j] / scaling.scale[j];
            t[(offset + 1 + j, offset + 1 + j)] = 1.0 / scaling.scale[j];
        }
    }
    let theta = t.mul_vec(&res.argmax);
    let covariance = t.mul(&cov_scaled).mul(&t.transpose()).symmetrized();
    let params = CtmcParams::from_vec(ds.names.clone(), m, &theta)?;
    let se: Vec<f64> = covariance.diagonal().iter().map(|v| v.sqrt()).collect();

    let mut tables = Vec::with_capacity(2);
    let mut segment_contrasts = Vec::new();
    for (i, transition) in Transition::ALL.into_iter().enumerate() {
        let offset = i * block;
        let mut rows: Vec<HazardRatioRow> = ds
            .names
            .iter()
            .enumerate()
            .map(|(j, name)| HazardRatioRow::from_estimate(name.clone(), theta[offset + 1 + j], se[offset + 1 + j]))
            .collect();
        for k in 1..=m {
            let idx = offset + p + k;
            let row = HazardRatioRow::from_estimate(format!("segment {}", scheme.label(k)), theta[idx], se[idx]);
            segment_contrasts.push(SegmentContrast {
                transition,
                segment: scheme.label(k),
                reference: scheme.label(0),
                hazard_ratio: row.hazard_ratio,
                se: row.hazard_ratio * se[idx],
                ci_lower: row.ci_lower,
                ci_upper: row.ci_upper,
                p_value: row.p_value,
            });
            rows.push(row);
        }
        tables.push(TransitionTable {
            transition,
            baseline_intensity: theta[offset].exp(),
            rows,
        });
    }

    Ok(MarkovFit {
        scheme: scheme.clone(),
        params,
        covariance,
        parameter_names,
        log_likelihood: res.value,
        iterations: res.iterations,
        trains: ds.paths.len(),
        transition_counts: counts,
        tables,
        segment_contrasts,
    })
}
