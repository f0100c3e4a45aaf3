use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{ColumnScaling, HazardRatioRow};
use crate::numerics::{maximize, SquareMatrix};

use super::survival::{breslow, BaselineHazard};
use super::{CoxDataset, CoxProblem};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoxOptions {
    /// Highest event rank kept as a stratum; later events are dropped.
    pub max_rank: usize,
    /// Gradient tolerance on the standardized scale.
    pub tol: f64,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self { max_rank: 2, tol: 1e-7 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoxFit {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub covariance: SquareMatrix,
    pub hazard_ratios: Vec<HazardRatioRow>,
    pub log_likelihood: f64,
    /// Log partial likelihood at `beta = 0`.
    pub null_log_likelihood: f64,
    pub iterations: usize,
    pub max_rank: usize,
    pub events_per_stratum: Vec<usize>,
    pub baseline: Vec<BaselineHazard>,
}

impl CoxFit {
    pub fn standard_errors(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.sqrt()).collect()
    }

    pub fn baseline_for(&self, stratum: usize) -> Option<&BaselineHazard> {
        self.baseline.iter().find(|b| b.stratum == stratum)
    }
}

/// Maximizes the stratified partial likelihood over strata `1..=max_rank`.
pub fn fit_stratified_cox(ds: &CoxDataset, opts: &CoxOptions) -> Result<CoxFit> {
    if opts.max_rank == 0 {
        return Err(Error::InvalidInput("max_rank must be at least 1".into()));
    }
    let problem = CoxProblem::new(ds, opts.max_rank);
    if problem.event_count() == 0 {
        return Err(Error::Unidentifiable("no events in the retained strata".into()));
    }
    let p = problem.dim();
    let scaling = ColumnScaling::fit(problem.rows(), &ds.names)?;
    let scaled = problem.rescaled(&scaling);

    let res = maximize(&scaled, &vec![0.0; p], opts.tol)?;
    if !res.converged {
        return Err(Error::NotConverged {
            iterations: res.iterations,
            gradient_norm: res.gradient_norm,
        });
    }
    let cov_scaled = if p == 0 {
        SquareMatrix::zeros(1)
    } else {
        res.hessian.inverse_spd().map_err(|pivot| Error::SingularInformation {
            columns: vec![ds.names[pivot].clone()],
        })?
    };

    let beta: Vec<f64> = res.argmax.iter().zip(&scaling.scale).map(|(b, s)| b / s).collect();
    let covariance = if p == 0 {
        SquareMatrix::zeros(1)
    } else {
        SquareMatrix::from_fn(p, |i, j| cov_scaled[(i, j)] / (scaling.scale[i] * scaling.scale[j]))
    };
    let hazard_ratios = ds
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| HazardRatioRow::from_estimate(name.clone(), beta[i], covariance[(i, i)].sqrt()))
        .collect();

    let mut events_per_stratum = vec![0; opts.max_rank];
    for rs in &problem.risk_sets {
        events_per_stratum[rs.stratum - 1] += rs.events.len();
    }
    let baseline = (1..=opts.max_rank)
        .map(|j| breslow(ds, &problem.risk_sets, &beta, j))
        .collect();

    Ok(CoxFit {
        names: ds.names.clone(),
        beta,
        covariance,
        hazard_ratios,
        log_likelihood: res.value,
        null_log_likelihood: problem.evaluate(&vec![0.0; p]).0,
        iterations: res.iterations,
        max_rank: opts.max_rank,
        events_per_stratum,
        baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::{CoxSubject, StepCovariates};

    fn subject(id: &str, events: &[f64], censor: f64, x: f64) -> CoxSubject {
        CoxSubject {
            id: id.into(),
            events: events.to_vec(),
            censor,
            covariates: StepCovariates::constant(vec![x], censor),
        }
    }

    #[test]
    fn two_event_closed_form() {
        // risk sets {A(1), B(0), C(1)} then {B, C}; score 1/(2u+1) = u/(1+u) gives u = 1/sqrt(2)
        let ds = CoxDataset::new(
            vec!["x".into()],
            vec![
                subject("A", &[10.0], 40.0, 1.0),
                subject("B", &[20.0], 40.0, 0.0),
                subject("C", &[], 30.0, 1.0),
            ],
        )
        .unwrap();
        let fit = fit_stratified_cox(
            &ds,
            &CoxOptions {
                max_rank: 1,
                tol: 1e-10,
            },
        )
        .unwrap();
        assert!((fit.beta[0] + 0.5 * 2f64.ln()).abs() < 1e-7, "{}", fit.beta[0]);
    }

    #[test]
    fn single_event_binary_covariate_has_no_finite_estimate() {
        // log L = β − log(e^β + 1) increases without bound
        let ds = CoxDataset::new(
            vec!["x".into()],
            vec![subject("A", &[10.0], 40.0, 1.0), subject("B", &[], 40.0, 0.0)],
        )
        .unwrap();
        match fit_stratified_cox(&ds, &CoxOptions::default()) {
            Ok(fit) => {
                assert!(fit.beta[0] > 10.0);
                assert!(fit.standard_errors()[0] > 100.0);
            }
            Err(e) => assert!(matches!(
                e,
                Error::NotConverged { .. } | Error::SingularInformation { .. }
            )),
        }
    }

    #[test]
    fn collinear_columns_are_named() {
        let cov = |x: f64| StepCovariates::constant(vec![x, 2.0 * x + 1.0], 40.0);
        let subjects = (0..6)
            .map(|i| CoxSubject {
                id: i.to_string(),
                events: if i % 2 == 0 { vec![5.0 + i as f64] } else { vec![] },
                censor: 40.0,
                covariates: cov(i as f64 * 0.3),
            })
            .collect();
        let ds = CoxDataset::new(vec!["temp".into(), "temp2".into()], subjects).unwrap();
        match fit_stratified_cox(&ds, &CoxOptions::default()).unwrap_err() {
            Error::SingularInformation { columns } => {
                assert_eq!(columns, vec!["temp".to_string(), "temp2".to_string()]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_events_is_unidentifiable() {
        let ds = CoxDataset::new(vec!["x".into()], vec![subject("A", &[], 40.0, 1.0)]).unwrap();
        assert!(matches!(
            fit_stratified_cox(&ds, &CoxOptions::default()),
            Err(Error::Unidentifiable(_))
        ));
    }
}
