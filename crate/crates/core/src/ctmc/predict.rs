use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::model::{CtmcParams, SegmentScheme};
use super::path::ObservedPath;

/// Expected share of delayed trains at one distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedRate {
    pub distance: f64,
    /// `None` when no train of the cohort reaches the distance.
    pub rate: Option<f64>,
    pub trains: usize,
}

/// Mean delayed-state probability over the cohort at each evaluation
/// point. Every train starts punctual at the start of its covariate path
/// and is propagated along its own covariates; trains whose path ends
/// before a point do not count there.
pub fn predict_delay_rate(
    params: &CtmcParams,
    scheme: &SegmentScheme,
    cohort: &[ObservedPath],
    eval_points: &[f64],
) -> Result<Vec<PredictedRate>> {
    if let Some(&d) = eval_points.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::InvalidInput(format!("evaluation point {d} is not a distance")));
    }
    for path in cohort {
        if path.covariates.width() != params.covariate_count() {
            return Err(Error::MissingSection {
                train_id: path.train_id.clone(),
                section: 0,
            });
        }
    }
    let mut order: Vec<usize> = (0..eval_points.len()).collect();
    order.sort_by(|&a, &b| eval_points[a].total_cmp(&eval_points[b]));

    let per_train: Vec<Vec<Option<f64>>> = cohort
        .par_iter()
        .map(|path| delayed_probabilities(params, scheme, path, eval_points, &order))
        .collect::<Result<_>>()?;

    Ok(eval_points
        .iter()
        .enumerate()
        .map(|(i, &distance)| {
            let mut sum = 0.0;
            let mut trains = 0;
            for probs in &per_train {
                if let Some(p) = probs[i] {
                    sum += p;
                    trains += 1;
                }
            }
            PredictedRate {
                distance,
                rate: (trains > 0).then(|| sum / trains as f64),
                trains,
            }
        })
        .collect())
}

fn delayed_probabilities(
    params: &CtmcParams,
    scheme: &SegmentScheme,
    path: &ObservedPath,
    eval_points: &[f64],
    order: &[usize],
) -> Result<Vec<Option<f64>>> {
    let cov = &path.covariates;
    let mut out = vec![None; eval_points.len()];
    let mut dist = [1.0, 0.0];
    let mut at = cov.start;
    for &i in order {
        let d = eval_points[i];
        if d > cov.end() {
            break;
        }
        if d <= cov.start {
            out[i] = Some(0.0);
            continue;
        }
        if d > at {
            let p = super::path::path_transition_probability(params, cov, at, d, scheme)?;
            dist = [
                dist[0] * p[(0, 0)] + dist[1] * p[(1, 0)],
                dist[0] * p[(0, 1)] + dist[1] * p[(1, 1)],
            ];
            at = d;
        }
        out[i] = Some(dist[1].clamp(0.0, 1.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::StepCovariates;
    use crate::ctmc::State;

    fn constant_path(id: &str, end: f64) -> ObservedPath {
        ObservedPath::new(
            id.into(),
            vec![0.0, end],
            vec![State::Punctual, State::Punctual],
            StepCovariates::constant(vec![], end),
        )
        .unwrap()
    }

    #[test]
    fn closed_form_single_train() {
        let params = CtmcParams::homogeneous(0.01, 0.02);
        let out = predict_delay_rate(
            &params,
            &SegmentScheme::homogeneous(),
            &[constant_path("a", 300.0)],
            &[100.0, 0.0],
        )
        .unwrap();
        let e3 = (-3.0f64).exp();
        assert!((out[0].rate.unwrap() - (1.0 / 3.0 - e3 / 3.0)).abs() < 1e-14);
        assert_eq!(out[1].rate, Some(0.0));
    }

    #[test]
    fn trains_beyond_their_run_are_excluded() {
        let params = CtmcParams::homogeneous(0.01, 0.02);
        let cohort = [constant_path("a", 300.0), constant_path("b", 50.0)];
        let out = predict_delay_rate(&params, &SegmentScheme::homogeneous(), &cohort, &[40.0, 100.0, 400.0]).unwrap();
        assert_eq!(out[0].trains, 2);
        assert_eq!(out[1].trains, 1);
        assert_eq!(out[2].rate, None);
    }
}
