use serde::{Deserialize, Serialize};

use super::{build_risk_sets, CoxDataset, CoxFit, RiskSet, StepCovariates};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselinePoint {
    pub distance: f64,
    pub jump: f64,
    pub cumulative: f64,
}

/// Breslow cumulative baseline hazard of one stratum; zero before the
/// first point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineHazard {
    pub stratum: usize,
    pub points: Vec<BaselinePoint>,
}

impl BaselineHazard {
    pub fn at(&self, t: f64) -> f64 {
        let n = self.points.partition_point(|p| p.distance <= t);
        if n == 0 {
            0.0
        } else {
            self.points[n - 1].cumulative
        }
    }
}

pub(crate) fn breslow(ds: &CoxDataset, risk_sets: &[RiskSet], beta: &[f64], stratum: usize) -> BaselineHazard {
    let mut cumulative = 0.0;
    let points = risk_sets
        .iter()
        .filter(|rs| rs.stratum == stratum)
        .map(|rs| {
            let etas: Vec<f64> = rs
                .members
                .iter()
                .map(|&l| {
                    let x = ds.subjects[l].covariates.at(rs.time).unwrap();
                    x.iter().zip(beta).map(|(a, b)| a * b).sum()
                })
                .collect();
            let shift = etas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = etas.iter().map(|e| (e - shift).exp()).sum();
            let jump = rs.events.len() as f64 * (-shift).exp() / denom;
            cumulative += jump;
            BaselinePoint {
                distance: rs.time,
                jump,
                cumulative,
            }
        })
        .collect();
    BaselineHazard { stratum, points }
}

/// Breslow estimate of the stratum's cumulative baseline hazard at the
/// fitted coefficients. An empty stratum gives an empty step function.
pub fn baseline_cumhaz(fit: &CoxFit, ds: &CoxDataset, stratum: usize) -> BaselineHazard {
    let sets = build_risk_sets(ds, stratum);
    breslow(ds, &sets, &fit.beta, stratum)
}

/// Survival probability for one stratum along a covariate path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub stratum: usize,
    /// `(distance, survival)`, starting at `(0, 1)`.
    pub points: Vec<(f64, f64)>,
}

pub fn survival_curve(fit: &CoxFit, stratum: usize, path: &StepCovariates) -> SurvivalCurve {
    let mut points = vec![(0.0, 1.0)];
    let mut cum = 0.0;
    if let Some(base) = fit.baseline_for(stratum) {
        for p in &base.points {
            let Some(x) = path.at(p.distance) else { break };
            let eta: f64 = x.iter().zip(&fit.beta).map(|(a, b)| a * b).sum();
            cum += p.jump * eta.exp();
            points.push((p.distance, (-cum).exp()));
        }
    }
    SurvivalCurve { stratum, points }
}

/// Distances of the `k` largest single-step decreases of the curve,
/// ascending. Picks closer than `min_separation` to an already chosen drop
/// are skipped. A curve without any decrease yields no points.
pub fn detect_drop_points(curve: &SurvivalCurve, k: usize, min_separation: f64) -> Vec<f64> {
    let mut steps: Vec<(f64, f64)> = curve
        .points
        .windows(2)
        .map(|w| (w[1].0, w[0].1 - w[1].1))
        .filter(|&(_, drop)| drop > 0.0)
        .collect();
    steps.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    let mut chosen: Vec<f64> = Vec::with_capacity(k);
    for (d, _) in steps {
        if chosen.len() == k {
            break;
        }
        if chosen.iter().all(|c| (c - d).abs() >= min_separation) {
            chosen.push(d);
        }
    }
    chosen.sort_by(f64::total_cmp);
    chosen
}
