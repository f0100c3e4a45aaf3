use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::inference::ColumnScaling;
use crate::numerics::Objective;

use super::CoxDataset;

/// Trains at risk for the `stratum`-th event at distance `time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSet {
    /// Event rank, starting at 1.
    pub stratum: usize,
    pub time: f64,
    /// Subject indices at risk, ascending.
    pub members: Vec<usize>,
    /// Subjects whose `stratum`-th event happens at `time`.
    pub events: Vec<usize>,
}

/// Risk sets for every distinct event time of strata `1..=max_rank`,
/// ordered by stratum then time.
pub fn build_risk_sets(ds: &CoxDataset, max_rank: usize) -> Vec<RiskSet> {
    let mut out = Vec::new();
    for stratum in 1..=max_rank {
        // (start, stop] at-risk windows of eligible subjects
        let windows: Vec<(usize, f64, f64)> = ds
            .subjects
            .iter()
            .enumerate()
            .filter(|(_, s)| s.events.len() + 1 >= stratum)
            .map(|(i, s)| {
                let start = if stratum == 1 { 0.0 } else { s.events[stratum - 2] };
                let stop = s.events.get(stratum - 1).copied().unwrap_or(s.censor);
                (i, start, stop)
            })
            .collect();

        let mut times: Vec<f64> = ds
            .subjects
            .iter()
            .filter_map(|s| s.events.get(stratum - 1).copied())
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();

        for time in times {
            let members = windows
                .iter()
                .filter(|&&(_, start, stop)| start < time && time <= stop)
                .map(|&(i, _, _)| i)
                .collect();
            let events = ds
                .subjects
                .iter()
                .enumerate()
                .filter(|(_, s)| s.events.get(stratum - 1) == Some(&time))
                .map(|(i, _)| i)
                .collect();
            out.push(RiskSet {
                stratum,
                time,
                members,
                events,
            });
        }
    }
    out
}

/// Log partial likelihood and its gradient at `beta`.
pub fn partial_log_likelihood(beta: &[f64], ds: &CoxDataset, max_rank: usize) -> (f64, Vec<f64>) {
    CoxProblem::new(ds, max_rank).evaluate(beta)
}

#[derive(Debug, Clone)]
struct Group {
    members: Vec<u32>,
    events: Vec<u32>,
}

/// Risk sets resolved to covariate rows, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub(crate) struct CoxProblem {
    p: usize,
    rows: Vec<f64>,
    groups: Vec<Group>,
    pub(crate) risk_sets: Vec<RiskSet>,
}

impl CoxProblem {
    pub fn new(ds: &CoxDataset, max_rank: usize) -> Self {
        let p = ds.names.len();
        let mut offsets = Vec::with_capacity(ds.subjects.len());
        let mut rows = Vec::new();
        for s in &ds.subjects {
            offsets.push(rows.len() / p.max(1));
            for v in &s.covariates.values {
                rows.extend_from_slice(v);
            }
        }
        let risk_sets = build_risk_sets(ds, max_rank);
        let row_of = |subject: usize, t: f64| -> u32 {
            let piece = ds.subjects[subject]
                .covariates
                .piece_at(t)
                .expect("risk-set time inside the covariate path");
            (offsets[subject] + piece) as u32
        };
        let groups = risk_sets
            .iter()
            .map(|rs| Group {
                members: rs.members.iter().map(|&l| row_of(l, rs.time)).collect(),
                events: rs.events.iter().map(|&l| row_of(l, rs.time)).collect(),
            })
            .collect();
        Self {
            p,
            rows,
            groups,
            risk_sets,
        }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn event_count(&self) -> usize {
        self.groups.iter().map(|g| g.events.len()).sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + Clone {
        self.rows.chunks_exact(self.p.max(1))
    }

    pub fn rescaled(&self, scaling: &ColumnScaling) -> Self {
        let mut out = self.clone();
        if self.p > 0 {
            out.rows = self.rows.chunks_exact(self.p).flat_map(|r| scaling.apply(r)).collect();
        }
        out
    }

    pub fn evaluate(&self, beta: &[f64]) -> (f64, Vec<f64>) {
        let p = self.p;
        let eta: Vec<f64> = if p == 0 {
            Vec::new()
        } else {
            self.rows
                .chunks_exact(p)
                .map(|r| r.iter().zip(beta).map(|(x, b)| x * b).sum())
                .collect()
        };
        let row = |i: u32| &self.rows[i as usize * p..(i as usize + 1) * p];
        let eta_of = |i: u32| if p == 0 { 0.0 } else { eta[i as usize] };

        let terms: Vec<(f64, Vec<f64>)> = self
            .groups
            .par_iter()
            .map(|g| {
                let d = g.events.len() as f64;
                let shift = g.members.iter().map(|&m| eta_of(m)).fold(f64::NEG_INFINITY, f64::max);
                let mut wsum = 0.0;
                let mut wx = vec![0.0; p];
                for &m in &g.members {
                    let w = (eta_of(m) - shift).exp();
                    wsum += w;
                    for (acc, x) in wx.iter_mut().zip(row(m)) {
                        *acc += w * x;
                    }
                }
                let mut ll = -d * (shift + wsum.ln());
                let mut grad: Vec<f64> = wx.iter().map(|v| -d * v / wsum).collect();
                for &e in &g.events {
                    ll += eta_of(e);
                    for (acc, x) in grad.iter_mut().zip(row(e)) {
                        *acc += x;
                    }
                }
                (ll, grad)
            })
            .collect();

        let mut ll = 0.0;
        let mut grad = vec![0.0; p];
        for (v, g) in terms {
            ll += v;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        (ll, grad)
    }
}

impl Objective for CoxProblem {
    fn dim(&self) -> usize {
        self.p
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.evaluate(x).0
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.evaluate(x)
    }
}
