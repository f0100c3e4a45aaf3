//! Stratified Cox model for recurrent primary delays.
//!
//! Time is running distance from the initial station. Stratum `j` holds the
//! `j`-th primary delay of each train; a train is at risk for its `j`-th
//! delay between its `(j−1)`-th delay (or the origin) and its `j`-th delay
//! (or its censoring distance). Ties share one risk set (Breslow).

mod data;
mod fit;
mod likelihood;
mod survival;

pub use data::{CoxDataset, CoxSubject, StepCovariates};
pub use fit::{fit_stratified_cox, CoxFit, CoxOptions};
pub use likelihood::{build_risk_sets, partial_log_likelihood, RiskSet};
pub use survival::{baseline_cumhaz, detect_drop_points, survival_curve, BaselineHazard, BaselinePoint, SurvivalCurve};

pub(crate) use likelihood::CoxProblem;
