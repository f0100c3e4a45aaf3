use serde::{Deserialize, Serialize};

use crate::covariates::CovariateSpec;
use crate::error::{Error, Result};
use crate::ingest::{contiguous_prefix, AnalysisDataset, SectionObservation};

/// Piecewise-constant covariate vector over distance. Piece `i` covers
/// `(ends[i-1], ends[i]]`, the first piece starting (closed) at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCovariates {
    pub start: f64,
    pub ends: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl StepCovariates {
    pub fn new(start: f64, ends: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if ends.len() != values.len() || ends.is_empty() {
            return Err(Error::InvalidInput(
                "covariate path needs one value vector per piece and at least one piece".into(),
            ));
        }
        let mut prev = start;
        for &e in &ends {
            if !(e > prev) {
                return Err(Error::InvalidInput("covariate path breakpoints must increase".into()));
            }
            prev = e;
        }
        let width = values[0].len();
        if values
            .iter()
            .any(|v| v.len() != width || v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidInput(
                "covariate values must be finite and equally sized".into(),
            ));
        }
        Ok(Self { start, ends, values })
    }

    /// The same covariate vector on `[0, end]`.
    pub fn constant(values: Vec<f64>, end: f64) -> Self {
        Self {
            start: 0.0,
            ends: vec![end],
            values: vec![values],
        }
    }

    pub fn end(&self) -> f64 {
        *self.ends.last().unwrap()
    }

    /// Index of the piece in force at `t`.
    pub fn piece_at(&self, t: f64) -> Option<usize> {
        if t < self.start || t > self.end() {
            return None;
        }
        Some(self.ends.partition_point(|&e| e < t))
    }

    pub fn at(&self, t: f64) -> Option<&[f64]> {
        self.piece_at(t).map(|i| self.values[i].as_slice())
    }

    pub fn width(&self) -> usize {
        self.values[0].len()
    }
}

/// One train's recurrent-event history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxSubject {
    pub id: String,
    /// Event distances, strictly increasing; rank is position + 1.
    pub events: Vec<f64>,
    /// End of observation.
    pub censor: f64,
    pub covariates: StepCovariates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxDataset {
    pub names: Vec<String>,
    pub subjects: Vec<CoxSubject>,
}

impl CoxDataset {
    pub fn new(names: Vec<String>, subjects: Vec<CoxSubject>) -> Result<Self> {
        for s in &subjects {
            if s.covariates.width() != names.len() {
                return Err(Error::InvalidInput(format!(
                    "subject {} has {} covariates, expected {}",
                    s.id,
                    s.covariates.width(),
                    names.len()
                )));
            }
            if s.events.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidInput(format!(
                    "subject {}: event distances must be strictly increasing",
                    s.id
                )));
            }
            if s.events.iter().any(|&e| !(e > s.covariates.start) || e > s.censor) {
                return Err(Error::InvalidInput(format!(
                    "subject {}: events must lie in (start, censor]",
                    s.id
                )));
            }
            if s.covariates.start > 0.0 || s.covariates.end() < s.censor {
                return Err(Error::InvalidInput(format!(
                    "subject {}: covariate path must cover [0, censor]",
                    s.id
                )));
            }
        }
        Ok(Self { names, subjects })
    }

    /// One subject per train from the section records. A train's history
    /// stops at its first excluded section; events sit at the far end of
    /// sections with a primary delay.
    pub fn from_sections(dataset: &AnalysisDataset, spec: &CovariateSpec) -> Result<Self> {
        let names = spec.iter().map(|c| c.key().to_string()).collect();
        let subjects = dataset
            .by_train()
            .into_iter()
            .filter_map(|(id, sections)| subject_from_sections(id, sections, spec))
            .collect();
        Self::new(names, subjects)
    }

    pub fn event_count(&self) -> usize {
        self.subjects.iter().map(|s| s.events.len()).sum()
    }
}

fn subject_from_sections(id: &str, sections: &[SectionObservation], spec: &CovariateSpec) -> Option<CoxSubject> {
    let sections = contiguous_prefix(sections);
    let first = sections.first()?;
    let start = first.from_km;
    let covariates = StepCovariates {
        start,
        ends: sections.iter().map(|s| s.to_km).collect(),
        values: sections.iter().map(|s| spec.values(s)).collect(),
    };
    Some(CoxSubject {
        id: id.to_string(),
        events: sections
            .iter()
            .filter(|s| s.primary_delay == 1)
            .map(|s| s.to_km)
            .collect(),
        censor: covariates.end(),
        covariates,
    })
}
