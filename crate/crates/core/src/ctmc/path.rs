use serde::{Deserialize, Serialize};

use crate::covariates::CovariateSpec;
use crate::cox::StepCovariates;
use crate::error::{Error, Result};
use crate::ingest::{contiguous_prefix, AnalysisDataset};
use crate::numerics::{matrix_exponential, SquareMatrix};

use super::model::{CtmcParams, SegmentScheme, State};

/// Which observation starts a path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginConvention {
    /// The train is punctual at its initial station (it cannot be late on
    /// arrival where its run begins).
    #[default]
    Punctual,
    /// Start from the first observed arrival state instead.
    FirstSpot,
}

/// States of one train at its measuring spots and the section covariates
/// between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedPath {
    pub train_id: String,
    pub distances: Vec<f64>,
    pub states: Vec<State>,
    /// Section covariates from the initial station onwards.
    pub covariates: StepCovariates,
}

impl ObservedPath {
    pub fn new(train_id: String, distances: Vec<f64>, states: Vec<State>, covariates: StepCovariates) -> Result<Self> {
        if distances.len() != states.len() {
            return Err(Error::LengthMismatch {
                expected: distances.len(),
                found: states.len(),
            });
        }
        if distances.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "path {train_id} needs at least two observations"
            )));
        }
        if distances.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!(
                "path {train_id}: distances must be strictly increasing"
            )));
        }
        if distances[0] < covariates.start || *distances.last().unwrap() > covariates.end() {
            return Err(Error::InvalidInput(format!(
                "path {train_id}: covariates do not cover the observations"
            )));
        }
        Ok(Self {
            train_id,
            distances,
            states,
            covariates,
        })
    }

    pub fn end(&self) -> f64 {
        *self.distances.last().unwrap()
    }

    /// Observed state at the last spot at or before `t`, if the path
    /// reaches `t`.
    pub fn state_at(&self, t: f64) -> Option<State> {
        if t < self.distances[0] || t > self.end() {
            return None;
        }
        let n = self.distances.partition_point(|&d| d <= t);
        Some(self.states[n - 1])
    }
}

/// Observed paths with the covariate names shared by all of them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CtmcDataset {
    pub names: Vec<String>,
    pub paths: Vec<ObservedPath>,
}

impl CtmcDataset {
    pub fn new(names: Vec<String>, paths: Vec<ObservedPath>) -> Result<Self> {
        for p in &paths {
            if p.covariates.width() != names.len() {
                return Err(Error::InvalidInput(format!(
                    "path {} has {} covariates, expected {}",
                    p.train_id,
                    p.covariates.width(),
                    names.len()
                )));
            }
        }
        Ok(Self { names, paths })
    }

    /// One path per train, truncated at the first missing section. Trains
    /// left with fewer than two observations are skipped.
    pub fn from_sections(dataset: &AnalysisDataset, spec: &CovariateSpec, origin: OriginConvention) -> Result<Self> {
        let names = spec.iter().map(|c| c.key().to_string()).collect();
        let mut paths = Vec::new();
        for (id, sections) in dataset.by_train() {
            let sections = contiguous_prefix(sections);
            let Some(first) = sections.first() else { continue };
            let covariates = StepCovariates {
                start: first.from_km,
                ends: sections.iter().map(|s| s.to_km).collect(),
                values: sections.iter().map(|s| spec.values(s)).collect(),
            };
            let mut distances = Vec::with_capacity(sections.len() + 1);
            let mut states = Vec::with_capacity(sections.len() + 1);
            if origin == OriginConvention::Punctual {
                distances.push(first.from_km);
                states.push(State::Punctual);
            }
            for s in sections {
                distances.push(s.to_km);
                states.push(State::from_indicator(s.arrival_delay));
            }
            if distances.len() < 2 {
                continue;
            }
            paths.push(ObservedPath::new(id.to_string(), distances, states, covariates)?);
        }
        Self::new(names, paths)
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// A stretch of constant intensity: `[lo, hi)` with the covariate piece and
/// segment in force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Piece {
    pub length: f64,
    pub covariate_piece: usize,
    pub segment: usize,
}

/// Splits `[t_a, t_b)` at every covariate change and segment boundary.
pub(crate) fn pieces(covariates: &StepCovariates, t_a: f64, t_b: f64, scheme: &SegmentScheme) -> Result<Vec<Piece>> {
    if !(t_a >= covariates.start && t_b <= covariates.end() && t_a <= t_b) {
        return Err(Error::InvalidInput(format!(
            "interval [{t_a}, {t_b}) is outside the covariate path [{}, {}]",
            covariates.start,
            covariates.end()
        )));
    }
    let mut cuts: Vec<f64> = covariates
        .ends
        .iter()
        .chain(scheme.boundaries())
        .copied()
        .filter(|&c| c > t_a && c < t_b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut lo = t_a;
    for hi in cuts.into_iter().chain(std::iter::once(t_b)) {
        if hi > lo {
            let mid = 0.5 * (lo + hi);
            out.push(Piece {
                length: hi - lo,
                covariate_piece: covariates.piece_at(mid).expect("midpoint inside path"),
                segment: scheme.segment_of(lo),
            });
        }
        lo = hi;
    }
    Ok(out)
}

/// `P(t_a, t_b)` along one train's covariate path: the ordered product of
/// the exponentials of the constant pieces.
pub fn path_transition_probability(
    params: &CtmcParams,
    covariates: &StepCovariates,
    t_a: f64,
    t_b: f64,
    scheme: &SegmentScheme,
) -> Result<SquareMatrix> {
    if scheme.boundaries().len() != params.boundary_count() {
        return Err(Error::LengthMismatch {
            expected: params.boundary_count(),
            found: scheme.boundaries().len(),
        });
    }
    let mut p = SquareMatrix::identity(2);
    for piece in pieces(covariates, t_a, t_b, scheme)? {
        let (a, b) = params.rates(&covariates.values[piece.covariate_piece], piece.segment);
        let q = SquareMatrix::from_rows(&[vec![-a, a], vec![b, -b]])?;
        p = p.mul(&matrix_exponential(&q, piece.length)?);
    }
    Ok(p)
}
