use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SquareMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    Punctual,
    Delayed,
}

impl State {
    pub fn index(self) -> usize {
        match self {
            State::Punctual => 0,
            State::Delayed => 1,
        }
    }

    pub fn from_indicator(arrival_delay: u8) -> Self {
        if arrival_delay == 0 {
            State::Punctual
        } else {
            State::Delayed
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    PunctualToDelayed,
    DelayedToPunctual,
}

impl Transition {
    pub const ALL: [Transition; 2] = [Transition::PunctualToDelayed, Transition::DelayedToPunctual];

    pub fn key(self) -> &'static str {
        match self {
            Transition::PunctualToDelayed => "punctual_to_delayed",
            Transition::DelayedToPunctual => "delayed_to_punctual",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Transition::PunctualToDelayed => "Punctuality - delay",
            Transition::DelayedToPunctual => "Delay - punctuality",
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Distances where the intensities may jump. Segment 0 is `[0, b₁)`,
/// segment `k` is `[b_k, b_{k+1})` and the last runs to the end of the line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentScheme {
    boundaries: Vec<f64>,
}

impl SegmentScheme {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidInput(
                "segment boundaries must be positive and finite".into(),
            ));
        }
        if boundaries.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "segment boundaries must be strictly ascending".into(),
            ));
        }
        Ok(Self { boundaries })
    }

    /// No boundaries: one segment, a homogeneous chain for fixed covariates.
    pub fn homogeneous() -> Self {
        Self::default()
    }

    pub fn check_within(&self, line_end: f64) -> Result<()> {
        match self.boundaries.last() {
            Some(&b) if b >= line_end => Err(Error::InvalidInput(format!(
                "segment boundary {b} is not inside the line (end {line_end})"
            ))),
            _ => Ok(()),
        }
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn segment_count(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn segment_of(&self, t: f64) -> usize {
        self.boundaries.partition_point(|&b| b <= t)
    }

    pub fn label(&self, segment: usize) -> String {
        let lo = if segment == 0 {
            0.0
        } else {
            self.boundaries[segment - 1]
        };
        match self.boundaries.get(segment) {
            Some(hi) => format!("[{lo}, {hi})"),
            None => format!("[{lo}, end)"),
        }
    }
}

impl FromStr for SegmentScheme {
    type Err = Error;

    /// Comma separated distances; an empty string is the homogeneous scheme.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("none") {
            return Ok(Self::homogeneous());
        }
        let boundaries = s
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad segment boundary {part:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(boundaries)
    }
}

/// Parameters of one directed transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionParams {
    pub log_baseline: f64,
    pub beta: Vec<f64>,
    /// Offsets of segments 1.. relative to segment 0.
    pub z: Vec<f64>,
}

impl TransitionParams {
    pub fn rate(&self, x: &[f64], segment: usize) -> f64 {
        let mut eta = self.log_baseline;
        for (b, v) in self.beta.iter().zip(x) {
            eta += b * v;
        }
        if segment > 0 {
            eta += self.z[segment - 1];
        }
        eta.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtmcParams {
    pub names: Vec<String>,
    pub punctual_to_delayed: TransitionParams,
    pub delayed_to_punctual: TransitionParams,
}

impl CtmcParams {
    pub fn new(names: Vec<String>, pd: TransitionParams, dp: TransitionParams) -> Result<Self> {
        let p = names.len();
        for t in [&pd, &dp] {
            if t.beta.len() != p {
                return Err(Error::LengthMismatch {
                    expected: p,
                    found: t.beta.len(),
                });
            }
            if !t.log_baseline.is_finite() || t.beta.iter().chain(&t.z).any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("chain parameters must be finite".into()));
            }
        }
        if pd.z.len() != dp.z.len() {
            return Err(Error::LengthMismatch {
                expected: pd.z.len(),
                found: dp.z.len(),
            });
        }
        Ok(Self {
            names,
            punctual_to_delayed: pd,
            delayed_to_punctual: dp,
        })
    }

    /// Constant intensities `q_pd` and `q_dp` without covariates or segments.
    pub fn homogeneous(q_pd: f64, q_dp: f64) -> Self {
        let t = |q: f64| TransitionParams {
            log_baseline: q.ln(),
            beta: vec![],
            z: vec![],
        };
        Self {
            names: vec![],
            punctual_to_delayed: t(q_pd),
            delayed_to_punctual: t(q_dp),
        }
    }

    pub fn covariate_count(&self) -> usize {
        self.names.len()
    }

    pub fn boundary_count(&self) -> usize {
        self.punctual_to_delayed.z.len()
    }

    pub fn transition(&self, t: Transition) -> &TransitionParams {
        match t {
            Transition::PunctualToDelayed => &self.punctual_to_delayed,
            Transition::DelayedToPunctual => &self.delayed_to_punctual,
        }
    }

    /// Length of the flat parameter vector.
    pub fn dim(&self) -> usize {
        2 * (1 + self.covariate_count() + self.boundary_count())
    }

    /// Flat layout: per transition (punctual→delayed first)
    /// `[log baseline, β…, z…]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        for t in [&self.punctual_to_delayed, &self.delayed_to_punctual] {
            v.push(t.log_baseline);
            v.extend(&t.beta);
            v.extend(&t.z);
        }
        v
    }

    pub fn from_vec(names: Vec<String>, boundaries: usize, theta: &[f64]) -> Result<Self> {
        let block = 1 + names.len() + boundaries;
        if theta.len() != 2 * block {
            return Err(Error::LengthMismatch {
                expected: 2 * block,
                found: theta.len(),
            });
        }
        let p = names.len();
        let t = |b: &[f64]| TransitionParams {
            log_baseline: b[0],
            beta: b[1..1 + p].to_vec(),
            z: b[1 + p..].to_vec(),
        };
        let (pd, dp) = theta.split_at(block);
        Self::new(names, t(pd), t(dp))
    }

    /// `(q_pd, q_dp)` for covariates `x` in segment `segment`.
    pub fn rates(&self, x: &[f64], segment: usize) -> (f64, f64) {
        (
            self.punctual_to_delayed.rate(x, segment),
            self.delayed_to_punctual.rate(x, segment),
        )
    }

    /// Flat parameter names, matching `to_vec`.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dim());
        for t in Transition::ALL {
            out.push(format!("{}:log_baseline", t.key()));
            out.extend(self.names.iter().map(|n| format!("{}:{n}", t.key())));
            out.extend((1..=self.boundary_count()).map(|k| format!("{}:z{k}", t.key())));
        }
        out
    }
}

/// Intensity matrix at distance `t` for covariates `x`; states are ordered
/// punctual, delayed.
///
/// # Panics
/// If `x` or the scheme does not match the parameter dimensions.
pub fn intensity_matrix(params: &CtmcParams, x: &[f64], t: f64, scheme: &SegmentScheme) -> SquareMatrix {
    assert_eq!(x.len(), params.covariate_count(), "covariate vector length");
    assert_eq!(scheme.boundaries().len(), params.boundary_count(), "segment count");
    let (a, b) = params.rates(x, scheme.segment_of(t));
    SquareMatrix::from_rows(&[vec![-a, a], vec![b, -b]]).expect("finite intensities")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted() -> CtmcParams {
        CtmcParams::new(
            vec!["snow_depth".into()],
            TransitionParams {
                log_baseline: -5.0,
                beta: vec![1.026f64.ln()],
                z: vec![1.947f64.ln(), 1.658f64.ln()],
            },
            TransitionParams {
                log_baseline: -4.0,
                beta: vec![0.984f64.ln()],
                z: vec![1.038f64.ln(), 0.718f64.ln()],
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_parameters_give_unit_rates() {
        let p = CtmcParams::homogeneous(1.0, 1.0);
        let q = intensity_matrix(&p, &[], 10.0, &SegmentScheme::homogeneous());
        assert_eq!(q.to_rows(), vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
    }

    #[test]
    fn segment_offset_multiplies_intensity() {
        let p = planted();
        let scheme = SegmentScheme::new(vec![200.0, 500.0]).unwrap();
        let q100 = intensity_matrix(&p, &[2.0], 100.0, &scheme);
        let q300 = intensity_matrix(&p, &[2.0], 300.0, &scheme);
        let q600 = intensity_matrix(&p, &[2.0], 600.0, &scheme);
        assert!((q300[(0, 1)] / q100[(0, 1)] - 1.947).abs() < 1e-12);
        // offsets are relative to the first segment, not cumulative
        assert!((q600[(0, 1)] / q100[(0, 1)] - 1.658).abs() < 1e-12);
        // the boundary itself belongs to the later segment
        let q200 = intensity_matrix(&p, &[2.0], 200.0, &scheme);
        assert_eq!(q200[(0, 1)], q300[(0, 1)]);
    }

    #[test]
    fn snow_coefficient_scales_by_hazard_ratio() {
        let p = planted();
        let scheme = SegmentScheme::new(vec![200.0, 500.0]).unwrap();
        let q0 = intensity_matrix(&p, &[3.0], 50.0, &scheme);
        let q1 = intensity_matrix(&p, &[4.0], 50.0, &scheme);
        assert!((q1[(0, 1)] / q0[(0, 1)] - 1.026).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_zero_exactly() {
        let p = planted();
        let scheme = SegmentScheme::new(vec![200.0, 500.0]).unwrap();
        for t in [0.0, 250.0, 700.0] {
            let q = intensity_matrix(&p, &[1.7], t, &scheme);
            assert!(q.row_sums().iter().all(|&s| s == 0.0));
            assert!(q[(0, 1)] > 0.0 && q[(1, 0)] > 0.0);
        }
    }

    #[test]
    fn flat_layout_round_trips() {
        let p = planted();
        let back = CtmcParams::from_vec(p.names.clone(), 2, &p.to_vec()).unwrap();
        assert_eq!(back, p);
        assert_eq!(p.parameter_names().len(), p.dim());
    }

    #[test]
    fn scheme_parsing_and_labels() {
        let s: SegmentScheme = "200, 500".parse().unwrap();
        assert_eq!(s.boundaries(), &[200.0, 500.0]);
        assert_eq!(s.segment_of(199.9), 0);
        assert_eq!(s.segment_of(500.0), 2);
        assert_eq!(s.label(0), "[0, 200)");
        assert_eq!(s.label(2), "[500, end)");
        assert_eq!("".parse::<SegmentScheme>().unwrap().segment_count(), 1);
        assert!("500,200".parse::<SegmentScheme>().is_err());
        assert!("0".parse::<SegmentScheme>().is_err());
        assert!(s.check_within(711.0).is_ok());
        assert!(s.check_within(400.0).is_err());
    }
}
