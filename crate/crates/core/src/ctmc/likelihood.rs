use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::ColumnScaling;
use crate::numerics::Objective;

use super::model::{CtmcParams, SegmentScheme};
use super::path::{pieces, ObservedPath};

/// `Exp(u·Q)` for `Q = [[−a, a], [b, −b]]` with its derivatives in `a` and
/// `b`, all in closed form.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel {
    pub p: [[f64; 2]; 2],
    pub da: [[f64; 2]; 2],
    pub db: [[f64; 2]; 2],
}

pub(crate) fn kernel(a: f64, b: f64, u: f64) -> Kernel {
    let lam = a + b;
    let x = lam * u;
    // f = (1 − e^{−λu})/λ and g = df/dλ
    let (f, g, p00, p11) = if x < 1e-4 {
        let f = u * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
        let g = u * u * (-0.5 + x / 3.0 - x * x / 8.0);
        (f, g, 1.0 - a * f, 1.0 - b * f)
    } else {
        let e = (-x).exp();
        let f = -(-x).exp_m1() / lam;
        let g = (u * e - f) / lam;
        (f, g, (b + a * e) / lam, (a + b * e) / lam)
    };
    let fa = f + a * g;
    let fb = f + b * g;
    Kernel {
        p: [[p00, a * f], [b * f, p11]],
        da: [[-fa, fa], [b * g, -b * g]],
        db: [[-a * g, a * g], [fb, -fb]],
    }
}

#[derive(Debug, Clone)]
struct Interval {
    from: usize,
    to: usize,
    pieces: Range<usize>,
}

/// The chain log-likelihood flattened for repeated evaluation: every
/// consecutive pair of observations becomes an interval of constant-rate
/// pieces with the covariate row in force.
#[derive(Debug, Clone)]
pub(crate) struct CtmcProblem {
    p: usize,
    m: usize,
    x: Vec<f64>,
    lengths: Vec<f64>,
    segments: Vec<usize>,
    intervals: Vec<Interval>,
    paths: Vec<Range<usize>>,
}

impl CtmcProblem {
    pub fn new(paths: &[ObservedPath], covariates: usize, scheme: &SegmentScheme) -> Result<Self> {
        let mut out = Self {
            p: covariates,
            m: scheme.boundaries().len(),
            x: Vec::new(),
            lengths: Vec::new(),
            segments: Vec::new(),
            intervals: Vec::new(),
            paths: Vec::with_capacity(paths.len()),
        };
        for path in paths {
            if path.covariates.width() != covariates {
                return Err(Error::LengthMismatch {
                    expected: covariates,
                    found: path.covariates.width(),
                });
            }
            let first = out.intervals.len();
            for j in 1..path.distances.len() {
                let start = out.lengths.len();
                for piece in pieces(&path.covariates, path.distances[j - 1], path.distances[j], scheme)? {
                    out.x.extend(&path.covariates.values[piece.covariate_piece]);
                    out.lengths.push(piece.length);
                    out.segments.push(piece.segment);
                }
                out.intervals.push(Interval {
                    from: path.states[j - 1].index(),
                    to: path.states[j].index(),
                    pieces: start..out.lengths.len(),
                });
            }
            out.paths.push(first..out.intervals.len());
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        2 * (1 + self.p + self.m)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + Clone {
        self.x.chunks_exact(self.p.max(1))
    }

    pub fn rescaled(&self, scaling: &ColumnScaling) -> Self {
        let mut out = self.clone();
        if self.p > 0 {
            out.x = self.rows().flat_map(|r| scaling.apply(r)).collect();
        }
        out
    }

    /// Observed punctual→delayed and delayed→punctual changes between
    /// consecutive spots.
    pub fn transition_counts(&self) -> [usize; 2] {
        let mut n = [0, 0];
        for iv in &self.intervals {
            if iv.from != iv.to {
                n[iv.from] += 1;
            }
        }
        n
    }

    /// Total distance covered per segment.
    pub fn segment_exposure(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m + 1];
        for (len, &seg) in self.lengths.iter().zip(&self.segments) {
            out[seg] += len;
        }
        out
    }

    /// Crude intensities: observed changes per distance spent in the
    /// starting state. Used as starting values.
    pub fn crude_rates(&self) -> [f64; 2] {
        let mut exposure = [0.0; 2];
        for iv in &self.intervals {
            exposure[iv.from] += self.lengths[iv.pieces.clone()].iter().sum::<f64>();
        }
        let n = self.transition_counts();
        [0, 1].map(|r| (n[r] as f64).max(0.5) / exposure[r].max(1e-9))
    }

    fn x_row(&self, piece: usize) -> &[f64] {
        &self.x[piece * self.p..(piece + 1) * self.p]
    }

    fn rates(&self, theta: &[f64], piece: usize) -> (f64, f64) {
        let d = 1 + self.p + self.m;
        let x = self.x_row(piece);
        let seg = self.segments[piece];
        let eta = |block: &[f64]| {
            let mut e = block[0];
            for (b, v) in block[1..=self.p].iter().zip(x) {
                e += b * v;
            }
            if seg > 0 {
                e += block[self.p + seg];
            }
            e.exp()
        };
        (eta(&theta[..d]), eta(&theta[d..]))
    }

    fn path_term(&self, theta: &[f64], range: Range<usize>) -> (f64, Vec<f64>) {
        let d = 1 + self.p + self.m;
        let mut grad = vec![0.0; 2 * d];
        let mut ll = 0.0;
        let mut ks: Vec<(f64, f64, Kernel)> = Vec::new();
        let mut left: Vec<[f64; 2]> = Vec::new();
        let mut right: Vec<[f64; 2]> = Vec::new();
        let mut weights: Vec<(f64, f64)> = Vec::new();
        for iv in &self.intervals[range] {
            ks.clear();
            for k in iv.pieces.clone() {
                let (a, b) = self.rates(theta, k);
                ks.push((a, b, kernel(a, b, self.lengths[k])));
            }
            let n = ks.len();
            weights.clear();
            let prob;
            if n == 1 {
                let k = &ks[0].2;
                prob = k.p[iv.from][iv.to];
                weights.push((k.da[iv.from][iv.to], k.db[iv.from][iv.to]));
            } else {
                // row vectors e_rᵀ·P₁⋯P_{i−1} and column vectors P_{i+1}⋯P_n·e_s
                left.clear();
                right.clear();
                let mut v = [0.0; 2];
                v[iv.from] = 1.0;
                for (_, _, k) in &ks {
                    left.push(v);
                    v = [v[0] * k.p[0][0] + v[1] * k.p[1][0], v[0] * k.p[0][1] + v[1] * k.p[1][1]];
                }
                prob = v[iv.to];
                let mut w = [0.0; 2];
                w[iv.to] = 1.0;
                right.resize(n, [0.0; 2]);
                for i in (0..n).rev() {
                    right[i] = w;
                    let k = &ks[i].2;
                    w = [k.p[0][0] * w[0] + k.p[0][1] * w[1], k.p[1][0] * w[0] + k.p[1][1] * w[1]];
                }
                for i in 0..n {
                    let k = &ks[i].2;
                    let quad = |m: &[[f64; 2]; 2]| {
                        let (l, r) = (left[i], right[i]);
                        l[0] * (m[0][0] * r[0] + m[0][1] * r[1]) + l[1] * (m[1][0] * r[0] + m[1][1] * r[1])
                    };
                    weights.push((quad(&k.da), quad(&k.db)));
                }
            }
            if !(prob > 0.0) {
                return (f64::NEG_INFINITY, grad);
            }
            ll += prob.ln();
            for (i, piece) in iv.pieces.clone().enumerate() {
                let (a, b, _) = ks[i];
                let (wa, wb) = weights[i];
                let x = self.x_row(piece);
                let seg = self.segments[piece];
                for (offset, w) in [(0, wa * a / prob), (d, wb * b / prob)] {
                    grad[offset] += w;
                    for (j, v) in x.iter().enumerate() {
                        grad[offset + 1 + j] += w * v;
                    }
                    if seg > 0 {
                        grad[offset + self.p + seg] += w;
                    }
                }
            }
        }
        (ll, grad)
    }

    /// Log-likelihood and gradient; paths are evaluated in parallel and
    /// summed in path order.
    pub fn evaluate(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let terms: Vec<(f64, Vec<f64>)> = self
            .paths
            .par_iter()
            .map(|r| self.path_term(theta, r.clone()))
            .collect();
        let mut value = 0.0;
        let mut grad = vec![0.0; self.dim()];
        for (v, g) in terms {
            value += v;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        (value, grad)
    }
}

impl Objective for CtmcProblem {
    fn dim(&self) -> usize {
        CtmcProblem::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.evaluate(x).0
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.evaluate(x)
    }
}

fn problem_for(params: &CtmcParams, paths: &[ObservedPath], scheme: &SegmentScheme) -> Result<CtmcProblem> {
    if scheme.boundaries().len() != params.boundary_count() {
        return Err(Error::LengthMismatch {
            expected: params.boundary_count(),
            found: scheme.boundaries().len(),
        });
    }
    CtmcProblem::new(paths, params.covariate_count(), scheme)
}

/// Sum over trains and consecutive spot pairs of the log transition
/// probability between the observed states. A zero probability gives
/// negative infinity and a warning.
pub fn log_likelihood(params: &CtmcParams, paths: &[ObservedPath], scheme: &SegmentScheme) -> Result<f64> {
    let value = problem_for(params, paths, scheme)?.evaluate(&params.to_vec()).0;
    if value == f64::NEG_INFINITY {
        log::warn!("an observed transition has zero probability under the given parameters");
    }
    Ok(value)
}

/// Gradient of [`log_likelihood`] in the flat layout of
/// [`CtmcParams::to_vec`].
pub fn log_likelihood_gradient(
    params: &CtmcParams,
    paths: &[ObservedPath],
    scheme: &SegmentScheme,
) -> Result<Vec<f64>> {
    Ok(problem_for(params, paths, scheme)?.evaluate(&params.to_vec()).1)
}
