//! Wald inference and column conditioning shared by the two estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SquareMatrix;

const Z_975: f64 = 1.959963984540054;

/// One row of a hazard-ratio table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardRatioRow {
    pub term: String,
    pub coef: f64,
    pub se: f64,
    pub hazard_ratio: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub p_value: f64,
}

impl HazardRatioRow {
    pub fn from_estimate(term: impl Into<String>, coef: f64, se: f64) -> Self {
        Self {
            term: term.into(),
            coef,
            se,
            hazard_ratio: coef.exp(),
            ci_lower: (coef - Z_975 * se).exp(),
            ci_upper: (coef + Z_975 * se).exp(),
            p_value: wald_p_value(coef, se),
        }
    }
}

/// Two-sided p-value of `coef / se` against the standard normal.
pub fn wald_p_value(coef: f64, se: f64) -> f64 {
    if se == 0.0 {
        return if coef == 0.0 { 1.0 } else { 0.0 };
    }
    let z = (coef / se).abs();
    libm::erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Column centering and scaling, applied internally so the optimizer sees
/// a well-conditioned problem. Estimates are mapped back afterwards.
#[derive(Debug, Clone)]
pub(crate) struct ColumnScaling {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ColumnScaling {
    /// Fits the scaling and rejects constant or linearly dependent columns.
    pub fn fit<'a, I>(rows: I, names: &[String]) -> Result<Self>
    where
        I: Iterator<Item = &'a [f64]> + Clone,
    {
        let p = names.len();
        let mut n = 0usize;
        let mut mean = vec![0.0; p];
        for row in rows.clone() {
            n += 1;
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        if n == 0 || p == 0 {
            return Ok(Self {
                mean,
                scale: vec![1.0; p],
            });
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        // Gram matrix of centered columns.
        let mut gram = SquareMatrix::zeros(p);
        for row in rows {
            for i in 0..p {
                let a = row[i] - mean[i];
                for j in 0..=i {
                    gram[(i, j)] += a * (row[j] - mean[j]);
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                gram[(j, i)] = gram[(i, j)];
            }
        }

        let scale: Vec<f64> = (0..p).map(|i| (gram[(i, i)] / n as f64).sqrt()).collect();
        let constant: Vec<String> = (0..p)
            .filter(|&i| !(scale[i] > 1e-12 * (1.0 + mean[i].abs())))
            .map(|i| names[i].clone())
            .collect();
        if !constant.is_empty() {
            return Err(Error::SingularInformation { columns: constant });
        }

        // correlation matrix; a tiny Cholesky pivot exposes the dependent column
        let corr = SquareMatrix::from_fn(p, |i, j| gram[(i, j)] / (n as f64 * scale[i] * scale[j]));
        check_dependence(&corr, names)?;
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

fn check_dependence(corr: &SquareMatrix, names: &[String]) -> Result<()> {
    let p = corr.order();
    for k in 1..=p {
        let sub = SquareMatrix::from_fn(k, |i, j| corr[(i, j)]);
        let l = match sub.cholesky() {
            Ok(l) => l,
            Err(_) => {
                return Err(Error::SingularInformation {
                    columns: dependent_group(corr, k - 1, names),
                })
            }
        };
        if l[(k - 1, k - 1)] < 1e-7 {
            return Err(Error::SingularInformation {
                columns: dependent_group(corr, k - 1, names),
            });
        }
    }
    Ok(())
}

fn dependent_group(corr: &SquareMatrix, k: usize, names: &[String]) -> Vec<String> {
    // columns before k that correlate with column k, plus k itself
    let mut cols: Vec<String> = (0..k)
        .filter(|&i| corr[(i, k)].abs() > 1e-6)
        .map(|i| names[i].clone())
        .collect();
    cols.push(names[k].clone());
    cols
}
