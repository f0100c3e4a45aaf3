use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::SquareMatrix;

/// A smooth objective to be maximized.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Value and gradient together; the default uses central differences.
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let grad = finite_diff_gradient(|p| self.value(p), x, 1e-6);
        (self.value(x), grad)
    }
}

/// Adapts a plain closure; gradients by central differences.
pub struct FnObjective<F> {
    f: F,
    dim: usize,
}

impl<F: Fn(&[f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { f, dim }
    }
}

impl<F: Fn(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimResult {
    pub argmax: Vec<f64>,
    pub value: f64,
    /// Hessian of the negated objective at `argmax`.
    pub hessian: SquareMatrix,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct MaximizeOptions {
    /// Target infinity norm of the gradient.
    pub tol: f64,
    pub max_iter: usize,
    /// Newton refinement steps (finite-difference Hessian) after the
    /// quasi-Newton phase stalls.
    pub newton_steps: usize,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 1000,
            newton_steps: 20,
        }
    }
}

/// Central-difference gradient with a fixed absolute step.
pub fn finite_diff_gradient<F>(f: F, point: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(step > 0.0, "finite difference step must be positive");
    let mut x = point.to_vec();
    (0..point.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + step;
            let up = f(&x);
            x[i] = orig - step;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Hessian of `−objective` by central differences of its gradient, with
/// per-coordinate step `1e-5·(1+|x_i|)`, symmetrized.
pub fn hessian_from_gradient<O: Objective + ?Sized>(obj: &O, x: &[f64]) -> SquareMatrix {
    let n = x.len();
    let mut h = SquareMatrix::zeros(n);
    let mut p = x.to_vec();
    for i in 0..n {
        let step = 1e-5 * (1.0 + x[i].abs());
        p[i] = x[i] + step;
        let (_, up) = obj.value_and_gradient(&p);
        p[i] = x[i] - step;
        let (_, down) = obj.value_and_gradient(&p);
        p[i] = x[i];
        for j in 0..n {
            h[(i, j)] = -(up[j] - down[j]) / (2.0 * step);
        }
    }
    h.symmetrized()
}

pub fn maximize<O: Objective + ?Sized>(obj: &O, init: &[f64], tol: f64) -> Result<OptimResult> {
    maximize_with(
        obj,
        init,
        &MaximizeOptions {
            tol,
            ..Default::default()
        },
    )
}

/// BFGS on the negated objective with a strong-Wolfe line search, followed
/// by damped Newton refinement when the line search can make no further
/// progress. Non-convergence is reported through `converged`, not an error.
pub fn maximize_with<O: Objective + ?Sized>(obj: &O, init: &[f64], opts: &MaximizeOptions) -> Result<OptimResult> {
    let n = init.len();
    if n != obj.dim() {
        return Err(Error::LengthMismatch {
            expected: obj.dim(),
            found: n,
        });
    }
    let neg = |x: &[f64]| {
        let (v, g) = obj.value_and_gradient(x);
        (-v, g.into_iter().map(|gi| -gi).collect::<Vec<_>>())
    };

    let mut x = init.to_vec();
    let (mut f, mut g) = neg(&x);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "objective or gradient is not finite at the starting point".into(),
        ));
    }

    let mut inv_h = SquareMatrix::identity(n);
    let mut fresh = true;
    let mut iterations = 0;

    while iterations < opts.max_iter && inf_norm(&g) >= opts.tol {
        iterations += 1;
        let mut dir: Vec<f64> = inv_h.mul_vec(&g).into_iter().map(|v| -v).collect();
        if dot(&dir, &g) >= 0.0 {
            inv_h = SquareMatrix::identity(n);
            fresh = true;
            dir = g.iter().map(|v| -v).collect();
        }
        let alpha0 = if fresh { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let Some(step) = wolfe_search(&neg, &x, f, &g, &dir, alpha0) else {
            if fresh {
                break;
            }
            inv_h = SquareMatrix::identity(n);
            fresh = true;
            continue;
        };
        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) {
            if fresh {
                inv_h = SquareMatrix::identity(n).scaled(sy / dot(&y, &y));
                fresh = false;
            }
            bfgs_update(&mut inv_h, &s, &y, sy);
        }
        x = step.x;
        f = step.f;
        g = step.g;
    }

    let mut newton = 0;
    while inf_norm(&g) >= opts.tol && newton < opts.newton_steps {
        newton += 1;
        iterations += 1;
        let hess = hessian_from_gradient(obj, &x);
        let Some(dir) = damped_newton_direction(&hess, &g) else {
            break;
        };
        let Some(step) = backtrack(&neg, &x, f, &g, &dir) else {
            break;
        };
        x = step.x;
        f = step.f;
        g = step.g;
    }

    let gradient_norm = inf_norm(&g);
    let hessian = hessian_from_gradient(obj, &x);
    Ok(OptimResult {
        converged: gradient_norm < opts.tol && f.is_finite(),
        argmax: x,
        value: -f,
        hessian,
        iterations,
        gradient_norm,
    })
}

struct Step {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

fn bfgs_update(inv_h: &mut SquareMatrix, s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let hy = inv_h.mul_vec(y);
    let yhy = dot(y, &hy);
    let rho = 1.0 / sy;
    let coef = (1.0 + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            inv_h[(i, j)] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

fn wolfe_search<F>(f: &F, x: &[f64], f0: f64, g0: &[f64], dir: &[f64], alpha0: f64) -> Option<Step>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let d0 = dot(g0, dir);
    if d0 >= 0.0 {
        return None;
    }
    let eval = |alpha: f64| {
        let xn = axpy(x, alpha, dir);
        let (fv, gv) = f(&xn);
        let fv = if fv.is_finite() && gv.iter().all(|v| v.is_finite()) {
            fv
        } else {
            f64::INFINITY
        };
        let dv = dot(&gv, dir);
        (Step { x: xn, f: fv, g: gv }, dv)
    };

    let mut lo = (0.0, f0, d0);
    let mut alpha = alpha0;
    let mut best: Option<Step> = None;
    for i in 0..40 {
        let (step, d) = eval(alpha);
        if step.f > f0 + C1 * alpha * d0 || (i > 0 && step.f >= lo.1) {
            return zoom(&eval, lo, (alpha, step.f, d), f0, d0).or(best);
        }
        if d.abs() <= -C2 * d0 {
            return Some(step);
        }
        if d >= 0.0 {
            return zoom(&eval, (alpha, step.f, d), lo, f0, d0).or(Some(step));
        }
        lo = (alpha, step.f, d);
        best = Some(step);
        alpha *= 2.0;
    }
    best
}

fn zoom<E>(eval: &E, mut lo: (f64, f64, f64), mut hi: (f64, f64, f64), f0: f64, d0: f64) -> Option<Step>
where
    E: Fn(f64) -> (Step, f64),
{
    let mut best: Option<Step> = None;
    for _ in 0..60 {
        let width = hi.0 - lo.0;
        // safeguarded quadratic interpolation from the low end
        let mut alpha = if hi.1.is_finite() {
            let denom = 2.0 * (hi.1 - lo.1 - lo.2 * width);
            if denom > 0.0 {
                lo.0 - lo.2 * width * width / denom
            } else {
                lo.0 + 0.5 * width
            }
        } else {
            lo.0 + 0.1 * width
        };
        let (a, b) = if lo.0 < hi.0 { (lo.0, hi.0) } else { (hi.0, lo.0) };
        let margin = 0.1 * (b - a);
        if !(alpha > a + margin && alpha < b - margin) {
            alpha = 0.5 * (a + b);
        }
        if (b - a).abs() < 1e-16 * (1.0 + b.abs()) {
            break;
        }
        let (step, d) = eval(alpha);
        if step.f > f0 + C1 * alpha * d0 || step.f >= lo.1 {
            hi = (alpha, step.f, d);
        } else {
            if d.abs() <= -C2 * d0 {
                return Some(step);
            }
            if d * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (alpha, step.f, d);
            best = Some(step);
        }
    }
    best.filter(|s| s.f < f0)
}

fn backtrack<F>(f: &F, x: &[f64], f0: f64, g0: &[f64], dir: &[f64]) -> Option<Step>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let d0 = dot(g0, dir);
    if d0 >= 0.0 {
        return None;
    }
    let mut alpha = 1.0;
    for _ in 0..50 {
        let xn = axpy(x, alpha, dir);
        let (fv, gv) = f(&xn);
        if fv.is_finite() && fv <= f0 + C1 * alpha * d0 {
            return Some(Step { x: xn, f: fv, g: gv });
        }
        // roundoff plateau: accept a step that leaves the value unchanged up
        // to summation error but shrinks the gradient
        if fv.is_finite() && fv <= f0 + 1e-12 * (1.0 + f0.abs()) && inf_norm(&gv) < inf_norm(g0) {
            return Some(Step { x: xn, f: fv, g: gv });
        }
        alpha *= 0.5;
    }
    None
}

fn damped_newton_direction(hess: &SquareMatrix, g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let scale = hess.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut damping = 0.0;
    for _ in 0..30 {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += damping;
        }
        if let Ok(inv) = h.inverse_spd() {
            return Some(inv.mul_vec(g).into_iter().map(|v| -v).collect());
        }
        damping = if damping == 0.0 { 1e-10 * scale } else { damping * 10.0 };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let obj = FnObjective::new(4, |x: &[f64]| -x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>());
        let res = maximize(&obj, &[0.0; 4], 1e-8).unwrap();
        assert!(res.converged);
        for v in &res.argmax {
            assert!((v - 1.0).abs() < 1e-6);
        }
        assert!(res.value.abs() < 1e-12);
        // −objective has Hessian 2·I
        assert!(res.hessian.max_abs_diff(&SquareMatrix::identity(4).scaled(2.0)) < 1e-5);
    }

    #[test]
    fn parabola_vertex() {
        let obj = FnObjective::new(1, |x: &[f64]| -x[0] * x[0] + 4.0 * x[0]);
        let res = maximize(&obj, &[0.0], 1e-8).unwrap();
        assert!(res.converged);
        assert!((res.argmax[0] - 2.0).abs() < 1e-6);
        assert!((res.value - 4.0).abs() < 1e-10);
    }

    #[test]
    fn rosenbrock_converges() {
        let obj = FnObjective::new(2, |x: &[f64]| {
            -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
        });
        let res = maximize(&obj, &[-1.2, 1.0], 1e-6).unwrap();
        assert!(res.converged, "{res:?}");
        assert!((res.argmax[0] - 1.0).abs() < 1e-4);
        assert!((res.argmax[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn restart_from_argmax_is_idempotent() {
        let obj = FnObjective::new(3, |x: &[f64]| {
            -(x[0] - 0.3).powi(2) - 2.0 * (x[1] + 1.0).powi(2) - (x[2] - x[0]).powi(2) * 0.5
        });
        let first = maximize(&obj, &[0.0; 3], 1e-8).unwrap();
        let second = maximize(&obj, &first.argmax, 1e-8).unwrap();
        for (a, b) in first.argmax.iter().zip(&second.argmax) {
            assert!((a - b).abs() < 1e-8);
        }
        assert_eq!(second.iterations, 0);
    }

    #[test]
    fn unbounded_objective_reports_non_convergence() {
        struct Ramp;
        impl Objective for Ramp {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64]) -> f64 {
                x[0]
            }
            fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
                (x[0], vec![1.0])
            }
        }
        let obj = Ramp;
        let res = maximize_with(
            &obj,
            &[0.0],
            &MaximizeOptions {
                tol: 1e-8,
                max_iter: 20,
                newton_steps: 0,
            },
        )
        .unwrap();
        assert!(!res.converged);
        assert!(res.value >= 0.0);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let obj = FnObjective::new(1, |x: &[f64]| (x[0]).ln());
        assert!(maximize(&obj, &[-1.0], 1e-6).is_err());
    }

    #[test]
    fn finite_differences() {
        let g = finite_diff_gradient(|x| x[0] * x[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-6);
        let g = finite_diff_gradient(|x| x[0] * x[1], &[2.0, 5.0], 1e-5);
        assert!((g[0] - 5.0).abs() < 1e-6);
        assert!((g[1] - 2.0).abs() < 1e-6);
    }
}
