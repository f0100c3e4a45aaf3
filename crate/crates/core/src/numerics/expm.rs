use crate::error::{Error, Result};

use super::SquareMatrix;

/// `Exp(u·m)`.
///
/// Order-2 inputs go through the closed form of [`two_state_exponential`];
/// every other order uses Padé scaling and squaring.
pub fn matrix_exponential(m: &SquareMatrix, u: f64) -> Result<SquareMatrix> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix exponential of a non-finite matrix".into()));
    }
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::InvalidInput(format!(
            "matrix exponential needs a finite nonnegative scale, got {u}"
        )));
    }
    if m.order() == 2 {
        Ok(two_state_exponential(m, u))
    } else {
        matrix_exponential_pade(m, u)
    }
}

/// Closed form for 2×2 matrices.
///
/// With `s` the half trace and `B = m − s·I`, `B² = q²·I`, so
/// `Exp(u·m) = e^{su}(cosh(qu)·I + sinh(qu)/q·B)`; the trigonometric
/// branch covers `q² < 0`.
pub fn two_state_exponential(m: &SquareMatrix, u: f64) -> SquareMatrix {
    debug_assert_eq!(m.order(), 2);
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let s = 0.5 * (a + d) * u;
    let half = 0.5 * (a - d);
    let q2 = half * half + b * c;

    // exp(u·m) = c0·I + c1·u·B
    let (c0, c1) = if q2 >= 0.0 {
        let q = q2.sqrt() * u;
        if q > 20.0 {
            let hi = (s + q).exp();
            let lo = (s - q).exp();
            (0.5 * (hi + lo), 0.5 * (hi - lo) / q)
        } else if q == 0.0 {
            let e = s.exp();
            (e, e)
        } else {
            let e = s.exp();
            (e * q.cosh(), e * q.sinh() / q)
        }
    } else {
        let w = (-q2).sqrt() * u;
        let e = s.exp();
        (e * w.cos(), e * w.sin() / w)
    };

    let cu = c1 * u;
    SquareMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 0) => c0 + cu * half,
        (0, 1) => cu * b,
        (1, 0) => cu * c,
        _ => c0 - cu * half,
    })
}

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// 1-norm bounds under which the [m/m] approximant is accurate to unit roundoff.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

/// General scaling and squaring with diagonal Padé approximants of degree
/// 3, 5, 7, 9 or 13, chosen from the 1-norm of `u·m`.
pub fn matrix_exponential_pade(m: &SquareMatrix, u: f64) -> Result<SquareMatrix> {
    if !m.is_finite() || !u.is_finite() {
        return Err(Error::InvalidInput("matrix exponential of a non-finite matrix".into()));
    }
    let n = m.order();
    let a = m.scaled(u);
    let norm = a.norm_one();
    let ident = SquareMatrix::identity(n);
    if norm == 0.0 {
        return Ok(ident);
    }

    let a2 = a.mul(&a);
    for &(degree, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE_3,
                5 => &PADE_5,
                7 => &PADE_7,
                _ => &PADE_9,
            };
            return pade_low(&a, &a2, coeffs);
        }
    }

    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings);
    let a = a.scaled(scale);
    let a2 = a2.scaled(scale * scale);
    let a4 = a2.mul(&a2);
    let a6 = a4.mul(&a2);
    let b = &PADE_13;

    let u_inner = a6.scaled(b[13]).add(&a4.scaled(b[11])).add(&a2.scaled(b[9]));
    let u_part = a6
        .mul(&u_inner)
        .add(&a6.scaled(b[7]))
        .add(&a4.scaled(b[5]))
        .add(&a2.scaled(b[3]))
        .add(&ident.scaled(b[1]));
    let u_mat = a.mul(&u_part);
    let v_inner = a6.scaled(b[12]).add(&a4.scaled(b[10])).add(&a2.scaled(b[8]));
    let v_mat = a6
        .mul(&v_inner)
        .add(&a6.scaled(b[6]))
        .add(&a4.scaled(b[4]))
        .add(&a2.scaled(b[2]))
        .add(&ident.scaled(b[0]));

    let mut r = solve_pade(&u_mat, &v_mat)?;
    for _ in 0..squarings {
        r = r.mul(&r);
    }
    Ok(r)
}

fn pade_low(a: &SquareMatrix, a2: &SquareMatrix, b: &[f64]) -> Result<SquareMatrix> {
    let n = a.order();
    let mut power = SquareMatrix::identity(n);
    let mut odd = SquareMatrix::zeros(n);
    let mut even = SquareMatrix::zeros(n);
    for k in (0..b.len()).step_by(2) {
        even = even.add(&power.scaled(b[k]));
        odd = odd.add(&power.scaled(b[k + 1]));
        power = power.mul(a2);
    }
    let u_mat = a.mul(&odd);
    solve_pade(&u_mat, &even)
}

fn solve_pade(u_mat: &SquareMatrix, v_mat: &SquareMatrix) -> Result<SquareMatrix> {
    let p = v_mat.add(u_mat);
    let q = v_mat.sub(u_mat);
    q.solve(&p)
        .ok_or_else(|| Error::InvalidInput("singular Padé denominator".into()))
}
