//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (Higham 2005, degrees 3, 5, 7, 9 and 13).

#[allow(unused_imports)]
use num_traits::Float;

use super::Matrix;
use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
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
const B13: [f64; 14] = [
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

/// `e^{tM}`.
///
/// Diagonal and strictly triangular (hence nilpotent) arguments are evaluated in
/// closed form; everything else goes through scaling and squaring.
pub fn mat_exp(m: &Matrix, t: f64) -> Result<Matrix> {
    let n = m.check_square()?;
    if !t.is_finite() {
        return Err(Error::NonFinite("time"));
    }
    if t == 0.0 {
        return Ok(Matrix::identity(n));
    }
    let a = m.scale(t);
    let out = if a.is_diagonal() {
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = a[(i, i)].exp();
        }
        d
    } else if a.is_strictly_triangular() {
        nilpotent_series(&a)?
    } else {
        pade_scaling_squaring(&a)?
    };
    if !out.is_finite() {
        return Err(Error::ExpOverflow { norm: a.norm1() });
    }
    Ok(out)
}

/// Terminating Taylor series; exact up to rounding since `A^n = 0`.
fn nilpotent_series(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let mut out = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..n {
        term = term.mul(a)?.scale(1.0 / k as f64);
        out = out.add(&term)?;
    }
    Ok(out)
}

fn pade_scaling_squaring(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let norm = a.norm1();
    if !norm.is_finite() {
        return Err(Error::ExpOverflow { norm });
    }
    let ident = Matrix::identity(n);
    let a2 = a.mul(a)?;
    for &(deg, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match deg {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = low_degree_uv(a, &a2, coeffs)?;
            return pade_quotient(&u, &v);
        }
    }

    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil().max(0.0) as i32 } else { 0 };
    let a = a.scale(2f64.powi(-s));
    let a2 = a.mul(&a)?;
    let a4 = a2.mul(&a2)?;
    let a6 = a4.mul(&a2)?;
    let b = &B13;
    let inner_u = a6
        .scale(b[13])
        .add(&a4.scale(b[11]))?
        .add(&a2.scale(b[9]))?;
    let u = a.mul(
        &a6.mul(&inner_u)?
            .add(&a6.scale(b[7]))?
            .add(&a4.scale(b[5]))?
            .add(&a2.scale(b[3]))?
            .add(&ident.scale(b[1]))?,
    )?;
    let inner_v = a6
        .scale(b[12])
        .add(&a4.scale(b[10]))?
        .add(&a2.scale(b[8]))?;
    let v = a6
        .mul(&inner_v)?
        .add(&a6.scale(b[6]))?
        .add(&a4.scale(b[4]))?
        .add(&a2.scale(b[2]))?
        .add(&ident.scale(b[0]))?;
    let mut r = pade_quotient(&u, &v)?;
    for _ in 0..s {
        r = r.mul(&r)?;
        if !r.is_finite() {
            return Err(Error::ExpOverflow { norm });
        }
    }
    Ok(r)
}

fn low_degree_uv(a: &Matrix, a2: &Matrix, b: &[f64]) -> Result<(Matrix, Matrix)> {
    let n = a.rows();
    let mut power = Matrix::identity(n);
    let mut u_inner = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    for k in 0..b.len() / 2 {
        v = v.add(&power.scale(b[2 * k]))?;
        u_inner = u_inner.add(&power.scale(b[2 * k + 1]))?;
        power = power.mul(a2)?;
    }
    Ok((a.mul(&u_inner)?, v))
}

fn pade_quotient(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    v.sub(u)?.solve(&v.add(u)?)
}
