//! One-sided Jacobi (Hestenes) singular value decomposition.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{dot, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// `A = U diag(sigma) V^T` with singular values sorted descending.
///
/// `u` is `m x n` (columns for zero singular values are left as zero vectors),
/// `v` is `n x n` orthogonal.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

pub fn svd(a: &Matrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    let (m, n) = (a.rows(), a.cols());
    // Column-major working copies: cols[j] is column j.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = alloc::vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let negligible = (f64::EPSILON * a.frobenius_norm()).powi(2);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { what: "Jacobi SVD", iterations: MAX_SWEEPS });
    }

    let mut order: Vec<(usize, f64)> = cols.iter().map(|c| super::norm2(c)).enumerate().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &(j, s)) in order.iter().enumerate() {
        sigma.push(s);
        for i in 0..m {
            u[(i, k)] = if s > 0.0 { cols[j][i] / s } else { 0.0 };
        }
        for i in 0..n {
            v[(i, k)] = vcols[j][i];
        }
    }
    Ok(Svd { u, sigma, v })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Orthonormal basis (as vectors) of the right singular vectors whose singular
/// value is at most `tol * sigma_max`. A zero matrix has the whole space as kernel.
pub fn nullspace(a: &Matrix, tol: f64) -> Result<Vec<Vec<f64>>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("nullspace tolerance must be positive, got {tol}")));
    }
    let d = svd(a)?;
    let smax = d.sigma.first().copied().unwrap_or(0.0);
    let cut = tol * smax;
    Ok((0..a.cols())
        .filter(|&k| d.sigma[k] <= cut)
        .map(|k| d.v.column(k))
        .collect())
}

/// Least-squares solution of `A X = B` with its residual.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: Matrix,
    /// Frobenius norm of `A X - B`.
    pub residual: f64,
    /// Smallest singular value of `A`.
    pub sigma_min: f64,
}

/// Solves `A X = B` in the least-squares sense through the SVD of `A`.
/// Fails when `A` has a singular value below `rank_tol * sigma_max`.
pub fn lstsq(a: &Matrix, b: &Matrix, rank_tol: f64) -> Result<LeastSquares> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: b.rows() });
    }
    let d = svd(a)?;
    let smax = d.sigma.first().copied().unwrap_or(0.0);
    let smin = d.sigma.last().copied().unwrap_or(0.0);
    if smax == 0.0 || smin <= rank_tol * smax {
        return Err(Error::Singular("least squares"));
    }
    let ut_b = d.u.transpose().mul(b)?;
    let mut scaled = ut_b;
    for k in 0..a.cols() {
        for j in 0..scaled.cols() {
            scaled[(k, j)] /= d.sigma[k];
        }
    }
    let solution = d.v.mul(&scaled)?;
    let residual = a.mul(&solution)?.sub(b)?.frobenius_norm();
    Ok(LeastSquares { solution, residual, sigma_min: smin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_input() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 0.0], [0.0, 3.0, -1.0], [4.0, 0.5, 2.0], [1.0, 1.0, 1.0]]).unwrap();
        let d = svd(&a).unwrap();
        let mut s = Matrix::zeros(3, 3);
        for k in 0..3 {
            s[(k, k)] = d.sigma[k];
        }
        let back = d.u.mul(&s).unwrap().mul(&d.v.transpose()).unwrap();
        assert!(back.sub(&a).unwrap().max_abs() < 1e-13);
        assert!(d.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn identity_has_empty_nullspace() {
        assert!(nullspace(&Matrix::identity(4), 1e-9).unwrap().is_empty());
    }

    #[test]
    fn zero_matrix_has_full_nullspace() {
        assert_eq!(nullspace(&Matrix::zeros(3, 3), 1e-9).unwrap().len(), 3);
    }

    #[test]
    fn wide_matrix_nullspace() {
        let a = Matrix::from_rows(&[[1.0, 1.0, 1.0]]).unwrap();
        let ns = nullspace(&a, 1e-9).unwrap();
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!(dot(v, &[1.0, 1.0, 1.0]).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_one_nullspace_is_orthogonal_complement() {
        // Gram-Schmidt on e1, e2, e3 against v gives the oracle complement.
        let u = [1.0, -2.0, 0.5];
        let v = [0.3, 0.4, -1.2];
        let mut a = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = u[i] * v[j];
            }
        }
        let ns = nullspace(&a, 1e-9).unwrap();
        assert_eq!(ns.len(), 2);
        let vn = super::super::norm2(&v);
        let vhat: Vec<f64> = v.iter().map(|x| x / vn).collect();
        let mut oracle: Vec<Vec<f64>> = Vec::new();
        for e in 0..3 {
            let mut w = [0.0; 3];
            w[e] = 1.0;
            let mut w = w.to_vec();
            for b in core::iter::once(&vhat).chain(oracle.iter()) {
                let c = dot(&w, b);
                for i in 0..3 {
                    w[i] -= c * b[i];
                }
            }
            let n = super::super::norm2(&w);
            if n > 1e-8 {
                oracle.push(w.iter().map(|x| x / n).collect());
            }
        }
        assert_eq!(oracle.len(), 2);
        // Same subspace: projections of each oracle vector onto span(ns) have unit norm.
        for o in &oracle {
            let proj: f64 = ns.iter().map(|b| dot(o, b).powi(2)).sum();
            assert!((proj - 1.0).abs() < 1e-12);
        }
        for b in &ns {
            assert!(dot(b, &vhat).abs() < 1e-12);
        }
    }

    #[test]
    fn lstsq_exact_system() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [0.0, 2.0]]).unwrap();
        let a = Matrix::from_rows(&[[2.0, 1.0], [0.0, 1.0]]).unwrap();
        let y = x.mul(&a).unwrap();
        let ls = lstsq(&x, &y, 1e-12).unwrap();
        assert!(ls.solution.sub(&a).unwrap().max_abs() < 1e-13);
        assert!(ls.residual < 1e-13);
    }
}
