use alloc::vec::Vec;

use super::Matrix;
use crate::error::{Error, Result};

/// Orthonormal (Frobenius) basis of `{C : BC = CB}`.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CommutantBasis {
    pub generator: Matrix,
    pub basis: Vec<Matrix>,
    pub tol: f64,
}

impl CommutantBasis {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }
}

/// The `n^2 x n^2` matrix of `C -> BC - CB` acting on column-major `vec(C)`,
/// i.e. `I (x) B - B^T (x) I`.
pub(crate) fn sylvester_operator(b: &Matrix) -> Matrix {
    let n = b.rows();
    let mut k = Matrix::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for l in 0..n {
                // (I (x) B): block-diagonal copy of B.
                k[(row, j * n + l)] += b[(i, l)];
                // (B^T (x) I): entry B[l][j] on the identity pattern.
                k[(row, l * n + i)] -= b[(l, j)];
            }
        }
    }
    k
}

/// Commutant of `b` through the dense nullspace of the vectorized operator.
///
/// A singular value is treated as zero when it is below
/// `min(tol * sigma_max, tol * (1 + |B|_F))`, which guarantees
/// `|BC - CB|_F <= tol (1 + |B|_F) |C|_F` for every returned element.
pub fn commutant_basis(b: &Matrix, tol: f64) -> Result<CommutantBasis> {
    let n = b.check_square()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("tolerance must be positive, got {tol}")));
    }
    let k = sylvester_operator(b);
    let d = super::svd(&k)?;
    let smax = d.sigma[0];
    let bound = tol * (1.0 + b.frobenius_norm());
    let cut = (tol * smax).min(bound);
    let mut basis = Vec::new();
    for idx in 0..n * n {
        if d.sigma[idx] > cut {
            continue;
        }
        let v = d.v.column(idx);
        let mut c = Matrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                c[(i, j)] = v[j * n + i];
            }
        }
        basis.push(c);
    }
    for c in &basis {
        let resid = b.commutator(c)?.frobenius_norm();
        if resid > bound * c.frobenius_norm() {
            return Err(Error::NoConvergence { what: "commutant nullspace", iterations: 0 });
        }
    }
    Ok(CommutantBasis { generator: b.clone(), basis, tol })
}

/// Outcome of [`is_proportional`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Proportionality {
    pub verdict: bool,
    /// Least-squares factor `<C,B>/|B|^2`, reported only when the verdict holds.
    pub factor: Option<f64>,
}

/// Is `c` a scalar multiple of `b` up to relative tolerance `tol`?
pub fn is_proportional(c: &Matrix, b: &Matrix, tol: f64) -> Result<Proportionality> {
    if c.rows() != b.rows() || c.cols() != b.cols() {
        return Err(Error::DimensionMismatch { expected: b.rows() * b.cols(), found: c.rows() * c.cols() });
    }
    let bn2 = b.frobenius_dot(b)?;
    if bn2 == 0.0 {
        let zero = c.max_abs() == 0.0;
        return Ok(Proportionality { verdict: zero, factor: zero.then_some(0.0) });
    }
    let factor = c.frobenius_dot(b)? / bn2;
    let resid = c.sub(&b.scale(factor))?.frobenius_norm();
    let verdict = resid <= tol * c.frobenius_norm();
    Ok(Proportionality { verdict, factor: verdict.then_some(factor) })
}
