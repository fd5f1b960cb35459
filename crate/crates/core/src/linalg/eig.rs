//! Eigenvalues of real nonsymmetric matrices.
//!
//! Balancing, Householder reduction to Hessenberg form and the Francis double-shift
//! QR iteration, following the EISPACK `balanc`/`orthes`/`hqr` sequence.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use super::Matrix;
use crate::error::{Error, Result};

/// Eigenvalues with algebraic multiplicity (repeated entries), sorted by `(Re, Im)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
}

impl Spectrum {
    /// Canonicalizes: symmetrizes conjugate pairs and sorts by `(Re, Im)`.
    pub fn new(mut eigenvalues: Vec<Complex64>) -> Self {
        symmetrize_pairs(&mut eigenvalues);
        eigenvalues.sort_by(cmp_re_im);
        Spectrum { eigenvalues }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.re).collect()
    }

    /// Eigenvalues with negative real part.
    pub fn stable(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().copied().filter(|z| z.re < 0.0).collect()
    }

    /// Eigenvalues with positive real part.
    pub fn unstable(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().copied().filter(|z| z.re > 0.0).collect()
    }
}

pub(crate) fn cmp_re_im(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Averages each eigenvalue with positive imaginary part with its nearest
/// conjugate partner so that pairs are exact conjugates.
fn symmetrize_pairs(values: &mut [Complex64]) {
    let n = values.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] || values[i].im <= 0.0 {
            continue;
        }
        let target = values[i].conj();
        let partner = (0..n)
            .filter(|&j| !used[j] && j != i && values[j].im < 0.0)
            .min_by(|&a, &b| (values[a] - target).norm().total_cmp(&(values[b] - target).norm()));
        if let Some(j) = partner {
            let re = 0.5 * (values[i].re + values[j].re);
            let im = 0.5 * (values[i].im - values[j].im);
            values[i] = Complex64::new(re, im);
            values[j] = Complex64::new(re, -im);
            used[i] = true;
            used[j] = true;
        }
    }
}

/// All eigenvalues of a square matrix (`n <= 16`).
pub fn eigs(m: &Matrix) -> Result<Spectrum> {
    let n = m.check_square()?;
    let mut h: Vec<Vec<f64>> = m.to_rows();
    balance(&mut h);
    hessenberg(&mut h);
    let (wr, wi) = hqr(&mut h)?;
    let values = wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect::<Vec<_>>();
    debug_assert_eq!(values.len(), n);
    Ok(Spectrum::new(values))
}

/// Parlett–Reinsch balancing with radix 2, so the similarity is exact.
fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let n = a.len();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[i][j] *= g;
                }
                for j in 0..n {
                    a[j][i] *= f;
                }
            }
        }
    }
}

fn hessenberg(h: &mut [Vec<f64>]) {
    let n = h.len();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[i][j];
            }
            f /= hh;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[i][j];
            }
            f /= hh;
            for j in m..=high {
                h[i][j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m][m - 1] = scale * g;
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix.
#[allow(unused_assignments)]
fn hqr(h: &mut [Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let nn = h.len();
    let max_iter = 30 * nn.max(1);
    let mut wr = vec![0.0; nn];
    let mut wi = vec![0.0; nn];
    let eps = f64::EPSILON;
    let low: isize = 0;
    let mut n = nn as isize - 1;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut w, mut x, mut y) = (0.0f64, 0.0f64, 0.0f64);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i][j].abs();
        }
    }

    let mut iter = 0usize;
    macro_rules! at {
        ($i:expr, $j:expr) => {
            h[($i) as usize][($j) as usize]
        };
    }
    while n >= low {
        let mut l = n;
        while l > low {
            s = at!(l - 1, l - 1).abs() + at!(l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if at!(l, l - 1).abs() <= eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            at!(n, n) += exshift;
            wr[n as usize] = at!(n, n);
            wi[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = at!(n, n - 1) * at!(n - 1, n);
            p = (at!(n - 1, n - 1) - at!(n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            at!(n, n) += exshift;
            at!(n - 1, n - 1) += exshift;
            x = at!(n, n);
            let (nu, nm) = (n as usize, (n - 1) as usize);
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                wr[nm] = x + z;
                wr[nu] = wr[nm];
                if z != 0.0 {
                    wr[nu] = x - w / z;
                }
                wi[nm] = 0.0;
                wi[nu] = 0.0;
            } else {
                wr[nm] = x + p;
                wr[nu] = x + p;
                wi[nm] = z;
                wi[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = at!(n, n);
            y = 0.0;
            w = 0.0;
            if l < n {
                y = at!(n - 1, n - 1);
                w = at!(n, n - 1) * at!(n - 1, n);
            }
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    at!(i, i) -= x;
                }
                s = at!(n, n - 1).abs() + at!(n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        at!(i, i) -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            if iter > max_iter {
                return Err(Error::NoConvergence { what: "Hessenberg QR", iterations: iter });
            }

            let mut m = n - 2;
            while m >= l {
                z = at!(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / at!(m + 1, m) + at!(m, m + 1);
                q = at!(m + 1, m + 1) - z - r - s;
                r = at!(m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if at!(m, m - 1).abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (at!(m - 1, m - 1).abs() + z.abs() + at!(m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in m + 2..=n {
                at!(i, i - 2) = 0.0;
                if i > m + 2 {
                    at!(i, i - 3) = 0.0;
                }
            }

            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                if k != m {
                    p = at!(k, k - 1);
                    q = at!(k + 1, k - 1);
                    r = if notlast { at!(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        at!(k, k - 1) = -s * x;
                    } else if l != m {
                        at!(k, k - 1) = -at!(k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn as isize {
                        p = at!(k, j) + q * at!(k + 1, j);
                        if notlast {
                            p += r * at!(k + 2, j);
                            at!(k + 2, j) -= p * z;
                        }
                        at!(k, j) -= p * x;
                        at!(k + 1, j) -= p * y;
                    }
                    let top = n.min(k + 3);
                    for i in 0..=top {
                        p = x * at!(i, k) + y * at!(i, k + 1);
                        if notlast {
                            p += z * at!(i, k + 2);
                            at!(i, k + 2) -= p * r;
                        }
                        at!(i, k) -= p;
                        at!(i, k + 1) -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    if wr.iter().chain(&wi).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalues"));
    }
    Ok((wr, wi))
}
