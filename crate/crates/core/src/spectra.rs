//! Singularities of vector fields: location, hyperbolicity, non-resonance and Kopell order.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::field::VectorFieldSpec;
use crate::linalg::{eigs, norm2, svd, Matrix, Spectrum};

/// Default threshold on `|Re lambda|` for hyperbolicity.
pub const DEFAULT_TOL_HYP: f64 = 1e-9;
/// Default relative tolerance for resonance relations.
pub const DEFAULT_TOL_RES: f64 = 1e-9;
/// Newton acceptance threshold on `|X(p)|`.
pub const ZERO_TOL: f64 = 1e-10;
/// Radius under which Newton limits are merged.
pub const MERGE_RADIUS: f64 = 1e-6;
/// Cap on the number of integer tuples visited by [`check_nonresonant`].
pub const ENUMERATION_CAP: u64 = 10_000_000;

const NEWTON_MAX_ITER: usize = 100;

/// Zeros found by [`find_singularities`] and the seeds that were dropped.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Singularities {
    pub points: Vec<Vec<f64>>,
    pub dropped: Vec<DroppedSeed>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DroppedSeed {
    pub seed: Vec<f64>,
    pub reason: String,
}

/// Newton's method from every seed. Limits outside `bounds` (when given, one
/// `(lo, hi)` pair per coordinate) are dropped; limits within [`MERGE_RADIUS`] are
/// merged. Points are returned in lexicographic order.
pub fn find_singularities(
    field: &VectorFieldSpec,
    bounds: Option<&[(f64, f64)]>,
    seeds: &[Vec<f64>],
) -> Result<Singularities> {
    let n = field.dim();
    if let Some(b) = bounds {
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
    }
    let domain = field.domain();
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    for seed in seeds {
        if seed.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: seed.len() });
        }
        match newton(field, seed) {
            Ok(mut p) => {
                domain.wrap(&mut p);
                if let Some(b) = bounds {
                    if p.iter().zip(b).any(|(x, (lo, hi))| x < lo || x > hi) {
                        dropped.push(DroppedSeed { seed: seed.clone(), reason: "limit outside the box".into() });
                        continue;
                    }
                }
                if !points.iter().any(|q| domain.distance(q, &p) <= MERGE_RADIUS) {
                    points.push(p);
                }
            }
            Err(e) => dropped.push(DroppedSeed { seed: seed.clone(), reason: alloc::format!("{e}") }),
        }
    }
    points.sort_by(|a, b| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(core::cmp::Ordering::Equal)
    });
    Ok(Singularities { points, dropped })
}

/// Damped Newton iteration on `X(p) = 0`.
fn newton(field: &VectorFieldSpec, seed: &[f64]) -> Result<Vec<f64>> {
    let mut x = seed.to_vec();
    let mut fx = field.eval(&x);
    let mut r = norm2(&fx);
    for _ in 0..NEWTON_MAX_ITER {
        if r <= ZERO_TOL {
            return Ok(x);
        }
        let j = field.jacobian(&x);
        let dx = j.solve_vec(&fx)?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - lambda * d).collect();
            let ft = field.eval(&trial);
            let rt = norm2(&ft);
            if rt.is_finite() && (rt < r || lambda < 1e-3) {
                x = trial;
                fx = ft;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
        if !r.is_finite() {
            return Err(Error::NonFinite("newton iterate"));
        }
    }
    if r <= ZERO_TOL {
        Ok(x)
    } else {
        Err(Error::NoConvergence { what: "newton", iterations: NEWTON_MAX_ITER })
    }
}

/// `(hyperbolic, index)`; the index (number of eigenvalues with negative real part) is
/// only reported for hyperbolic spectra.
pub fn classify_hyperbolic(spec: &Spectrum, tol_hyp: f64) -> (bool, Option<usize>) {
    let hyperbolic = spec.eigenvalues.iter().all(|z| z.re.abs() > tol_hyp);
    if hyperbolic {
        (true, Some(spec.eigenvalues.iter().filter(|z| z.re < 0.0).count()))
    } else {
        (false, None)
    }
}

/// A relation `Re(lambda_i) = sum_{j != i} n_j Re(lambda_j)` among a bundle.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ResonanceRelation {
    pub i: usize,
    /// `n_j` for every index of the bundle (`n_i = 0`).
    pub coefficients: Vec<u32>,
    /// `Re(lambda_i) - sum_j n_j Re(lambda_j)`.
    pub residual: f64,
}

/// Verdict of [`check_nonresonant`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Resonance {
    pub nonresonant: bool,
    /// Indices of two coinciding eigenvalues, if any.
    pub coincident: Option<(usize, usize)>,
    pub witness: Option<ResonanceRelation>,
    /// Smallest `|residual| / max |Re lambda|` over the relations examined
    /// (`INFINITY` when there are none).
    pub margin: f64,
    pub tuples: u64,
}

/// Non-resonance of one bundle (all real parts of the same sign).
pub fn check_nonresonant(bundle: &[Complex64], tol_res: f64) -> Result<Resonance> {
    if bundle.is_empty() {
        return Err(Error::Precondition("empty bundle".into()));
    }
    if !(tol_res > 0.0) {
        return Err(Error::InvalidArgument("resonance tolerance must be positive".into()));
    }
    let neg = bundle.iter().all(|z| z.re < 0.0);
    let pos = bundle.iter().all(|z| z.re > 0.0);
    if !neg && !pos {
        return Err(Error::Precondition("bundle mixes signs of real parts; split into stable and unstable".into()));
    }
    let a: Vec<f64> = bundle.iter().map(|z| z.re.abs()).collect();
    let amax = a.iter().copied().fold(0.0, f64::max);
    let amin = a.iter().copied().fold(f64::INFINITY, f64::min);
    let zmax = bundle.iter().map(|z| z.norm()).fold(0.0, f64::max);

    for i in 0..bundle.len() {
        for j in i + 1..bundle.len() {
            if (bundle[i] - bundle[j]).norm() <= tol_res * zmax {
                return Ok(Resonance {
                    nonresonant: false,
                    coincident: Some((i, j)),
                    witness: None,
                    margin: 0.0,
                    tuples: 0,
                });
            }
        }
    }

    let bound = (amax / amin).ceil() as u32 + 1;
    let tol = tol_res * amax;
    let mut search = RelationSearch {
        a: &a,
        bound,
        tol,
        amax,
        tuples: 0,
        margin: f64::INFINITY,
        found: None,
        coeffs: vec![0; a.len()],
    };
    for i in 0..a.len() {
        search.coeffs.iter_mut().for_each(|c| *c = 0);
        search.dfs(i, 0, 0.0, 0)?;
        if search.found.is_some() {
            break;
        }
    }
    let sign = if neg { -1.0 } else { 1.0 };
    let witness = search.found.map(|(i, coefficients, r)| ResonanceRelation { i, coefficients, residual: sign * r });
    Ok(Resonance {
        nonresonant: witness.is_none(),
        coincident: None,
        witness,
        margin: search.margin,
        tuples: search.tuples,
    })
}

struct RelationSearch<'a> {
    a: &'a [f64],
    bound: u32,
    tol: f64,
    amax: f64,
    tuples: u64,
    margin: f64,
    found: Option<(usize, Vec<u32>, f64)>,
    coeffs: Vec<u32>,
}

impl RelationSearch<'_> {
    /// Assigns `n_j` for `j >= pos` (skipping `i`), with `sum` and `count` the weighted
    /// and plain sums so far.
    fn dfs(&mut self, i: usize, pos: usize, sum: f64, count: u32) -> Result<()> {
        if self.found.is_some() {
            return Ok(());
        }
        let target = self.a[i];
        if pos == self.a.len() {
            self.tuples += 1;
            if self.tuples > ENUMERATION_CAP {
                return Err(Error::EnumerationCap(ENUMERATION_CAP));
            }
            if count >= 2 {
                let r = target - sum;
                self.margin = self.margin.min(r.abs() / self.amax);
                if r.abs() <= self.tol {
                    self.found = Some((i, self.coeffs.clone(), r));
                }
            }
            return Ok(());
        }
        if pos == i {
            return self.dfs(i, pos + 1, sum, count);
        }
        for n in 0..=self.bound {
            let s = sum + n as f64 * self.a[pos];
            if s > target + self.tol {
                if count + n >= 2 {
                    self.margin = self.margin.min((s - target) / self.amax);
                }
                break;
            }
            self.coeffs[pos] = n;
            self.dfs(i, pos + 1, s, count + n)?;
            if self.found.is_some() {
                return Ok(());
            }
        }
        self.coeffs[pos] = 0;
        Ok(())
    }
}

/// Least `m >= 1` with `m * max Re < min Re` for a sink spectrum.
pub fn kopell_order(sink: &[Complex64]) -> Result<u32> {
    if sink.is_empty() || !sink.iter().all(|z| z.re < 0.0) {
        return Err(Error::Precondition("kopell order needs every real part negative".into()));
    }
    let max = sink.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let min = sink.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let mut m = ((min / max).floor() as u32).saturating_add(1).max(1);
    while !(m as f64 * max < min) {
        m += 1;
    }
    while m > 1 && (m - 1) as f64 * max < min {
        m -= 1;
    }
    Ok(m)
}

/// Tolerances for [`full_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub tol_hyp: f64,
    pub tol_res: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { tol_hyp: DEFAULT_TOL_HYP, tol_res: DEFAULT_TOL_RES }
    }
}

/// Which invariant bundle of a singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "snake_case"))]
pub enum Bundle {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BundleWitness {
    pub bundle: Bundle,
    pub relation: ResonanceRelation,
}

/// Spectral data of a singularity.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SingularityReport {
    pub location: Vec<f64>,
    pub jacobian: Matrix,
    pub spectrum: Spectrum,
    pub hyperbolic: bool,
    pub index: Option<usize>,
    pub stable_basis: Vec<Vec<f64>>,
    pub unstable_basis: Vec<Vec<f64>>,
    /// `None` when the bundle is empty.
    pub nonresonant_stable: Option<Resonance>,
    pub nonresonant_unstable: Option<Resonance>,
    /// Kopell order of the whole spectrum (sinks, and sources via `-B`).
    pub kopell_m: Option<u32>,
    pub kopell_stable: Option<u32>,
    pub kopell_unstable: Option<u32>,
    pub witnesses: Vec<BundleWitness>,
}

impl SingularityReport {
    /// Hyperbolic with both bundles non-resonant.
    pub fn is_nonresonant(&self) -> bool {
        self.hyperbolic
            && [&self.nonresonant_stable, &self.nonresonant_unstable]
                .iter()
                .all(|r| r.as_ref().is_none_or(|r| r.nonresonant))
    }
}

/// Report for the singularity `p` of `field`.
pub fn full_report(field: &VectorFieldSpec, p: &[f64], opts: &ReportOptions) -> Result<SingularityReport> {
    if p.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), found: p.len() });
    }
    let speed = norm2(&field.eval(p));
    if !(speed <= 1e-8) {
        return Err(Error::Precondition(alloc::format!("|X(p)| = {speed:e} exceeds 1e-8")));
    }
    let jacobian = field.jacobian(p);
    let spectrum = eigs(&jacobian)?;
    let (hyperbolic, index) = classify_hyperbolic(&spectrum, opts.tol_hyp);
    let stable: Vec<Complex64> = spectrum.eigenvalues.iter().copied().filter(|z| z.re < -opts.tol_hyp).collect();
    let unstable: Vec<Complex64> = spectrum.eigenvalues.iter().copied().filter(|z| z.re > opts.tol_hyp).collect();
    let stable_basis = invariant_basis(&jacobian, &stable)?;
    let unstable_basis = invariant_basis(&jacobian, &unstable)?;
    let res_s = if stable.is_empty() { None } else { Some(check_nonresonant(&stable, opts.tol_res)?) };
    let res_u = if unstable.is_empty() { None } else { Some(check_nonresonant(&unstable, opts.tol_res)?) };
    let mut witnesses = Vec::new();
    for (bundle, r) in [(Bundle::Stable, &res_s), (Bundle::Unstable, &res_u)] {
        if let Some(rel) = r.as_ref().and_then(|r| r.witness.clone()) {
            witnesses.push(BundleWitness { bundle, relation: rel });
        }
    }
    let flipped: Vec<Complex64> = unstable.iter().map(|z| -z).collect();
    let kopell_stable = if stable.is_empty() { None } else { Some(kopell_order(&stable)?) };
    let kopell_unstable = if unstable.is_empty() { None } else { Some(kopell_order(&flipped)?) };
    let kopell_m = match (hyperbolic, stable.is_empty(), unstable.is_empty()) {
        (true, false, true) => kopell_stable,
        (true, true, false) => kopell_unstable,
        _ => None,
    };
    Ok(SingularityReport {
        location: p.to_vec(),
        jacobian,
        spectrum,
        hyperbolic,
        index,
        stable_basis,
        unstable_basis,
        nonresonant_stable: res_s,
        nonresonant_unstable: res_u,
        kopell_m,
        kopell_stable,
        kopell_unstable,
        witnesses,
    })
}

/// Orthonormal basis of the generalized eigenspace of `j` for `bundle` (closed under
/// conjugation): the kernel of the real polynomial `prod (J - lambda)` over the bundle.
pub fn invariant_basis(j: &Matrix, bundle: &[Complex64]) -> Result<Vec<Vec<f64>>> {
    let n = j.check_square()?;
    let k = bundle.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    if k == n {
        return Ok((0..n).map(|i| Matrix::identity(n).column(i)).collect());
    }
    let scale = bundle.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let js = j.scale(1.0 / scale);
    let mut p = Matrix::identity(n);
    for z in bundle {
        let z = z / scale;
        let factor = if z.im.abs() <= 1e-12 {
            js.sub(&Matrix::identity(n).scale(z.re))?
        } else if z.im > 0.0 {
            // J^2 - 2 Re(z) J + |z|^2 I covers the conjugate pair.
            js.mul(&js)?.sub(&js.scale(2.0 * z.re))?.add(&Matrix::identity(n).scale(z.norm_sqr()))?
        } else {
            continue;
        };
        p = p.mul(&factor)?;
    }
    let d = svd(&p)?;
    Ok((n - k..n).map(|c| d.v.column(c)).collect())
}
