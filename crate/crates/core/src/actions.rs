//! `R^d`-actions generated by commuting vector fields.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::field::{lie_bracket, Domain, VectorFieldSpec};
use crate::flow::{flow_with, IntegratorOptions};
use crate::linalg::{dot, lstsq, norm2, svd, Matrix};
use crate::minimize::nelder_mead;
use crate::reparam::{LocalReparam, ReparamOptions};

/// Default commutation tolerance.
pub const DEFAULT_TOL_COMM: f64 = 1e-8;
/// Default homogeneity threshold on the smallest singular value of the frame.
pub const DEFAULT_TOL_RANK: f64 = 1e-9;

/// `Phi_v = exp(sum_i v_i X_i)` for commuting generators `X_1..X_d`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct ActionSpec {
    pub generators: Vec<VectorFieldSpec>,
}

impl ActionSpec {
    /// Validates the generators and refuses them unless they commute on `samples`.
    pub fn new(
        generators: Vec<VectorFieldSpec>,
        samples: &[Vec<f64>],
        tol_comm: f64,
        integrator: &IntegratorOptions,
    ) -> Result<Self> {
        let action = ActionSpec::unchecked(generators)?;
        let report = verify_commuting(&action.generators, samples, tol_comm, integrator)?;
        if !report.pass {
            return Err(Error::NotCommuting(report.bracket.max(report.flows)));
        }
        Ok(action)
    }

    /// Structural checks only (same dimension and domain, at least one generator).
    pub fn unchecked(generators: Vec<VectorFieldSpec>) -> Result<Self> {
        let first = generators.first().ok_or_else(|| Error::InvalidArgument("action needs a generator".into()))?;
        let (n, domain) = (first.dim(), first.domain());
        for g in &generators {
            g.validate()?;
            if g.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: g.dim() });
            }
            if g.domain() != domain {
                return Err(Error::InvalidArgument("generators live on different domains".into()));
            }
        }
        if generators.len() > n {
            return Err(Error::InvalidArgument(alloc::format!("rank {} exceeds dimension {n}", generators.len())));
        }
        Ok(ActionSpec { generators })
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn dim(&self) -> usize {
        self.generators[0].dim()
    }

    pub fn domain(&self) -> Domain {
        self.generators[0].domain()
    }

    /// `X_v = sum_i v_i X_i`.
    pub fn generator(&self, v: &[f64]) -> Result<VectorFieldSpec> {
        if v.len() != self.rank() {
            return Err(Error::DimensionMismatch { expected: self.rank(), found: v.len() });
        }
        Ok(VectorFieldSpec::Combination { terms: v.iter().copied().zip(self.generators.iter().cloned()).collect() })
    }

    /// `Phi_v(x)`, the time-one map of `X_v`.
    pub fn act(&self, v: &[f64], x: &[f64], integrator: &IntegratorOptions) -> Result<Vec<f64>> {
        flow_with(&self.generator(v)?, x, 1.0, integrator)
    }

    /// The `n x d` frame `[X_1(x) ... X_d(x)]`.
    pub fn frame(&self, x: &[f64]) -> Matrix {
        frame(&self.generators, x)
    }
}

fn frame(fields: &[VectorFieldSpec], x: &[f64]) -> Matrix {
    let cols: Vec<Vec<f64>> = fields.iter().map(|f| f.eval(x)).collect();
    Matrix::from_columns(&cols).expect("equal lengths")
}

/// Pairwise bracket and flow-commutation defects.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CommutationReport {
    pub bracket: f64,
    pub flows: f64,
    pub pass: bool,
}

/// Maximum of `|[X_i, X_j](x)|` and of `d(phi^i_s phi^j_t x, phi^j_t phi^i_s x)` at
/// `(s, t) = (0.3, 0.7)` over the samples.
pub fn verify_commuting(
    fields: &[VectorFieldSpec],
    samples: &[Vec<f64>],
    tol_comm: f64,
    integrator: &IntegratorOptions,
) -> Result<CommutationReport> {
    let n = fields.first().map_or(0, |f| f.dim());
    if fields.iter().any(|f| f.dim() != n) {
        return Err(Error::InvalidArgument("generators differ in dimension".into()));
    }
    let mut bracket: f64 = 0.0;
    let mut flows: f64 = 0.0;
    for x in samples {
        for i in 0..fields.len() {
            for j in i + 1..fields.len() {
                bracket = bracket.max(norm2(&lie_bracket(&fields[i], &fields[j], x)?));
                let (s, t) = (0.3, 0.7);
                let a = flow_with(&fields[i], &flow_with(&fields[j], x, t, integrator)?, s, integrator)?;
                let b = flow_with(&fields[j], &flow_with(&fields[i], x, s, integrator)?, t, integrator)?;
                flows = flows.max(fields[0].distance(&a, &b));
            }
        }
    }
    Ok(CommutationReport { bracket, flows, pass: bracket <= tol_comm && flows <= tol_comm })
}

/// Homogeneity verdict: independence of the generators at every sample.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Homogeneity {
    pub homogeneous: bool,
    /// Smallest singular value of the frame over the samples.
    pub min_singular_value: f64,
    pub worst_point: Option<Vec<f64>>,
}

pub fn check_homogeneous(action: &ActionSpec, samples: &[Vec<f64>], tol_rank: f64) -> Result<Homogeneity> {
    let mut worst = (f64::INFINITY, None);
    for x in samples {
        let s = svd(&action.frame(x))?.sigma.last().copied().unwrap_or(0.0);
        if s < worst.0 {
            worst = (s, Some(x.clone()));
        }
    }
    Ok(Homogeneity { homogeneous: worst.0 > tol_rank, min_singular_value: worst.0, worst_point: worst.1 })
}

/// Settings for [`action_min_period`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionPeriodOptions {
    pub radius: f64,
    pub tol_close: f64,
    /// Grid cells per radius (the grid step is `radius / cells`).
    pub cells: usize,
    pub integrator: IntegratorOptions,
}

impl ActionPeriodOptions {
    pub fn new(radius: f64) -> Self {
        ActionPeriodOptions { radius, tol_close: 1e-6, cells: 50, integrator: IntegratorOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ActionPeriod {
    pub eps0_upper: f64,
    pub witness: Option<Vec<f64>>,
}

/// Upper bound on the smallest nonzero `v` with `Phi_v(x) = x` at some sample.
///
/// Vectors on the grid `(radius / cells) Z^d` inside the ball are screened by the
/// return distance; each grid local minimum is refined by Nelder–Mead on the squared
/// distance and accepted within `tol_close`. Periods shorter than one grid step are
/// not searched.
pub fn action_min_period(action: &ActionSpec, samples: &[Vec<f64>], opts: &ActionPeriodOptions) -> Result<ActionPeriod> {
    let mut best = ActionPeriod { eps0_upper: f64::INFINITY, witness: None };
    if !(opts.radius > 0.0) || opts.cells == 0 {
        return Ok(best);
    }
    let d = action.rank();
    let h = opts.radius / opts.cells as f64;
    let m = opts.cells as i64;
    let side = (2 * m + 1) as usize;
    let total = side.pow(d as u32);
    let index = |mut k: usize| -> Vec<i64> {
        let mut c = vec![0i64; d];
        for ci in c.iter_mut() {
            *ci = (k % side) as i64 - m;
            k /= side;
        }
        c
    };
    for x in samples {
        let mut dist = vec![f64::INFINITY; total];
        for k in 0..total {
            let c = index(k);
            let v: Vec<f64> = c.iter().map(|&ci| ci as f64 * h).collect();
            let r = norm2(&v);
            if r > opts.radius || r < 0.5 * h {
                continue;
            }
            dist[k] = action.domain().distance(&action.act(&v, x, &opts.integrator)?, x);
        }
        let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
        for k in 0..total {
            if !dist[k].is_finite() {
                continue;
            }
            let c = index(k);
            let is_min = (0..d).all(|axis| {
                [-1i64, 1].iter().all(|&step| {
                    let mut nb = c.clone();
                    nb[axis] += step;
                    if nb[axis].abs() > m {
                        return true;
                    }
                    let kk = nb.iter().rev().fold(0usize, |acc, &ci| acc * side + (ci + m) as usize);
                    !(dist[kk] < dist[k])
                })
            });
            if is_min {
                candidates.push((dist[k], c.iter().map(|&ci| ci as f64 * h).collect()));
            }
        }
        candidates.sort_by(|a, b| norm2(&a.1).total_cmp(&norm2(&b.1)));
        for (_, v0) in candidates {
            if norm2(&v0) - h > best.eps0_upper {
                break;
            }
            let mut err = None;
            let (v, f) = nelder_mead(
                |v| match action.act(v, x, &opts.integrator) {
                    Ok(y) => action.domain().distance(&y, x).powi(2),
                    Err(e) => {
                        err = Some(e);
                        f64::INFINITY
                    }
                },
                &v0,
                0.5 * h,
                1e-30,
                2000,
            );
            if let Some(e) = err {
                return Err(e);
            }
            let r = norm2(&v);
            if f.sqrt() <= opts.tol_close && r >= 0.5 * h && r < best.eps0_upper {
                best = ActionPeriod { eps0_upper: r, witness: Some(v) };
            }
        }
    }
    Ok(best)
}

/// Least-squares `A` with `[Y_1 ... Y_d](x) = [X_1 ... X_d](x) A`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ChangeOfBasis {
    pub a: Matrix,
    /// Frobenius norm of `X A - Y`: the part of the `Y`s transverse to the `X`s.
    pub residual: f64,
}

pub fn change_of_basis_a(xs: &[VectorFieldSpec], ys: &[VectorFieldSpec], x: &[f64], tol_rank: f64) -> Result<ChangeOfBasis> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::DimensionMismatch { expected: xs.len(), found: ys.len() });
    }
    let fx = frame(xs, x);
    let fy = frame(ys, x);
    let ls = lstsq(&fx, &fy, tol_rank).map_err(|e| match e {
        Error::Singular(_) => Error::RankDeficient(x.to_vec()),
        other => other,
    })?;
    Ok(ChangeOfBasis { a: ls.solution, residual: ls.residual })
}

/// Sampled `A(x)` with `Psi_v(x) = Phi(A(x) v, x)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ActionReparamMatrix {
    pub points: Vec<Vec<f64>>,
    pub matrices: Vec<Matrix>,
    /// Largest least-squares residual of the frames.
    pub frame_residual: f64,
    /// `max |A(Phi_v x) - A(x)|_F`.
    pub invariance_residual: f64,
    /// `max d(Psi_v x, Phi_{A(x) v} x)`.
    pub certification_residual: f64,
}

/// Requires `Phi`, `Psi` and the cross pairs to commute, then samples `A`.
pub fn action_reparam_field(
    phi: &ActionSpec,
    psi: &ActionSpec,
    samples: &[Vec<f64>],
    v_checks: &[Vec<f64>],
    tol_comm: f64,
    integrator: &IntegratorOptions,
) -> Result<ActionReparamMatrix> {
    if phi.rank() != psi.rank() || phi.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: phi.rank(), found: psi.rank() });
    }
    for gens in [&phi.generators, &psi.generators] {
        let r = verify_commuting(gens, samples, tol_comm, integrator)?;
        if !r.pass {
            return Err(Error::NotCommuting(r.bracket.max(r.flows)));
        }
    }
    for p in &phi.generators {
        for q in &psi.generators {
            let r = verify_commuting(&[p.clone(), q.clone()], samples, tol_comm, integrator)?;
            if !r.pass {
                return Err(Error::NotCommuting(r.bracket.max(r.flows)));
            }
        }
    }
    let domain = phi.domain();
    let mut out = ActionReparamMatrix {
        points: samples.to_vec(),
        matrices: Vec::new(),
        frame_residual: 0.0,
        invariance_residual: 0.0,
        certification_residual: 0.0,
    };
    for x in samples {
        let cb = change_of_basis_a(&phi.generators, &psi.generators, x, DEFAULT_TOL_RANK)?;
        out.frame_residual = out.frame_residual.max(cb.residual);
        for v in v_checks {
            let y = phi.act(v, x, integrator)?;
            let other = change_of_basis_a(&phi.generators, &psi.generators, &y, DEFAULT_TOL_RANK)?;
            out.invariance_residual = out.invariance_residual.max(other.a.sub(&cb.a)?.frobenius_norm());
            let av = cb.a.mul_vec(v)?;
            let lhs = psi.act(v, x, integrator)?;
            let rhs = phi.act(&av, x, integrator)?;
            out.certification_residual = out.certification_residual.max(domain.distance(&lhs, &rhs));
        }
        out.matrices.push(cb.a);
    }
    Ok(out)
}

/// Result for one direction `u_i` of [`collapse_to_flow`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DirectionCollapse {
    pub u: Vec<f64>,
    /// `A_i` at each sample, when the reparameterization pipeline succeeded.
    pub a: Option<Vec<f64>>,
    pub failure: Option<String>,
    /// Largest `|sin|` of the angle between `X_{u_i}` and `X_v` on the samples.
    pub max_sin_angle: f64,
    pub collinear: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Collapse {
    pub directions: Vec<DirectionCollapse>,
    /// Every direction is a time change of `X_v`: the orbits are one-dimensional.
    pub collinear: bool,
}

/// Treats `(Phi_{tv})` as the reference flow and recovers, for every `u_i`, the factor
/// `A_i` with `Phi_{t u_i}(x) = Phi_{A_i(x) t v}(x)`.
pub fn collapse_to_flow(
    action: &ActionSpec,
    v: &[f64],
    basis: &[Vec<f64>],
    samples: &[Vec<f64>],
    t_grid: &[f64],
    tol_angle: f64,
    opts: &ReparamOptions,
) -> Result<Collapse> {
    let xv = action.generator(v)?;
    let mut directions = Vec::new();
    for u in basis {
        let xu = action.generator(u)?;
        let mut max_sin: f64 = 0.0;
        for x in samples {
            let a = xv.eval(x);
            let b = xu.eval(x);
            let (na, nb) = (norm2(&a), norm2(&b));
            if na == 0.0 || nb == 0.0 {
                continue;
            }
            let c = (dot(&a, &b) / (na * nb)).clamp(-1.0, 1.0);
            max_sin = max_sin.max((1.0 - c * c).max(0.0).sqrt());
        }
        let attempt = LocalReparam::new(&xv, &xu, samples, opts).and_then(|local| {
            samples.iter().map(|x| local.estimate_a(x, t_grid).map(|r| r.0)).collect::<Result<Vec<f64>>>()
        });
        let (a, failure) = match attempt {
            Ok(a) => (Some(a), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let collinear = a.is_some() && max_sin <= tol_angle;
        directions.push(DirectionCollapse { u: u.clone(), a, failure, max_sin_angle: max_sin, collinear });
    }
    let collinear = directions.iter().all(|d| d.collinear);
    Ok(Collapse { directions, collinear })
}
