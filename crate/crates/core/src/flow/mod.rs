//! Flows of [`VectorFieldSpec`]s: an adaptive Dormand–Prince integrator, closed forms
//! for the kinds that have them, dense trajectories and the minimal-period probe.

mod dopri;
mod period;
mod trajectory;

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::field::{CircleMap, ScalarField, VectorFieldSpec};

pub use period::{min_period_probe, PeriodProbe, PeriodProbeOptions};
pub use trajectory::{orbit_segment, trajectory, Trajectory};

use dopri::{next_factor, Stepper};

/// Default mixed absolute/relative integrator tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Maximum number of roof crossings followed by the suspension closed form.
const MAX_CROSSINGS: usize = 10_000_000;

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Relative tolerance; the absolute tolerance is `tol * atol_scale`.
    pub tol: f64,
    pub atol_scale: f64,
    /// Upper bound on the step length (`INFINITY` for none).
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions { tol: DEFAULT_TOL, atol_scale: 1.0, h_max: f64::INFINITY, max_steps: 5_000_000 }
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        IntegratorOptions { tol, ..Self::default() }
    }

    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.atol_scale > 0.0) || !(self.h_max > 0.0) {
            return Err(Error::InvalidArgument("integrator tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// `phi_t(x0)` with default options and tolerance `tol`.
pub fn flow(field: &VectorFieldSpec, x0: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    flow_with(field, x0, t, &IntegratorOptions::with_tol(tol))
}

/// `phi_t(x0)`. Periodic coordinates of the result lie in `[0, 1)`.
pub fn flow_with(field: &VectorFieldSpec, x0: &[f64], t: f64, opts: &IntegratorOptions) -> Result<Vec<f64>> {
    if x0.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), found: x0.len() });
    }
    if !t.is_finite() || !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("flow input"));
    }
    opts.check()?;
    if let Some(y) = closed_form(field, x0, t)? {
        return Ok(y);
    }
    let domain = field.domain();
    let mut y = x0.to_vec();
    domain.wrap(&mut y);
    let y = integrate(field, &y, 0.0, t, opts, None, |_, _, _| ())?;
    let mut y = y;
    domain.wrap(&mut y);
    Ok(y)
}

/// Exact flows for constant fields (and their combinations), constant rescalings and
/// 1-D suspensions.
fn closed_form(field: &VectorFieldSpec, x0: &[f64], t: f64) -> Result<Option<Vec<f64>>> {
    if let Some((v, periodic)) = constant_velocity(field) {
        return Ok(Some(
            x0.iter()
                .zip(&v)
                .map(|(x, a)| if periodic { crate::field::wrap_unit(x + t * a) } else { x + t * a })
                .collect(),
        ));
    }
    Ok(match field {
        VectorFieldSpec::Suspension1d { map, roof } => Some(suspension1d_flow(map, roof, x0, t)?),
        VectorFieldSpec::Scaled { factor: ScalarField::Constant { value }, base } => {
            if *value == 0.0 {
                let mut y = x0.to_vec();
                base.domain().wrap(&mut y);
                Some(y)
            } else {
                closed_form(base, x0, value * t)?
            }
        }
        _ => None,
    })
}

/// Velocity of a constant field and whether it lives on the torus.
fn constant_velocity(field: &VectorFieldSpec) -> Option<(Vec<f64>, bool)> {
    match field {
        VectorFieldSpec::Constant { vector } => Some((vector.clone(), false)),
        VectorFieldSpec::TorusTranslation { alpha } => Some((alpha.clone(), true)),
        VectorFieldSpec::Scaled { factor: ScalarField::Constant { value }, base } => {
            constant_velocity(base).map(|(v, p)| (v.iter().map(|a| a * value).collect(), p))
        }
        VectorFieldSpec::Combination { terms } => {
            let mut acc: Option<(Vec<f64>, bool)> = None;
            for (c, f) in terms {
                let (v, p) = constant_velocity(f)?;
                match &mut acc {
                    None => acc = Some((v.iter().map(|a| a * c).collect(), p)),
                    Some((w, q)) => {
                        if *q != p || w.len() != v.len() {
                            return None;
                        }
                        crate::linalg::axpy(*c, &v, w);
                    }
                }
            }
            acc
        }
        _ => None,
    }
}

/// `phi_t(x, s) = (f^k(x), s + t - sum_j r(f^j x))` kept in the fundamental domain
/// `0 <= s < r(x)`.
pub fn suspension1d_flow(map: &CircleMap, roof: &ScalarField, p: &[f64], t: f64) -> Result<Vec<f64>> {
    if p.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: p.len() });
    }
    let mut x = crate::field::wrap_unit(p[0]);
    let mut s = p[1] + t;
    let mut r = roof.value(&[x]);
    if !(r > 0.0) {
        return Err(Error::InvalidArgument("roof must be positive".into()));
    }
    let mut crossings = 0;
    while s >= r {
        s -= r;
        x = map.apply(x);
        r = roof.value(&[x]);
        crossings += 1;
        if crossings > MAX_CROSSINGS {
            return Err(Error::NoConvergence { what: "suspension roof crossings", iterations: crossings });
        }
    }
    while s < 0.0 {
        x = map.apply_inverse(x);
        s += roof.value(&[x]);
        crossings += 1;
        if crossings > MAX_CROSSINGS {
            return Err(Error::NoConvergence { what: "suspension roof crossings", iterations: crossings });
        }
    }
    Ok(alloc::vec![x, s])
}

/// Adaptive integration from `t0` to `t1` without wrapping. `sink` sees every accepted
/// step as `(t, y, X(y))`, starting with the initial point. With `dense = Some(h)` the
/// step is capped at `h` and each step is also checked so that cubic Hermite
/// interpolation of the step agrees with a half step.
pub(crate) fn integrate<S: FnMut(f64, &[f64], &[f64])>(
    field: &VectorFieldSpec,
    y0: &[f64],
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
    dense: Option<f64>,
    mut sink: S,
) -> Result<Vec<f64>> {
    let atol = opts.tol * opts.atol_scale;
    let mut stepper = Stepper::new(field, opts.tol, atol);
    let mut y = y0.to_vec();
    let mut f = field.eval(&y);
    sink(t0, &y, &f);
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y);
    }
    let dir = span.signum();
    let h_cap = dense.unwrap_or(f64::INFINITY).min(opts.h_max);
    let mut h = stepper.initial_step(&y, &f, span).min(h_cap);
    let mut t = t0;
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::NoConvergence { what: "integrator", iterations: opts.max_steps });
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        let h_try = if last { remaining } else { h };
        if h_try <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t });
        }
        let step = stepper.step(&y, &f, dir * h_try);
        if !step.err.is_finite() || !step.y.iter().all(|v| v.is_finite()) {
            h = 0.25 * h_try;
            continue;
        }
        if step.err > 1.0 {
            h = h_try * next_factor(step.err).min(0.9);
            continue;
        }
        let mut factor = next_factor(step.err);
        if dense.is_some() {
            let half = stepper.step(&y, &f, 0.5 * dir * h_try);
            let mid: Vec<f64> = (0..y.len())
                .map(|i| 0.5 * (y[i] + step.y[i]) + 0.125 * dir * h_try * (f[i] - step.f[i]))
                .collect();
            let diff: Vec<f64> = mid.iter().zip(&half.y).map(|(a, b)| a - b).collect();
            let g = stepper.scaled_norm(&diff, &y);
            if g > 1.0 {
                h = h_try * (0.9 * g.powf(-0.25)).clamp(0.2, 0.9);
                continue;
            }
            factor = factor.min(if g == 0.0 { 5.0 } else { (0.9 * g.powf(-0.25)).clamp(0.2, 5.0) });
        }
        t = if last { t1 } else { t + dir * h_try };
        y = step.y;
        f = step.f;
        sink(t, &y, &f);
        h = (h_try * factor).min(h_cap);
    }
    Ok(y)
}
