//! Time changes between commuting flows.
//!
//! For `psi` in the centralizer of `phi`, every `psi`-orbit segment of a regular point
//! is a `phi`-orbit segment: `psi_s(x) = phi_{z(s, x)}(x)` for small `s`. The local
//! function `z` is found by matching along the orbit ([`LocalReparam::z`]), extended to
//! all times by dyadic concatenation ([`LocalReparam::extend`]) and reduced to the
//! orbit-invariant slope `A(x)` with `p(t, x) = A(x) t` ([`LocalReparam::estimate_a`]).

use alloc::string::ToString;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

pub use crate::field::lie_bracket;

use crate::error::{Error, Result};
use crate::field::VectorFieldSpec;
use crate::flow::{flow_with, orbit_segment, IntegratorOptions};
use crate::linalg::{dot, norm2};
use crate::minimize::golden_section;
use crate::spectra::SingularityReport;

/// Default orbit-matching tolerance (state-space units, scaled by `min(1, |X(x)|)`).
pub const DEFAULT_TOL_MATCH: f64 = 1e-8;
/// Default tolerance on the spread of `A` for a trivial verdict.
pub const DEFAULT_TOL_A: f64 = 1e-4;
/// `eps_cap` used when no finite period bound is known.
pub const DEFAULT_EPS_CAP: f64 = 0.5;
/// Smallest regular speed accepted.
pub const DEFAULT_TOL_REG: f64 = 1e-9;

/// Settings for [`LocalReparam::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReparamOptions {
    pub tol_match: f64,
    /// Upper bound on the minimal period (from [`crate::flow::min_period_probe`]).
    pub eps0: f64,
    /// Bound on `|z|`; must be below `eps0 / 3`. `None` picks `min(0.3 eps0, 0.5)`.
    pub eps_cap: Option<f64>,
    /// Window half-width; `None` selects it on the calibration points.
    pub mu: Option<f64>,
    /// Smallest window accepted by the automatic selection.
    pub mu_min: f64,
    pub tol_reg: f64,
    /// Grid cells in the coarse scan along the orbit.
    pub scan: usize,
    pub integrator: IntegratorOptions,
}

impl Default for ReparamOptions {
    fn default() -> Self {
        ReparamOptions {
            tol_match: DEFAULT_TOL_MATCH,
            eps0: f64::INFINITY,
            eps_cap: None,
            mu: None,
            mu_min: 1e-4,
            tol_reg: DEFAULT_TOL_REG,
            scan: 64,
            integrator: IntegratorOptions::with_tol(1e-12),
        }
    }
}

/// Local reparameterization `z(s, x)` of `psi` along `phi` for `|s| <= mu`.
#[derive(Debug, Clone)]
pub struct LocalReparam {
    phi: VectorFieldSpec,
    psi: VectorFieldSpec,
    mu: f64,
    eps_cap: f64,
    tol_match: f64,
    tol_reg: f64,
    scan: usize,
    integrator: IntegratorOptions,
}

impl LocalReparam {
    /// Fixes `eps_cap` and `mu`. Without an explicit `mu`, the window starts at
    /// `min(eps0 / 10, eps_cap)` and is halved until `z(+-mu, x)` matches with
    /// `|z| <= eps_cap / 2` at every calibration point, failing below `mu_min`.
    pub fn new(
        phi: &VectorFieldSpec,
        psi: &VectorFieldSpec,
        calibration: &[Vec<f64>],
        opts: &ReparamOptions,
    ) -> Result<Self> {
        if phi.dim() != psi.dim() {
            return Err(Error::DimensionMismatch { expected: phi.dim(), found: psi.dim() });
        }
        phi.validate()?;
        psi.validate()?;
        if !(opts.tol_match > 0.0) || !(opts.eps0 > 0.0) || opts.scan < 4 {
            return Err(Error::InvalidArgument("reparam options out of range".into()));
        }
        let eps_cap = opts.eps_cap.unwrap_or_else(|| (0.3 * opts.eps0).min(DEFAULT_EPS_CAP));
        if !(eps_cap > 0.0 && eps_cap < opts.eps0 / 3.0) {
            return Err(Error::Precondition(alloc::format!(
                "eps_cap {eps_cap} must lie in (0, eps0/3) with eps0 = {}",
                opts.eps0
            )));
        }
        let mut local = LocalReparam {
            phi: phi.clone(),
            psi: psi.clone(),
            mu: opts.mu.unwrap_or_else(|| (opts.eps0 / 10.0).min(eps_cap)),
            eps_cap,
            tol_match: opts.tol_match,
            tol_reg: opts.tol_reg,
            scan: opts.scan,
            integrator: opts.integrator,
        };
        if !(local.mu > 0.0) {
            return Err(Error::InvalidArgument("mu must be positive".into()));
        }
        if opts.mu.is_some() {
            return Ok(local);
        }
        while local.mu >= opts.mu_min {
            if local.window_fits(calibration) {
                return Ok(local);
            }
            local.mu *= 0.5;
        }
        Err(Error::Precondition(alloc::format!(
            "no window mu >= {} makes psi a small reparameterization of phi",
            opts.mu_min
        )))
    }

    fn window_fits(&self, calibration: &[Vec<f64>]) -> bool {
        calibration.iter().all(|x| {
            [self.mu, -self.mu]
                .iter()
                .all(|&s| matches!(self.z(s, x), Ok(z) if z.abs() <= 0.5 * self.eps_cap))
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eps_cap(&self) -> f64 {
        self.eps_cap
    }

    pub fn phi(&self) -> &VectorFieldSpec {
        &self.phi
    }

    pub fn psi(&self) -> &VectorFieldSpec {
        &self.psi
    }

    /// Smallest dyadic level `N` with `2^-N < mu`.
    pub fn base_level(&self) -> u32 {
        let mut n = 0;
        while 2f64.powi(-(n as i32)) >= self.mu {
            n += 1;
        }
        n
    }

    /// Integrator settings and matching scale at `x`: absolute tolerances shrink with
    /// `|X(x)|` so points close to a singularity are resolved.
    fn local_setup(&self, x: &[f64]) -> Result<(IntegratorOptions, f64)> {
        if x.len() != self.phi.dim() {
            return Err(Error::DimensionMismatch { expected: self.phi.dim(), found: x.len() });
        }
        let speed = norm2(&self.phi.eval(x));
        if !(speed > self.tol_reg) {
            return Err(Error::Precondition(alloc::format!("{x:?} is not a regular point (|X| = {speed:e})")));
        }
        let scale = speed.min(1.0);
        let mut opts = self.integrator;
        opts.atol_scale *= scale;
        Ok((opts, scale))
    }

    /// `z(s, x)`: the time `tau` with `|tau| < eps_cap` and `psi_s(x) = phi_tau(x)`.
    pub fn z(&self, s: f64, x: &[f64]) -> Result<f64> {
        self.z_in(s, x, -self.eps_cap, self.eps_cap)
    }

    /// [`LocalReparam::z`] with the search bracket restricted to `[lo, hi]`.
    pub fn z_in(&self, s: f64, x: &[f64], lo: f64, hi: f64) -> Result<f64> {
        self.z_and_image(s, x, lo, hi).map(|(z, _)| z)
    }

    fn z_and_image(&self, s: f64, x: &[f64], lo: f64, hi: f64) -> Result<(f64, Vec<f64>)> {
        if s.abs() > self.mu * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(alloc::format!("|s| = {} exceeds mu = {}", s.abs(), self.mu)));
        }
        if !(lo < hi) || lo < -self.eps_cap || hi > self.eps_cap {
            return Err(Error::InvalidArgument("bracket must lie inside (-eps_cap, eps_cap)".into()));
        }
        let (opts, scale) = self.local_setup(x)?;
        let y = flow_with(&self.psi, x, s, &opts)?;
        if s == 0.0 {
            return Ok((0.0, y));
        }
        let z = self.match_on_orbit(x, &y, lo, hi, &opts, scale, s)?;
        Ok((z, y))
    }

    /// Minimizes `tau -> d(phi_tau(x), y)` on `[lo, hi]`: coarse scan on a dense orbit
    /// segment, golden section, then Newton on `<phi_tau(x) - y, X(phi_tau(x))> = 0`.
    fn match_on_orbit(
        &self,
        x: &[f64],
        y: &[f64],
        lo: f64,
        hi: f64,
        opts: &IntegratorOptions,
        scale: f64,
        s: f64,
    ) -> Result<f64> {
        let phi = &self.phi;
        let dt = (hi - lo) / self.scan as f64;
        let seg = orbit_segment(phi, x, (-lo).max(0.0), hi.max(0.0), dt, opts)?;
        let dist = |tau: f64| seg.at(tau).map_or(f64::INFINITY, |p| phi.distance(&p, y));
        let (mut best, mut best_d) = (lo, f64::INFINITY);
        for k in 0..=self.scan {
            let tau = lo + k as f64 * dt;
            let d = dist(tau);
            if d < best_d {
                best = tau;
                best_d = d;
            }
        }
        let (mut tau, _) = golden_section(dist, (best - dt).max(lo), (best + dt).min(hi), 1e-14 * (1.0 + best.abs()));
        let domain = phi.domain();
        let newton = !matches!(phi, VectorFieldSpec::Suspension1d { .. });
        let mut p = flow_with(phi, x, tau, opts)?;
        if newton {
            for _ in 0..6 {
                let v = phi.eval(&p);
                let r = domain.displacement(y, &p);
                let step = dot(&r, &v) / dot(&v, &v);
                let next = tau - step;
                if !(next > lo - dt && next < hi + dt) {
                    break;
                }
                let q = flow_with(phi, x, next, opts)?;
                if phi.distance(&q, y) > phi.distance(&p, y) {
                    break;
                }
                tau = next;
                p = q;
                if step.abs() <= 1e-15 * (1.0 + tau.abs()) {
                    break;
                }
            }
        }
        let d = phi.distance(&p, y);
        let tol = self.tol_match * scale;
        if !(d <= tol) {
            return Err(Error::NoOrbitMatch { s, distance: d, tol });
        }
        if !(tau.abs() < self.eps_cap) {
            return Err(Error::Precondition(alloc::format!("|z| = {} reaches eps_cap = {}", tau.abs(), self.eps_cap)));
        }
        Ok(tau)
    }

    /// `z(t + s, x) - z(t, x) - z(s, psi_t(x))` for `t, s, t + s` in `[-mu, mu]`.
    pub fn cocycle_residual(&self, t: f64, s: f64, x: &[f64]) -> Result<f64> {
        let (zt, y) = self.z_and_image(t, x, -self.eps_cap, self.eps_cap)?;
        let zs = self.z(s, &y)?;
        let zts = self.z(t + s, x)?;
        Ok(zts - zt - zs)
    }

    /// `p(t, x)` at dyadic level [`LocalReparam::base_level`] + `extra_levels`:
    /// `p = z(t', x) + sum_{i=1}^{k} z(+-2^-N, psi(t -+ i 2^-N, x))` with
    /// `t = t' +- k 2^-N`.
    pub fn extend(&self, x: &[f64], t: f64, extra_levels: u32) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::NonFinite("extension time"));
        }
        let n = self.base_level() + extra_levels;
        let h = 2f64.powi(-(n as i32));
        let dir = if t < 0.0 { -1.0 } else { 1.0 };
        let k = (t.abs() / h).floor() as usize;
        let tp = t - dir * k as f64 * h;
        let fail = |step: usize, at: f64, e: Error| Error::ExtensionFailed { step, t: at, reason: e.to_string() };
        let (mut p, mut w) = self.z_and_image(tp, x, -self.eps_cap, self.eps_cap).map_err(|e| fail(0, tp, e))?;
        for j in 0..k {
            let (z, next) =
                self.z_and_image(dir * h, &w, -self.eps_cap, self.eps_cap).map_err(|e| fail(j + 1, tp + dir * (j as f64) * h, e))?;
            p += z;
            w = next;
        }
        Ok(p)
    }

    /// `d(psi_t(x), phi_p(x))` for a computed `p = p(t, x)`.
    pub fn extension_residual(&self, x: &[f64], t: f64, p: f64) -> Result<f64> {
        let a = flow_with(&self.psi, x, t, &self.integrator)?;
        let b = flow_with(&self.phi, x, p, &self.integrator)?;
        Ok(self.phi.distance(&a, &b))
    }

    /// Least-squares slope `A` of `p(t, x)` against `t` (through the origin) and the
    /// linearity residual `max |p(t, x) - A t|`.
    pub fn estimate_a(&self, x: &[f64], t_grid: &[f64]) -> Result<(f64, f64)> {
        let ts: Vec<f64> = t_grid.iter().copied().filter(|t| *t != 0.0).collect();
        if ts.is_empty() {
            return Err(Error::InvalidArgument("t grid needs a nonzero time".into()));
        }
        let ps = ts.iter().map(|&t| self.extend(x, t, 0)).collect::<Result<Vec<f64>>>()?;
        let a = dot(&ps, &ts) / dot(&ts, &ts);
        let res = ps.iter().zip(&ts).map(|(p, t)| (p - a * t).abs()).fold(0.0, f64::max);
        Ok((a, res))
    }

    /// `max |A(phi_t x) - A(x)|` over samples and `t_checks`.
    pub fn verify_orbit_invariance(&self, samples: &[Vec<f64>], t_checks: &[f64], t_grid: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for x in samples {
            let (a, _) = self.estimate_a(x, t_grid)?;
            for &t in t_checks {
                let y = flow_with(&self.phi, x, t, &self.integrator)?;
                let (b, _) = self.estimate_a(&y, t_grid)?;
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }

    /// `max |p(t, x) - p(t, phi_s x)|` over the given times.
    pub fn p_invariance_residual(&self, x: &[f64], ts: &[f64], ss: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &s in ss {
            let y = flow_with(&self.phi, x, s, &self.integrator)?;
            for &t in ts {
                worst = worst.max((self.extend(x, t, 0)? - self.extend(&y, t, 0)?).abs());
            }
        }
        Ok(worst)
    }
}

/// Outcome of [`triviality_verdict`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(tag = "verdict", rename_all = "snake_case"))]
pub enum Verdict {
    Trivial { c: f64 },
    QuasiTrivial,
    Inconclusive,
}

/// Sampled `A(x)` with residuals.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ReparamField {
    pub points: Vec<Vec<f64>>,
    pub a: Vec<f64>,
    /// Per-point linearity residual.
    pub linearity: Vec<f64>,
    /// Per-point `max_t |A(phi_t x) - A(x)|`.
    pub invariance: Vec<f64>,
    pub orbit_invariance_residual: f64,
    pub linearity_residual: f64,
    pub verdict: Verdict,
}

/// Thresholds for [`reparam_field`] and [`triviality_verdict`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictOptions {
    pub tol_a: f64,
    pub tol_invariance: f64,
    pub tol_linearity: f64,
    /// Stable manifolds of singularities are known to be dense: the time change must
    /// then be constant, so a varying `A` is reported as inconclusive.
    pub stable_manifold_dense: bool,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        VerdictOptions { tol_a: DEFAULT_TOL_A, tol_invariance: 1e-4, tol_linearity: 1e-4, stable_manifold_dense: false }
    }
}

/// Trivial when every sampled `A` lies within `tol_a` of one constant, quasi-trivial
/// when the residuals are small but `A` varies, inconclusive otherwise.
pub fn triviality_verdict(a: &[f64], invariance: f64, linearity: f64, opts: &VerdictOptions) -> Verdict {
    if a.is_empty() || !(invariance <= opts.tol_invariance) || !(linearity <= opts.tol_linearity) {
        return Verdict::Inconclusive;
    }
    let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    if hi - mid <= opts.tol_a {
        Verdict::Trivial { c: mid }
    } else if opts.stable_manifold_dense {
        Verdict::Inconclusive
    } else {
        Verdict::QuasiTrivial
    }
}

/// `A` on every sample, orbit invariance along `phi_t` for `t_checks`, and a verdict.
pub fn reparam_field(
    local: &LocalReparam,
    samples: &[Vec<f64>],
    t_grid: &[f64],
    t_checks: &[f64],
    opts: &VerdictOptions,
) -> Result<ReparamField> {
    let mut a = Vec::with_capacity(samples.len());
    let mut linearity = Vec::with_capacity(samples.len());
    let mut invariance = Vec::with_capacity(samples.len());
    for x in samples {
        let (ax, rx) = local.estimate_a(x, t_grid)?;
        let mut inv: f64 = 0.0;
        for &t in t_checks {
            let y = flow_with(&local.phi, x, t, &local.integrator)?;
            let (ay, _) = local.estimate_a(&y, t_grid)?;
            inv = inv.max((ay - ax).abs());
        }
        a.push(ax);
        linearity.push(rx);
        invariance.push(inv);
    }
    let lin = linearity.iter().copied().fold(0.0, f64::max);
    let inv = invariance.iter().copied().fold(0.0, f64::max);
    let verdict = triviality_verdict(&a, inv, lin, opts);
    Ok(ReparamField {
        points: samples.to_vec(),
        a,
        linearity,
        invariance,
        orbit_invariance_residual: inv,
        linearity_residual: lin,
        verdict,
    })
}

/// Residuals of the two commutation tests.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CommutationCheck {
    /// `max |[X, Y](x)|` on the samples.
    pub bracket: f64,
    /// `max d(psi_s phi_t x, phi_t psi_s x)`.
    pub flows: f64,
    pub commuting: bool,
}

/// Bracket and flow-commutation residuals; `commuting` when both are at most `tol`.
pub fn commutation_check(
    phi: &VectorFieldSpec,
    psi: &VectorFieldSpec,
    samples: &[Vec<f64>],
    times: &[(f64, f64)],
    tol: f64,
    integrator: &IntegratorOptions,
) -> Result<CommutationCheck> {
    let mut bracket: f64 = 0.0;
    let mut flows: f64 = 0.0;
    for x in samples {
        bracket = bracket.max(norm2(&lie_bracket(phi, psi, x)?));
        for &(s, t) in times {
            let a = flow_with(psi, &flow_with(phi, x, t, integrator)?, s, integrator)?;
            let b = flow_with(phi, &flow_with(psi, x, s, integrator)?, t, integrator)?;
            flows = flows.max(phi.distance(&a, &b));
        }
    }
    Ok(CommutationCheck { bracket, flows, commuting: bracket <= tol && flows <= tol })
}

/// `A` along approach families to a singularity.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SingularityExtension {
    pub a_at_sigma: f64,
    pub spread: f64,
    pub stable_mean: Option<f64>,
    pub unstable_mean: Option<f64>,
    /// `(distance, A)` per approach point.
    pub stable_samples: Vec<(f64, f64)>,
    pub unstable_samples: Vec<(f64, f64)>,
}

/// Evaluates `A` at `sigma +- 10^-k v` for `k = 1..=levels` (floor `1e-6`) and every
/// basis vector `v` of the stable and unstable bundles.
pub fn singularity_extension_check(
    local: &LocalReparam,
    report: &SingularityReport,
    levels: u32,
    t_grid: &[f64],
) -> Result<SingularityExtension> {
    if !report.hyperbolic {
        return Err(Error::Precondition("singularity is not hyperbolic".into()));
    }
    if !report.is_nonresonant() {
        return Err(Error::Precondition("singularity is resonant; continuity of A is not guaranteed".into()));
    }
    let sample = |basis: &[Vec<f64>]| -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::new();
        for v in basis {
            for k in 1..=levels.clamp(1, 6) {
                let r = 10f64.powi(-(k as i32));
                for sign in [1.0, -1.0] {
                    let x: Vec<f64> = report.location.iter().zip(v).map(|(c, vi)| c + sign * r * vi).collect();
                    out.push((r, local.estimate_a(&x, t_grid)?.0));
                }
            }
        }
        Ok(out)
    };
    let stable_samples = sample(&report.stable_basis)?;
    let unstable_samples = sample(&report.unstable_basis)?;
    let mean = |s: &[(f64, f64)]| (!s.is_empty()).then(|| s.iter().map(|p| p.1).sum::<f64>() / s.len() as f64);
    let all: Vec<f64> = stable_samples.iter().chain(&unstable_samples).map(|p| p.1).collect();
    let a_at_sigma = all.iter().sum::<f64>() / all.len() as f64;
    let spread = all.iter().map(|a| (a - a_at_sigma).abs()).fold(0.0, f64::max);
    Ok(SingularityExtension {
        a_at_sigma,
        spread,
        stable_mean: mean(&stable_samples),
        unstable_mean: mean(&unstable_samples),
        stable_samples,
        unstable_samples,
    })
}
