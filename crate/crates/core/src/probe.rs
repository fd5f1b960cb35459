//! Finite-resolution falsifiers for C-, K-, Komuro-, kinematic and `R^d`-action
//! expansiveness.
//!
//! Every probe compares two orbits under a time change found by a sup-cost monotone
//! alignment ([`monotone_match`]). A probe can only falsify: an empty report means
//! "no violation at resolution (T, delta, grid)".

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

#[allow(unused_imports)]
use num_traits::Float;

use crate::actions::ActionSpec;
use crate::error::{Error, Result};
use crate::field::VectorFieldSpec;
use crate::flow::{flow_with, orbit_segment, IntegratorOptions};
use crate::linalg::norm2;
use crate::minimize::{golden_section, nelder_mead, scan_then_golden};

/// A continuous `R^d`-action seen through its time maps and a distance.
pub trait Action {
    type Point: Clone + Debug;

    fn rank(&self) -> usize;

    /// `Phi_v(p)`.
    fn act(&self, v: &[f64], p: &Self::Point) -> Result<Self::Point>;

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64;

    /// `Phi_{s u}(p)` at `s = start + k dt`, `k = 0..=n`.
    fn line_orbit(&self, p: &Self::Point, u: &[f64], start: f64, dt: f64, n: usize) -> Result<Vec<Self::Point>> {
        (0..=n)
            .map(|k| {
                let s = start + k as f64 * dt;
                let v: Vec<f64> = u.iter().map(|c| c * s).collect();
                self.act(&v, p)
            })
            .collect()
    }

    /// Whether single evaluations of `act` are cheap (closed form), so orbits can be
    /// sampled lazily.
    fn cheap_act(&self) -> bool {
        false
    }

    /// The same action evaluated `factor` times more accurately.
    fn tightened(&self, factor: f64) -> Self
    where
        Self: Sized;
}

/// The flow of a catalog vector field.
#[derive(Debug, Clone)]
pub struct FieldFlow<'a> {
    pub field: &'a VectorFieldSpec,
    pub integrator: IntegratorOptions,
}

impl<'a> FieldFlow<'a> {
    pub fn new(field: &'a VectorFieldSpec) -> Self {
        FieldFlow { field, integrator: IntegratorOptions::default() }
    }
}

fn sampled_field_orbit(
    field: &VectorFieldSpec,
    p: &[f64],
    c: f64,
    start: f64,
    dt: f64,
    n: usize,
    opts: &IntegratorOptions,
) -> Result<Vec<Vec<f64>>> {
    let times: Vec<f64> = (0..=n).map(|k| c * (start + k as f64 * dt)).collect();
    let lo = times.iter().copied().fold(0.0, f64::min);
    let hi = times.iter().copied().fold(0.0, f64::max);
    if hi - lo == 0.0 {
        let mut x = p.to_vec();
        field.domain().wrap(&mut x);
        return Ok(vec![x; n + 1]);
    }
    let tr = orbit_segment(field, p, -lo, hi, dt * c.abs().max(1e-3), opts)?;
    times.iter().map(|&t| tr.at(t)).collect()
}

impl Action for FieldFlow<'_> {
    type Point = Vec<f64>;

    fn rank(&self) -> usize {
        1
    }

    fn act(&self, v: &[f64], p: &Vec<f64>) -> Result<Vec<f64>> {
        flow_with(self.field, p, v[0], &self.integrator)
    }

    fn distance(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        self.field.distance(a, b)
    }

    fn line_orbit(&self, p: &Vec<f64>, u: &[f64], start: f64, dt: f64, n: usize) -> Result<Vec<Vec<f64>>> {
        sampled_field_orbit(self.field, p, u[0], start, dt, n, &self.integrator)
    }

    fn tightened(&self, factor: f64) -> Self {
        FieldFlow { field: self.field, integrator: IntegratorOptions { tol: self.integrator.tol / factor, ..self.integrator } }
    }
}

/// An [`ActionSpec`] evaluated by integration.
#[derive(Debug, Clone)]
pub struct SpecAction<'a> {
    pub action: &'a ActionSpec,
    pub integrator: IntegratorOptions,
}

impl<'a> SpecAction<'a> {
    pub fn new(action: &'a ActionSpec) -> Self {
        SpecAction { action, integrator: IntegratorOptions::default() }
    }
}

impl Action for SpecAction<'_> {
    type Point = Vec<f64>;

    fn rank(&self) -> usize {
        self.action.rank()
    }

    fn act(&self, v: &[f64], p: &Vec<f64>) -> Result<Vec<f64>> {
        self.action.act(v, p, &self.integrator)
    }

    fn distance(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        self.action.generators[0].distance(a, b)
    }

    fn line_orbit(&self, p: &Vec<f64>, u: &[f64], start: f64, dt: f64, n: usize) -> Result<Vec<Vec<f64>>> {
        let scale = norm2(u);
        if scale == 0.0 {
            return sampled_field_orbit(&self.action.generators[0], p, 0.0, start, dt, n, &self.integrator);
        }
        let unit: Vec<f64> = u.iter().map(|c| c / scale).collect();
        let field = self.action.generator(&unit)?;
        sampled_field_orbit(&field, p, scale, start, dt, n, &self.integrator)
    }

    fn tightened(&self, factor: f64) -> Self {
        SpecAction { action: self.action, integrator: IntegratorOptions { tol: self.integrator.tol / factor, ..self.integrator } }
    }
}

/// Which time changes an alignment may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum MatchMode {
    /// `h = id`.
    Identity,
    /// Nondecreasing `h` with `h(0) = 0`.
    MonotoneFix0,
    /// Any nondecreasing `h`.
    MonotoneFree,
}

/// Orbit samples at `start + k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledOrbit<P> {
    pub start: f64,
    pub dt: f64,
    pub points: Vec<P>,
}

impl<P> SampledOrbit<P> {
    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of `t = 0`, if it lies on the grid.
    fn zero_index(&self) -> Option<usize> {
        let k = (-self.start / self.dt).round();
        (k >= 0.0 && (k as usize) < self.points.len() && (self.start + k * self.dt).abs() <= 1e-9 * self.dt)
            .then_some(k as usize)
    }
}

/// Alignment of two sampled orbits.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MatchResult {
    /// Sup over aligned pairs of the state distance.
    pub cost: f64,
    /// `(t_k, h(t_k))`, one per sample of the first orbit.
    pub breakpoints: Vec<(f64, f64)>,
    pub mode: MatchMode,
}

impl MatchResult {
    /// Structural check: `t` strictly increasing, `h` nondecreasing, pins honoured.
    pub fn is_valid(&self) -> bool {
        let monotone = self.breakpoints.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1);
        let pinned = match self.mode {
            MatchMode::MonotoneFree => true,
            MatchMode::MonotoneFix0 => self.breakpoints.iter().any(|&(t, h)| t.abs() < 1e-9 && h.abs() < 1e-9),
            MatchMode::Identity => self.breakpoints.iter().all(|&(t, h)| (t - h).abs() < 1e-9),
        };
        monotone && pinned && self.cost >= 0.0
    }

    /// Piecewise-linear `h`, extended with slope one beyond the breakpoints.
    pub fn h(&self, t: f64) -> f64 {
        let b = &self.breakpoints;
        match b.len() {
            0 => t,
            _ if t <= b[0].0 => b[0].1 + (t - b[0].0),
            n if t >= b[n - 1].0 => b[n - 1].1 + (t - b[n - 1].0),
            _ => {
                let k = b.partition_point(|&(s, _)| s <= t) - 1;
                let (t0, h0) = b[k];
                let (t1, h1) = b[k + 1];
                h0 + (h1 - h0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// Offset `o` with `y` index `j` at the time of `x` index `j + o`; errors when the grids differ.
fn grid_offset<P>(x: &SampledOrbit<P>, y: &SampledOrbit<P>) -> Result<i64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::GridMismatch("empty orbit".into()));
    }
    if !(x.dt > 0.0) || (x.dt - y.dt).abs() > 1e-12 * x.dt {
        return Err(Error::GridMismatch(alloc::format!("steps {} and {}", x.dt, y.dt)));
    }
    let o = (y.start - x.start) / x.dt;
    if (o - o.round()).abs() > 1e-6 {
        return Err(Error::GridMismatch("grids are not aligned".into()));
    }
    Ok(o.round() as i64)
}

fn pin<P>(x: &SampledOrbit<P>, y: &SampledOrbit<P>, mode: MatchMode) -> Result<Option<(usize, usize)>> {
    if mode != MatchMode::MonotoneFix0 {
        return Ok(None);
    }
    match (x.zero_index(), y.zero_index()) {
        (Some(i), Some(j)) => Ok(Some((i, j))),
        _ => Err(Error::GridMismatch("both orbits must be sampled at t = 0".into())),
    }
}

fn identity_pairs<P>(x: &SampledOrbit<P>, y: &SampledOrbit<P>) -> Result<Vec<(usize, usize)>> {
    let o = grid_offset(x, y)?;
    (0..x.len())
        .map(|i| {
            let j = i as i64 - o;
            if j < 0 || j as usize >= y.len() {
                Err(Error::GridMismatch("second orbit does not cover the first".into()))
            } else {
                Ok((i, j as usize))
            }
        })
        .collect()
}

/// Whether some alignment of `mode` keeps every aligned distance below `threshold`.
///
/// Row-by-row reachability with early exit; distances are evaluated only on
/// reachable cells.
pub fn match_feasible<P, D: Fn(&P, &P) -> f64>(
    x: &SampledOrbit<P>,
    y: &SampledOrbit<P>,
    mode: MatchMode,
    dist: D,
    threshold: f64,
) -> Result<bool> {
    grid_offset(x, y)?;
    if mode == MatchMode::Identity {
        for (i, j) in identity_pairs(x, y)? {
            if !(dist(&x.points[i], &y.points[j]) < threshold) {
                return Ok(false);
            }
        }
        return Ok(true);
    }
    let pinned = pin(x, y, mode)?;
    let (n, m) = (x.len(), y.len());
    let mut prev = vec![false; m];
    let mut cur = vec![false; m];
    for i in 0..n {
        let mut any = false;
        for j in 0..m {
            let reach = match pinned {
                Some((pi, pj)) if i == pi => {
                    if j < pj {
                        false
                    } else if j == pj {
                        i == 0 || prev[j] || (j > 0 && prev[j - 1])
                    } else {
                        cur[j - 1]
                    }
                }
                Some((pi, _)) if i > pi => prev[j] || (j > 0 && (prev[j - 1] || cur[j - 1])),
                _ => i == 0 || prev[j] || (j > 0 && (prev[j - 1] || cur[j - 1])),
            };
            cur[j] = reach && dist(&x.points[i], &y.points[j]) < threshold;
            any |= cur[j];
        }
        if !any {
            return Ok(false);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    Ok(true)
}

/// Sup-cost monotone alignment of two orbits sampled on a common grid.
///
/// Exact on the grid: a bottleneck dynamic program over staircase paths that visit
/// every sample of `x`; the path may start and end anywhere in `y`. `Identity`
/// pins the diagonal, `MonotoneFix0` forces the path through the `t = 0` cell.
pub fn monotone_match<P, D: Fn(&P, &P) -> f64>(
    x: &SampledOrbit<P>,
    y: &SampledOrbit<P>,
    mode: MatchMode,
    dist: D,
) -> Result<MatchResult> {
    grid_offset(x, y)?;
    if mode == MatchMode::Identity {
        let mut cost = 0.0f64;
        let mut breakpoints = Vec::with_capacity(x.len());
        for (i, j) in identity_pairs(x, y)? {
            cost = cost.max(dist(&x.points[i], &y.points[j]));
            breakpoints.push((x.time(i), x.time(i)));
        }
        return Ok(MatchResult { cost, breakpoints, mode });
    }
    let pinned = pin(x, y, mode)?;
    let (n, m) = (x.len(), y.len());
    let inf = f64::INFINITY;
    let mut best = vec![inf; n * m];
    // 0 start, 1 from (i-1, j), 2 from (i-1, j-1), 3 from (i, j-1)
    let mut from = vec![0u8; n * m];
    for i in 0..n {
        for j in 0..m {
            let up = if i > 0 { best[(i - 1) * m + j] } else { inf };
            let diag = if i > 0 && j > 0 { best[(i - 1) * m + j - 1] } else { inf };
            let left = if j > 0 { best[i * m + j - 1] } else { inf };
            let (allow_start, allow_prev_row) = match pinned {
                Some((pi, pj)) if i == pi => {
                    if j < pj {
                        continue;
                    }
                    (i == 0 && j == pj, j == pj)
                }
                Some((pi, _)) => (i == 0 && i < pi, true),
                None => (i == 0, true),
            };
            let mut b = inf;
            let mut f = 0u8;
            if allow_start {
                b = f64::NEG_INFINITY;
            }
            if allow_prev_row {
                if up < b {
                    b = up;
                    f = 1;
                }
                if diag < b {
                    b = diag;
                    f = 2;
                }
            }
            if left < b {
                b = left;
                f = 3;
            }
            if b == inf {
                continue;
            }
            let c = dist(&x.points[i], &y.points[j]);
            best[i * m + j] = c.max(b);
            from[i * m + j] = f;
        }
    }
    let (mut j, cost) = (0..m)
        .map(|j| (j, best[(n - 1) * m + j]))
        .fold((0, inf), |acc, (j, b)| if b < acc.1 { (j, b) } else { acc });
    if cost == inf {
        return Err(Error::GridMismatch("no admissible alignment".into()));
    }
    let mut row_j = vec![usize::MAX; n];
    let mut i = n - 1;
    loop {
        row_j[i] = j;
        match from[i * m + j] {
            0 => break,
            1 => i -= 1,
            2 => {
                i -= 1;
                j -= 1;
            }
            _ => j -= 1,
        }
    }
    if let Some((pi, pj)) = pinned {
        row_j[pi] = pj;
    }
    let o = (y.start - x.start) / x.dt;
    let breakpoints = (0..n).map(|i| (x.time(i), x.start + (row_j[i] as f64 + o) * x.dt)).collect();
    Ok(MatchResult { cost, breakpoints, mode })
}

/// Expansiveness notion under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Notion {
    Komuro,
    Kinematic,
    C,
    Action,
}

impl Notion {
    pub fn mode(self) -> MatchMode {
        match self {
            Notion::Komuro => MatchMode::MonotoneFree,
            Notion::Kinematic => MatchMode::Identity,
            Notion::C | Notion::Action => MatchMode::MonotoneFix0,
        }
    }
}

/// Probe resolution and thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOptions {
    pub epsilon: f64,
    pub delta: f64,
    /// Window `[-back, horizon]` along each axis.
    pub horizon: f64,
    /// `None` means `horizon`.
    pub back: Option<f64>,
    pub dt: f64,
    /// Extra time sampled on the second orbit; `None` means `epsilon`.
    pub margin: Option<f64>,
    /// Separation margins at or below this do not count.
    pub tol_sep: f64,
    /// Samples per axis of the `v`-grid used for rank at least two.
    pub grid_points: usize,
    pub revalidation_factor: f64,
}

impl ProbeOptions {
    pub fn new(epsilon: f64, delta: f64, horizon: f64) -> Self {
        ProbeOptions {
            epsilon,
            delta,
            horizon,
            back: None,
            dt: 0.05,
            margin: None,
            tol_sep: 1e-6,
            grid_points: 41,
            revalidation_factor: 10.0,
        }
    }

    fn check(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.delta > 0.0
            && self.horizon > 0.0
            && self.dt > 0.0
            && self.back.is_none_or(|b| b >= 0.0)
            && self.margin.is_none_or(|m| m >= 0.0)
            && self.tol_sep >= 0.0
            && self.revalidation_factor >= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("probe options need positive epsilon, delta, horizon, dt".into()))
        }
    }

    fn back_steps(&self) -> usize {
        (self.back.unwrap_or(self.horizon) / self.dt).round() as usize
    }

    fn forward_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn margin_steps(&self) -> usize {
        (self.margin.unwrap_or(self.epsilon) / self.dt).ceil() as usize
    }

    /// Human-readable resolution label for a clean report.
    pub fn resolution_label(&self) -> String {
        alloc::format!(
            "no violation at resolution (T = {}, delta = {}, grid = {})",
            self.horizon, self.delta, self.dt
        )
    }
}

/// A pair of orbits that stay `delta`-close under an admissible time change while
/// the conclusion of the definition fails by a positive margin.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Counterexample<P> {
    pub notion: Notion,
    pub mode: MatchMode,
    pub x: P,
    pub y: P,
    pub horizon: f64,
    /// One alignment per axis.
    pub alignment: Vec<MatchResult>,
    /// Achieved sup distance, below `delta`.
    pub closeness: f64,
    pub delta: f64,
    /// Achieved separation margin.
    pub separation: f64,
    /// Where the separation minimum sits: `[t0, s]` for Komuro, `t0` or `v0` otherwise.
    pub separation_at: Vec<f64>,
}

/// Outcome of a probe sweep.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ProbeReport<P> {
    pub notion: Notion,
    pub counterexample: Option<Counterexample<P>>,
    pub pairs_tested: usize,
    /// Pairs whose orbits stayed `delta`-close.
    pub close_pairs: usize,
    /// Candidates that did not survive revalidation.
    pub discarded: usize,
    pub horizon: f64,
    pub delta: f64,
    pub dt: f64,
}

impl<P> ProbeReport<P> {
    pub fn found(&self) -> bool {
        self.counterexample.is_some()
    }
}

/// Fresh recomputation of a counterexample.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Revalidation {
    pub closeness: f64,
    pub separation: f64,
    pub holds: bool,
}

fn axis(d: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[i] = 1.0;
    e
}

type OrbitPair<P> = (SampledOrbit<P>, SampledOrbit<P>);

/// Orbits of `x` and `y` along `u` on the probe windows.
fn windows<A: Action>(
    action: &A,
    x: &A::Point,
    y: &A::Point,
    u: &[f64],
    opts: &ProbeOptions,
) -> Result<OrbitPair<A::Point>> {
    let (nb, nf, nm) = (opts.back_steps(), opts.forward_steps(), opts.margin_steps());
    let xs = -(nb as f64) * opts.dt;
    let ys = -((nb + nm) as f64) * opts.dt;
    let xo = action.line_orbit(x, u, xs, opts.dt, nb + nf)?;
    let yo = action.line_orbit(y, u, ys, opts.dt, nb + nf + 2 * nm)?;
    Ok((
        SampledOrbit { start: xs, dt: opts.dt, points: xo },
        SampledOrbit { start: ys, dt: opts.dt, points: yo },
    ))
}

/// `min_{|t0| < eps} d(y, Phi_{t0 u} x)` with its minimizer.
fn orbit_arc_gap<A: Action>(action: &A, x: &A::Point, y: &A::Point, u: &[f64], opts: &ProbeOptions) -> (f64, f64) {
    let eps = opts.epsilon;
    let n = ((2.0 * eps / opts.dt).ceil() as usize).max(8);
    let f = |t: f64| {
        let v: Vec<f64> = u.iter().map(|c| c * t).collect();
        action.act(&v, x).map_or(f64::INFINITY, |p| action.distance(&p, y))
    };
    let (t, g) = scan_then_golden(f, -eps, eps, n, 1e-10 * eps.max(1.0));
    (g, t)
}

/// Komuro margin `min_{t0} d(phi_{h(t0)} y, phi_{[t0 - eps, t0 + eps]} x)` over the grid,
/// refined around the smallest rows.
fn komuro_gap<A: Action>(
    action: &A,
    x: &A::Point,
    xo: &SampledOrbit<A::Point>,
    yo: &SampledOrbit<A::Point>,
    m: &MatchResult,
    opts: &ProbeOptions,
) -> (f64, f64, f64) {
    let w = (opts.epsilon / opts.dt).floor() as usize;
    let mut rows: Vec<(f64, usize, usize, usize)> = Vec::with_capacity(xo.len());
    for (i, &(_, h)) in m.breakpoints.iter().enumerate() {
        let j = ((h - yo.start) / yo.dt).round() as usize;
        let (lo, hi) = (i.saturating_sub(w), (i + w).min(xo.len() - 1));
        let (k, g) = (lo..=hi)
            .map(|k| (k, action.distance(&xo.points[k], &yo.points[j])))
            .fold((lo, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        rows.push((g, i, j, k));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &(g, i, j, k) in rows.iter().take(3) {
        let t0 = xo.time(i);
        let (lo, hi) = ((xo.time(k) - opts.dt).max(t0 - opts.epsilon), (xo.time(k) + opts.dt).min(t0 + opts.epsilon));
        let target = &yo.points[j];
        let (s, r) = golden_section(
            |s| action.act(&[s], x).map_or(f64::INFINITY, |p| action.distance(&p, target)),
            lo,
            hi,
            1e-10 * (1.0 + hi.abs()),
        );
        let (s, r) = if r < g { (s, r) } else { (xo.time(k), g) };
        if r < best.0 {
            best = (r, t0, s);
        }
    }
    best
}

/// `min_{|v0| < eps} d(Phi_{v0} x, y)` over a ball grid, refined by Nelder-Mead.
fn ball_gap<A: Action>(action: &A, x: &A::Point, y: &A::Point, opts: &ProbeOptions) -> (f64, Vec<f64>) {
    let d = action.rank();
    let eps = opts.epsilon;
    let k = 8i64;
    let side = (2 * k + 1) as usize;
    let total = side.pow(d as u32);
    let f = |v: &[f64]| {
        if norm2(v) >= eps {
            return f64::INFINITY;
        }
        action.act(v, x).map_or(f64::INFINITY, |p| action.distance(&p, y))
    };
    let mut best = (f64::INFINITY, vec![0.0; d]);
    for idx in 0..total {
        let mut r = idx;
        let v: Vec<f64> = (0..d)
            .map(|_| {
                let c = (r % side) as i64 - k;
                r /= side;
                eps * c as f64 / (k as f64 + 0.5)
            })
            .collect();
        let g = f(&v);
        if g < best.0 {
            best = (g, v);
        }
    }
    let (v, g) = nelder_mead(f, &best.1, eps / (4.0 * k as f64), 1e-14, 400);
    if g < best.0 {
        best = (g, v);
    }
    best
}

/// Staircase reachability from the corner `(0, 0)` to the last row.
fn reach_last_row<F: FnMut(usize, usize) -> bool>(rows: usize, cols: usize, mut close: F) -> bool {
    let mut prev = vec![false; cols];
    let mut cur = vec![false; cols];
    for r in 0..rows {
        let mut any = false;
        for c in 0..cols {
            let reach = if r == 0 { c == 0 || (c > 0 && cur[c - 1]) } else { prev[c] || (c > 0 && (prev[c - 1] || cur[c - 1])) };
            cur[c] = reach && close(r, c);
            any |= cur[c];
        }
        if !any {
            return false;
        }
        core::mem::swap(&mut prev, &mut cur);
        cur.iter_mut().for_each(|b| *b = false);
    }
    true
}

/// Orbit samples computed on first use.
struct LazyLine<'a, A: Action> {
    action: &'a A,
    p: &'a A::Point,
    u: &'a [f64],
    start: f64,
    dt: f64,
    pts: Vec<Option<A::Point>>,
}

impl<'a, A: Action> LazyLine<'a, A> {
    fn new(action: &'a A, p: &'a A::Point, u: &'a [f64], start: f64, dt: f64, n: usize) -> Self {
        LazyLine { action, p, u, start, dt, pts: vec![None; n] }
    }

    fn get(&mut self, k: usize) -> Result<&A::Point> {
        if self.pts[k].is_none() {
            let s = self.start + k as f64 * self.dt;
            let v: Vec<f64> = self.u.iter().map(|c| c * s).collect();
            self.pts[k] = Some(self.action.act(&v, self.p)?);
        }
        Ok(self.pts[k].as_ref().expect("just filled"))
    }
}

/// Same answer as [`match_feasible`] on the probe windows for the pinned modes, but
/// grows outward from the `t = 0` cell and samples the orbits only where needed.
fn lazy_feasible<A: Action>(
    action: &A,
    x: &A::Point,
    y: &A::Point,
    u: &[f64],
    mode: MatchMode,
    opts: &ProbeOptions,
) -> Result<bool> {
    let (nb, nf, nm) = (opts.back_steps(), opts.forward_steps(), opts.margin_steps());
    let mut xl = LazyLine::new(action, x, u, -(nb as f64) * opts.dt, opts.dt, nb + nf + 1);
    let mut yl = LazyLine::new(action, y, u, -((nb + nm) as f64) * opts.dt, opts.dt, nb + nf + 2 * nm + 1);
    let (i0, j0) = (nb, nb + nm);
    let mut err = None;
    let mut close = |i: usize, j: usize| -> bool {
        if err.is_some() {
            return false;
        }
        match (xl.get(i).cloned(), yl.get(j)) {
            (Ok(a), Ok(b)) => action.distance(&a, b) < opts.delta,
            (Err(e), _) | (_, Err(e)) => {
                err = Some(e);
                false
            }
        }
    };
    let ok = if mode == MatchMode::Identity {
        (0..=nb + nf).all(|i| close(i, i + nm))
    } else {
        reach_last_row(nf + 1, nf + nm + 1, |r, c| close(i0 + r, j0 + c))
            && reach_last_row(nb + 1, nb + nm + 1, |r, c| close(i0 - r, j0 - c))
    };
    match err {
        Some(e) => Err(e),
        None => Ok(ok),
    }
}

/// Closeness and separation of one pair, or `None` when the orbits separate.
fn evaluate_pair<A: Action>(
    action: &A,
    x: &A::Point,
    y: &A::Point,
    notion: Notion,
    opts: &ProbeOptions,
) -> Result<Option<Counterexample<A::Point>>> {
    let d = action.rank();
    let mode = notion.mode();
    let dist = |a: &A::Point, b: &A::Point| action.distance(a, b);
    if notion != Notion::Action && d != 1 {
        return Err(Error::InvalidArgument("flow probes need a rank-one action".into()));
    }
    let mut alignment = Vec::with_capacity(d);
    let mut orbits = Vec::with_capacity(d);
    for i in 0..d {
        let lazy = action.cheap_act() && mode != MatchMode::MonotoneFree;
        if lazy && !lazy_feasible(action, x, y, &axis(d, i), mode, opts)? {
            return Ok(None);
        }
        let (xo, yo) = windows(action, x, y, &axis(d, i), opts)?;
        if !lazy && !match_feasible(&xo, &yo, mode, dist, opts.delta)? {
            return Ok(None);
        }
        let m = monotone_match(&xo, &yo, mode, dist)?;
        if !(m.cost < opts.delta) {
            return Ok(None);
        }
        alignment.push(m);
        orbits.push((xo, yo));
    }
    let mut closeness = alignment.iter().map(|m| m.cost).fold(0.0, f64::max);
    if d > 1 {
        closeness = closeness.max(grid_closeness(action, x, y, &alignment, opts)?);
        if !(closeness < opts.delta) {
            return Ok(None);
        }
    }
    let (separation, separation_at) = match notion {
        Notion::Komuro => {
            let (g, t0, s) = komuro_gap(action, x, &orbits[0].0, &orbits[0].1, &alignment[0], opts);
            (g, vec![t0, s])
        }
        Notion::Kinematic | Notion::C => {
            let (g, t) = orbit_arc_gap(action, x, y, &[1.0], opts);
            (g, vec![t])
        }
        Notion::Action => ball_gap(action, x, y, opts),
    };
    Ok(Some(Counterexample {
        notion,
        mode,
        x: x.clone(),
        y: y.clone(),
        horizon: opts.horizon,
        alignment,
        closeness,
        delta: opts.delta,
        separation,
        separation_at,
    }))
}

/// Sup of `d(Phi_v x, Phi_{h(v)} y)` over the cube grid with componentwise `h`,
/// nearest points first, stopping once `delta` is reached.
fn grid_closeness<A: Action>(
    action: &A,
    x: &A::Point,
    y: &A::Point,
    alignment: &[MatchResult],
    opts: &ProbeOptions,
) -> Result<f64> {
    let d = action.rank();
    let k = opts.grid_points.max(2);
    let (lo, hi) = (-opts.back.unwrap_or(opts.horizon), opts.horizon);
    let coord = |c: usize| lo + (hi - lo) * c as f64 / (k - 1) as f64;
    let mut grid: Vec<Vec<f64>> = Vec::with_capacity(k.pow(d as u32));
    for idx in 0..k.pow(d as u32) {
        let mut r = idx;
        grid.push(
            (0..d)
                .map(|_| {
                    let c = r % k;
                    r /= k;
                    coord(c)
                })
                .collect(),
        );
    }
    grid.sort_by(|a, b| norm2(a).total_cmp(&norm2(b)));
    let mut sup = 0.0f64;
    for v in grid {
        let hv: Vec<f64> = v.iter().zip(alignment).map(|(&s, m)| m.h(s)).collect();
        let c = action.distance(&action.act(&v, x)?, &action.act(&hv, y)?);
        sup = sup.max(c);
        if !(sup < opts.delta) {
            break;
        }
    }
    Ok(sup)
}

/// Recomputes a counterexample from scratch with `revalidation_factor` times tighter
/// integration; it holds when both closeness and separation persist.
pub fn revalidate<A: Action>(action: &A, cx: &Counterexample<A::Point>, opts: &ProbeOptions) -> Result<Revalidation> {
    opts.check()?;
    let tight = action.tightened(opts.revalidation_factor);
    Ok(match evaluate_pair(&tight, &cx.x, &cx.y, cx.notion, opts)? {
        None => Revalidation { closeness: f64::INFINITY, separation: 0.0, holds: false },
        Some(c) => Revalidation {
            closeness: c.closeness,
            separation: c.separation,
            holds: c.closeness < opts.delta && c.separation > opts.tol_sep,
        },
    })
}

/// Sweeps `pairs` for the first revalidated violation of `notion`.
pub fn violation_search<A: Action>(
    action: &A,
    notion: Notion,
    pairs: &[(A::Point, A::Point)],
    opts: &ProbeOptions,
) -> Result<ProbeReport<A::Point>> {
    opts.check()?;
    let mut report = ProbeReport {
        notion,
        counterexample: None,
        pairs_tested: 0,
        close_pairs: 0,
        discarded: 0,
        horizon: opts.horizon,
        delta: opts.delta,
        dt: opts.dt,
    };
    for (x, y) in pairs {
        report.pairs_tested += 1;
        let Some(cx) = evaluate_pair(action, x, y, notion, opts)? else {
            continue;
        };
        report.close_pairs += 1;
        if !(cx.separation > opts.tol_sep) {
            continue;
        }
        if revalidate(action, &cx, opts)?.holds {
            report.counterexample = Some(cx);
            return Ok(report);
        }
        report.discarded += 1;
    }
    Ok(report)
}

/// Komuro probe: free monotone alignment; the conclusion asks for one `t0` with
/// `phi_{h(t0)}(y)` on the arc `phi_{[t0 - eps, t0 + eps]}(x)`.
pub fn komuro_violation_search<A: Action>(
    flow: &A,
    pairs: &[(A::Point, A::Point)],
    opts: &ProbeOptions,
) -> Result<ProbeReport<A::Point>> {
    violation_search(flow, Notion::Komuro, pairs, opts)
}

/// Kinematic probe: `h = id`; the conclusion asks for `y = phi_s(x)` with `|s| < eps`.
pub fn kinematic_violation_search<A: Action>(
    flow: &A,
    pairs: &[(A::Point, A::Point)],
    opts: &ProbeOptions,
) -> Result<ProbeReport<A::Point>> {
    violation_search(flow, Notion::Kinematic, pairs, opts)
}

/// C- (equivalently K-) probe: monotone `h` with `h(0) = 0`.
pub fn c_expansive_check<A: Action>(
    flow: &A,
    pairs: &[(A::Point, A::Point)],
    opts: &ProbeOptions,
) -> Result<ProbeReport<A::Point>> {
    violation_search(flow, Notion::C, pairs, opts)
}

/// `R^d`-action probe over componentwise monotone `h` with `h(0) = 0`: each axis is
/// aligned exactly on its line, the product map is then checked on the `v`-grid.
pub fn action_violation_search<A: Action>(
    action: &A,
    pairs: &[(A::Point, A::Point)],
    opts: &ProbeOptions,
) -> Result<ProbeReport<A::Point>> {
    violation_search(action, Notion::Action, pairs, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use crate::field::CircleMap;
    use crate::sampling;
    use core::f64::consts::SQRT_2;

    fn orbit(points: Vec<Vec<f64>>, start: f64, dt: f64) -> SampledOrbit<Vec<f64>> {
        SampledOrbit { start, dt, points }
    }

    #[allow(clippy::ptr_arg)]
    fn euclid(a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        crate::linalg::norm2(&crate::linalg::sub_vec(a, b))
    }

    #[test]
    fn identical_orbits_match_at_zero_cost() {
        let pts: Vec<Vec<f64>> = (0..50).map(|k| vec![(k as f64 * 0.3).sin(), k as f64 * 0.1]).collect();
        let x = orbit(pts.clone(), -2.5, 0.1);
        let y = orbit(pts, -2.5, 0.1);
        for mode in [MatchMode::Identity, MatchMode::MonotoneFix0, MatchMode::MonotoneFree] {
            let m = monotone_match(&x, &y, mode, euclid).unwrap();
            assert_eq!(m.cost, 0.0);
            assert!(m.is_valid());
            assert!(m.breakpoints.iter().all(|&(t, h)| (t - h).abs() < 1e-12));
        }
    }

    #[test]
    fn time_shifted_copy_needs_free_mode() {
        let f = VectorFieldSpec::lorenz_classic();
        let flow = FieldFlow::new(&f);
        let x0 = flow_with(&f, &[1.0, 1.0, 20.0], 2.0, &IntegratorOptions::default()).unwrap();
        let y0 = flow_with(&f, &x0, 0.3, &IntegratorOptions::default()).unwrap();
        let dt = 0.01;
        let xs = orbit(flow.line_orbit(&x0, &[1.0], 0.0, dt, 200).unwrap(), 0.0, dt);
        let ys = orbit(flow.line_orbit(&y0, &[1.0], -0.5, dt, 300).unwrap(), -0.5, dt);
        let d = |a: &Vec<f64>, b: &Vec<f64>| f.distance(a, b);
        let free = monotone_match(&xs, &ys, MatchMode::MonotoneFree, d).unwrap();
        assert!(free.cost < 1e-6, "{}", free.cost);
        for &(t, h) in &free.breakpoints {
            assert!((h - (t - 0.3)).abs() < 1.5 * dt, "t={t} h={h}");
        }
        let fix0 = monotone_match(&xs, &ys, MatchMode::MonotoneFix0, d).unwrap();
        let ident = monotone_match(&xs, &ys, MatchMode::Identity, d).unwrap();
        assert!(free.cost <= fix0.cost && fix0.cost <= ident.cost);
        assert!(ident.cost > 1.0);
        assert!(fix0.is_valid() && ident.is_valid());
    }

    #[test]
    fn parallel_translation_orbits_cost_r() {
        let f = VectorFieldSpec::Constant { vector: vec![1.0, 0.0] };
        let flow = FieldFlow::new(&f);
        let r = 0.37;
        let (x, y) = (vec![0.0, 0.0], vec![0.0, r]);
        let xs = orbit(flow.line_orbit(&x, &[1.0], -1.0, 0.1, 20).unwrap(), -1.0, 0.1);
        let ys = orbit(flow.line_orbit(&y, &[1.0], -1.0, 0.1, 20).unwrap(), -1.0, 0.1);
        let m = monotone_match(&xs, &ys, MatchMode::Identity, euclid).unwrap();
        assert!((m.cost - r).abs() < 1e-15);
        let free = monotone_match(&xs, &ys, MatchMode::MonotoneFree, euclid).unwrap();
        assert!((free.cost - r).abs() < 1e-12);
    }

    #[test]
    fn feasibility_agrees_with_bottleneck() {
        let mut rng = sampling::rng(7);
        for _ in 0..40 {
            let pts = |rng: &mut _, n: usize| -> Vec<Vec<f64>> {
                (0..n).map(|_| sampling::uniform_box(rng, &[(-1.0, 1.0)])).collect()
            };
            let x = orbit(pts(&mut rng, 25), -1.2, 0.1);
            let y = orbit(pts(&mut rng, 31), -1.5, 0.1);
            for mode in [MatchMode::Identity, MatchMode::MonotoneFix0, MatchMode::MonotoneFree] {
                let m = monotone_match(&x, &y, mode, euclid).unwrap();
                assert!(m.is_valid());
                assert!(match_feasible(&x, &y, mode, euclid, m.cost * (1.0 + 1e-12) + 1e-300).unwrap());
                assert!(!match_feasible(&x, &y, mode, euclid, m.cost).unwrap());
            }
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let x = orbit(vec![vec![0.0]; 5], 0.0, 0.1);
        let y = orbit(vec![vec![0.0]; 5], 0.05, 0.1);
        assert!(matches!(monotone_match(&x, &y, MatchMode::MonotoneFree, euclid), Err(Error::GridMismatch(_))));
        let z = orbit(vec![vec![0.0]; 5], 0.0, 0.2);
        assert!(matches!(monotone_match(&x, &z, MatchMode::Identity, euclid), Err(Error::GridMismatch(_))));
    }

    fn torus_pairs(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut rng = sampling::rng(seed);
        let centers: Vec<Vec<f64>> = (0..n).map(|_| sampling::uniform_box(&mut rng, &[(0.0, 1.0), (0.0, 1.0)])).collect();
        sampling::nearby_pairs(&mut rng, &centers, lo, hi)
    }

    #[test]
    fn identity_flow_is_never_expansive() {
        let f = VectorFieldSpec::TorusTranslation { alpha: vec![0.0, 0.0] };
        let flow = FieldFlow::new(&f);
        let opts = ProbeOptions::new(0.1, 0.01, 5.0);
        let pairs = vec![(vec![0.2, 0.3], vec![0.2, 0.305])];
        for notion in [Notion::Komuro, Notion::Kinematic, Notion::C] {
            let r = violation_search(&flow, notion, &pairs, &opts).unwrap();
            let cx = r.counterexample.expect("identity flow");
            assert!((cx.separation - 0.005).abs() < 1e-9);
            assert!(cx.closeness < 0.01);
            assert!(revalidate(&flow, &cx, &opts).unwrap().holds);
        }
    }

    #[test]
    fn irrational_translation_parallel_orbits() {
        let alpha = vec![1.0, SQRT_2];
        let f = VectorFieldSpec::TorusTranslation { alpha: alpha.clone() };
        let flow = FieldFlow::new(&f);
        let n = norm2(&alpha);
        let r = 0.004;
        let x = vec![0.1, 0.2];
        let y = vec![0.1 - r * alpha[1] / n, 0.2 + r * alpha[0] / n];
        let opts = ProbeOptions::new(0.1, 0.01, 10.0);
        let rep = komuro_violation_search(&flow, &[(x, y)], &opts).unwrap();
        let cx = rep.counterexample.unwrap();
        assert!((cx.separation - r).abs() < 1e-6, "{}", cx.separation);
    }

    #[test]
    fn neutral_product_rotation_is_not_kinematic_expansive() {
        let f = VectorFieldSpec::TorusTranslation { alpha: vec![1.0, 0.0] };
        let flow = FieldFlow::new(&f);
        let rep = kinematic_violation_search(&flow, &torus_pairs(3, 5, 0.001, 0.008), &ProbeOptions::new(0.1, 0.01, 10.0))
            .unwrap();
        assert!(rep.found());
    }

    #[test]
    fn damped_torus_fails_c_expansiveness_near_singularity() {
        let f = VectorFieldSpec::DampedTorus { alpha: [1.0, SQRT_2], center: [0.5, 0.5], sharpness: 1.0 };
        let flow = FieldFlow::new(&f);
        let mut rng = sampling::rng(11);
        let centers: Vec<Vec<f64>> =
            (0..5).map(|_| sampling::uniform_box(&mut rng, &[(0.499, 0.501), (0.499, 0.501)])).collect();
        let pairs = sampling::nearby_pairs(&mut rng, &centers, 0.001, 0.004);
        let rep = c_expansive_check(&flow, &pairs, &ProbeOptions::new(0.1, 0.01, 10.0)).unwrap();
        let cx = rep.counterexample.expect("pairs near the singularity");
        assert!(cx.separation > 1e-4);
    }

    #[test]
    fn trivial_and_isometric_actions_are_not_expansive() {
        let zero = ActionSpec::unchecked(vec![
            VectorFieldSpec::TorusTranslation { alpha: vec![0.0, 0.0] },
            VectorFieldSpec::TorusTranslation { alpha: vec![0.0, 0.0] },
        ])
        .unwrap();
        let rot = ActionSpec::unchecked(vec![
            VectorFieldSpec::TorusTranslation { alpha: vec![1.0, 0.0] },
            VectorFieldSpec::TorusTranslation { alpha: vec![0.0, SQRT_2] },
        ])
        .unwrap();
        let mut opts = ProbeOptions::new(0.1, 0.01, 2.0);
        opts.grid_points = 9;
        let pairs = vec![(vec![0.3, 0.3], vec![0.305, 0.303])];
        let z = action_violation_search(&SpecAction::new(&zero), &pairs, &opts).unwrap();
        assert!(z.found());
        // transitive on T^2: every nearby point is Phi_{v0}(x) with |v0| < eps
        let r = action_violation_search(&SpecAction::new(&rot), &pairs, &opts).unwrap();
        assert_eq!(r.close_pairs, 1);
        assert!(!r.found());
        let parallel = ActionSpec::unchecked(vec![
            VectorFieldSpec::TorusTranslation { alpha: vec![1.0, SQRT_2] },
            VectorFieldSpec::TorusTranslation { alpha: vec![SQRT_2, 2.0] },
        ])
        .unwrap();
        let offset = vec![(vec![0.3, 0.3], vec![0.3 - 0.004 * SQRT_2, 0.304])];
        let p = action_violation_search(&SpecAction::new(&parallel), &offset, &opts).unwrap();
        let cx = p.counterexample.expect("neutral transverse direction");
        assert!(cx.separation > 1e-3);
    }

    #[test]
    fn suspension_of_identity_over_roof() {
        let roof = ScalarField::Trig { offset: 2.0, amplitude: 0.5, wave: vec![1.0], phase: 0.0 };
        let f = VectorFieldSpec::Suspension1d { map: CircleMap::Identity, roof };
        let flow = FieldFlow::new(&f);
        let mut rng = sampling::rng(5);
        let centers: Vec<Vec<f64>> = (0..20).map(|_| sampling::uniform_box(&mut rng, &[(0.0, 1.0), (0.0, 1.5)])).collect();
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = centers
            .iter()
            .map(|c| {
                let dx = sampling::uniform_box(&mut rng, &[(0.003, 0.008)])[0];
                (c.clone(), vec![c[0] + dx, c[1]])
            })
            .collect();
        let rep = kinematic_violation_search(&flow, &pairs, &ProbeOptions::new(0.1, 0.01, 40.0)).unwrap();
        assert!(!rep.found(), "{:?}", rep.counterexample);
    }
}
