//! Suspensions with roof one of `Z^d`-actions on tori: the space `M_1`, its
//! `R^d`-action, the fiber metric `rho_h`, the chain metric and `rho~`, and the
//! expansiveness transfer test between a base action and its suspension.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::field::{wrap_signed, wrap_unit, Domain};
use crate::linalg::{norm2, svd, Matrix};
use crate::probe::{self, Action, Notion, ProbeOptions, ProbeReport};
use crate::sampling;

/// Tolerance used when checking that generators commute.
pub const COMMUTE_TOL: f64 = 1e-9;
/// Largest rank accepted by [`BaseAction::new`].
pub const MAX_RANK: usize = 8;

/// An invertible map of the torus `R^m / Z^m`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum BaseMap {
    Identity,
    /// `x -> x + alpha`.
    Translation { alpha: Vec<f64> },
    /// `x -> A x` with `A` integer and `det A = +-1`.
    Automorphism { matrix: Vec<Vec<i64>> },
}

fn int_det(m: &[Vec<i64>]) -> i64 {
    match m.len() {
        0 => 1,
        1 => m[0][0],
        n => (0..n)
            .map(|j| {
                let minor: Vec<Vec<i64>> =
                    m[1..].iter().map(|r| r.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v).collect()).collect();
                let s = if j % 2 == 0 { 1 } else { -1 };
                s * m[0][j] * int_det(&minor)
            })
            .sum(),
    }
}

fn int_inverse(m: &[Vec<i64>]) -> Result<Vec<Vec<i64>>> {
    let n = m.len();
    let det = int_det(m);
    if det.abs() != 1 {
        return Err(Error::InvalidArgument(alloc::format!("automorphism needs det +-1, got {det}")));
    }
    // adjugate / det
    let mut inv = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<i64>> = m
                .iter()
                .enumerate()
                .filter(|&(r, _)| r != j)
                .map(|(_, row)| row.iter().enumerate().filter(|&(c, _)| c != i).map(|(_, &v)| v).collect())
                .collect();
            let s = if (i + j) % 2 == 0 { 1 } else { -1 };
            inv[i][j] = s * int_det(&minor) * det;
        }
    }
    Ok(inv)
}

fn int_apply(m: &[Vec<i64>], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    int_apply_into(m, x, &mut out);
    out
}

fn int_apply_into(m: &[Vec<i64>], x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m) {
        *o = wrap_unit(row.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum());
    }
}

fn spectral_norm(m: &[Vec<i64>]) -> Result<f64> {
    let rows: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    Ok(svd(&Matrix::from_rows(&rows)?)?.sigma[0])
}

impl BaseMap {
    fn check(&self, dim: usize) -> Result<()> {
        match self {
            BaseMap::Identity => Ok(()),
            BaseMap::Translation { alpha } => {
                if alpha.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: alpha.len() });
                }
                if alpha.iter().any(|a| !a.is_finite()) {
                    return Err(Error::NonFinite("translation vector"));
                }
                Ok(())
            }
            BaseMap::Automorphism { matrix } => {
                if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                    return Err(Error::DimensionMismatch { expected: dim, found: matrix.len() });
                }
                int_inverse(matrix).map(|_| ())
            }
        }
    }

    /// Bi-Lipschitz constant for the torus distance.
    fn lipschitz(&self) -> Result<f64> {
        match self {
            BaseMap::Identity | BaseMap::Translation { .. } => Ok(1.0),
            BaseMap::Automorphism { matrix } => Ok(spectral_norm(matrix)?.max(spectral_norm(&int_inverse(matrix)?)?)),
        }
    }
}

/// Wire form of [`BaseAction`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct BaseActionSpec {
    /// Dimension `m` of the base torus.
    pub dim: usize,
    pub generators: Vec<BaseMap>,
}

/// A `Z^d`-action on `T^m` given by commuting generators `f_1..f_d`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "BaseActionSpec", into = "BaseActionSpec")
)]
pub struct BaseAction {
    dim: usize,
    generators: Vec<BaseMap>,
    inverses: Vec<BaseMap>,
    lipschitz: Vec<f64>,
}

impl TryFrom<BaseActionSpec> for BaseAction {
    type Error = Error;

    fn try_from(spec: BaseActionSpec) -> Result<Self> {
        BaseAction::new(spec.dim, spec.generators)
    }
}

impl From<BaseAction> for BaseActionSpec {
    fn from(a: BaseAction) -> Self {
        BaseActionSpec { dim: a.dim, generators: a.generators }
    }
}

impl BaseAction {
    /// Validates the generators and refuses them unless they commute on a fixed
    /// probe set of base points.
    pub fn new(dim: usize, generators: Vec<BaseMap>) -> Result<Self> {
        if dim == 0 || generators.is_empty() {
            return Err(Error::InvalidArgument("base action needs a positive dimension and a generator".into()));
        }
        if generators.len() > MAX_RANK {
            return Err(Error::InvalidArgument(alloc::format!("base action rank is at most {MAX_RANK}")));
        }
        let mut inverses = Vec::with_capacity(generators.len());
        let mut lipschitz = Vec::with_capacity(generators.len());
        for g in &generators {
            g.check(dim)?;
            inverses.push(match g {
                BaseMap::Identity => BaseMap::Identity,
                BaseMap::Translation { alpha } => BaseMap::Translation { alpha: alpha.iter().map(|a| -a).collect() },
                BaseMap::Automorphism { matrix } => BaseMap::Automorphism { matrix: int_inverse(matrix)? },
            });
            lipschitz.push(g.lipschitz()?);
        }
        let action = BaseAction { dim, generators, inverses, lipschitz };
        let torus = &Domain::torus(dim);
        let worst = probe_points(dim)
            .iter()
            .flat_map(|x| {
                let a = &action;
                (0..a.rank()).flat_map(move |i| {
                    (i + 1..a.rank()).map(move |j| {
                        let ij = a.apply_map(i, &a.apply_map(j, x));
                        let ji = a.apply_map(j, &a.apply_map(i, x));
                        torus.distance(&ij, &ji)
                    })
                })
            })
            .fold(0.0, f64::max);
        if worst > COMMUTE_TOL {
            return Err(Error::NotCommuting(worst));
        }
        Ok(action)
    }

    pub fn identity(dim: usize, rank: usize) -> Result<Self> {
        BaseAction::new(dim, vec![BaseMap::Identity; rank])
    }

    /// Circle rotation by `rho`.
    pub fn rotation(rho: f64) -> Result<Self> {
        BaseAction::new(1, vec![BaseMap::Translation { alpha: vec![rho] }])
    }

    /// Commuting circle rotations.
    pub fn rotations(rhos: &[f64]) -> Result<Self> {
        BaseAction::new(1, rhos.iter().map(|&r| BaseMap::Translation { alpha: vec![r] }).collect())
    }

    /// The automorphism `[[2, 1], [1, 1]]` of `T^2`.
    pub fn cat_map() -> Result<Self> {
        BaseAction::new(2, vec![BaseMap::Automorphism { matrix: vec![vec![2, 1], vec![1, 1]] }])
    }

    /// `Z^2`-action generated by `[[2, 1], [1, 1]]` and its square.
    pub fn cat_pair() -> Result<Self> {
        BaseAction::new(
            2,
            vec![
                BaseMap::Automorphism { matrix: vec![vec![2, 1], vec![1, 1]] },
                BaseMap::Automorphism { matrix: vec![vec![5, 3], vec![3, 2]] },
            ],
        )
    }

    /// Rank `d`.
    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    /// Dimension of the base torus.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[BaseMap] {
        &self.generators
    }

    /// `C >= 1` with `(1/C) rho <= rho(f^s x, f^s y) <= C rho` for every corner map `f^s`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz.iter().product::<f64>().max(1.0)
    }

    fn apply_map(&self, i: usize, x: &[f64]) -> Vec<f64> {
        apply(&self.generators[i], x)
    }

    /// `f_i^k(x)`.
    pub fn iterate(&self, i: usize, x: &[f64], k: i64) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut tmp = vec![0.0; x.len()];
        self.iterate_in_place(i, &mut y, k, &mut tmp);
        y
    }

    fn iterate_in_place(&self, i: usize, y: &mut [f64], k: i64, tmp: &mut [f64]) {
        let g = if k >= 0 { &self.generators[i] } else { &self.inverses[i] };
        match g {
            BaseMap::Identity => {}
            BaseMap::Translation { alpha } => {
                for (a, b) in y.iter_mut().zip(alpha) {
                    *a = wrap_unit(*a + k.unsigned_abs() as f64 * b);
                }
            }
            BaseMap::Automorphism { matrix } => {
                for _ in 0..k.unsigned_abs() {
                    int_apply_into(matrix, y, tmp);
                    y.copy_from_slice(tmp);
                }
            }
        }
    }

    /// `phi(n, x) = f_1^{n_1} o ... o f_d^{n_d}(x)`.
    pub fn apply_counts(&self, x: &[f64], n: &[i64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut tmp = vec![0.0; x.len()];
        self.apply_counts_in_place(&mut y, n, &mut tmp);
        y
    }

    fn apply_counts_in_place(&self, y: &mut [f64], n: &[i64], tmp: &mut [f64]) {
        for i in (0..self.rank()).rev() {
            if n[i] != 0 {
                self.iterate_in_place(i, y, n[i], tmp);
            }
        }
    }

    /// `f^m x` for every `m in {-1, 0, 1, 2}^d`, row `sum_i (m_i + 1) 4^i`.
    fn iterate_table(&self, x: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        let (m, d) = (self.dim, self.rank());
        let mut n = [0i64; MAX_RANK];
        for (idx, row) in out.chunks_exact_mut(m).enumerate() {
            let mut r = idx;
            for c in n.iter_mut().take(d) {
                *c = (r % 4) as i64 - 1;
                r /= 4;
            }
            row.copy_from_slice(x);
            self.apply_counts_in_place(row, &n[..d], tmp);
        }
    }

    /// Corner map `f^s` for the bit mask `s` (bit `i` is `s_i`).
    pub fn corner(&self, x: &[f64], mask: usize) -> Vec<f64> {
        let n: Vec<i64> = (0..self.rank()).map(|i| ((mask >> i) & 1) as i64).collect();
        self.apply_counts(x, &n)
    }

    /// Torus distance on the base.
    pub fn rho(&self, x: &[f64], y: &[f64]) -> f64 {
        torus_distance(x, y)
    }

    /// `min_s rho(f^s x1, f^s x2)`.
    pub fn tilde_rho(&self, x1: &[f64], x2: &[f64]) -> f64 {
        (0..1usize << self.rank())
            .map(|s| self.rho(&self.corner(x1, s), &self.corner(x2, s)))
            .fold(f64::INFINITY, f64::min)
    }

    fn check_point(&self, x: &[f64], a: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        if a.len() != self.rank() {
            return Err(Error::DimensionMismatch { expected: self.rank(), found: a.len() });
        }
        if x.iter().chain(a).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("suspension point"));
        }
        Ok(())
    }

    /// Canonical representative of `(x, a)`: heights reduced into `[0, 1)` and the base
    /// moved by `f^k`, `k = floor(a)`.
    pub fn normalize(&self, x: &[f64], a: &[f64]) -> Result<SuspensionPoint> {
        self.check_point(x, a)?;
        let (k, heights) = normalize_counts(a);
        let mut base = self.apply_counts(x, &k);
        Domain::torus(self.dim).wrap(&mut base);
        Ok(SuspensionPoint { base, heights })
    }

    /// `Phi_v(p)`.
    pub fn act(&self, v: &[f64], p: &SuspensionPoint) -> Result<SuspensionPoint> {
        if v.len() != self.rank() {
            return Err(Error::DimensionMismatch { expected: self.rank(), found: v.len() });
        }
        let a: Vec<f64> = p.heights.iter().zip(v).map(|(h, t)| h + t).collect();
        self.normalize(&p.base, &a)
    }

    fn rho_h_at(&self, t: &[f64], x: &[f64], y: &[f64]) -> f64 {
        neumaier(weights(t).into_iter().enumerate().map(|(s, w)| {
            if w == 0.0 {
                0.0
            } else {
                w * self.rho(&self.corner(x, s), &self.corner(y, s))
            }
        }))
    }

    /// Fiber metric: `sum_s prod_i [s_i t_i + (1 - s_i)(1 - t_i)] rho(f^s x, f^s y)`.
    pub fn rho_h(&self, p: &SuspensionPoint, q: &SuspensionPoint) -> Result<f64> {
        self.check_point(&p.base, &p.heights)?;
        self.check_point(&q.base, &q.heights)?;
        if p.heights != q.heights {
            return Err(Error::FiberMismatch);
        }
        Ok(self.rho_h_at(&p.heights, &p.base, &q.base))
    }

    /// Shortest displacement `v` with `|v| <= 2 sqrt(d)` and `Phi_v(p) = q`, if any.
    pub fn vertical_distance(&self, p: &SuspensionPoint, q: &SuspensionPoint) -> Option<(f64, Vec<f64>)> {
        let d = self.rank();
        let bound = 2.0 * (d as f64).sqrt();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for idx in 0..5usize.pow(d as u32) {
            let mut r = idx;
            let v: Vec<f64> = (0..d)
                .map(|i| {
                    let k = (r % 5) as f64 - 2.0;
                    r /= 5;
                    q.heights[i] - p.heights[i] + k
                })
                .collect();
            let len = norm2(&v);
            if len > bound + 1e-12 || best.as_ref().is_some_and(|b| b.0 <= len) {
                continue;
            }
            let Ok(w) = self.act(&v, p) else { continue };
            let dh = w.heights.iter().zip(&q.heights).map(|(a, b)| wrap_signed(a - b).abs()).fold(0.0, f64::max);
            if dh <= 1e-12 && self.rho(&w.base, &q.base) <= 1e-9 {
                best = Some((len, v));
            }
        }
        best
    }

    /// Two-link chain length `min_k |a - b + k| + rho_h^{(a)}(x, f^k y)` over
    /// `k in {-1, 0, 1}^d`, symmetrized; an upper bound for the chain metric used as
    /// the probe distance on `M_1`.
    pub fn two_link_distance(&self, p: &SuspensionPoint, q: &SuspensionPoint) -> f64 {
        let (m, d) = (self.dim, self.rank());
        let rows = 1usize << (2 * d);
        let mut stack = [0.0f64; 1024];
        let mut heap = Vec::new();
        let buf: &mut [f64] = if 2 * rows * m + m <= stack.len() {
            &mut stack[..2 * rows * m + m]
        } else {
            heap.resize(2 * rows * m + m, 0.0);
            &mut heap
        };
        let (tp, rest) = buf.split_at_mut(rows * m);
        let (tq, tmp) = rest.split_at_mut(rows * m);
        self.iterate_table(&p.base, tp, tmp);
        self.iterate_table(&q.base, tq, tmp);
        self.one_sided(p, q, tp, tq).min(self.one_sided(q, p, tq, tp))
    }

    /// `min_k |a - b + k| + rho_h^{(a)}(x, f^k y)` from the iterate tables of both bases.
    fn one_sided(&self, p: &SuspensionPoint, q: &SuspensionPoint, tp: &[f64], tq: &[f64]) -> f64 {
        let (m, d) = (self.dim, self.rank());
        let mut w = [0.0f64; 1 << MAX_RANK];
        for (s, ws) in w.iter_mut().enumerate().take(1 << d) {
            *ws = p.heights.iter().enumerate().fold(1.0, |acc, (i, &ti)| acc * if (s >> i) & 1 == 1 { ti } else { 1.0 - ti });
        }
        let row = |digits: usize| digits * m..(digits + 1) * m;
        // row of f^s in the table: digit s_i + 1
        let corner_row = |s: usize| (0..d).map(|i| (((s >> i) & 1) + 1) << (2 * i)).sum::<usize>();
        let ones = (0..d).map(|i| 1usize << (2 * i)).sum::<usize>();
        let mut best = f64::INFINITY;
        let mut v = [0.0f64; MAX_RANK];
        for idx in 0..3usize.pow(d as u32) {
            let mut r = idx;
            let mut k_digits = 0usize;
            for i in 0..d {
                let c = r % 3;
                r /= 3;
                v[i] = p.heights[i] - q.heights[i] + c as f64 - 1.0;
                k_digits += c << (2 * i);
            }
            let len = norm2(&v[..d]);
            if len >= best {
                continue;
            }
            let sum = neumaier((0..1usize << d).map(|s| {
                if w[s] == 0.0 {
                    return 0.0;
                }
                let cs = corner_row(s);
                // digits of k + s: (k_i + 1) + s_i
                let ks = k_digits + cs - ones;
                w[s] * torus_distance(&tp[row(cs)], &tq[row(ks)])
            }));
            best = best.min(len + sum);
        }
        best
    }
}

/// `norm2` of the shortest torus displacement, without allocating.
fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    let disp = |i: usize| wrap_signed(b[i] - a[i]);
    let scale = (0..a.len()).fold(0.0f64, |acc, i| acc.max(disp(i).abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * (0..a.len()).map(|i| (disp(i) / scale) * (disp(i) / scale)).sum::<f64>().sqrt()
}

fn apply(g: &BaseMap, x: &[f64]) -> Vec<f64> {
    match g {
        BaseMap::Identity => x.to_vec(),
        BaseMap::Translation { alpha } => x.iter().zip(alpha).map(|(a, b)| wrap_unit(a + b)).collect(),
        BaseMap::Automorphism { matrix } => int_apply(matrix, x),
    }
}

fn probe_points(dim: usize) -> Vec<Vec<f64>> {
    // Kronecker sequence with irrational steps
    let steps = [0.618_033_988_749_894_9, 0.414_213_562_373_095_1, 0.732_050_807_568_877_2, 0.236_067_977_499_789_7];
    (1..=16).map(|k| (0..dim).map(|i| wrap_unit(k as f64 * steps[i % steps.len()] + 0.1 * i as f64)).collect()).collect()
}

/// Compensated sum.
fn neumaier<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

/// `(floor(a), a - floor(a))` with every height in `[0, 1)`.
pub fn normalize_counts(a: &[f64]) -> (Vec<i64>, Vec<f64>) {
    a.iter()
        .map(|&h| {
            let k = h.floor();
            let r = h - k;
            if r >= 1.0 {
                (k as i64 + 1, 0.0)
            } else {
                (k as i64, r)
            }
        })
        .unzip()
}

/// Corner weights `prod_i [s_i t_i + (1 - s_i)(1 - t_i)]`, indexed by the bit mask `s`.
pub fn weights(t: &[f64]) -> Vec<f64> {
    (0..1usize << t.len())
        .map(|s| {
            t.iter()
                .enumerate()
                .fold(1.0, |w, (i, &ti)| w * if (s >> i) & 1 == 1 { ti } else { 1.0 - ti })
        })
        .collect()
}

/// `sum_s prod_i [s_i t_i + (1 - s_i)(1 - t_i)]`, compensated.
pub fn weight_sum(t: &[f64]) -> f64 {
    neumaier(weights(t))
}

/// A point of `M_1` in canonical form.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct SuspensionPoint {
    pub base: Vec<f64>,
    pub heights: Vec<f64>,
}

impl SuspensionPoint {
    pub fn is_canonical(&self) -> bool {
        self.heights.iter().all(|h| (0.0..1.0).contains(h))
    }
}

/// The `R^d`-action on `M_1`, with the two-link distance.
#[derive(Debug, Clone, Copy)]
pub struct SuspensionAction<'a> {
    pub base: &'a BaseAction,
}

impl Action for SuspensionAction<'_> {
    type Point = SuspensionPoint;

    fn rank(&self) -> usize {
        self.base.rank()
    }

    fn act(&self, v: &[f64], p: &SuspensionPoint) -> Result<SuspensionPoint> {
        self.base.act(v, p)
    }

    fn distance(&self, a: &SuspensionPoint, b: &SuspensionPoint) -> f64 {
        self.base.two_link_distance(a, b)
    }

    fn cheap_act(&self) -> bool {
        true
    }

    fn tightened(&self, _factor: f64) -> Self {
        *self
    }
}

/// Net used by [`chain_metric`]: `base_cells^m * height_cells^d` grid points, with
/// horizontal links up to the absolute `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct ChainResolution {
    pub base_cells: usize,
    pub height_cells: usize,
    pub radius: f64,
}

impl ChainResolution {
    /// `cells` per axis and radius `1.5 / cells`.
    pub fn new(cells: usize) -> Self {
        ChainResolution { base_cells: cells, height_cells: cells, radius: 1.5 / cells as f64 }
    }

    /// Twice as many cells per axis, same radius; the coarse net is a subnet.
    pub fn refined(&self) -> Self {
        ChainResolution { base_cells: 2 * self.base_cells, height_cells: 2 * self.height_cells, radius: self.radius }
    }

    pub fn step(&self) -> f64 {
        (1.0 / self.base_cells as f64).max(1.0 / self.height_cells as f64)
    }
}

/// A link of an admissible chain.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(tag = "kind", rename_all = "snake_case"))]
pub enum ChainLink {
    /// Same fiber, length `rho_h`.
    Horizontal { length: f64 },
    /// Same orbit, `q = Phi_v(p)`, length `|v|`.
    Vertical { displacement: Vec<f64>, length: f64 },
}

impl ChainLink {
    pub fn length(&self) -> f64 {
        match self {
            ChainLink::Horizontal { length } | ChainLink::Vertical { length, .. } => *length,
        }
    }
}

/// Admissible sequence `omega_1..omega_n`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ChainPath {
    pub nodes: Vec<SuspensionPoint>,
    pub links: Vec<ChainLink>,
    pub total_length: f64,
}

impl ChainPath {
    pub fn recomputed_length(&self) -> f64 {
        self.links.iter().map(ChainLink::length).sum()
    }

    /// Every link joins its nodes as declared, within `tol`.
    pub fn is_admissible(&self, base: &BaseAction, tol: f64) -> bool {
        self.links.len() + 1 == self.nodes.len()
            && self.links.iter().enumerate().all(|(i, l)| {
                let (a, b) = (&self.nodes[i], &self.nodes[i + 1]);
                match l {
                    ChainLink::Horizontal { length } => {
                        let same = a.heights.iter().zip(&b.heights).all(|(x, y)| (x - y).abs() <= tol);
                        same && (base.rho_h_at(&a.heights, &a.base, &b.base) - length).abs() <= tol
                    }
                    ChainLink::Vertical { displacement, length } => base.act(displacement, a).is_ok_and(|w| {
                        let dh = w.heights.iter().zip(&b.heights).map(|(x, y)| wrap_signed(x - y).abs()).fold(0.0, f64::max);
                        dh <= tol && base.rho(&w.base, &b.base) <= tol && (norm2(displacement) - length).abs() <= tol
                    }),
                }
            })
    }
}

/// Shortest admissible chain found on the net.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ChainMetric {
    /// Upper bound for the chain metric.
    pub distance: f64,
    pub path: ChainPath,
    pub graph_nodes: usize,
}

#[derive(Debug, Clone)]
enum Edge {
    Horizontal,
    Vertical(Vec<f64>),
    /// Two links through `mid`; `vertical_first` when the vertical link comes first.
    Broken { v: Vec<f64>, mid: SuspensionPoint, vertical_first: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Implicit undirected graph on the net plus the two endpoints.
pub(crate) struct ChainGraph<'a> {
    base: &'a BaseAction,
    res: ChainResolution,
    p: SuspensionPoint,
    q: SuspensionPoint,
    grid: usize,
    hcount: usize,
    vmoves: Vec<Vec<i64>>,
    p_edges: Vec<(usize, f64, Edge)>,
    q_edges: BTreeMap<usize, (f64, Edge)>,
    direct: Option<(f64, Edge)>,
}

impl<'a> ChainGraph<'a> {
    pub(crate) fn new(
        base: &'a BaseAction,
        p: &SuspensionPoint,
        q: &SuspensionPoint,
        res: ChainResolution,
        max_nodes: usize,
    ) -> Result<Self> {
        base.check_point(&p.base, &p.heights)?;
        base.check_point(&q.base, &q.heights)?;
        if !(p.is_canonical() && q.is_canonical()) {
            return Err(Error::Precondition("chain metric needs canonical points".into()));
        }
        if res.base_cells == 0 || res.height_cells == 0 || !(res.radius > 0.0) {
            return Err(Error::InvalidArgument("resolution needs cells and a positive radius".into()));
        }
        let (m, d) = (base.dim(), base.rank());
        let bcount = (res.base_cells as f64).powi(m as i32);
        let hcount = (res.height_cells as f64).powi(d as i32);
        if bcount * hcount + 2.0 > max_nodes as f64 {
            return Err(Error::InvalidArgument(alloc::format!(
                "net has {} nodes, above max_nodes = {max_nodes}",
                bcount * hcount + 2.0
            )));
        }
        let vmoves = (0..3usize.pow(d as u32))
            .map(|idx| {
                let mut r = idx;
                (0..d)
                    .map(|_| {
                        let c = (r % 3) as i64 - 1;
                        r /= 3;
                        c
                    })
                    .collect::<Vec<i64>>()
            })
            .filter(|s| s.iter().any(|&c| c != 0))
            .collect();
        let mut g = ChainGraph {
            base,
            res,
            p: p.clone(),
            q: q.clone(),
            grid: (bcount * hcount) as usize,
            hcount: hcount as usize,
            vmoves,
            p_edges: Vec::new(),
            q_edges: BTreeMap::new(),
            direct: None,
        };
        g.p_edges = g.endpoint_edges(p, true);
        g.q_edges = g.endpoint_edges(q, false).into_iter().map(|(n, w, e)| (n, (w, e))).collect();
        if let Some((len, v)) = base.vertical_distance(p, q) {
            g.direct = Some((len, Edge::Vertical(v)));
        }
        if p.heights == q.heights {
            let w = base.rho_h_at(&p.heights, &p.base, &q.base);
            if g.direct.as_ref().is_none_or(|(l, _)| w < *l) {
                g.direct = Some((w, Edge::Horizontal));
            }
        }
        Ok(g)
    }

    pub(crate) fn len(&self) -> usize {
        self.grid + 2
    }

    pub(crate) fn source(&self) -> usize {
        self.grid
    }

    pub(crate) fn target(&self) -> usize {
        self.grid + 1
    }

    fn decode(&self, node: usize) -> (Vec<usize>, Vec<usize>) {
        let (m, d) = (self.base.dim(), self.base.rank());
        let (mut b, mut h) = (node / self.hcount, node % self.hcount);
        let bi = (0..m)
            .map(|_| {
                let c = b % self.res.base_cells;
                b /= self.res.base_cells;
                c
            })
            .collect();
        let hi = (0..d)
            .map(|_| {
                let c = h % self.res.height_cells;
                h /= self.res.height_cells;
                c
            })
            .collect();
        (bi, hi)
    }

    fn encode(&self, bi: &[usize], hi: &[usize]) -> usize {
        let b = bi.iter().rev().fold(0, |acc, &c| acc * self.res.base_cells + c);
        let h = hi.iter().rev().fold(0, |acc, &c| acc * self.res.height_cells + c);
        b * self.hcount + h
    }

    fn base_point(&self, bi: &[usize]) -> Vec<f64> {
        bi.iter().map(|&c| c as f64 / self.res.base_cells as f64).collect()
    }

    fn heights(&self, hi: &[usize]) -> Vec<f64> {
        hi.iter().map(|&c| c as f64 / self.res.height_cells as f64).collect()
    }

    /// Grid base indices within `radius` (torus distance `<= r`) of `z`.
    fn near(&self, z: &[f64], r: f64) -> Vec<Vec<usize>> {
        let n = self.res.base_cells as i64;
        let k = (r * n as f64).ceil() as i64 + 1;
        let m = z.len();
        let width = (2 * k + 1) as usize;
        let mut out = BTreeSet::new();
        for idx in 0..width.pow(m as u32) {
            let mut rem = idx;
            let bi: Vec<usize> = z
                .iter()
                .map(|&zi| {
                    let o = (rem % width) as i64 - k;
                    rem /= width;
                    ((zi * n as f64).round() as i64 + o).rem_euclid(n) as usize
                })
                .collect();
            if self.base.rho(&self.base_point(&bi), z) <= r + 1e-12 {
                out.insert(bi);
            }
        }
        out.into_iter().collect()
    }

    /// Links between an endpoint and the net: a vertical move to a height level within
    /// `radius`, then a horizontal move to a grid base point within `radius`.
    fn endpoint_edges(&self, e: &SuspensionPoint, from_source: bool) -> Vec<(usize, f64, Edge)> {
        let nh = self.res.height_cells;
        let r = self.res.radius;
        let levels: Vec<Vec<usize>> = e
            .heights
            .iter()
            .map(|&a| (0..nh).filter(|&j| (j as f64 / nh as f64 - a).abs() <= r + 1e-12).collect())
            .collect();
        let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
        for l in &levels {
            combos = combos.iter().flat_map(|c| l.iter().map(move |&j| [c.as_slice(), &[j]].concat())).collect();
        }
        let near = self.near(&e.base, r);
        let mut out = Vec::new();
        for hi in combos {
            let hts = self.heights(&hi);
            let v: Vec<f64> = hts.iter().zip(&e.heights).map(|(a, b)| a - b).collect();
            let vlen = norm2(&v);
            let mid = SuspensionPoint { base: e.base.clone(), heights: hts.clone() };
            for bi in &near {
                let y = self.base_point(bi);
                let w = vlen + self.base.rho_h_at(&hts, &e.base, &y);
                let v = if from_source { v.clone() } else { v.iter().map(|c| -c).collect() };
                out.push((self.encode(bi, &hi), w, Edge::Broken { v, mid: mid.clone(), vertical_first: from_source }));
            }
        }
        out
    }

    /// Neighbours of a grid node with link weights.
    fn grid_neighbors(&self, node: usize) -> Vec<(usize, f64, Edge)> {
        let nh = self.res.height_cells as i64;
        let (bi, hi) = self.decode(node);
        let x = self.base_point(&bi);
        let hts = self.heights(&hi);
        let mut out = Vec::new();
        for y in self.near(&x, self.res.radius) {
            if y != bi {
                let w = self.base.rho_h_at(&hts, &x, &self.base_point(&y));
                out.push((self.encode(&y, &hi), w, Edge::Horizontal));
            }
        }
        for s in &self.vmoves {
            let len = norm2(&s.iter().map(|&c| c as f64).collect::<Vec<_>>()) / nh as f64;
            let v: Vec<f64> = s.iter().map(|&c| c as f64 / nh as f64).collect();
            let raw: Vec<i64> = hi.iter().zip(s).map(|(&j, &c)| j as i64 + c).collect();
            let k: Vec<i64> = raw.iter().map(|&j| j.div_euclid(nh)).collect();
            let hj: Vec<usize> = raw.iter().map(|&j| j.rem_euclid(nh) as usize).collect();
            if k.iter().all(|&c| c == 0) {
                out.push((self.encode(&bi, &hj), len, Edge::Vertical(v)));
                continue;
            }
            let canonical = s.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0);
            let new_h = self.heights(&hj);
            if canonical {
                // vertical first: (x, h) -> (f^k x, h') -> (y, h')
                let xk = self.base.apply_counts(&x, &k);
                let mid = SuspensionPoint { base: xk.clone(), heights: new_h.clone() };
                for y in self.near(&xk, self.res.radius) {
                    let w = len + self.base.rho_h_at(&new_h, &xk, &self.base_point(&y));
                    out.push((
                        self.encode(&y, &hj),
                        w,
                        Edge::Broken { v: v.clone(), mid: mid.clone(), vertical_first: true },
                    ));
                }
            } else {
                // reverse of a canonical crossing from (z, h') with move -s and shift -k:
                // (x, h) -> (f^{-k} z, h) -> (z, h')
                let back: Vec<i64> = k.iter().map(|c| -c).collect();
                let lip: f64 = (0..self.base.rank())
                    .filter(|&i| k[i] != 0)
                    .map(|i| self.base.lipschitz[i].powi(k[i].unsigned_abs() as i32))
                    .product();
                let centre = self.base.apply_counts(&x, &k);
                for z in self.near(&centre, self.res.radius * lip) {
                    let zb = self.base_point(&z);
                    let zk = self.base.apply_counts(&zb, &back);
                    if self.base.rho(&zk, &x) > self.res.radius + 1e-12 {
                        continue;
                    }
                    let w = len + self.base.rho_h_at(&hts, &zk, &x);
                    let mid = SuspensionPoint { base: zk, heights: hts.clone() };
                    out.push((self.encode(&z, &hj), w, Edge::Broken { v: v.clone(), mid, vertical_first: false }));
                }
            }
        }
        out
    }

    /// Neighbours of any node, endpoints included.
    #[cfg(test)]
    pub(crate) fn neighbors(&self, node: usize) -> Vec<(usize, f64)> {
        self.neighbors_with_edges(node).into_iter().map(|(n, w, _)| (n, w)).collect()
    }

    fn neighbors_with_edges(&self, node: usize) -> Vec<(usize, f64, Edge)> {
        let mut out = Vec::new();
        if node == self.source() {
            out.extend(self.p_edges.iter().cloned());
            if let Some((w, e)) = &self.direct {
                out.push((self.target(), *w, e.clone()));
            }
        } else if node == self.target() {
            out.extend(self.q_edges.iter().map(|(&n, (w, e))| (n, *w, reverse(e))));
            if let Some((w, e)) = &self.direct {
                out.push((self.source(), *w, reverse(e)));
            }
        } else {
            out = self.grid_neighbors(node);
            if let Some((w, e)) = self.q_edges.get(&node) {
                out.push((self.target(), *w, e.clone()));
            }
            if let Some((_, w, e)) = self.p_edges.iter().find(|(n, _, _)| *n == node) {
                out.push((self.source(), *w, reverse(e)));
            }
        }
        out
    }

    fn node_point(&self, node: usize) -> SuspensionPoint {
        if node == self.source() {
            self.p.clone()
        } else if node == self.target() {
            self.q.clone()
        } else {
            let (bi, hi) = self.decode(node);
            SuspensionPoint { base: self.base_point(&bi), heights: self.heights(&hi) }
        }
    }
}

fn reverse(e: &Edge) -> Edge {
    match e {
        Edge::Horizontal => Edge::Horizontal,
        Edge::Vertical(v) => Edge::Vertical(v.iter().map(|c| -c).collect()),
        Edge::Broken { v, mid, vertical_first } => {
            Edge::Broken { v: v.iter().map(|c| -c).collect(), mid: mid.clone(), vertical_first: !vertical_first }
        }
    }
}

/// Shortest admissible chain from `p` to `q` on an epsilon-net of `M_1`.
///
/// Vertices are the net plus `{p, q}`. Horizontal links join net points of a common
/// fiber within `radius`; vertical links move one height cell (diagonals included);
/// a move across the roof lands on `f^k x` and continues horizontally to the nearest
/// net points. The result is an upper bound for the chain metric; with a fixed radius
/// the estimates are non-increasing under [`ChainResolution::refined`].
pub fn chain_metric(
    base: &BaseAction,
    p: &SuspensionPoint,
    q: &SuspensionPoint,
    res: ChainResolution,
    max_nodes: usize,
) -> Result<ChainMetric> {
    let g = ChainGraph::new(base, p, q, res, max_nodes)?;
    let n = g.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<(usize, Edge)>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[g.source()] = 0.0;
    heap.push(Entry(0.0, g.source()));
    while let Some(Entry(du, u)) = heap.pop() {
        if du > dist[u] {
            continue;
        }
        if u == g.target() {
            break;
        }
        for (v, w, e) in g.neighbors_with_edges(u) {
            let nd = du + w;
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = Some((u, e));
                heap.push(Entry(nd, v));
            }
        }
    }
    if !dist[g.target()].is_finite() {
        return Err(Error::Disconnected);
    }
    let mut steps = Vec::new();
    let mut cur = g.target();
    while let Some((u, e)) = prev[cur].take() {
        steps.push((u, cur, e));
        cur = u;
    }
    steps.reverse();
    let mut nodes = vec![g.node_point(g.source())];
    let mut links = Vec::new();
    for (u, v, e) in steps {
        let (a, b) = (g.node_point(u), g.node_point(v));
        match e {
            Edge::Horizontal => links.push(ChainLink::Horizontal { length: base.rho_h_at(&a.heights, &a.base, &b.base) }),
            Edge::Vertical(d) => links.push(ChainLink::Vertical { length: norm2(&d), displacement: d }),
            Edge::Broken { v: d, mid, vertical_first } => {
                let vertical = ChainLink::Vertical { length: norm2(&d), displacement: d };
                if vertical_first {
                    links.push(vertical);
                    links.push(ChainLink::Horizontal { length: base.rho_h_at(&mid.heights, &mid.base, &b.base) });
                } else {
                    links.push(ChainLink::Horizontal { length: base.rho_h_at(&a.heights, &a.base, &mid.base) });
                    links.push(vertical);
                }
                nodes.push(mid);
            }
        }
        nodes.push(b);
    }
    let total_length = links.iter().map(ChainLink::length).sum();
    Ok(ChainMetric { distance: dist[g.target()], path: ChainPath { nodes, links, total_length }, graph_nodes: n })
}

/// Settings for [`transfer_test`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields, default))]
pub struct TransferOptions {
    pub epsilon: f64,
    pub delta: f64,
    pub horizon: f64,
    pub pairs: usize,
    /// Height step of the suspension probe.
    pub dt: f64,
    /// Base pairs are sampled at distance in `[min_offset * delta, delta)`.
    pub min_offset: f64,
    /// Samples per axis of the suspension `v`-grid when the rank is at least two.
    pub grid_points: usize,
}

impl Default for TransferOptions {
    fn default() -> Self {
        TransferOptions { epsilon: 0.25, delta: 0.05, horizon: 30.0, pairs: 10_000, dt: 0.05, min_offset: 0.1, grid_points: 21 }
    }
}

/// A base pair that stays `delta`-close over `|n| <= horizon`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BaseWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `max_{|n| <= horizon} rho(phi_n x, phi_n y)`.
    pub sup_distance: f64,
    /// `rho(x, y) > 0`.
    pub separation: f64,
}

/// Outcome of [`base_violation_search`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BaseProbe {
    pub witness: Option<BaseWitness>,
    pub pairs_tested: usize,
}

/// `max_{|n| <= horizon} rho(phi_n x, phi_n y)`, stopping once `stop` is reached.
pub fn base_sup_distance(base: &BaseAction, x: &[f64], y: &[f64], horizon: f64, stop: f64) -> f64 {
    let d = base.rank();
    let h = horizon.floor() as i64;
    let side = (2 * h + 1) as usize;
    let mut ns: Vec<Vec<i64>> = (0..side.pow(d as u32))
        .map(|idx| {
            let mut r = idx;
            (0..d)
                .map(|_| {
                    let c = (r % side) as i64 - h;
                    r /= side;
                    c
                })
                .collect()
        })
        .filter(|n: &Vec<i64>| (n.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt() <= horizon + 1e-12)
        .collect();
    ns.sort_by_key(|n| (n.iter().map(|c| c * c).sum::<i64>(), n.clone()));
    let mut sup = 0.0f64;
    for n in ns {
        sup = sup.max(base.rho(&base.apply_counts(x, &n), &base.apply_counts(y, &n)));
        if sup >= stop {
            break;
        }
    }
    sup
}

/// Base-expansiveness falsifier: the first pair `x != y` with
/// `rho(phi_n x, phi_n y) < delta` for every `|n| <= horizon`.
pub fn base_violation_search(base: &BaseAction, delta: f64, pairs: &[(Vec<f64>, Vec<f64>)], horizon: f64) -> BaseProbe {
    for (k, (x, y)) in pairs.iter().enumerate() {
        let sep = base.rho(x, y);
        if sep == 0.0 {
            continue;
        }
        let sup = base_sup_distance(base, x, y, horizon, delta);
        if sup < delta {
            return BaseProbe {
                witness: Some(BaseWitness { x: x.clone(), y: y.clone(), sup_distance: sup, separation: sep }),
                pairs_tested: k + 1,
            };
        }
    }
    BaseProbe { witness: None, pairs_tested: pairs.len() }
}

/// Both probes and their cross-check.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TransferReport {
    pub base: BaseProbe,
    pub suspension: ProbeReport<SuspensionPoint>,
    pub base_violation: bool,
    pub suspension_violation: bool,
    pub agree: bool,
    /// Disagreements are numerical-resolution findings, not counterexamples.
    pub finding: Option<String>,
}

/// Seeded base pairs at distance `[min_offset * delta, delta)`.
pub fn sample_base_pairs<R: Rng + ?Sized>(base: &BaseAction, opts: &TransferOptions, rng: &mut R) -> Vec<(Vec<f64>, Vec<f64>)> {
    let m = base.dim();
    let centers: Vec<Vec<f64>> = (0..opts.pairs).map(|_| sampling::uniform_box(rng, &vec![(0.0, 1.0); m])).collect();
    sampling::nearby_pairs(rng, &centers, opts.min_offset * opts.delta, opts.delta)
        .into_iter()
        .map(|(x, mut y)| {
            y.iter_mut().for_each(|c| *c = wrap_unit(*c));
            (x, y)
        })
        .collect()
}

/// Seeded suspension pairs: base offset in `[0.05, 0.3) * delta`, height offset below
/// `0.3 * delta`.
pub fn sample_suspension_pairs<R: Rng + ?Sized>(
    base: &BaseAction,
    opts: &TransferOptions,
    rng: &mut R,
) -> Result<Vec<(SuspensionPoint, SuspensionPoint)>> {
    let (m, d) = (base.dim(), base.rank());
    (0..opts.pairs)
        .map(|_| {
            let x = sampling::uniform_box(rng, &vec![(0.0, 1.0); m]);
            let a = sampling::uniform_box(rng, &vec![(0.0, 1.0); d]);
            let u = sampling::unit_vector(rng, m);
            let rb = rng.random_range(0.05 * opts.delta..0.3 * opts.delta);
            let w = sampling::unit_vector(rng, d);
            let rh = rng.random_range(0.0..0.3 * opts.delta);
            let y: Vec<f64> = x.iter().zip(&u).map(|(c, e)| c + rb * e).collect();
            let b: Vec<f64> = a.iter().zip(&w).map(|(c, e)| c + rh * e).collect();
            Ok((base.normalize(&x, &a)?, base.normalize(&y, &b)?))
        })
        .collect()
}

/// Probes the base action and its suspension for expansiveness violations and
/// cross-checks the verdicts, which should agree.
pub fn transfer_test<R: Rng + ?Sized>(base: &BaseAction, opts: &TransferOptions, rng: &mut R) -> Result<TransferReport> {
    if !(opts.delta > 0.0 && opts.epsilon > 0.0 && opts.horizon >= 1.0 && opts.pairs > 0) {
        return Err(Error::InvalidArgument("transfer test needs positive delta, epsilon, pairs and horizon >= 1".into()));
    }
    let base_pairs = sample_base_pairs(base, opts, rng);
    let susp_pairs = sample_suspension_pairs(base, opts, rng)?;
    let probe_base = base_violation_search(base, opts.delta, &base_pairs, opts.horizon);
    let mut popts = ProbeOptions::new(opts.epsilon, opts.delta, opts.horizon);
    popts.dt = opts.dt;
    popts.grid_points = opts.grid_points;
    let action = SuspensionAction { base };
    let suspension = probe::violation_search(&action, Notion::Action, &susp_pairs, &popts)?;
    let (bv, sv) = (probe_base.witness.is_some(), suspension.found());
    let finding = (bv != sv).then(|| {
        alloc::format!(
            "verdicts differ at resolution (horizon {}, delta {}, {} pairs): base violation {bv}, suspension violation {sv}",
            opts.horizon, opts.delta, opts.pairs
        )
    });
    Ok(TransferReport { base: probe_base, suspension, base_violation: bv, suspension_violation: sv, agree: bv == sv, finding })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::SQRT_2;

    fn cat() -> BaseAction {
        BaseAction::cat_map().unwrap()
    }

    #[test]
    fn normalize_examples() {
        let b = BaseAction::new(
            2,
            vec![BaseMap::Translation { alpha: vec![0.1, 0.2] }, BaseMap::Translation { alpha: vec![SQRT_2 - 1.0, 0.5] }],
        )
        .unwrap();
        let x = vec![0.3, 0.4];
        let p = b.normalize(&x, &[0.3, 0.7]).unwrap();
        assert_eq!(p, SuspensionPoint { base: x.clone(), heights: vec![0.3, 0.7] });
        let r = BaseAction::rotation(0.25).unwrap();
        assert_eq!(r.normalize(&[0.6], &[1.0]).unwrap(), SuspensionPoint { base: vec![0.85], heights: vec![0.0] });
        let q = b.normalize(&x, &[2.5, 1.25]).unwrap();
        let f1 = |z: &[f64]| b.iterate(0, z, 1);
        let f2 = |z: &[f64]| b.iterate(1, z, 1);
        let a = f1(&f1(&f2(&x)));
        let c = f2(&f1(&f1(&x)));
        assert_eq!(q.heights, vec![0.5, 0.25]);
        assert!(b.rho(&q.base, &a) < 1e-15 && b.rho(&q.base, &c) < 1e-15);
    }

    #[test]
    fn normalize_is_idempotent() {
        let b = cat();
        let p = b.normalize(&[0.3, 0.9], &[7.3]).unwrap();
        assert_eq!(b.normalize(&p.base, &p.heights).unwrap(), p);
        assert!(p.is_canonical());
    }

    #[test]
    fn act_examples_and_group_law() {
        let r = BaseAction::rotation(0.3).unwrap();
        let p = SuspensionPoint { base: vec![0.2], heights: vec![0.0] };
        assert_eq!(r.act(&[0.0], &p).unwrap(), p);
        let q = r.act(&[1.0], &p).unwrap();
        assert!((q.base[0] - 0.5).abs() < 1e-15 && q.heights == vec![0.0]);
        let b = cat();
        let mut rng = sampling::rng(2);
        for _ in 0..100 {
            let x = sampling::uniform_box(&mut rng, &[(0.0, 1.0); 2]);
            let a = sampling::uniform_box(&mut rng, &[(0.0, 1.0)]);
            let u = sampling::uniform_box(&mut rng, &[(-3.0, 3.0)]);
            let v = sampling::uniform_box(&mut rng, &[(-3.0, 3.0)]);
            let p = b.normalize(&x, &a).unwrap();
            let lhs = b.act(&u, &b.act(&v, &p).unwrap()).unwrap();
            let rhs = b.act(&[u[0] + v[0]], &p).unwrap();
            // integer bookkeeping
            let (k1, h1) = normalize_counts(&[a[0] + v[0]]);
            let (k2, _) = normalize_counts(&[h1[0] + u[0]]);
            let (k, _) = normalize_counts(&[a[0] + u[0] + v[0]]);
            assert_eq!(k1[0] + k2[0], k[0]);
            assert!((lhs.heights[0] - rhs.heights[0]).abs() < 1e-14);
            assert!(b.rho(&lhs.base, &rhs.base) < 1e-12);
        }
    }

    #[test]
    fn translation_group_law() {
        let b = BaseAction::rotations(&[SQRT_2 - 1.0, 0.3]).unwrap();
        let x = [0.2];
        for k in -3..=3 {
            let there = b.iterate(0, &x, k);
            let want = wrap_unit(0.2 + k as f64 * (SQRT_2 - 1.0));
            assert!(b.rho(&there, &[want]) < 1e-14, "k={k}");
            assert!(b.rho(&b.iterate(0, &there, -k), &x) < 1e-14);
        }
        let p = SuspensionPoint { base: vec![0.2], heights: vec![0.5, 0.5] };
        for (u, v) in [([-1.7, 0.4], [0.9, -2.2]), ([2.5, -0.6], [-3.1, 1.3])] {
            let lhs = b.act(&u, &b.act(&v, &p).unwrap()).unwrap();
            let rhs = b.act(&[u[0] + v[0], u[1] + v[1]], &p).unwrap();
            assert!(b.rho(&lhs.base, &rhs.base) < 1e-12);
        }
        let down = b.act(&[-1.0, 0.0], &p).unwrap();
        assert!(b.rho(&down.base, &[wrap_unit(0.2 - (SQRT_2 - 1.0))]) < 1e-14);
    }

    #[test]
    fn weight_sums() {
        assert_eq!(weights(&[0.3]), vec![0.7, 0.3]);
        assert_eq!(weight_sum(&[0.0, 0.0]), 1.0);
        assert_eq!(weights(&[0.0, 0.0]), vec![1.0, 0.0, 0.0, 0.0]);
        let mut rng = sampling::rng(4);
        for d in 1..=6 {
            for _ in 0..200 {
                let t = sampling::uniform_box(&mut rng, &vec![(0.0, 1.0); d]);
                assert!((weight_sum(&t) - 1.0).abs() <= 1e-15, "d={d} t={t:?}");
            }
        }
    }

    #[test]
    fn rho_h_reductions() {
        let b = cat();
        let (x, y) = (vec![0.1, 0.2], vec![0.13, 0.18]);
        let p = SuspensionPoint { base: x.clone(), heights: vec![0.35] };
        let q = SuspensionPoint { base: y.clone(), heights: vec![0.35] };
        let expected = (1.0 - 0.35) * b.rho(&x, &y) + 0.35 * b.rho(&b.iterate(0, &x, 1), &b.iterate(0, &y, 1));
        assert_eq!(b.rho_h(&p, &q).unwrap(), expected);
        assert_eq!(b.rho_h(&p, &p).unwrap(), 0.0);
        let id = BaseAction::identity(1, 2).unwrap();
        let p2 = SuspensionPoint { base: vec![0.1], heights: vec![0.2, 0.9] };
        let q2 = SuspensionPoint { base: vec![0.3], heights: vec![0.2, 0.9] };
        assert!((id.rho_h(&p2, &q2).unwrap() - 0.2).abs() < 1e-15);
        let q3 = SuspensionPoint { base: y, heights: vec![0.4] };
        assert_eq!(b.rho_h(&p, &q3), Err(Error::FiberMismatch));
    }

    #[test]
    fn tilde_rho_comparability() {
        let b = cat();
        let c = b.lipschitz_bound();
        assert!((c - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-9);
        let mut rng = sampling::rng(8);
        for _ in 0..500 {
            let x = sampling::uniform_box(&mut rng, &[(0.0, 1.0); 2]);
            let y = sampling::uniform_box(&mut rng, &[(0.0, 1.0); 2]);
            let (r, rt) = (b.rho(&x, &y), b.tilde_rho(&x, &y));
            assert!(rt / c <= r + 1e-15 && r <= c * rt + 1e-12);
        }
        assert_eq!(b.tilde_rho(&[0.3, 0.1], &[0.3, 0.1]), 0.0);
        let r = BaseAction::rotation(0.4).unwrap();
        assert!((r.tilde_rho(&[0.1], &[0.35]) - r.rho(&[0.1], &[0.35])).abs() < 1e-15);
    }

    #[test]
    fn commuting_is_enforced() {
        let bad = BaseAction::new(
            2,
            vec![BaseMap::Automorphism { matrix: vec![vec![2, 1], vec![1, 1]] }, BaseMap::Translation { alpha: vec![0.1, 0.3] }],
        );
        assert!(matches!(bad, Err(Error::NotCommuting(_))));
        let singular = BaseAction::new(2, vec![BaseMap::Automorphism { matrix: vec![vec![2, 0], vec![0, 1]] }]);
        assert!(matches!(singular, Err(Error::InvalidArgument(_))));
        assert!(BaseAction::cat_pair().is_ok());
    }

    #[test]
    fn chain_one_link_bounds() {
        let b = BaseAction::rotation(SQRT_2 - 1.0).unwrap();
        let res = ChainResolution::new(16);
        let p = SuspensionPoint { base: vec![0.3], heights: vec![0.95] };
        let q = b.act(&[0.08], &p).unwrap();
        let c = chain_metric(&b, &p, &q, res, 10_000).unwrap();
        assert!(c.distance <= 0.08 + 1e-12);
        let q2 = SuspensionPoint { base: vec![0.34], heights: vec![0.95] };
        let c2 = chain_metric(&b, &p, &q2, res, 10_000).unwrap();
        assert!(c2.distance <= b.rho_h(&p, &q2).unwrap() + 1e-15);
        for cm in [&c, &c2] {
            assert!((cm.path.total_length - cm.path.recomputed_length()).abs() < 1e-12);
            assert!((cm.path.total_length - cm.distance).abs() < 1e-12);
            assert!(cm.path.is_admissible(&b, 1e-9));
        }
    }

    /// O(V^2) Dijkstra over the same graph.
    fn oracle(b: &BaseAction, p: &SuspensionPoint, q: &SuspensionPoint, res: ChainResolution) -> f64 {
        let g = ChainGraph::new(b, p, q, res, usize::MAX).unwrap();
        let n = g.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[g.source()] = 0.0;
        for _ in 0..n {
            let u = (0..n).filter(|&i| !done[i]).min_by(|&i, &j| dist[i].total_cmp(&dist[j])).unwrap();
            if !dist[u].is_finite() {
                break;
            }
            done[u] = true;
            for (v, w) in g.neighbors(u) {
                dist[v] = dist[v].min(dist[u] + w);
            }
        }
        dist[g.target()]
    }

    #[test]
    fn chain_refinement_consistency() {
        let b = BaseAction::rotation(SQRT_2 - 1.0).unwrap();
        let res = ChainResolution::new(12);
        let mut rng = sampling::rng(21);
        for _ in 0..4 {
            let p = b.normalize(&sampling::uniform_box(&mut rng, &[(0.0, 1.0)]), &sampling::uniform_box(&mut rng, &[(0.0, 1.0)])).unwrap();
            let q = b.normalize(&sampling::uniform_box(&mut rng, &[(0.0, 1.0)]), &sampling::uniform_box(&mut rng, &[(0.0, 1.0)])).unwrap();
            let coarse = chain_metric(&b, &p, &q, res, 100_000).unwrap();
            let fine = oracle(&b, &p, &q, res.refined());
            let fine_fast = chain_metric(&b, &p, &q, res.refined(), 100_000).unwrap();
            assert!((fine - fine_fast.distance).abs() < 1e-12);
            assert!(fine <= coarse.distance + 1e-12, "monotone: {fine} > {}", coarse.distance);
            assert!(coarse.distance - fine <= 2.0 * res.step(), "{} vs {fine}", coarse.distance);
            let back = chain_metric(&b, &q, &p, res, 100_000).unwrap();
            assert!((back.distance - coarse.distance).abs() < 1e-9);
            assert!(coarse.path.is_admissible(&b, 1e-9));
        }
    }

    #[test]
    fn chain_metric_triangle() {
        let b = cat();
        let res = ChainResolution::new(8);
        let mut rng = sampling::rng(5);
        let pts: Vec<SuspensionPoint> = (0..3)
            .map(|_| {
                b.normalize(&sampling::uniform_box(&mut rng, &[(0.0, 1.0); 2]), &sampling::uniform_box(&mut rng, &[(0.0, 1.0)]))
                    .unwrap()
            })
            .collect();
        let d = |i: usize, j: usize| chain_metric(&b, &pts[i], &pts[j], res, 100_000).unwrap().distance;
        let (ab, bc, ac) = (d(0, 1), d(1, 2), d(0, 2));
        assert!(ac <= ab + bc + 2.0 * res.step());
        assert!((d(1, 0) - ab).abs() < 1e-9);
    }

    #[test]
    fn node_cap_is_enforced() {
        let b = cat();
        let p = SuspensionPoint { base: vec![0.0, 0.0], heights: vec![0.0] };
        assert!(matches!(chain_metric(&b, &p, &p, ChainResolution::new(64), 1000), Err(Error::InvalidArgument(_))));
        let tiny = ChainResolution { base_cells: 8, height_cells: 8, radius: 0.01 };
        let q = SuspensionPoint { base: vec![0.5, 0.5], heights: vec![0.5] };
        assert_eq!(chain_metric(&b, &p, &q, tiny, 10_000), Err(Error::Disconnected));
    }

    #[test]
    fn transfer_identity_and_rotations() {
        let opts = TransferOptions { pairs: 50, horizon: 10.0, ..TransferOptions::default() };
        for base in [BaseAction::identity(1, 1).unwrap(), BaseAction::rotations(&[SQRT_2 - 1.0, 0.5 * (5f64.sqrt() - 1.0)]).unwrap()] {
            let r = transfer_test(&base, &opts, &mut sampling::rng(1)).unwrap();
            assert!(r.base_violation && r.suspension_violation && r.agree, "{r:?}");
        }
    }

    #[test]
    fn transfer_hyperbolic_is_clean() {
        let opts = TransferOptions { pairs: 300, ..TransferOptions::default() };
        let r = transfer_test(&cat(), &opts, &mut sampling::rng(1)).unwrap();
        assert!(!r.base_violation && !r.suspension_violation && r.agree, "{r:?}");
    }
}
