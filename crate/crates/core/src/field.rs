//! Catalog of vector fields with analytic Jacobians.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{norm2, Matrix};

/// Scalar functions used as time-change factors, roofs and bump functions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum ScalarField {
    Constant { value: f64 },
    /// `offset + amplitude * sin(2 pi <wave, x> + phase)`.
    Trig { offset: f64, amplitude: f64, wave: Vec<f64>, #[cfg_attr(feature = "serde", serde(default))] phase: f64 },
    /// `1 - exp(-k * q(x))` with `q(x) = sum_i (sin(pi (x_i - p_i)) / pi)^2`, a smooth
    /// periodic proxy for the squared torus distance to `p`; vanishes only at `p`.
    Bump { center: Vec<f64>, sharpness: f64 },
}

impl ScalarField {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Constant { value } => *value,
            ScalarField::Trig { offset, amplitude, wave, phase } => {
                offset + amplitude * (2.0 * PI * phase_dot(wave, x) + phase).sin()
            }
            ScalarField::Bump { center, sharpness } => {
                // 1 - e^{-kq}; expm1 keeps the tiny values near the zero accurate.
                -(-sharpness * bump_q(center, x)).exp_m1()
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ScalarField::Constant { .. } => vec![0.0; x.len()],
            ScalarField::Trig { amplitude, wave, phase, .. } => {
                let c = amplitude * 2.0 * PI * (2.0 * PI * phase_dot(wave, x) + phase).cos();
                (0..x.len()).map(|i| c * wave.get(i).copied().unwrap_or(0.0)).collect()
            }
            ScalarField::Bump { center, sharpness } => {
                let e = (-sharpness * bump_q(center, x)).exp();
                (0..x.len())
                    .map(|i| {
                        let p = center.get(i).copied().unwrap_or(0.0);
                        // d/dx (sin(pi d)/pi)^2 = sin(2 pi d) / pi
                        sharpness * e * (2.0 * PI * (x[i] - p)).sin() / PI
                    })
                    .collect()
            }
        }
    }

    /// Derivative of `value` along `v` at `x`.
    pub fn derivative_along(&self, x: &[f64], v: &[f64]) -> f64 {
        crate::linalg::dot(&self.gradient(x), v)
    }
}

fn phase_dot(wave: &[f64], x: &[f64]) -> f64 {
    wave.iter().zip(x).map(|(k, y)| k * y).sum()
}

fn bump_q(center: &[f64], x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, xi)| {
            let s = (PI * (xi - center.get(i).copied().unwrap_or(0.0))).sin() / PI;
            s * s
        })
        .sum()
}

/// Invertible maps of the circle `R/Z` used as suspension bases.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum CircleMap {
    Identity,
    Rotation { rho: f64 },
}

impl CircleMap {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            CircleMap::Identity => x,
            CircleMap::Rotation { rho } => wrap_unit(x + rho),
        }
    }

    pub fn apply_inverse(&self, x: f64) -> f64 {
        match self {
            CircleMap::Identity => x,
            CircleMap::Rotation { rho } => wrap_unit(x - rho),
        }
    }
}

/// One monomial `coeff * prod_i x_i^{powers_i}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

impl Monomial {
    fn value(&self, x: &[f64]) -> f64 {
        self.powers.iter().zip(x).fold(self.coeff, |acc, (&p, &xi)| acc * xi.powi(p as i32))
    }

    fn partial(&self, x: &[f64], j: usize) -> f64 {
        let pj = self.powers.get(j).copied().unwrap_or(0);
        if pj == 0 {
            return 0.0;
        }
        self.powers.iter().zip(x).enumerate().fold(self.coeff, |acc, (i, (&p, &xi))| {
            if i == j {
                acc * pj as f64 * xi.powi(p as i32 - 1)
            } else {
                acc * xi.powi(p as i32)
            }
        })
    }
}

/// Closed-form vector fields.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum VectorFieldSpec {
    /// `x' = a(y - x), y' = rx - y - xz, z' = xy - bz`.
    Lorenz { a: f64, b: f64, r: f64 },
    /// `x' = B x` on `R^n`.
    Linear { matrix: Matrix },
    /// Constant field on `R^n`.
    Constant { vector: Vec<f64> },
    /// Constant field on the torus `R^d / Z^d`.
    TorusTranslation { alpha: Vec<f64> },
    /// `f(x) alpha` on `T^2` with `f` the [`ScalarField::Bump`] centred at `center`.
    DampedTorus { alpha: [f64; 2], center: [f64; 2], sharpness: f64 },
    /// `h(x) X(x)`.
    Scaled { factor: ScalarField, base: Box<VectorFieldSpec> },
    /// `sum_i c_i X_i(x)`; all terms share the domain of the first.
    Combination { terms: Vec<(f64, VectorFieldSpec)> },
    /// Component `i` is the sum of the monomials in `components[i]`.
    Polynomial { components: Vec<Vec<Monomial>>, #[cfg_attr(feature = "serde", serde(default))] periodic: Vec<bool> },
    /// Vertical unit field on `{(x, s) : 0 <= s < r(x)}` with `(x, r(x)) ~ (f(x), 0)`.
    Suspension1d { map: CircleMap, roof: ScalarField },
}

/// Per-coordinate periodicity (period one) of a state space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub periodic: Vec<bool>,
}

impl Domain {
    pub fn euclidean(n: usize) -> Self {
        Domain { periodic: vec![false; n] }
    }

    pub fn torus(n: usize) -> Self {
        Domain { periodic: vec![true; n] }
    }

    pub fn dim(&self) -> usize {
        self.periodic.len()
    }

    pub fn wrap(&self, x: &mut [f64]) {
        for (xi, &p) in x.iter_mut().zip(&self.periodic) {
            if p {
                *xi = wrap_unit(*xi);
            }
        }
    }

    /// `b - a`, taking the shortest representative on periodic coordinates.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.periodic)
            .map(|((x, y), &p)| if p { wrap_signed(y - x) } else { y - x })
            .collect()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        norm2(&self.displacement(a, b))
    }
}

/// Representative in `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Representative in `[-1/2, 1/2)`.
pub fn wrap_signed(x: f64) -> f64 {
    let w = wrap_unit(x + 0.5) - 0.5;
    if w < -0.5 {
        w + 1.0
    } else {
        w
    }
}

impl VectorFieldSpec {
    pub fn lorenz_classic() -> Self {
        VectorFieldSpec::Lorenz { a: 10.0, b: 8.0 / 3.0, r: 28.0 }
    }

    /// `c X`.
    pub fn scaled_by(&self, c: f64) -> Self {
        VectorFieldSpec::Scaled { factor: ScalarField::Constant { value: c }, base: Box::new(self.clone()) }
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorFieldSpec::Lorenz { .. } => 3,
            VectorFieldSpec::Linear { matrix } => matrix.rows(),
            VectorFieldSpec::Constant { vector } => vector.len(),
            VectorFieldSpec::TorusTranslation { alpha } => alpha.len(),
            VectorFieldSpec::DampedTorus { .. } => 2,
            VectorFieldSpec::Scaled { base, .. } => base.dim(),
            VectorFieldSpec::Combination { terms } => terms.first().map_or(0, |t| t.1.dim()),
            VectorFieldSpec::Polynomial { components, .. } => components.len(),
            VectorFieldSpec::Suspension1d { .. } => 2,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            VectorFieldSpec::TorusTranslation { alpha } => Domain::torus(alpha.len()),
            VectorFieldSpec::DampedTorus { .. } => Domain::torus(2),
            VectorFieldSpec::Scaled { base, .. } => base.domain(),
            VectorFieldSpec::Combination { terms } => {
                terms.first().map_or(Domain::euclidean(0), |t| t.1.domain())
            }
            VectorFieldSpec::Polynomial { components, periodic } => {
                if periodic.is_empty() {
                    Domain::euclidean(components.len())
                } else {
                    Domain { periodic: periodic.clone() }
                }
            }
            VectorFieldSpec::Suspension1d { .. } => Domain { periodic: vec![true, false] },
            _ => Domain::euclidean(self.dim()),
        }
    }

    /// Checks internal consistency (dimensions, positive roof samples, finite data).
    pub fn validate(&self) -> Result<()> {
        match self {
            VectorFieldSpec::Lorenz { a, b, r } => {
                if ![a, b, r].iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite("lorenz parameters"));
                }
            }
            VectorFieldSpec::Linear { matrix } => {
                matrix.check_square()?;
            }
            VectorFieldSpec::Constant { vector } | VectorFieldSpec::TorusTranslation { alpha: vector } => {
                if vector.is_empty() || !vector.iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidArgument("constant field needs finite components".into()));
                }
            }
            VectorFieldSpec::DampedTorus { sharpness, .. } => {
                if !(*sharpness > 0.0) {
                    return Err(Error::InvalidArgument("bump sharpness must be positive".into()));
                }
            }
            VectorFieldSpec::Scaled { base, .. } => base.validate()?,
            VectorFieldSpec::Combination { terms } => {
                let n = self.dim();
                if terms.is_empty() {
                    return Err(Error::InvalidArgument("empty combination".into()));
                }
                for (_, f) in terms {
                    f.validate()?;
                    if f.dim() != n {
                        return Err(Error::DimensionMismatch { expected: n, found: f.dim() });
                    }
                }
            }
            VectorFieldSpec::Polynomial { components, periodic } => {
                let n = components.len();
                if n == 0 || (!periodic.is_empty() && periodic.len() != n) {
                    return Err(Error::InvalidArgument("polynomial dimension mismatch".into()));
                }
                for m in components.iter().flatten() {
                    if m.powers.len() > n {
                        return Err(Error::DimensionMismatch { expected: n, found: m.powers.len() });
                    }
                }
            }
            VectorFieldSpec::Suspension1d { roof, .. } => {
                let min = (0..1000).map(|k| roof.value(&[k as f64 / 1000.0])).fold(f64::INFINITY, f64::min);
                if !(min > 0.0) {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "roof must stay positive (sampled minimum {min})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `X(x)` written into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            VectorFieldSpec::Lorenz { a, b, r } => {
                out[0] = a * (x[1] - x[0]);
                out[1] = r * x[0] - x[1] - x[0] * x[2];
                out[2] = x[0] * x[1] - b * x[2];
            }
            VectorFieldSpec::Linear { matrix } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = crate::linalg::dot(matrix.row(i), x);
                }
            }
            VectorFieldSpec::Constant { vector } | VectorFieldSpec::TorusTranslation { alpha: vector } => {
                out.copy_from_slice(vector);
            }
            VectorFieldSpec::DampedTorus { alpha, center, sharpness } => {
                let f = ScalarField::Bump { center: center.to_vec(), sharpness: *sharpness }.value(x);
                out[0] = f * alpha[0];
                out[1] = f * alpha[1];
            }
            VectorFieldSpec::Scaled { factor, base } => {
                base.eval_into(x, out);
                let h = factor.value(x);
                for o in out.iter_mut() {
                    *o *= h;
                }
            }
            VectorFieldSpec::Combination { terms } => {
                let mut tmp = vec![0.0; out.len()];
                out.iter_mut().for_each(|o| *o = 0.0);
                for (c, f) in terms {
                    f.eval_into(x, &mut tmp);
                    crate::linalg::axpy(*c, &tmp, out);
                }
            }
            VectorFieldSpec::Polynomial { components, .. } => {
                for (o, comp) in out.iter_mut().zip(components) {
                    *o = comp.iter().map(|m| m.value(x)).sum();
                }
            }
            VectorFieldSpec::Suspension1d { .. } => {
                out[0] = 0.0;
                out[1] = 1.0;
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }

    /// Analytic Jacobian `DX(x)`.
    pub fn jacobian(&self, x: &[f64]) -> Matrix {
        let n = self.dim();
        match self {
            VectorFieldSpec::Lorenz { a, b, r } => Matrix::from_row_major(
                3,
                3,
                vec![-a, *a, 0.0, r - x[2], -1.0, -x[0], x[1], x[0], -b],
            )
            .expect("3x3"),
            VectorFieldSpec::Linear { matrix } => matrix.clone(),
            VectorFieldSpec::Constant { .. }
            | VectorFieldSpec::TorusTranslation { .. }
            | VectorFieldSpec::Suspension1d { .. } => Matrix::zeros(n, n),
            VectorFieldSpec::DampedTorus { alpha, center, sharpness } => {
                let grad = ScalarField::Bump { center: center.to_vec(), sharpness: *sharpness }.gradient(x);
                outer(alpha, &grad)
            }
            VectorFieldSpec::Scaled { factor, base } => {
                // D(hX) = X grad(h)^T + h DX
                let xv = base.eval(x);
                let grad = factor.gradient(x);
                let h = factor.value(x);
                outer(&xv, &grad).add(&base.jacobian(x).scale(h)).expect("same shape")
            }
            VectorFieldSpec::Combination { terms } => terms.iter().fold(Matrix::zeros(n, n), |acc, (c, f)| {
                acc.add(&f.jacobian(x).scale(*c)).expect("same shape")
            }),
            VectorFieldSpec::Polynomial { components, .. } => {
                let mut j = Matrix::zeros(n, n);
                for (i, comp) in components.iter().enumerate() {
                    for k in 0..n {
                        j[(i, k)] = comp.iter().map(|m| m.partial(x, k)).sum();
                    }
                }
                j
            }
        }
    }

    /// Central finite-difference Jacobian with step `1e-6 (1 + |x|)`.
    pub fn jacobian_fd(&self, x: &[f64]) -> Matrix {
        let n = self.dim();
        let h = 1e-6 * (1.0 + norm2(x));
        let mut j = Matrix::zeros(n, n);
        let mut xp = x.to_vec();
        for k in 0..n {
            xp[k] = x[k] + h;
            let fp = self.eval(&xp);
            xp[k] = x[k] - h;
            let fm = self.eval(&xp);
            xp[k] = x[k];
            for i in 0..n {
                j[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        j
    }

    /// State-space distance: wrap-around on periodic coordinates; for
    /// [`VectorFieldSpec::Suspension1d`] the height is normalized by the roof and the
    /// identification `(x, 1) ~ (f(x), 0)` is honoured.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            VectorFieldSpec::Suspension1d { map, roof } => {
                let (xa, ta) = (a[0], a[1] / roof.value(&a[..1]));
                let (xb, tb) = (b[0], b[1] / roof.value(&b[..1]));
                // Lift b by -1, 0, +1 roof crossings.
                let lifts = [(map.apply(xb), tb - 1.0), (xb, tb), (map.apply_inverse(xb), tb + 1.0)];
                lifts
                    .iter()
                    .map(|&(x, t)| {
                        let dx = wrap_signed(x - xa);
                        (dx * dx + (t - ta) * (t - ta)).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            }
            _ => self.domain().distance(a, b),
        }
    }
}

fn outer(u: &[f64], v: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(u.len(), v.len());
    for i in 0..u.len() {
        for j in 0..v.len() {
            m[(i, j)] = u[i] * v[j];
        }
    }
    m
}

/// `[X, Y](x) = DY(x) X(x) - DX(x) Y(x)` from the analytic Jacobians.
pub fn lie_bracket(x_field: &VectorFieldSpec, y_field: &VectorFieldSpec, x: &[f64]) -> Result<Vec<f64>> {
    if x_field.dim() != y_field.dim() || x.len() != x_field.dim() {
        return Err(Error::DimensionMismatch { expected: x_field.dim(), found: y_field.dim() });
    }
    let xv = x_field.eval(x);
    let yv = y_field.eval(x);
    let a = y_field.jacobian(x).mul_vec(&xv)?;
    let b = x_field.jacobian(x).mul_vec(&yv)?;
    Ok(crate::linalg::sub_vec(&a, &b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let fields = [
            VectorFieldSpec::lorenz_classic(),
            VectorFieldSpec::DampedTorus { alpha: [1.0, 2f64.sqrt()], center: [0.3, 0.6], sharpness: 3.0 },
            VectorFieldSpec::Scaled {
                factor: ScalarField::Trig { offset: 2.0, amplitude: 1.0, wave: vec![1.0, -2.0], phase: 0.0 },
                base: Box::new(VectorFieldSpec::lorenz_classic()),
            },
            VectorFieldSpec::Polynomial {
                components: vec![
                    vec![Monomial { coeff: 1.5, powers: vec![2, 1] }],
                    vec![Monomial { coeff: -1.0, powers: vec![0, 3] }, Monomial { coeff: 2.0, powers: vec![1] }],
                ],
                periodic: vec![],
            },
        ];
        for f in &fields {
            let x: Vec<f64> = [0.37, 0.81, 0.22][..f.dim()].to_vec();
            let ja = f.jacobian(&x);
            let jn = f.jacobian_fd(&x);
            assert!(ja.sub(&jn).unwrap().max_abs() < 1e-7 * (1.0 + ja.max_abs()), "{f:?}");
        }
    }

    #[test]
    fn bump_vanishes_only_at_center() {
        let f = ScalarField::Bump { center: vec![0.25, 0.5], sharpness: 4.0 };
        assert_eq!(f.value(&[0.25, 0.5]), 0.0);
        assert!(f.value(&[1.25, -0.5]) < 1e-30);
        assert!(f.value(&[0.26, 0.5]) > 0.0);
        assert!(f.value(&[0.75, 0.0]) > 0.5);
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_unit(-0.25), 0.75);
        assert_eq!(wrap_unit(3.0), 0.0);
        assert_eq!(wrap_signed(0.75), -0.25);
        let d = Domain::torus(2);
        assert!((d.distance(&[0.95, 0.0], &[0.05, 0.0]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn textbook_bracket() {
        let x = VectorFieldSpec::Constant { vector: vec![1.0, 0.0] };
        let y = VectorFieldSpec::Polynomial {
            components: vec![vec![], vec![Monomial { coeff: 1.0, powers: vec![1] }]],
            periodic: vec![],
        };
        assert_eq!(lie_bracket(&x, &y, &[0.3, -2.0]).unwrap(), [0.0, 1.0]);
    }

    #[test]
    fn bracket_with_multiple_vanishes() {
        let x = VectorFieldSpec::lorenz_classic();
        let y = x.scaled_by(2.0);
        assert_eq!(lie_bracket(&x, &y, &[1.0, -3.0, 20.0]).unwrap(), [0.0, 0.0, 0.0]);
        let y = x.scaled_by(3.0);
        let b = lie_bracket(&x, &y, &[1.0, -3.0, 20.0]).unwrap();
        assert!(norm2(&b) < 1e-12);
    }

    #[test]
    fn suspension_distance_respects_identification() {
        let f = VectorFieldSpec::Suspension1d {
            map: CircleMap::Rotation { rho: 0.3 },
            roof: ScalarField::Constant { value: 1.0 },
        };
        // (0.1, 0.999) is close to (0.4, 0.0) through the roof.
        assert!(f.distance(&[0.1, 0.999], &[0.4, 0.0]) < 2e-3);
    }
}
