#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::VectorFieldSpec;

use super::{closed_form, integrate, IntegratorOptions};

/// Dense orbit segment `t -> phi_t(x)` on `[t0, t1]`.
///
/// Samples are kept unwrapped on periodic coordinates so that interpolation never
/// straddles a seam; [`Trajectory::at`] wraps its output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    field: VectorFieldSpec,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    exact: bool,
}

/// Trajectory of `x0` over `[t0, t1]`, with `x0` the state at time `t0`.
pub fn trajectory(
    field: &VectorFieldSpec,
    x0: &[f64],
    t0: f64,
    t1: f64,
    dt_out: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if !(t0 < t1) {
        return Err(Error::InvalidArgument(alloc::format!("trajectory needs t0 < t1, got [{t0}, {t1}]")));
    }
    Trajectory::build(field, x0, t0, t0, t1, dt_out, opts)
}

/// Orbit segment `phi_{[-back, forward]}(x)` with `x` at time zero.
pub fn orbit_segment(
    field: &VectorFieldSpec,
    x: &[f64],
    back: f64,
    forward: f64,
    dt_out: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if !(back >= 0.0 && forward >= 0.0 && back + forward > 0.0) {
        return Err(Error::InvalidArgument("orbit segment needs a non-empty window".into()));
    }
    Trajectory::build(field, x, 0.0, -back, forward, dt_out, opts)
}

impl Trajectory {
    fn build(
        field: &VectorFieldSpec,
        x: &[f64],
        anchor: f64,
        t0: f64,
        t1: f64,
        dt_out: f64,
        opts: &IntegratorOptions,
    ) -> Result<Self> {
        if x.len() != field.dim() {
            return Err(Error::DimensionMismatch { expected: field.dim(), found: x.len() });
        }
        if !(dt_out > 0.0) || !dt_out.is_finite() {
            return Err(Error::InvalidArgument("dt_out must be positive".into()));
        }
        opts.check()?;
        let mut x = x.to_vec();
        field.domain().wrap(&mut x);
        let exact = closed_form(field, &x, 0.0)?.is_some();
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut derivs = Vec::new();
        if exact {
            let n = ((t1 - t0) / dt_out).ceil().max(1.0) as usize;
            for k in 0..=n {
                let t = if k == n { t1 } else { t0 + k as f64 * dt_out };
                let y = closed_form(field, &x, t - anchor)?.expect("closed form");
                derivs.push(field.eval(&y));
                states.push(y);
                times.push(t);
            }
        } else {
            if t0 < anchor {
                integrate(field, &x, anchor, t0, opts, Some(dt_out), |t, y, f| {
                    times.push(t);
                    states.push(y.to_vec());
                    derivs.push(f.to_vec());
                })?;
                times.reverse();
                states.reverse();
                derivs.reverse();
                times.pop();
                states.pop();
                derivs.pop();
            }
            if t1 > anchor {
                integrate(field, &x, anchor, t1, opts, Some(dt_out), |t, y, f| {
                    times.push(t);
                    states.push(y.to_vec());
                    derivs.push(f.to_vec());
                })?;
            } else {
                times.push(anchor);
                states.push(x.clone());
                derivs.push(field.eval(&x));
            }
        }
        Ok(Trajectory { field: field.clone(), times, states, derivs, exact })
    }

    pub fn field(&self) -> &VectorFieldSpec {
        &self.field
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t1(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    /// Sample times (strictly increasing).
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Sample `i`, wrapped into the domain.
    pub fn sample(&self, i: usize) -> Vec<f64> {
        let mut y = self.states[i].clone();
        self.field.domain().wrap(&mut y);
        y
    }

    /// `phi_t(x)` for `t` in `[t0, t1]`.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        let (a, b) = (self.t0(), self.t1());
        let slack = 1e-12 * (1.0 + a.abs().max(b.abs()));
        if !(t >= a - slack && t <= b + slack) {
            return Err(Error::InvalidArgument(alloc::format!("time {t} outside [{a}, {b}]")));
        }
        let t = t.clamp(a, b);
        let i = match self.times.binary_search_by(|s| s.partial_cmp(&t).expect("finite")) {
            Ok(i) => return Ok(self.sample(i)),
            Err(i) => i - 1,
        };
        if self.exact {
            let base = &self.states[i];
            return Ok(closed_form(&self.field, base, t - self.times[i])?.expect("closed form"));
        }
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let h = tb - ta;
        let s = (t - ta) / h;
        let (h00, h10, h01, h11) = hermite_basis(s);
        let (ya, yb, fa, fb) = (&self.states[i], &self.states[i + 1], &self.derivs[i], &self.derivs[i + 1]);
        let mut y: Vec<f64> =
            (0..ya.len()).map(|k| h00 * ya[k] + h10 * h * fa[k] + h01 * yb[k] + h11 * h * fb[k]).collect();
        self.field.domain().wrap(&mut y);
        Ok(y)
    }

    /// Points on the uniform grid `t0, t0 + dt, ...` (the last point is `t1`).
    pub fn grid(&self, dt: f64) -> Result<Vec<(f64, Vec<f64>)>> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("grid step must be positive".into()));
        }
        let (a, b) = (self.t0(), self.t1());
        let n = ((b - a) / dt - 1e-9).ceil().max(1.0) as usize;
        (0..=n)
            .map(|k| {
                let t = if k == n { b } else { a + k as f64 * dt };
                self.at(t).map(|y| (t, y))
            })
            .collect()
    }
}

fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::flow;
    use alloc::vec;

    #[test]
    fn interpolation_matches_direct_flow() {
        let f = VectorFieldSpec::lorenz_classic();
        let x = [1.0, 1.0, 1.0];
        let opts = IntegratorOptions::with_tol(1e-10);
        let tr = trajectory(&f, &x, 0.0, 3.0, 0.05, &opts).unwrap();
        for k in 0..60 {
            let t = 0.0137 + k as f64 * 0.049;
            let direct = flow(&f, &x, t, 1e-12).unwrap();
            let got = tr.at(t).unwrap();
            let scale = 1.0 + crate::linalg::norm2(&direct);
            assert!(f.distance(&direct, &got) < 10.0 * 1e-10 * scale * (1.0 + t), "t={t}");
        }
        for w in tr.times().windows(2) {
            assert!(w[1] > w[0] && w[1] - w[0] <= 0.05 + 1e-15);
        }
    }

    #[test]
    fn lorenz_bounding_box() {
        let f = VectorFieldSpec::lorenz_classic();
        let tr = trajectory(&f, &[1.0, 1.0, 1.0], 0.0, 50.0, 0.01, &IntegratorOptions::with_tol(1e-10)).unwrap();
        for i in 0..tr.len() {
            let p = tr.sample(i);
            assert!(p[0].abs() <= 30.0 && p[1].abs() <= 30.0 && (0.0..=60.0).contains(&p[2]));
        }
    }

    #[test]
    fn group_law_on_samples() {
        let f = VectorFieldSpec::lorenz_classic();
        let x = [2.0, -1.0, 20.0];
        let tr = trajectory(&f, &x, 0.0, 2.0, 0.02, &IntegratorOptions::with_tol(1e-11)).unwrap();
        for &s in &[0.3, 0.77, 1.1] {
            let mid = flow(&f, &x, s, 1e-11).unwrap();
            let end = flow(&f, &mid, 1.9 - s, 1e-11).unwrap();
            assert!(f.distance(&tr.at(1.9).unwrap(), &end) < 1e-7);
        }
    }

    #[test]
    fn orbit_segment_has_anchor_at_zero() {
        let f = VectorFieldSpec::DampedTorus { alpha: [1.0, 0.4142], center: [0.5, 0.5], sharpness: 3.0 };
        let x = [0.9, 0.05];
        let seg = orbit_segment(&f, &x, 1.5, 2.0, 0.1, &IntegratorOptions::default()).unwrap();
        assert_eq!(seg.t0(), -1.5);
        assert_eq!(seg.t1(), 2.0);
        assert!(f.distance(&seg.at(0.0).unwrap(), &x) < 1e-14);
        let back = flow(&f, &x, -1.2, 1e-11).unwrap();
        assert!(f.distance(&seg.at(-1.2).unwrap(), &back) < 1e-8);
        let fwd = flow(&f, &x, 1.75, 1e-11).unwrap();
        assert!(f.distance(&seg.at(1.75).unwrap(), &fwd) < 1e-8);
    }

    #[test]
    fn equilibrium_of_damped_torus() {
        let f = VectorFieldSpec::DampedTorus { alpha: [1.0, 0.4142], center: [0.5, 0.5], sharpness: 3.0 };
        let tr = trajectory(&f, &[0.5, 0.5], 0.0, 5.0, 0.5, &IntegratorOptions::default()).unwrap();
        for (_, p) in tr.grid(0.25).unwrap() {
            assert_eq!(p, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn exact_suspension_trajectory() {
        let f = VectorFieldSpec::Suspension1d {
            map: crate::field::CircleMap::Rotation { rho: 0.3 },
            roof: crate::field::ScalarField::Constant { value: 1.0 },
        };
        let tr = trajectory(&f, &[0.1, 0.0], 0.0, 3.0, 0.4, &IntegratorOptions::default()).unwrap();
        let p = tr.at(2.5).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }
}
