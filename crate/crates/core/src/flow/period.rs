use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::VectorFieldSpec;
use crate::linalg::norm2;
use crate::minimize::golden_section;

use super::{trajectory, IntegratorOptions};

/// Search settings for [`min_period_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodProbeOptions {
    pub t_max: f64,
    pub tol_close: f64,
    pub dt_out: f64,
    /// Returns earlier than this are ignored; `None` means `10 * dt_out`.
    pub t_floor: Option<f64>,
    pub integrator: IntegratorOptions,
}

impl PeriodProbeOptions {
    pub fn new(t_max: f64, tol_close: f64) -> Self {
        PeriodProbeOptions {
            t_max,
            tol_close,
            dt_out: 0.01,
            t_floor: None,
            integrator: IntegratorOptions::default(),
        }
    }

    pub fn floor(&self) -> f64 {
        self.t_floor.unwrap_or(10.0 * self.dt_out)
    }
}

/// Outcome of [`min_period_probe`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodProbe {
    /// Smallest refined return time found, `INFINITY` if none.
    pub eps0_upper: f64,
    /// Sample point and return time realizing `eps0_upper`.
    pub witness: Option<(Vec<f64>, f64)>,
    /// Return distance at the witness.
    pub witness_distance: f64,
}

/// Upper bound on the smallest period of a regular periodic orbit through the samples.
///
/// Along each orbit the return distance `d(phi_t x, x)` is scanned on the output grid;
/// every grid local minimum past the floor is refined by golden section and accepted
/// when the refined distance is at most `tol_close`.
pub fn min_period_probe(
    field: &VectorFieldSpec,
    samples: &[Vec<f64>],
    opts: &PeriodProbeOptions,
) -> Result<PeriodProbe> {
    if !(opts.t_max > 0.0 && opts.tol_close > 0.0 && opts.dt_out > 0.0) {
        return Err(Error::InvalidArgument("period probe needs positive t_max, tol_close, dt_out".into()));
    }
    let floor = opts.floor();
    let mut best = PeriodProbe { eps0_upper: f64::INFINITY, witness: None, witness_distance: f64::INFINITY };
    for x in samples {
        if x.len() != field.dim() {
            return Err(Error::DimensionMismatch { expected: field.dim(), found: x.len() });
        }
        let speed = norm2(&field.eval(x));
        if !(speed > opts.tol_close) {
            return Err(Error::Precondition(alloc::format!("sample {x:?} is not regular (|X| = {speed:e})")));
        }
        let horizon = opts.t_max.min(best.eps0_upper + 2.0 * opts.dt_out);
        if horizon <= floor {
            continue;
        }
        let mut x0 = x.clone();
        field.domain().wrap(&mut x0);
        let tr = trajectory(field, &x0, 0.0, horizon, opts.dt_out, &opts.integrator)?;
        let grid = tr.grid(opts.dt_out)?;
        let d: Vec<f64> = grid.iter().map(|(_, p)| field.distance(p, &x0)).collect();
        for k in 1..grid.len() {
            let t = grid[k].0;
            if t <= floor {
                continue;
            }
            let prev = d[k - 1];
            let next = d.get(k + 1).copied().unwrap_or(f64::INFINITY);
            if !(d[k] <= prev && d[k] <= next && d[k] <= opts.tol_close + prev.max(next.min(prev * 4.0))) {
                continue;
            }
            let lo = grid[k - 1].0.max(floor);
            let hi = grid.get(k + 1).map_or(t, |g| g.0);
            let (tm, dm) = golden_section(
                |s| tr.at(s).map_or(f64::INFINITY, |p| field.distance(&p, &x0)),
                lo,
                hi,
                1e-12 * (1.0 + hi),
            );
            if dm <= opts.tol_close && tm > floor {
                if tm < best.eps0_upper {
                    best = PeriodProbe { eps0_upper: tm, witness: Some((x0.clone(), tm)), witness_distance: dm };
                }
                break;
            }
        }
    }
    Ok(best)
}
