//! Dormand–Prince 5(4) embedded Runge–Kutta pair.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::field::VectorFieldSpec;

const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One attempted step.
pub(crate) struct StepResult {
    pub y: Vec<f64>,
    pub f: Vec<f64>,
    /// Scaled RMS error estimate; the step is acceptable when `<= 1`.
    pub err: f64,
}

pub(crate) struct Stepper<'a> {
    field: &'a VectorFieldSpec,
    rtol: f64,
    atol: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(field: &'a VectorFieldSpec, rtol: f64, atol: f64) -> Self {
        let n = field.dim();
        Stepper {
            field,
            rtol,
            atol,
            k: core::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }

    fn stage(&mut self, y: &[f64], h: f64, coeffs: &[f64], out: usize) {
        for i in 0..y.len() {
            let mut s = 0.0;
            for (j, a) in coeffs.iter().enumerate() {
                s += a * self.k[j][i];
            }
            self.tmp[i] = y[i] + h * s;
        }
        let (_, rest) = self.k.split_at_mut(out);
        self.field.eval_into(&self.tmp, &mut rest[0]);
    }

    /// Attempts a step of size `h` from `y` with derivative `f0 = X(y)`.
    pub fn step(&mut self, y: &[f64], f0: &[f64], h: f64) -> StepResult {
        let n = y.len();
        self.k[0].copy_from_slice(f0);
        self.stage(y, h, &A2, 1);
        self.stage(y, h, &A3, 2);
        self.stage(y, h, &A4, 3);
        self.stage(y, h, &A5, 4);
        self.stage(y, h, &A6, 5);
        let mut y1 = vec![0.0; n];
        for i in 0..n {
            let s: f64 = B.iter().enumerate().map(|(j, b)| b * self.k[j][i]).sum();
            y1[i] = y[i] + h * s;
        }
        let mut f1 = vec![0.0; n];
        self.field.eval_into(&y1, &mut f1);
        self.k[6].copy_from_slice(&f1);
        let mut acc = 0.0;
        for i in 0..n {
            let e: f64 = E.iter().enumerate().map(|(j, c)| c * self.k[j][i]).sum::<f64>() * h;
            let sc = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
            acc += (e / sc) * (e / sc);
        }
        let err = if n == 0 { 0.0 } else { (acc / n as f64).sqrt() };
        StepResult { y: y1, f: f1, err }
    }

    /// Scaled RMS norm of a difference vector relative to `y`.
    pub fn scaled_norm(&self, d: &[f64], y: &[f64]) -> f64 {
        let n = d.len().max(1);
        let acc: f64 = d
            .iter()
            .zip(y)
            .map(|(di, yi)| {
                let sc = self.atol + self.rtol * yi.abs();
                (di / sc) * (di / sc)
            })
            .sum();
        (acc / n as f64).sqrt()
    }

    /// Hairer–Wanner initial step heuristic for order 5.
    pub fn initial_step(&mut self, y: &[f64], f0: &[f64], span: f64) -> f64 {
        let d0 = self.scaled_norm(y, y);
        let d1 = self.scaled_norm(f0, y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span.abs());
        let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
        let mut f1 = vec![0.0; y.len()];
        self.field.eval_into(&y1, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = self.scaled_norm(&diff, y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        (100.0 * h0).min(h1).min(span.abs()).max(f64::MIN_POSITIVE)
    }
}

/// Step-size factor after an error estimate `err`.
pub(crate) fn next_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}
