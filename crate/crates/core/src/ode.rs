//! Classical fourth-order Runge–Kutta with step-doubling (Richardson) error control.
//!
//! Each step is taken once with `h` and twice with `h/2`; the difference estimates the
//! local error of the half-step result and the accepted value is the Richardson
//! extrapolation `y_half + (y_half - y_full)/15`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Vector-space operations the integrator needs from its state.
pub trait OdeState: Clone {
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn max_abs(&self) -> f64;
    fn max_abs_diff(&self, other: &Self) -> f64;
    fn all_finite(&self) -> bool;
}

impl OdeState for DMatrix<f64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x.iter()) {
            *s += a * v;
        }
    }
    fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl<const N: usize> OdeState for [Complex64; N] {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x.iter()) {
            *s += v * a;
        }
    }
    fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Relative tolerance on the local error, measured against the largest state entry.
    pub rtol: f64,
    /// Absolute floor for the error scale, so an all-zero state does not force tiny steps.
    pub atol: f64,
    pub dt_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            dt_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl StepControl {
    pub fn with_dt_max(dt_max: f64) -> Self {
        Self {
            dt_max,
            ..Self::default()
        }
    }
}

fn rk4_step<S, F>(rhs: &mut F, t: f64, y: &S, k1: &S, h: f64) -> S
where
    S: OdeState,
    F: FnMut(f64, &S) -> S,
{
    let mut tmp = y.clone();
    tmp.axpy(0.5 * h, k1);
    let k2 = rhs(t + 0.5 * h, &tmp);
    let mut tmp = y.clone();
    tmp.axpy(0.5 * h, &k2);
    let k3 = rhs(t + 0.5 * h, &tmp);
    let mut tmp = y.clone();
    tmp.axpy(h, &k3);
    let k4 = rhs(t + h, &tmp);
    let mut out = y.clone();
    out.axpy(h / 6.0, k1);
    out.axpy(h / 3.0, &k2);
    out.axpy(h / 3.0, &k3);
    out.axpy(h / 6.0, &k4);
    out
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1 >= t0`.
pub fn integrate<S, F>(y0: S, t0: f64, t1: f64, ctrl: StepControl, mut rhs: F) -> Result<S>
where
    S: OdeState,
    F: FnMut(f64, &S) -> S,
{
    if !(t1 >= t0) {
        return Err(Error::invalid(format!(
            "integration interval [{t0}, {t1}] is reversed"
        )));
    }
    if !(ctrl.dt_max > 0.0) {
        return Err(Error::invalid("dt_max must be positive"));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let mut y = y0;
    let mut t = t0;
    let mut h = ctrl.dt_max.min(span / 16.0);
    let h_min = span * 1e-14;
    for _ in 0..ctrl.max_steps {
        let remaining = t1 - t;
        if remaining <= span * 1e-15 {
            return Ok(y);
        }
        h = h.min(remaining).min(ctrl.dt_max);
        let k1 = rhs(t, &y);
        let full = rk4_step(&mut rhs, t, &y, &k1, h);
        // the first half-step shares the initial slope
        let mid = rk4_step(&mut rhs, t, &y, &k1, 0.5 * h);
        let k_mid = rhs(t + 0.5 * h, &mid);
        let half = rk4_step(&mut rhs, t + 0.5 * h, &mid, &k_mid, 0.5 * h);
        if !half.all_finite() || !full.all_finite() {
            return Err(Error::Divergence {
                t: t + h,
                reason: "non-finite state".into(),
            });
        }
        let err = half.max_abs_diff(&full) / 15.0;
        let scale = ctrl.rtol * half.max_abs() + ctrl.atol;
        let accept = err <= scale;
        if accept {
            let mut accepted = half.clone();
            accepted.axpy(1.0 / 15.0, &half);
            accepted.axpy(-1.0 / 15.0, &full);
            y = accepted;
            t = if t1 - (t + h) <= h_min { t1 } else { t + h };
        }
        let factor = if err == 0.0 {
            4.0
        } else {
            (0.9 * (scale / err).powf(0.2)).clamp(0.2, 4.0)
        };
        h *= factor;
        if !accept && h < h_min {
            return Err(Error::Divergence {
                t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }
    }
    Err(Error::Divergence {
        t,
        reason: format!("exceeded {} steps", ctrl.max_steps),
    })
}
