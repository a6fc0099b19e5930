//! Red-pulse shaping for the mechanics → cavity state swap.
//!
//! The swap fidelity is the squared overlap `I = ⟨v, w⟩²` of
//! `v(t) = √Γ_bs(t) exp(-½∫₀ᵗ Γ_bs)` and `w(t) = √κ_c(t) exp(-½∫ₜ^τ κ_c)`, bounded by
//! `(1 - e^{-K_v})(1 - e^{-K_w})`. The bound is saturated when `v ≡ w`, which for the
//! coupled conditions `Γ̇_bs = κ_c Γ_bs`, `κ̇_c = -κ_c Γ_bs` with `Γ_bs(τ) = κ_c(0)` gives
//! mirror-image logistics: the coupling ramps up while the cavity closes.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::RateFn;
use crate::error::{Error, Result};
use crate::ode::{self, StepControl};
use crate::quadrature::{self, QuadratureOptions};

/// `ln(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// A nonnegative rate profile with a closed-form antiderivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Constant(f64),
    /// `rate / (1 + e^{-rate (t - center)})`
    LogisticRise {
        rate: f64,
        center: f64,
    },
    /// `rate / (1 + e^{rate (t - center)})`
    LogisticFall {
        rate: f64,
        center: f64,
    },
    /// Equal-width steps covering `[0, span]`.
    Piecewise {
        span: f64,
        levels: Vec<f64>,
    },
}

impl Profile {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Profile::Constant(v) => *v,
            Profile::LogisticRise { rate, center } => rate / (1.0 + (-rate * (t - center)).exp()),
            Profile::LogisticFall { rate, center } => rate / (1.0 + (rate * (t - center)).exp()),
            Profile::Piecewise { span, levels } => {
                let n = levels.len();
                let k = ((t / span) * n as f64).floor().clamp(0.0, (n - 1) as f64) as usize;
                levels[k]
            }
        }
    }

    fn antiderivative(&self, t: f64) -> f64 {
        match self {
            Profile::Constant(v) => v * t,
            Profile::LogisticRise { rate, center } => softplus(rate * (t - center)),
            Profile::LogisticFall { rate, center } => -softplus(-rate * (t - center)),
            Profile::Piecewise { span, levels } => {
                let n = levels.len();
                let w = span / n as f64;
                let t = t.clamp(0.0, *span);
                let full = ((t / w).floor() as usize).min(n);
                let mut acc: f64 = levels[..full].iter().sum::<f64>() * w;
                if full < n {
                    acc += levels[full] * (t - full as f64 * w);
                }
                acc
            }
        }
    }

    /// `∫ₐᵇ profile`
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Profile::Piecewise { span, levels } => {
                let n = levels.len();
                (1..n).map(|k| span * k as f64 / n as f64).collect()
            }
            _ => Vec::new(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Profile::Constant(v) => v.is_finite() && *v >= 0.0,
            Profile::LogisticRise { rate, center } | Profile::LogisticFall { rate, center } => {
                rate.is_finite() && *rate > 0.0 && center.is_finite()
            }
            Profile::Piecewise { span, levels } => {
                span.is_finite()
                    && *span > 0.0
                    && !levels.is_empty()
                    && levels.iter().all(|v| v.is_finite() && *v >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProfile(format!("{name}: {self:?}")))
        }
    }
}

/// Time profiles of the swap coupling and the detection-cavity bandwidth on `[0, tau2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub tau2: f64,
    pub gamma_bs: Profile,
    pub kappa_c: Profile,
    /// `∫₀^τ Γ_bs`
    pub k_v: f64,
    /// `∫₀^τ κ_c`
    pub k_w: f64,
}

impl PulseSchedule {
    pub fn new(tau2: f64, gamma_bs: Profile, kappa_c: Profile) -> Result<Self> {
        if !(tau2 > 0.0) || !tau2.is_finite() {
            return Err(Error::invalid(format!("tau2 must be positive, got {tau2}")));
        }
        gamma_bs.validate("gamma_bs")?;
        kappa_c.validate("kappa_c")?;
        let k_v = gamma_bs.integral(0.0, tau2);
        let k_w = kappa_c.integral(0.0, tau2);
        Ok(Self {
            tau2,
            gamma_bs,
            kappa_c,
            k_v,
            k_w,
        })
    }

    pub fn gamma_bs(&self, t: f64) -> f64 {
        self.gamma_bs.value(t)
    }

    pub fn kappa_c(&self, t: f64) -> f64 {
        self.kappa_c.value(t)
    }

    /// The product bound `(1 - e^{-K_v})(1 - e^{-K_w})` on the fidelity.
    pub fn fidelity_bound(&self) -> f64 {
        (1.0 - (-self.k_v).exp()) * (1.0 - (-self.k_w).exp())
    }

    /// Sorted interval endpoints including every discontinuity of either profile.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![0.0, self.tau2];
        pts.extend(self.gamma_bs.breakpoints());
        pts.extend(self.kappa_c.breakpoints());
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Both profiles as shareable closures, for the dynamics builders.
    pub fn rate_fns(&self) -> (RateFn, RateFn) {
        let g = self.gamma_bs.clone();
        let k = self.kappa_c.clone();
        (Arc::new(move |t| g.value(t)), Arc::new(move |t| k.value(t)))
    }

    /// Writes `t,gamma_bs,kappa_c` on a uniform grid of `samples` points.
    pub fn write_csv<W: Write>(&self, mut w: W, samples: usize) -> Result<()> {
        writeln!(w, "t,gamma_bs,kappa_c")?;
        let n = samples.max(2);
        for k in 0..n {
            let t = self.tau2 * k as f64 / (n - 1) as f64;
            writeln!(
                w,
                "{:.12e},{:.12e},{:.12e}",
                t,
                self.gamma_bs(t),
                self.kappa_c(t)
            )?;
        }
        Ok(())
    }
}

/// Mirror-image logistic schedule centered on `tau2/2` with shape rate `m`.
pub fn optimal_shapes(tau2: f64, m: f64) -> Result<PulseSchedule> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::invalid(format!(
            "shape rate must be positive, got {m}"
        )));
    }
    let center = 0.5 * tau2;
    PulseSchedule::new(
        tau2,
        Profile::LogisticRise { rate: m, center },
        Profile::LogisticFall { rate: m, center },
    )
}

/// Peak coupling of the optimal schedule, reached at `t = tau2`.
pub fn peak_coupling(m: f64, tau2: f64) -> f64 {
    m / (1.0 + (-0.5 * m * tau2).exp())
}

/// Finds the shape rate whose schedule peaks exactly at `gamma_max`.
pub fn solve_m(gamma_max: f64, tau2: f64) -> Result<f64> {
    if !(gamma_max > 0.0) || !(tau2 > 0.0) || !gamma_max.is_finite() || !tau2.is_finite() {
        return Err(Error::invalid(format!(
            "solve_m needs positive gamma_max and tau2, got {gamma_max}, {tau2}"
        )));
    }
    let f = |m: f64| peak_coupling(m, tau2) - gamma_max;
    let (mut lo, mut hi) = (gamma_max, 2.0 * gamma_max);
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::RootNotFound(format!(
            "no sign change on [{lo}, {hi}] ({flo:e}, {fhi:e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `I = [∫₀^τ √(Γ_bs κ_c) e^{-½∫ₜ^τ κ_c} e^{-½∫₀ᵗ Γ_bs} dt]²` by adaptive quadrature.
///
/// The inner integrals come from the profiles' antiderivatives, so each outer node costs O(1).
pub fn transfer_fidelity(schedule: &PulseSchedule) -> Result<f64> {
    let tau = schedule.tau2;
    let integrand = |t: f64| {
        let g = schedule.gamma_bs(t);
        let k = schedule.kappa_c(t);
        let decay = schedule.kappa_c.integral(t, tau) + schedule.gamma_bs.integral(0.0, t);
        (g * k).sqrt() * (-0.5 * decay).exp()
    };
    let opts = QuadratureOptions {
        rtol: 1e-10,
        atol: 1e-15,
        ..QuadratureOptions::default()
    };
    let overlap = quadrature::integrate_pieces(integrand, &schedule.breakpoints(), opts)?;
    Ok(overlap * overlap)
}

/// Final mechanical and cavity amplitudes of the classical swap dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferAmplitudes {
    pub beta: Complex64,
    pub xi: Complex64,
}

/// Integrates `β' = -Γ_bs β/2`, `ξ' = -κ_c ξ/2 - i√(Γ_bs κ_c) β` from `ξ(0) = 0` up to `t_end`.
pub fn classical_transfer_until(
    schedule: &PulseSchedule,
    beta0: Complex64,
    t_end: f64,
) -> Result<TransferAmplitudes> {
    if !(0.0..=schedule.tau2).contains(&t_end) {
        return Err(Error::invalid(format!(
            "t_end {t_end} outside [0, {}]",
            schedule.tau2
        )));
    }
    let ctrl = StepControl {
        rtol: 1e-12,
        atol: 1e-16,
        dt_max: schedule.tau2 / 64.0,
        ..StepControl::default()
    };
    let mut y = [beta0, Complex64::new(0.0, 0.0)];
    let mut pts: Vec<f64> = schedule
        .breakpoints()
        .into_iter()
        .filter(|&t| t < t_end)
        .collect();
    pts.push(t_end);
    for w in pts.windows(2) {
        y = ode::integrate(y, w[0], w[1], ctrl, |t, y| {
            let g = schedule.gamma_bs(t);
            let k = schedule.kappa_c(t);
            [
                y[0] * (-0.5 * g),
                y[1] * (-0.5 * k) - Complex64::new(0.0, (g * k).sqrt()) * y[0],
            ]
        })?;
    }
    Ok(TransferAmplitudes {
        beta: y[0],
        xi: y[1],
    })
}

pub fn classical_transfer_sim(
    schedule: &PulseSchedule,
    beta0: Complex64,
) -> Result<TransferAmplitudes> {
    classical_transfer_until(schedule, beta0, schedule.tau2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_and_sum_identities() {
        let s = optimal_shapes(4.0, 2.5).unwrap();
        assert!((s.gamma_bs(2.0) - 1.25).abs() < 1e-15);
        assert!((s.kappa_c(2.0) - 1.25).abs() < 1e-15);
        for k in 0..=40 {
            let t = 4.0 * k as f64 / 40.0;
            assert!((s.gamma_bs(t) + s.kappa_c(t) - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_condition_and_monotonicity() {
        let s = optimal_shapes(3.0, 1.7).unwrap();
        let (g_end, k_start) = (s.gamma_bs(3.0), s.kappa_c(0.0));
        assert!((g_end - k_start).abs() <= 1e-10 * g_end);
        let mut prev = (s.gamma_bs(0.0), s.kappa_c(0.0));
        for k in 1..=100 {
            let t = 3.0 * k as f64 / 100.0;
            let cur = (s.gamma_bs(t), s.kappa_c(t));
            assert!(cur.0 > prev.0 && cur.1 < prev.1);
            prev = cur;
        }
    }

    #[test]
    fn integrated_rates_equal_half_m_tau() {
        let s = optimal_shapes(5.0, 2.0).unwrap();
        assert!((s.k_v - 5.0).abs() < 1e-12);
        assert!((s.k_w - 5.0).abs() < 1e-12);
    }

    #[test]
    fn solve_m_examples() {
        let m = solve_m(1.0, 1.0).unwrap();
        assert!((peak_coupling(m, 1.0) - 1.0).abs() < 1e-12);
        let m_long = solve_m(2.0, 50.0).unwrap();
        assert!((m_long - 2.0).abs() < 1e-12);
        let gaps: Vec<f64> = [0.5, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&t| solve_m(1.0, t).unwrap() - 1.0)
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        assert!(solve_m(0.0, 1.0).is_err());
        assert!(solve_m(1.0, -1.0).is_err());
    }

    #[test]
    fn zero_coupling_transfers_nothing() {
        let s = PulseSchedule::new(2.0, Profile::Constant(0.0), Profile::Constant(1.0)).unwrap();
        assert_eq!(transfer_fidelity(&s).unwrap(), 0.0);
        let a = classical_transfer_sim(&s, Complex64::new(1.0, 0.0)).unwrap();
        assert!(a.xi.norm() < 1e-15);
    }

    #[test]
    fn zero_amplitude_stays_zero() {
        let s = optimal_shapes(8.0, 1.0).unwrap();
        let a = classical_transfer_sim(&s, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(a.xi, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(PulseSchedule::new(1.0, Profile::Constant(-1.0), Profile::Constant(1.0)).is_err());
        assert!(optimal_shapes(1.0, 0.0).is_err());
        assert!(optimal_shapes(0.0, 1.0).is_err());
    }

    #[test]
    fn piecewise_integral() {
        let p = Profile::Piecewise {
            span: 2.0,
            levels: vec![1.0, 3.0, 0.5, 2.0],
        };
        assert!((p.integral(0.0, 2.0) - 3.25).abs() < 1e-15);
        assert!((p.integral(0.25, 0.75) - (0.25 + 0.75)).abs() < 1e-15);
        assert_eq!(p.value(2.0), 2.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = optimal_shapes(2.0, 1.0).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, 11).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,gamma_bs,kappa_c");
        assert_eq!(lines.len(), 12);
    }
}
