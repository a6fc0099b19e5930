//! Physical parameters of the electromechanical circuit and the rates derived from them.
//!
//! All rates are angular (rad/s). Occupations are dimensionless.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `g_max / kappa_lc` for which adiabatic elimination of the LC mode is trusted.
pub const WEAK_COUPLING_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Mechanical angular frequency.
    pub omega_m: f64,
    /// LC-circuit energy decay rate.
    pub kappa_lc: f64,
    /// Mechanical FWHM damping rate.
    pub gamma_m: f64,
    /// Thermal bath occupation.
    pub nbar: f64,
    /// Initial mechanical occupation.
    pub n0: f64,
    /// Transmission efficiency between LC circuit and detection cavity.
    pub lambda_t: f64,
    /// Maximal linearized electromechanical coupling.
    pub g_max: f64,
    /// Detection-cavity bandwidth during the entangling pulse, in units of `Gamma_sq`.
    pub upsilon: f64,
}

impl SystemParams {
    /// Builds a parameter set whose coupling is fixed through the cooperativity
    /// `C = 4 g_max^2 / (kappa_lc gamma_m (nbar + 1))`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_cooperativity(
        omega_m: f64,
        kappa_lc: f64,
        gamma_m: f64,
        nbar: f64,
        n0: f64,
        lambda_t: f64,
        cooperativity: f64,
        upsilon: f64,
    ) -> Result<Self> {
        if !(cooperativity >= 0.0) || !cooperativity.is_finite() {
            return Err(Error::invalid(format!(
                "cooperativity must be finite and nonnegative, got {cooperativity}"
            )));
        }
        let g_max = (cooperativity * kappa_lc * gamma_m * (nbar + 1.0) / 4.0).sqrt();
        let p = Self {
            omega_m,
            kappa_lc,
            gamma_m,
            nbar,
            n0,
            lambda_t,
            g_max,
            upsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("omega_m", self.omega_m),
            ("kappa_lc", self.kappa_lc),
            ("gamma_m", self.gamma_m),
            ("nbar", self.nbar),
            ("n0", self.n0),
            ("g_max", self.g_max),
            ("upsilon", self.upsilon),
        ];
        for (name, v) in rates {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.kappa_lc == 0.0 {
            return Err(Error::invalid("kappa_lc must be positive"));
        }
        if !(0.0..=1.0).contains(&self.lambda_t) {
            return Err(Error::invalid(format!(
                "lambda_t must lie in [0, 1], got {}",
                self.lambda_t
            )));
        }
        Ok(())
    }

    /// Off-resonant sideband suppression `1 / [1 + (4 omega_m / kappa_lc)^2]`.
    pub fn epsilon(&self) -> f64 {
        let r = 4.0 * self.omega_m / self.kappa_lc;
        1.0 / (1.0 + r * r)
    }

    /// Effective scattering rate `4 g^2 / kappa_lc` for a coupling `g`.
    pub fn scattering_rate(&self, g: f64) -> f64 {
        4.0 * g * g / self.kappa_lc
    }

    /// `Gamma = 4 g_max^2 / kappa_lc`, the rate unit of the protocol durations.
    pub fn gamma_max(&self) -> f64 {
        self.scattering_rate(self.g_max)
    }

    /// Quantum cooperativity. Infinite when the mechanics is undamped.
    pub fn cooperativity(&self) -> f64 {
        self.gamma_max() / (self.gamma_m * (self.nbar + 1.0))
    }

    pub fn is_weak_coupling(&self) -> bool {
        self.g_max / self.kappa_lc <= WEAK_COUPLING_LIMIT
    }

    /// Effective mechanical coherence time `1 / (nbar gamma_m)`.
    pub fn coherence_time(&self) -> f64 {
        1.0 / (self.nbar * self.gamma_m)
    }

    /// Total mechanical diffusion `(1 + epsilon) Gamma_i + gamma_m (2 nbar + 1)`
    /// accompanying a sideband process at rate `rate`.
    pub fn dressed_rate(&self, rate: f64) -> f64 {
        (1.0 + self.epsilon()) * rate + self.gamma_m * (2.0 * self.nbar + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline() -> SystemParams {
        let omega_m = 2.0 * std::f64::consts::PI * 10.0e6;
        SystemParams::from_cooperativity(
            omega_m,
            omega_m / 8.0,
            omega_m / 3.0e6,
            40.0,
            0.1,
            1.0,
            100.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn epsilon_for_kappa_over_omega_one_eighth() {
        let p = baseline();
        assert!((p.epsilon() - 1.0 / 1025.0).abs() < 1e-15);
        assert!(p.epsilon() > 0.0 && p.epsilon() < 1.0);
    }

    #[test]
    fn cooperativity_round_trips() {
        let p = baseline();
        assert!((p.cooperativity() - 100.0).abs() < 1e-9);
        assert!(p.is_weak_coupling());
    }

    #[test]
    fn rejects_out_of_range() {
        let mut p = baseline();
        p.lambda_t = 1.2;
        assert!(matches!(p.validate(), Err(Error::InvalidArgument(_))));
        p.lambda_t = 1.0;
        p.gamma_m = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn dressed_rate_matches_definition() {
        let p = baseline();
        let g = 3.0;
        let want = (1.0 + p.epsilon()) * g + p.gamma_m * (2.0 * p.nbar + 1.0);
        assert_eq!(p.dressed_rate(g), want);
    }
}
