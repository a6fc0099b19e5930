//! Truncated Fock-space states, coherent overlaps and the number-selective π-pulse POVM.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::expm::expm;
use crate::error::{Error, Result};

/// Largest tolerated norm deficit `1 - ‖ψ‖²` of a truncated state.
pub const NORM_DEFICIT_TOL: f64 = 1e-8;

/// Pure state on one or two truncated modes; two-mode amplitudes are row-major `n₁ × n₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub cutoff: usize,
    pub modes: usize,
    pub amplitudes: Vec<Complex64>,
}

impl FockVector {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn amplitude(&self, n1: usize, n2: usize) -> Complex64 {
        match self.modes {
            1 => self.amplitudes[n1],
            _ => self.amplitudes[n1 * self.cutoff + n2],
        }
    }
}

/// `sech r Σₙ (-e^{iφ} tanh r)ⁿ |n, n⟩` truncated to `n < cutoff`.
pub fn tms_fock_state(r: f64, phi: f64, cutoff: usize) -> Result<FockVector> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("squeezing must be >= 0, got {r}")));
    }
    if cutoff == 0 {
        return Err(Error::invalid("cutoff must be positive"));
    }
    let ratio = -Complex64::from_polar(r.tanh(), phi);
    let mut amps = vec![Complex64::new(0.0, 0.0); cutoff * cutoff];
    let mut c = Complex64::new(1.0 / r.cosh(), 0.0);
    for n in 0..cutoff {
        amps[n * cutoff + n] = c;
        c *= ratio;
    }
    let psi = FockVector {
        cutoff,
        modes: 2,
        amplitudes: amps,
    };
    let deficit = 1.0 - psi.norm_sqr();
    if deficit >= NORM_DEFICIT_TOL {
        return Err(Error::CutoffTooSmall { cutoff, deficit });
    }
    Ok(psi)
}

/// Starts at `max(20, ⌈10 sinh²r⌉)` and doubles the cutoff until the norm deficit is small.
pub fn tms_fock_state_auto(r: f64, phi: f64) -> Result<FockVector> {
    let mut cutoff = 20usize.max((10.0 * r.sinh().powi(2)).ceil() as usize);
    loop {
        match tms_fock_state(r, phi, cutoff) {
            Err(Error::CutoffTooSmall { .. }) if cutoff < 1 << 16 => cutoff *= 2,
            other => return other,
        }
    }
}

/// `⟨n|α⟩ = e^{-|α|²/2} αⁿ / √n!` for `n < cutoff`, through logarithms so large `|α|` and `n`
/// do not overflow.
pub fn coherent_amplitudes(alpha: Complex64, cutoff: usize) -> Vec<Complex64> {
    let r = alpha.norm();
    if r == 0.0 {
        let mut v = vec![Complex64::new(0.0, 0.0); cutoff];
        if cutoff > 0 {
            v[0] = Complex64::new(1.0, 0.0);
        }
        return v;
    }
    let (ln_r, arg) = (r.ln(), alpha.arg());
    let mut ln_fact = 0.0;
    (0..cutoff)
        .map(|n| {
            if n > 0 {
                ln_fact += (n as f64).ln();
            }
            let ln_mag = -0.5 * r * r + n as f64 * ln_r - 0.5 * ln_fact;
            Complex64::from_polar(ln_mag.exp(), n as f64 * arg)
        })
        .collect()
}

/// `|⟨α, β|ψ⟩|²` (the second amplitude is ignored for a single mode).
pub fn coherent_projection_fock(psi: &FockVector, alpha: Complex64, beta: Complex64) -> f64 {
    let ca = coherent_amplitudes(alpha, psi.cutoff);
    match psi.modes {
        1 => ca
            .iter()
            .zip(&psi.amplitudes)
            .map(|(c, a)| c.conj() * a)
            .sum::<Complex64>()
            .norm_sqr(),
        _ => {
            let cb = coherent_amplitudes(beta, psi.cutoff);
            psi.amplitudes
                .chunks(psi.cutoff)
                .zip(&ca)
                .map(|(row, a)| {
                    a.conj()
                        * row
                            .iter()
                            .zip(&cb)
                            .map(|(v, b)| b.conj() * v)
                            .sum::<Complex64>()
                })
                .sum::<Complex64>()
                .norm_sqr()
        }
    }
}

/// `⟨α|ρ|α⟩` for a truncated single-mode density matrix.
fn coherent_expectation(rho: &DMatrix<Complex64>, alpha: Complex64) -> f64 {
    let c = coherent_amplitudes(alpha, rho.nrows());
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            acc += c[i].conj() * rho[(i, j)] * c[j];
        }
    }
    acc.re
}

/// `D(α)` truncated to `cutoff`, computed on a doubled space so edge effects stay out of reach.
fn displacement(alpha: Complex64, cutoff: usize) -> DMatrix<Complex64> {
    let big = 2 * cutoff + 20;
    let mut gen = DMatrix::<Complex64>::zeros(big, big);
    for n in 1..big {
        let s = (n as f64).sqrt();
        // α a† - α* a
        gen[(n, n - 1)] += alpha * s;
        gen[(n - 1, n)] -= alpha.conj() * s;
    }
    expm(&gen).view((0, 0), (cutoff, cutoff)).into_owned()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PovmCase {
    pub name: String,
    /// Excited-state probability after displacement and the π pulse.
    pub p_e: f64,
    /// `⟨P_α⟩` evaluated directly from coherent amplitudes.
    pub p_alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PovmCheck {
    pub cutoff: usize,
    pub unitarity_defect: f64,
    pub m_e_is_vacuum_projector: bool,
    pub m_g_is_complement: bool,
    pub cases: Vec<PovmCase>,
}

impl PovmCheck {
    pub fn max_case_error(&self) -> f64 {
        self.cases
            .iter()
            .map(|c| (c.p_e - c.p_alpha).abs())
            .fold(0.0, f64::max)
    }
}

// cavity ⊗ qubit index, qubit 0 = g, 1 = e
fn idx(n: usize, q: usize) -> usize {
    2 * n + q
}

/// Builds `U_π = |0,e⟩⟨0,g| + |0,g⟩⟨0,e| + Σ_{l≥1} |l⟩⟨l| ⊗ 1`, extracts the measurement
/// operators `M_r = ⟨r|U_π|g⟩`, and compares `p_e` on displaced test states with `⟨P_α⟩`.
pub fn qubit_pi_pulse_povm(cutoff: usize) -> Result<PovmCheck> {
    if cutoff < 2 {
        return Err(Error::invalid(format!(
            "POVM check needs cutoff >= 2, got {cutoff}"
        )));
    }
    let dim = 2 * cutoff;
    let one = Complex64::new(1.0, 0.0);
    let mut u = DMatrix::<Complex64>::zeros(dim, dim);
    u[(idx(0, 1), idx(0, 0))] = one;
    u[(idx(0, 0), idx(0, 1))] = one;
    for l in 1..cutoff {
        for q in 0..2 {
            u[(idx(l, q), idx(l, q))] = one;
        }
    }
    let defect = (u.adjoint() * &u - DMatrix::<Complex64>::identity(dim, dim))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if defect > 1e-12 {
        return Err(Error::Construction(format!(
            "U_pi unitarity defect {defect:e}"
        )));
    }
    let m = |r: usize| DMatrix::from_fn(cutoff, cutoff, |n, k| u[(idx(n, r), idx(k, 0))]);
    let (m_g, m_e) = (m(0), m(1));
    let mut vac = DMatrix::<Complex64>::zeros(cutoff, cutoff);
    vac[(0, 0)] = one;
    let complement = DMatrix::<Complex64>::identity(cutoff, cutoff) - &vac;

    let p_e = |rho: &DMatrix<Complex64>, alpha: Complex64| -> f64 {
        let d = displacement(-alpha, cutoff);
        let shifted = &d * rho * d.adjoint();
        // ρ ⊗ |g⟩⟨g| through U_π, then project the qubit on |e⟩
        let mut joint = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..cutoff {
            for j in 0..cutoff {
                joint[(idx(i, 0), idx(j, 0))] = shifted[(i, j)];
            }
        }
        let out = &u * joint * u.adjoint();
        (0..cutoff).map(|n| out[(idx(n, 1), idx(n, 1))].re).sum()
    };

    let pure = |amps: Vec<Complex64>| {
        let v = nalgebra::DVector::from_vec(amps);
        &v * v.adjoint()
    };
    let thermal = |nbar: f64| {
        let q = nbar / (nbar + 1.0);
        DMatrix::from_fn(cutoff, cutoff, |i, j| {
            if i == j {
                Complex64::new(q.powi(i as i32) / (nbar + 1.0), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    };
    let gamma = Complex64::new(0.6, -0.3);
    let r = 0.76f64;
    let tests: Vec<(String, DMatrix<Complex64>, Complex64)> = vec![
        (
            "coherent, displaced to vacuum".into(),
            pure(coherent_amplitudes(gamma, cutoff)),
            gamma,
        ),
        (
            "coherent, offset setting".into(),
            pure(coherent_amplitudes(gamma, cutoff)),
            Complex64::new(0.1, 0.4),
        ),
        (
            "thermal nbar=1".into(),
            thermal(1.0),
            Complex64::new(0.0, 0.0),
        ),
        (
            "thermal nbar=1, displaced".into(),
            thermal(1.0),
            Complex64::new(0.5, 0.2),
        ),
        (
            "tms r=0.76 marginal".into(),
            thermal(r.sinh().powi(2)),
            Complex64::new(0.0, 0.0),
        ),
    ];
    let cases = tests
        .into_iter()
        .map(|(name, rho, alpha)| PovmCase {
            name,
            p_e: p_e(&rho, alpha),
            p_alpha: coherent_expectation(&rho, alpha),
        })
        .collect();
    Ok(PovmCheck {
        cutoff,
        unitarity_defect: defect,
        m_e_is_vacuum_projector: m_e == vac,
        m_g_is_complement: m_g == complement,
        cases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    #[test]
    fn tms_zero_squeezing_is_vacuum() {
        let psi = tms_fock_state(0.0, 0.0, 10).unwrap();
        assert_eq!(psi.amplitude(0, 0), Complex64::new(1.0, 0.0));
        assert_eq!(coherent_projection_fock(&psi, z(), z()), 1.0);
    }

    #[test]
    fn tms_vacuum_weight() {
        let psi = tms_fock_state_auto(0.76, 0.4).unwrap();
        let want = 1.0 / 0.76f64.cosh().powi(2);
        assert!((psi.amplitude(0, 0).norm_sqr() - want).abs() < 1e-15);
        assert!((coherent_projection_fock(&psi, z(), z()) - want).abs() < 1e-14);
    }

    #[test]
    fn small_cutoff_rejected_and_auto_raised() {
        assert!(matches!(
            tms_fock_state(1.5, 0.0, 10),
            Err(Error::CutoffTooSmall { .. })
        ));
        let psi = tms_fock_state_auto(2.0, 0.0).unwrap();
        assert!(1.0 - psi.norm_sqr() < NORM_DEFICIT_TOL);
    }

    #[test]
    fn coherent_amplitudes_are_normalized_for_large_alpha() {
        let c = coherent_amplitudes(Complex64::new(6.0, -8.0), 400);
        let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(c.iter().all(|z| z.re.is_finite()));
    }

    #[test]
    fn coherent_overlap() {
        let a = Complex64::new(0.3, 0.5);
        let b = Complex64::new(-0.2, 0.1);
        let psi = FockVector {
            cutoff: 40,
            modes: 1,
            amplitudes: coherent_amplitudes(a, 40),
        };
        let want = (-(a - b).norm_sqr()).exp();
        assert!((coherent_projection_fock(&psi, b, z()) - want).abs() < 1e-14);
    }

    #[test]
    fn povm_construction() {
        let chk = qubit_pi_pulse_povm(40).unwrap();
        assert!(chk.m_e_is_vacuum_projector);
        assert!(chk.m_g_is_complement);
        assert!(chk.unitarity_defect == 0.0);
        assert!(chk.max_case_error() < 1e-8, "{:?}", chk.cases);
        assert!((chk.cases[0].p_e - 1.0).abs() < 1e-8);
        assert!((chk.cases[2].p_e - 0.5).abs() < 1e-8);
        assert!(qubit_pi_pulse_povm(1).is_err());
    }
}
