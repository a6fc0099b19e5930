//! Drift/diffusion generators and propagation of the differential Lyapunov equation
//! `Σ' = F Σ + Σ Fᵀ + N`.
//!
//! Two model families are provided. The adiabatic two-mode models over
//! `(mechanics, detection cavity)` are written out entry by entry for the blue
//! (two-mode squeezing) and red (beam splitter) pulses, in a frame rotating at the
//! mechanical frequency. The full three-mode model over `(mechanics, LC, cavity)` is
//! assembled from its quadratic Hamiltonian and Lindblad operators by
//! [`QuadraticModel`], keeps the counter-rotating terms and lives in the lab frame.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::{symplectic_form, GaussianState};
use crate::ode::{self, StepControl};
use crate::params::SystemParams;

/// Tolerance on the smallest eigenvalue of a diffusion matrix.
pub const DIFFUSION_PSD_TOL: f64 = -1e-10;

pub type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type GeneratorFn = Arc<dyn Fn(f64) -> (DMatrix<f64>, DMatrix<f64>) + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Constant {
        drift: DMatrix<f64>,
        diffusion: DMatrix<f64>,
    },
    TimeDependent(GeneratorFn),
}

/// Drift `F` and diffusion `N` of a Lyapunov step, possibly time dependent.
#[derive(Clone)]
pub struct GeneratorPair {
    dim: usize,
    kind: Kind,
}

impl fmt::Debug for GeneratorPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Constant { drift, diffusion } => f
                .debug_struct("GeneratorPair")
                .field("drift", drift)
                .field("diffusion", diffusion)
                .finish(),
            Kind::TimeDependent(_) => f
                .debug_struct("GeneratorPair")
                .field("dim", &self.dim)
                .field("time_dependent", &true)
                .finish(),
        }
    }
}

impl GeneratorPair {
    pub fn constant(drift: DMatrix<f64>, diffusion: DMatrix<f64>) -> Result<Self> {
        let dim = drift.nrows();
        if !drift.is_square() || diffusion.shape() != drift.shape() || !dim.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "generator shapes {:?} / {:?} are not a matching even square pair",
                drift.shape(),
                diffusion.shape()
            )));
        }
        check_diffusion(&diffusion)?;
        Ok(Self {
            dim,
            kind: Kind::Constant { drift, diffusion },
        })
    }

    /// Wraps an evaluator `t ↦ (F(t), N(t))`. The evaluator must return `dim × dim` matrices.
    pub fn time_dependent(dim: usize, eval: GeneratorFn) -> Self {
        Self {
            dim,
            kind: Kind::TimeDependent(eval),
        }
    }

    /// Quadrature dimension `2n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_modes(&self) -> usize {
        self.dim / 2
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self.kind, Kind::TimeDependent(_))
    }

    pub fn at(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        match &self.kind {
            Kind::Constant { drift, diffusion } => (drift.clone(), diffusion.clone()),
            Kind::TimeDependent(f) => f(t),
        }
    }
}

fn check_diffusion(n: &DMatrix<f64>) -> Result<()> {
    let asym = (n - n.transpose()).abs().max();
    if asym > 1e-12 * (1.0 + n.abs().max()) {
        return Err(Error::invalid(format!(
            "diffusion matrix not symmetric ({asym:e})"
        )));
    }
    let min = SymmetricEigen::new(n.clone()).eigenvalues.min();
    if min < DIFFUSION_PSD_TOL * (1.0 + n.abs().max()) {
        return Err(Error::invalid(format!(
            "diffusion matrix not positive semidefinite (min eigenvalue {min:e})"
        )));
    }
    Ok(())
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::invalid(format!(
            "{name} must be finite and >= 0, got {v}"
        )));
    }
    Ok(())
}

/// Blue-sideband (entangling) generator over `(m, cavity)`.
pub fn blue_matrices(
    p: &SystemParams,
    gamma_sq: f64,
    kappa_c: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let eps = p.epsilon();
    let s = (p.lambda_t * kappa_c * gamma_sq).sqrt();
    let mech = (1.0 - eps) * gamma_sq - p.gamma_m;
    let dressed = p.dressed_rate(gamma_sq);
    #[rustfmt::skip]
    let f = DMatrix::from_row_slice(4, 4, &[
        mech,      0.0,       0.0,      0.0,
        0.0,       mech,      0.0,      0.0,
        -2.0 * s,  0.0,       -kappa_c, 0.0,
        0.0,       2.0 * s,   0.0,      -kappa_c,
    ]) * 0.5;
    #[rustfmt::skip]
    let n = DMatrix::from_row_slice(4, 4, &[
        dressed,  0.0,      -s,       0.0,
        0.0,      dressed,  0.0,      s,
        -s,       0.0,      kappa_c,  0.0,
        0.0,      s,        0.0,      kappa_c,
    ]) * 0.5;
    (f, n)
}

/// Red-sideband (swap) generator over `(m, cavity)` at one instant.
pub fn red_matrices(p: &SystemParams, gamma_bs: f64, kappa_c: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let eps = p.epsilon();
    let s = (p.lambda_t * kappa_c * gamma_bs).sqrt();
    let mech = -(1.0 - eps) * gamma_bs - p.gamma_m;
    let dressed = p.dressed_rate(gamma_bs);
    #[rustfmt::skip]
    let f = DMatrix::from_row_slice(4, 4, &[
        mech,      0.0,       0.0,      0.0,
        0.0,       mech,      0.0,      0.0,
        -2.0 * s,  0.0,       -kappa_c, 0.0,
        0.0,       -2.0 * s,  0.0,      -kappa_c,
    ]) * 0.5;
    #[rustfmt::skip]
    let n = DMatrix::from_row_slice(4, 4, &[
        dressed,  0.0,      s,        0.0,
        0.0,      dressed,  0.0,      s,
        s,        0.0,      kappa_c,  0.0,
        0.0,      s,        0.0,      kappa_c,
    ]) * 0.5;
    (f, n)
}

pub fn build_blue_generators(
    p: &SystemParams,
    gamma_sq: f64,
    kappa_c: f64,
) -> Result<GeneratorPair> {
    check_rate("gamma_sq", gamma_sq)?;
    check_rate("kappa_c", kappa_c)?;
    let (f, n) = blue_matrices(p, gamma_sq, kappa_c);
    GeneratorPair::constant(f, n)
}

/// Number of sample points used to vet a rate profile on its support.
const PROFILE_SAMPLES: usize = 1025;

fn vet_profile(name: &str, f: &RateFn, span: f64) -> Result<()> {
    for k in 0..PROFILE_SAMPLES {
        let t = span * k as f64 / (PROFILE_SAMPLES - 1) as f64;
        let v = f(t);
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidProfile(format!("{name}({t:e}) = {v}")));
        }
    }
    Ok(())
}

/// Time-dependent red-sideband generator driven by rate profiles on `[0, span]`.
pub fn build_red_generators(
    p: &SystemParams,
    gamma_bs: RateFn,
    kappa_c: RateFn,
    span: f64,
) -> Result<GeneratorPair> {
    if !(span >= 0.0) {
        return Err(Error::invalid(format!(
            "profile span must be >= 0, got {span}"
        )));
    }
    vet_profile("gamma_bs", &gamma_bs, span)?;
    vet_profile("kappa_c", &kappa_c, span)?;
    let p = *p;
    Ok(GeneratorPair::time_dependent(
        4,
        Arc::new(move |t| red_matrices(&p, gamma_bs(t), kappa_c(t))),
    ))
}

/// Linear-bosonic master equation assembled term by term and reduced to `(F, N)`.
///
/// With `H = ½ Xᵀ G X` and Lindblad operators `L_j = c_jᵀ X`, the covariance obeys
/// the Lyapunov equation with `F = Ω (G + Im M)` and `N = Ω Re M Ωᵀ`, where
/// `M = Σ_j conj(c_j) c_jᵀ`.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    n_modes: usize,
    hamiltonian: DMatrix<f64>,
    lindblad: DMatrix<Complex64>,
}

impl QuadraticModel {
    pub fn new(n_modes: usize) -> Self {
        let d = 2 * n_modes;
        Self {
            n_modes,
            hamiltonian: DMatrix::zeros(d, d),
            lindblad: DMatrix::zeros(d, d),
        }
    }

    /// Quadrature coefficients of the annihilation operator of `mode`.
    pub fn annihilation(&self, mode: usize) -> DVector<Complex64> {
        let mut c = DVector::zeros(2 * self.n_modes);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        c[2 * mode] = Complex64::new(s, 0.0);
        c[2 * mode + 1] = Complex64::new(0.0, s);
        c
    }

    pub fn creation(&self, mode: usize) -> DVector<Complex64> {
        self.annihilation(mode).map(|z| z.conj())
    }

    /// Adds `freq · a†a`.
    pub fn add_number(&mut self, mode: usize, freq: f64) -> &mut Self {
        self.hamiltonian[(2 * mode, 2 * mode)] += freq;
        self.hamiltonian[(2 * mode + 1, 2 * mode + 1)] += freq;
        self
    }

    /// Adds `value · X_i X_j` (symmetrized) to the Hamiltonian.
    pub fn add_quadrature_product(&mut self, i: usize, j: usize, value: f64) -> &mut Self {
        if i == j {
            self.hamiltonian[(i, i)] += 2.0 * value;
        } else {
            self.hamiltonian[(i, j)] += value;
            self.hamiltonian[(j, i)] += value;
        }
        self
    }

    /// Adds `rate · D[cᵀX]`.
    pub fn add_dissipator(&mut self, rate: f64, op: &DVector<Complex64>) -> &mut Self {
        let conj = op.map(|z| z.conj());
        self.lindblad += (&conj * op.transpose()) * Complex64::new(rate, 0.0);
        self
    }

    pub fn generators(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let omega = symplectic_form(self.n_modes);
        let im = self.lindblad.map(|z| z.im);
        let re = self.lindblad.map(|z| z.re);
        let f = &omega * (&self.hamiltonian + im);
        let n = &omega * re * omega.transpose();
        let n = (&n + n.transpose()) * 0.5;
        (f, n)
    }
}

/// Coupling profile of the full model.
#[derive(Clone)]
pub enum Coupling {
    Constant(f64),
    /// Shaped coupling `g(t)` on `[0, span]`.
    Shaped {
        g: RateFn,
        span: f64,
    },
}

/// Mode order of the full model.
pub const FULL_MODEL_LABELS: [&str; 3] = ["m", "lc", "c"];

fn full_matrices(
    p: &SystemParams,
    delta: f64,
    g: f64,
    kappa_c: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    const M: usize = 0;
    const LC: usize = 1;
    const C: usize = 2;
    let mut q = QuadraticModel::new(3);
    // detection cavity sits at the frequency of the resonantly scattered sideband
    q.add_number(M, p.omega_m)
        .add_number(LC, -delta)
        .add_number(C, -delta)
        // (g c_lc + g c_lc†)(c_m + c_m†) = 2 g x_lc x_m
        .add_quadrature_product(2 * LC, 2 * M, 2.0 * g);
    // Cascaded LC → cavity coupling: D[√κ_c c + √(λκ_lc) c_lc] + (1-λ)κ_lc D[c_lc]
    // plus the Hamiltonian -(k/2)(x_lc y_c - y_lc x_c), k = √(λ κ_lc κ_c).
    let k = (p.lambda_t * p.kappa_lc * kappa_c).sqrt();
    q.add_quadrature_product(2 * LC, 2 * C + 1, -0.5 * k)
        .add_quadrature_product(2 * LC + 1, 2 * C, 0.5 * k);
    let out = q.annihilation(C) * Complex64::new(kappa_c.sqrt(), 0.0)
        + q.annihilation(LC) * Complex64::new((p.lambda_t * p.kappa_lc).sqrt(), 0.0);
    let a_m = q.annihilation(M);
    let ad_m = q.creation(M);
    let a_lc = q.annihilation(LC);
    q.add_dissipator(1.0, &out)
        .add_dissipator((1.0 - p.lambda_t) * p.kappa_lc, &a_lc)
        .add_dissipator(p.gamma_m * (p.nbar + 1.0), &a_m)
        .add_dissipator(p.gamma_m * p.nbar, &ad_m);
    q.generators()
}

/// Full three-mode generator over `(m, lc, c)` in the lab frame, without rotating-wave
/// approximation on the electromechanical coupling.
pub fn build_full_generators(
    p: &SystemParams,
    delta: f64,
    coupling: Coupling,
    kappa_c: f64,
) -> Result<GeneratorPair> {
    check_rate("kappa_c", kappa_c)?;
    let p = *p;
    match coupling {
        Coupling::Constant(g) => {
            let (f, n) = full_matrices(&p, delta, g, kappa_c);
            GeneratorPair::constant(f, n)
        }
        Coupling::Shaped { g, span } => {
            warn_fast_drive(&g, span, p.kappa_lc.max(delta.abs()));
            Ok(GeneratorPair::time_dependent(
                6,
                Arc::new(move |t| full_matrices(&p, delta, g(t), kappa_c)),
            ))
        }
    }
}

/// Mechanical frequency shift `g² Im(η₋ + η₊)`, `η± = [κ_lc/2 - i(-Δ ± ω_m)]⁻¹`.
pub fn frequency_shift(p: &SystemParams, g: f64, delta: f64) -> f64 {
    let eta = |s: f64| Complex64::new(0.5 * p.kappa_lc, delta - s * p.omega_m).inv();
    g * g * (eta(-1.0) + eta(1.0)).im
}

/// Largest entry mismatch, relative to the largest entry, between the `(m, cavity)` covariance
/// of the full model and the adiabatic blue model after a constant-coupling pulse of area
/// `Γ_sq τ = area` with cavity bandwidth `υ Γ_sq`.
///
/// The drive sits on the shifted blue sideband `Δ = ω_m + δω_m`. The full-model result is
/// brought to the rotating frame by turning the mechanics by `(ω_m + δω_m)τ` and the cavity by
/// `-Δτ + π/2`.
pub fn adiabatic_blue_mismatch(p: &SystemParams, area: f64) -> Result<f64> {
    let g = p.g_max;
    let gamma = p.gamma_max();
    if !(gamma > 0.0) || !(area > 0.0) {
        return Err(Error::invalid(
            "mismatch needs positive coupling and pulse area",
        ));
    }
    let kappa_c = p.upsilon * gamma;
    let dw = frequency_shift(p, g, p.omega_m);
    let delta = p.omega_m + dw;
    let tau = area / gamma;

    let mech = crate::gaussian::thermal_state(p.n0)?.relabel(&["m"])?;
    let start = mech.tensor(&crate::gaussian::vacuum_state(2)?.relabel(&["lc", "c"])?)?;
    let (f, n) = full_matrices(p, delta, g, kappa_c);
    // stepping keeps the fast ω_m rotation accurate over thousands of periods
    let stepped = GeneratorPair::time_dependent(6, Arc::new(move |_| (f.clone(), n.clone())));
    let period = 2.0 * std::f64::consts::PI / p.omega_m.max(delta.abs());
    let full = propagate(&start, &stepped, tau, period / 60.0)?
        .partial_trace(&["m", "c"])?
        .rotate_mode("m", (p.omega_m + dw) * tau)?
        .rotate_mode("c", -delta * tau + std::f64::consts::FRAC_PI_2)?;

    let blue = build_blue_generators(p, gamma, kappa_c)?;
    let adiabatic = propagate(&start.partial_trace(&["m", "c"])?, &blue, tau, tau)?;
    Ok((full.cov() - adiabatic.cov()).abs().max() / adiabatic.cov().abs().max())
}

/// Logs a warning if `|ġ/g|` exceeds a tenth of `bound` anywhere on the support.
fn warn_fast_drive(g: &RateFn, span: f64, bound: f64) {
    let samples = 513;
    let h = span / (samples - 1) as f64;
    if h <= 0.0 {
        return;
    }
    for k in 1..samples - 1 {
        let t = k as f64 * h;
        let v = g(t);
        if v == 0.0 {
            continue;
        }
        let rate = ((g(t + h) - g(t - h)) / (2.0 * h * v)).abs();
        if rate > bound / 10.0 {
            log::warn!(
                "drive varies too fast at t = {t:e}: |g'/g| = {rate:e} > {:e}",
                bound / 10.0
            );
            return;
        }
    }
}

/// Propagates the full state under a generator acting on every mode.
pub fn propagate(
    state: &GaussianState,
    gen: &GeneratorPair,
    duration: f64,
    dt_max: f64,
) -> Result<GaussianState> {
    if gen.dim() != state.cov().nrows() {
        return Err(Error::invalid(format!(
            "generator dimension {} does not match state dimension {}",
            gen.dim(),
            state.cov().nrows()
        )));
    }
    let labels: Vec<&str> = state.labels().iter().map(String::as_str).collect();
    propagate_modes(state, gen, &labels, duration, dt_max)
}

/// Propagates the modes in `active` (in generator order) and leaves every other mode untouched.
///
/// Covariances between active and idle modes evolve with the drift alone; the idle block
/// itself is never written.
pub fn propagate_modes(
    state: &GaussianState,
    gen: &GeneratorPair,
    active: &[&str],
    duration: f64,
    dt_max: f64,
) -> Result<GaussianState> {
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::invalid(format!(
            "duration must be >= 0, got {duration}"
        )));
    }
    if gen.n_modes() != active.len() {
        return Err(Error::invalid(format!(
            "generator has {} modes but {} active modes were named",
            gen.n_modes(),
            active.len()
        )));
    }
    let idx = active
        .iter()
        .map(|l| state.mode_index(l))
        .collect::<Result<Vec<_>>>()?;
    let act: Vec<usize> = idx.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect();
    let total = state.cov().nrows();
    let idle: Vec<usize> = (0..total).filter(|i| !act.contains(i)).collect();
    let a = act.len();
    let cols: Vec<usize> = act.iter().chain(idle.iter()).copied().collect();

    // Y = [Σ_aa | Σ_ai]
    let cov = state.cov();
    let y0 = DMatrix::from_fn(a, total, |i, j| cov[(act[i], cols[j])]);
    let y = if duration == 0.0 {
        y0
    } else {
        match &gen.kind {
            Kind::Constant { drift, diffusion } => closed_form(drift, diffusion, &y0, duration)?,
            Kind::TimeDependent(f) => {
                let ctrl = StepControl::with_dt_max(dt_max);
                ode::integrate(y0, 0.0, duration, ctrl, |t, y| {
                    let (fm, nm) = f(t);
                    let mut dy = &fm * y;
                    let lead = dy.columns(0, a).clone_owned();
                    let mut aa = dy.columns_mut(0, a);
                    aa += lead.transpose();
                    aa += nm;
                    dy
                })?
            }
        }
    };
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::Divergence {
            t: duration,
            reason: "covariance became non-finite".into(),
        });
    }
    let mut out = state.clone();
    let m = out.cov_mut();
    for i in 0..a {
        for j in 0..total {
            m[(act[i], cols[j])] = y[(i, j)];
            if j >= a {
                m[(cols[j], act[i])] = y[(i, j)];
            }
        }
    }
    out.symmetrize();
    Ok(out)
}

/// `Σ_aa(t) = Φ Σ_aa Φᵀ + ∫₀ᵗ e^{Fs} N e^{Fᵀs} ds`, `Σ_ai(t) = Φ Σ_ai` with `Φ = e^{Ft}`,
/// both read off one exponential of the block matrix `[[-F, N], [0, Fᵀ]] t`.
fn closed_form(
    f: &DMatrix<f64>,
    n: &DMatrix<f64>,
    y0: &DMatrix<f64>,
    t: f64,
) -> Result<DMatrix<f64>> {
    let a = f.nrows();
    let mut block = DMatrix::zeros(2 * a, 2 * a);
    block.view_mut((0, 0), (a, a)).copy_from(&(-f * t));
    block.view_mut((0, a), (a, a)).copy_from(&(n * t));
    block
        .view_mut((a, a), (a, a))
        .copy_from(&(f.transpose() * t));
    let e = block.exp();
    let phi = e.view((a, a), (a, a)).transpose();
    let q = &phi * e.view((0, a), (a, a));
    let mut y = &phi * y0;
    let saa = y.columns(0, a) * phi.transpose() + q;
    y.columns_mut(0, a).copy_from(&saa);
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::Divergence {
            t,
            reason: "matrix exponential overflowed".into(),
        });
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{thermal_state, vacuum_state};

    fn params(lambda_t: f64, gamma_m: f64, kappa_over_omega: f64) -> SystemParams {
        SystemParams {
            omega_m: 1.0,
            kappa_lc: kappa_over_omega,
            gamma_m,
            nbar: 40.0,
            n0: 0.0,
            lambda_t,
            g_max: 0.01,
            upsilon: 1.0,
        }
    }

    #[test]
    fn blue_ideal_amplifies_mechanics() {
        // ε → 0 needs κ_lc ≪ ω_m
        let mut p = params(1.0, 0.0, 1e-9);
        p.omega_m = 1.0;
        let (f, _) = blue_matrices(&p, 2.0, 1.0);
        assert!((f[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((f[(1, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blue_without_coupling_is_thermal_contact() {
        let p = params(0.9, 0.01, 0.125);
        let g = build_blue_generators(&p, 0.0, 0.5).unwrap();
        let (f, n) = g.at(0.0);
        assert_eq!(f[(0, 0)], -0.005);
        assert_eq!(f[(1, 1)], -0.005);
        assert!((n[(0, 0)] - 0.01 * 81.0 / 2.0).abs() < 1e-15);
        assert_eq!(f[(2, 0)], 0.0);
    }

    #[test]
    fn red_constant_cross_terms() {
        let p = params(1.0, 0.0, 1e-9);
        let gen = build_red_generators(&p, Arc::new(|_| 0.7), Arc::new(|_| 0.7), 1.0).unwrap();
        let (f, n) = gen.at(0.3);
        assert!((f[(2, 0)] + 0.7).abs() < 1e-12);
        assert!((f[(3, 1)] + 0.7).abs() < 1e-12);
        assert!((n[(0, 2)] - 0.35).abs() < 1e-12);
    }

    #[test]
    fn red_rejects_negative_profile() {
        let p = params(1.0, 0.0, 0.125);
        let r = build_red_generators(&p, Arc::new(|t| 0.5 - t), Arc::new(|_| 1.0), 1.0);
        assert!(matches!(r, Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn diffusion_is_psd_for_parameter_grid() {
        for &lam in &[0.0, 0.5, 0.92, 1.0] {
            for &gm in &[0.0, 1e-3, 0.1] {
                let p = params(lam, gm, 0.125);
                for &(g, k) in &[(0.0, 0.0), (1.0, 0.3), (2.5, 7.0)] {
                    build_blue_generators(&p, g, k).unwrap();
                    let (_, n) = red_matrices(&p, g, k);
                    check_diffusion(&n).unwrap();
                }
            }
        }
    }

    #[test]
    fn zero_generator_leaves_state() {
        let s = thermal_state(0.4).unwrap();
        let g = GeneratorPair::constant(DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)).unwrap();
        let out = propagate(&s, &g, 3.0, 0.1).unwrap();
        assert_eq!(out.cov(), s.cov());
    }

    #[test]
    fn vacuum_is_fixed_point_of_decay() {
        let k = 2.0;
        let f = DMatrix::identity(2, 2) * (-k / 2.0);
        let n = DMatrix::identity(2, 2) * (k / 2.0);
        let g = GeneratorPair::constant(f.clone(), n.clone()).unwrap();
        let v = vacuum_state(1).unwrap();
        let out = propagate(&v, &g, 5.0, 0.1).unwrap();
        assert!((out.cov() - v.cov()).abs().max() < 1e-14);
        let gt = GeneratorPair::time_dependent(2, Arc::new(move |_| (f.clone(), n.clone())));
        let out = propagate(&v, &gt, 5.0, 0.1).unwrap();
        assert!((out.cov() - v.cov()).abs().max() < 1e-12);
    }

    #[test]
    fn single_mode_decay_matches_analytic() {
        let k: f64 = 0.8;
        let nth = 2.0;
        let f = DMatrix::identity(2, 2) * (-k / 2.0);
        let n = DMatrix::identity(2, 2) * (k / 2.0);
        let s0 = thermal_state(nth).unwrap();
        let t = 1.7;
        let want = nth * (-k * t).exp() + 0.5;
        let c = propagate(
            &s0,
            &GeneratorPair::constant(f.clone(), n.clone()).unwrap(),
            t,
            0.1,
        )
        .unwrap();
        assert!((c.cov()[(0, 0)] - want).abs() < 1e-13);
        let gt = GeneratorPair::time_dependent(2, Arc::new(move |_| (f.clone(), n.clone())));
        let r = propagate(&s0, &gt, t, 0.1).unwrap();
        assert!(
            (r.cov()[(0, 0)] - want).abs() < 1e-10,
            "{:e}",
            r.cov()[(0, 0)] - want
        );
    }

    #[test]
    fn idle_modes_are_untouched() {
        let p = params(0.95, 1e-3, 0.125);
        let s = thermal_state(0.3)
            .unwrap()
            .relabel(&["m"])
            .unwrap()
            .tensor(&vacuum_state(2).unwrap().relabel(&["A", "B"]).unwrap())
            .unwrap();
        let blue = build_blue_generators(&p, 1.0, 1.0).unwrap();
        let s1 = propagate_modes(&s, &blue, &["m", "A"], 0.8, 0.05).unwrap();
        let red = build_red_generators(
            &p,
            Arc::new(|t| 1.0 - 0.1 * t),
            Arc::new(|t| 0.1 + 0.1 * t),
            3.0,
        )
        .unwrap();
        let s2 = propagate_modes(&s1, &red, &["m", "B"], 3.0, 0.05).unwrap();
        let a1 = s1.partial_trace(&["A"]).unwrap();
        let a2 = s2.partial_trace(&["A"]).unwrap();
        assert_eq!(a1.cov(), a2.cov());
        assert!(s2.is_physical());
    }

    #[test]
    fn mismatched_generator_rejected() {
        let s = vacuum_state(3).unwrap();
        let p = params(1.0, 0.0, 0.125);
        let g = build_blue_generators(&p, 1.0, 1.0).unwrap();
        assert!(propagate(&s, &g, 1.0, 0.1).is_err());
        assert!(propagate_modes(&s, &g, &["1"], 1.0, 0.1).is_err());
        assert!(propagate_modes(&s, &g, &["1", "9"], 1.0, 0.1).is_err());
    }

    #[test]
    fn full_model_without_coupling_decouples() {
        let p = params(1.0, 0.0, 0.125);
        let gen = build_full_generators(&p, 1.0, Coupling::Constant(0.0), 0.05).unwrap();
        let (f, _) = gen.at(0.0);
        // mechanics rotates at ω_m and touches no other mode
        assert!((f[(0, 1)] - 1.0).abs() < 1e-15 && (f[(1, 0)] + 1.0).abs() < 1e-15);
        for j in 2..6 {
            assert_eq!(f[(0, j)], 0.0);
            assert_eq!(f[(j, 0)], 0.0);
        }
    }

    #[test]
    fn full_model_without_transmission_has_no_cascade() {
        let p = params(0.0, 0.0, 0.125);
        let gen = build_full_generators(&p, 1.0, Coupling::Constant(0.01), 0.05).unwrap();
        let (f, n) = gen.at(0.0);
        for i in 4..6 {
            for j in 0..4 {
                assert_eq!(f[(i, j)], 0.0);
                assert_eq!(n[(i, j)], 0.0);
            }
        }
        let v = vacuum_state(3).unwrap();
        let out = propagate_modes(&v, &gen, &["1", "2", "3"], 10.0, 0.05).unwrap();
        let c = out.partial_trace(&["3"]).unwrap();
        assert!((c.cov() - vacuum_state(1).unwrap().cov()).abs().max() < 1e-12);
    }
}
