//! CHSH correlations of displaced-vacuum observables and the settings optimizer.
//!
//! Each party measures `Π_α = 2 P_α - 1` with `P_α` the projector on the coherent
//! state `|α⟩`, so `E_{αβ} = 4⟨P_α ⊗ P_β⟩ - 2⟨P_α ⊗ 1 + 1 ⊗ P_β⟩ + 1`.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{coherent_projection_prob, displacement_vector, GaussianState};
use crate::simplex::{self, SimplexOptions};

/// Largest allowed modulus of a setting amplitude.
pub const SETTINGS_BOX: f64 = 10.0;
pub const DEFAULT_RESTARTS: usize = 12;
const SEED_STREAM: u64 = 0x5eed_0b11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSettings {
    pub alpha1: Complex64,
    pub alpha2: Complex64,
    pub beta1: Complex64,
    pub beta2: Complex64,
}

impl MeasurementSettings {
    pub fn zero() -> Self {
        Self::from_params(&[0.0; 8])
    }

    /// `(Re α₁, Im α₁, Re α₂, Im α₂, Re β₁, Im β₁, Re β₂, Im β₂)`
    pub fn from_params(x: &[f64]) -> Self {
        let c = |k: usize| Complex64::new(x[2 * k], x[2 * k + 1]);
        Self {
            alpha1: c(0),
            alpha2: c(1),
            beta1: c(2),
            beta2: c(3),
        }
    }

    pub fn params(&self) -> [f64; 8] {
        let [a1, a2, b1, b2] = [self.alpha1, self.alpha2, self.beta1, self.beta2];
        [a1.re, a1.im, a2.re, a2.im, b1.re, b1.im, b2.re, b2.im]
    }

    pub fn is_valid(&self) -> bool {
        [self.alpha1, self.alpha2, self.beta1, self.beta2]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite() && z.norm() <= SETTINGS_BOX)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    pub s: f64,
    pub e: [[f64; 2]; 2],
    pub settings: MeasurementSettings,
    pub tau1: f64,
    pub tau2: f64,
    pub upsilon: f64,
    pub converged: bool,
}

fn check_two_mode(state: &GaussianState) -> Result<()> {
    if state.n_modes() != 2 {
        return Err(Error::invalid(format!(
            "Bell evaluation needs a two-mode state, got {} modes",
            state.n_modes()
        )));
    }
    Ok(())
}

/// `E_{αβ}` through the general coherent projection on the joint state and its marginals.
pub fn correlation_e(state: &GaussianState, alpha: Complex64, beta: Complex64) -> Result<f64> {
    check_two_mode(state)?;
    let labels: Vec<&str> = state.labels().iter().map(String::as_str).collect();
    let joint = coherent_projection_prob(state, &displacement_vector(&[alpha, beta]))?;
    let pa = coherent_projection_prob(
        &state.partial_trace(&[labels[0]])?,
        &displacement_vector(&[alpha]),
    )?;
    let pb = coherent_projection_prob(
        &state.partial_trace(&[labels[1]])?,
        &displacement_vector(&[beta]),
    )?;
    Ok(4.0 * joint - 2.0 * (pa + pb) + 1.0)
}

/// Signed `S = E₁₁ + E₁₂ + E₂₁ - E₂₂`.
pub fn chsh_s(state: &GaussianState, s: &MeasurementSettings) -> Result<f64> {
    Ok(BellEvaluator::new(state)?.s(s))
}

/// Precomputed inverses and normalizations of `Σ + I/2` and its marginals.
#[derive(Debug, Clone)]
pub struct BellEvaluator {
    joint_inv: Matrix4<f64>,
    joint_norm: f64,
    a_inv: Matrix2<f64>,
    a_norm: f64,
    b_inv: Matrix2<f64>,
    b_norm: f64,
    mean: Vector4<f64>,
}

fn inv_and_norm2(m: Matrix2<f64>) -> Result<(Matrix2<f64>, f64)> {
    let chol = m.cholesky().ok_or_else(|| {
        Error::NumericalDegeneracy("marginal Σ + I/2 is not positive definite".into())
    })?;
    Ok((chol.inverse(), 1.0 / chol.l().diagonal().product()))
}

impl BellEvaluator {
    pub fn new(state: &GaussianState) -> Result<Self> {
        check_two_mode(state)?;
        let c = state.cov();
        let m = Matrix4::from_fn(|i, j| c[(i, j)]) + Matrix4::identity() * 0.5;
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::NumericalDegeneracy("Σ + I/2 is not positive definite".into()))?;
        let joint_norm = 1.0 / chol.l().diagonal().product();
        let (a_inv, a_norm) = inv_and_norm2(m.fixed_view::<2, 2>(0, 0).into_owned())?;
        let (b_inv, b_norm) = inv_and_norm2(m.fixed_view::<2, 2>(2, 2).into_owned())?;
        let mu = state.mean();
        Ok(Self {
            joint_inv: chol.inverse(),
            joint_norm,
            a_inv,
            a_norm,
            b_inv,
            b_norm,
            mean: Vector4::new(mu[0], mu[1], mu[2], mu[3]),
        })
    }

    pub fn e(&self, alpha: Complex64, beta: Complex64) -> f64 {
        let s2 = std::f64::consts::SQRT_2;
        let d = Vector4::new(s2 * alpha.re, s2 * alpha.im, s2 * beta.re, s2 * beta.im) - self.mean;
        let da = Vector2::new(d[0], d[1]);
        let db = Vector2::new(d[2], d[3]);
        let joint = self.joint_norm * (-0.5 * d.dot(&(self.joint_inv * d))).exp();
        let pa = self.a_norm * (-0.5 * da.dot(&(self.a_inv * da))).exp();
        let pb = self.b_norm * (-0.5 * db.dot(&(self.b_inv * db))).exp();
        4.0 * joint - 2.0 * (pa + pb) + 1.0
    }

    pub fn grid(&self, s: &MeasurementSettings) -> [[f64; 2]; 2] {
        [
            [self.e(s.alpha1, s.beta1), self.e(s.alpha1, s.beta2)],
            [self.e(s.alpha2, s.beta1), self.e(s.alpha2, s.beta2)],
        ]
    }

    pub fn s(&self, s: &MeasurementSettings) -> f64 {
        let e = self.grid(s);
        e[0][0] + e[0][1] + e[1][0] - e[1][1]
    }
}

/// Deterministic restart points: the origin, small real and imaginary patterns, then random
/// points drawn from a stream selected by `seed`.
pub fn seed_points(count: usize, seed: u64) -> Vec<[f64; 8]> {
    #[rustfmt::skip]
    let fixed: [[f64; 8]; 7] = [
        [0.0; 8],
        [0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5, 0.0],
        [0.0, 0.0, 0.5, 0.0, 0.0, 0.0, -0.5, 0.0],
        [-0.16, 0.0, 0.52, 0.0, 0.16, 0.0, -0.52, 0.0],
        [-0.16, 0.0, 0.52, 0.0, -0.16, 0.0, 0.52, 0.0],
        [0.0, -0.16, 0.0, 0.52, 0.0, 0.16, 0.0, -0.52],
        [0.0, -0.16, 0.0, 0.52, 0.0, -0.16, 0.0, 0.52],
    ];
    let mut out: Vec<[f64; 8]> = fixed.iter().take(count).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED_STREAM ^ seed);
    while out.len() < count {
        let mut x = [0.0; 8];
        for v in x.iter_mut() {
            *v = rng.gen_range(-0.8..0.8);
        }
        out.push(x);
    }
    out
}

fn settings_box() -> ([f64; 8], [f64; 8]) {
    let h = SETTINGS_BOX / std::f64::consts::SQRT_2;
    ([-h; 8], [h; 8])
}

fn polish(ev: &BellEvaluator, x0: &[f64]) -> (Vec<f64>, f64, bool) {
    let (lo, hi) = settings_box();
    let opts = SimplexOptions {
        initial_step: 0.1 / (hi[0] - lo[0]),
        diameter_tol: 1e-7,
        max_iter: 5000,
    };
    let objective = |x: &[f64]| -ev.s(&MeasurementSettings::from_params(x));
    let first = simplex::minimize(objective, x0, &lo, &hi, opts);
    // a fresh simplex around the optimum guards against premature collapse
    let second = simplex::minimize(objective, &first.x, &lo, &hi, opts);
    if second.value <= first.value {
        (second.x, -second.value, first.converged && second.converged)
    } else {
        (first.x, -first.value, first.converged)
    }
}

/// Maximizes the signed `S` over the eight real setting parameters.
pub fn optimize_settings(state: &GaussianState, restarts: usize) -> Result<BellResult> {
    optimize_settings_from(state, restarts, None, 0)
}

/// As [`optimize_settings`], also trying `warm` first when given.
pub fn optimize_settings_from(
    state: &GaussianState,
    restarts: usize,
    warm: Option<&MeasurementSettings>,
    seed: u64,
) -> Result<BellResult> {
    let ev = BellEvaluator::new(state)?;
    let mut starts: Vec<[f64; 8]> = warm.map(|w| w.params()).into_iter().collect();
    starts.extend(seed_points(restarts.max(1), seed));
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for x0 in &starts {
        let cand = polish(&ev, x0);
        let better = match &best {
            None => true,
            Some(b) => cand.1 > b.1,
        };
        if better {
            best = Some(cand);
        }
    }
    let (x, s, converged) = best.expect("at least one start");
    let settings = MeasurementSettings::from_params(&x);
    Ok(BellResult {
        s,
        e: ev.grid(&settings),
        settings,
        tau1: 0.0,
        tau2: 0.0,
        upsilon: 0.0,
        converged,
    })
}
