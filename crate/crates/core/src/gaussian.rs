//! Zero-mean Gaussian states over labeled bosonic modes.
//!
//! Quadratures are `x = (a + a†)/√2`, `y = -i(a - a†)/√2`, so `[x, y] = i` and the
//! vacuum covariance is `I/2`. Vectors are ordered `(x₁, y₁, x₂, y₂, ...)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Symmetry tolerance enforced after every update.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Lower bound on the eigenvalues of `Σ + (i/2)Ω` for a state to count as physical.
pub const PHYSICALITY_TOL: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    labels: Vec<String>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Wraps a covariance matrix. The matrix is symmetrized; physicality is not checked here.
    pub fn new(labels: Vec<String>, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::invalid("a state needs at least one mode"));
        }
        if mean.len() != 2 * n || cov.nrows() != 2 * n || cov.ncols() != 2 * n {
            return Err(Error::invalid(format!(
                "dimension mismatch: {n} modes, mean {}, cov {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::invalid(format!("duplicate mode label `{l}`")));
            }
        }
        let mut s = Self { labels, mean, cov };
        s.symmetrize();
        Ok(s)
    }

    pub fn from_cov(labels: &[&str], cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        Self::new(
            labels.iter().map(|s| s.to_string()).collect(),
            DVector::zeros(n),
            cov,
        )
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_modes(&self) -> usize {
        self.labels.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub(crate) fn cov_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.cov
    }

    pub fn mode_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::invalid(format!("unknown mode label `{label}`")))
    }

    pub fn relabel(mut self, labels: &[&str]) -> Result<Self> {
        if labels.len() != self.labels.len() {
            return Err(Error::invalid("relabel needs one label per mode"));
        }
        self.labels = labels.iter().map(|s| s.to_string()).collect();
        Self::new(self.labels, self.mean, self.cov)
    }

    pub fn symmetrize(&mut self) {
        let t = self.cov.transpose();
        self.cov += t;
        self.cov *= 0.5;
    }

    /// Smallest eigenvalue of the Hermitian matrix `Σ + (i/2)Ω`.
    ///
    /// Evaluated through the real symmetric embedding `[[Σ, -Ω/2], [Ω/2, Σ]]`,
    /// which has the same spectrum with every eigenvalue doubled.
    pub fn min_uncertainty_eigenvalue(&self) -> f64 {
        let d = self.cov.nrows();
        let omega = symplectic_form(self.n_modes());
        let mut big = DMatrix::zeros(2 * d, 2 * d);
        big.view_mut((0, 0), (d, d)).copy_from(&self.cov);
        big.view_mut((d, d), (d, d)).copy_from(&self.cov);
        big.view_mut((0, d), (d, d)).copy_from(&(&omega * -0.5));
        big.view_mut((d, 0), (d, d)).copy_from(&(&omega * 0.5));
        SymmetricEigen::new(big).eigenvalues.min()
    }

    pub fn is_physical(&self) -> bool {
        self.is_symmetric() && self.min_uncertainty_eigenvalue() >= PHYSICALITY_TOL
    }

    pub fn is_symmetric(&self) -> bool {
        let d = self.cov.nrows();
        (0..d).all(|i| (0..i).all(|j| (self.cov[(i, j)] - self.cov[(j, i)]).abs() <= SYMMETRY_TOL))
    }

    /// Direct sum `self ⊕ other`, modes of `self` first.
    pub fn tensor(&self, other: &GaussianState) -> Result<Self> {
        let (a, b) = (self.cov.nrows(), other.cov.nrows());
        let mut cov = DMatrix::zeros(a + b, a + b);
        cov.view_mut((0, 0), (a, a)).copy_from(&self.cov);
        cov.view_mut((a, a), (b, b)).copy_from(&other.cov);
        let mean =
            DVector::from_iterator(a + b, self.mean.iter().chain(other.mean.iter()).copied());
        let labels = self
            .labels
            .iter()
            .chain(other.labels.iter())
            .cloned()
            .collect();
        Self::new(labels, mean, cov)
    }

    /// Rotates the phase of one mode, `a → a e^{iθ}`.
    pub fn rotate_mode(&self, label: &str, theta: f64) -> Result<Self> {
        let k = self.mode_index(label)?;
        let d = self.cov.nrows();
        let mut r = DMatrix::<f64>::identity(d, d);
        let (c, s) = (theta.cos(), theta.sin());
        r[(2 * k, 2 * k)] = c;
        r[(2 * k, 2 * k + 1)] = -s;
        r[(2 * k + 1, 2 * k)] = s;
        r[(2 * k + 1, 2 * k + 1)] = c;
        let cov = &r * &self.cov * r.transpose();
        Self::new(self.labels.clone(), &r * &self.mean, cov)
    }

    /// Reorders or restricts the modes of the state.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::invalid("partial trace must keep at least one mode"));
        }
        let idx = keep
            .iter()
            .map(|l| self.mode_index(l))
            .collect::<Result<Vec<_>>>()?;
        let quads: Vec<usize> = idx.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect();
        let d = quads.len();
        let cov = DMatrix::from_fn(d, d, |i, j| self.cov[(quads[i], quads[j])]);
        let mean = DVector::from_fn(d, |i, _| self.mean[quads[i]]);
        Self::new(keep.iter().map(|s| s.to_string()).collect(), mean, cov)
    }

    /// Purity `Tr ρ² = 1 / (2^n √det Σ)`.
    pub fn purity(&self) -> f64 {
        let n = self.n_modes() as i32;
        1.0 / (2f64.powi(n) * self.cov.determinant().sqrt())
    }
}

/// `Ω = ⊕ [[0, 1], [-1, 0]]` for `n` modes.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        o[(2 * k, 2 * k + 1)] = 1.0;
        o[(2 * k + 1, 2 * k)] = -1.0;
    }
    o
}

fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|k| k.to_string()).collect()
}

pub fn vacuum_state(n_modes: usize) -> Result<GaussianState> {
    if n_modes == 0 {
        return Err(Error::invalid("vacuum_state needs n_modes >= 1"));
    }
    let d = 2 * n_modes;
    GaussianState::new(
        default_labels(n_modes),
        DVector::zeros(d),
        DMatrix::identity(d, d) * 0.5,
    )
}

pub fn thermal_state(n0: f64) -> Result<GaussianState> {
    if !(n0 >= 0.0) || !n0.is_finite() {
        return Err(Error::invalid(format!(
            "thermal occupation must be >= 0, got {n0}"
        )));
    }
    GaussianState::new(
        default_labels(1),
        DVector::zeros(2),
        DMatrix::identity(2, 2) * (n0 + 0.5),
    )
}

/// Two-mode squeezed vacuum `sech r Σ (-e^{iφ} tanh r)^n |n,n⟩`.
///
/// Diagonal blocks are `cosh(2r)/2 · I`; the cross block is
/// `sinh(2r)/2 · [[-cos φ, -sin φ], [-sin φ, cos φ]]`.
pub fn two_mode_squeezed_cov(r: f64, phi: f64) -> Result<GaussianState> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("squeezing must be >= 0, got {r}")));
    }
    let c = (2.0 * r).cosh() / 2.0;
    let s = (2.0 * r).sinh() / 2.0;
    let (cp, sp) = (phi.cos(), phi.sin());
    let cross = [[-s * cp, -s * sp], [-s * sp, s * cp]];
    let mut cov = DMatrix::zeros(4, 4);
    for i in 0..2 {
        cov[(i, i)] = c;
        cov[(i + 2, i + 2)] = c;
        for j in 0..2 {
            cov[(i, j + 2)] = cross[i][j];
            cov[(j + 2, i)] = cross[i][j];
        }
    }
    GaussianState::new(default_labels(2), DVector::zeros(4), cov)
}

/// Quadrature displacement `(√2 Re α₁, √2 Im α₁, ...)` for coherent amplitudes.
pub fn displacement_vector(amplitudes: &[Complex64]) -> DVector<f64> {
    let s = std::f64::consts::SQRT_2;
    DVector::from_iterator(
        2 * amplitudes.len(),
        amplitudes.iter().flat_map(|a| [s * a.re, s * a.im]),
    )
}

/// `⟨α₁…αₙ|ρ|α₁…αₙ⟩ = exp(-½ δᵀ(Σ + I/2)⁻¹δ) / √det(Σ + I/2)` with `δ = d - mean`.
pub fn coherent_projection_prob(state: &GaussianState, d: &DVector<f64>) -> Result<f64> {
    let dim = state.cov.nrows();
    if d.len() != dim {
        return Err(Error::invalid(format!(
            "displacement has length {}, state needs {dim}",
            d.len()
        )));
    }
    let m = &state.cov + DMatrix::<f64>::identity(dim, dim) * 0.5;
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::NumericalDegeneracy("Σ + I/2 is not positive definite".into()))?;
    let delta = d - &state.mean;
    let sol = chol.solve(&delta);
    let quad = delta.dot(&sol);
    let sqrt_det: f64 = chol.l_dirty().diagonal().iter().product();
    Ok((-0.5 * quad).exp() / sqrt_det)
}
