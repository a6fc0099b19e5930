#![allow(dead_code)]

use emech_bell::bell::MeasurementSettings;
use emech_bell::gaussian::symplectic_form;
use emech_bell::params::SystemParams;
use emech_bell::GaussianState;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// `S diag(ν) Sᵀ` with `S = exp(Ω H)` for a random symmetric `H`, symplectic eigenvalues
/// `ν ≥ 1/2`, and a random mean.
pub fn random_two_mode_state<R: Rng>(rng: &mut R, squeeze_scale: f64) -> GaussianState {
    let mut h = DMatrix::<f64>::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0) * squeeze_scale);
    h = (&h + h.transpose()) * 0.5;
    let s = (symplectic_form(2) * h).exp();
    let nu1 = 0.5 + rng.gen_range(0.0..2.0f64).powi(2);
    let nu2 = 0.5 + rng.gen_range(0.0..2.0f64).powi(2);
    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![nu1, nu1, nu2, nu2]));
    let cov = &s * d * s.transpose();
    let mean = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
    GaussianState::new(vec!["A".into(), "B".into()], mean, cov).unwrap()
}

pub fn random_settings<R: Rng>(rng: &mut R, radius: f64) -> MeasurementSettings {
    let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-radius..radius)).collect();
    MeasurementSettings::from_params(&x)
}

/// The electromechanical working point used throughout the protocol tests.
pub fn working_point(c: f64, lambda_t: f64, n0: f64) -> SystemParams {
    SystemParams::from_cooperativity(1.0, 0.125, 1.0 / 3e6, 40.0, n0, lambda_t, c, 1.0).unwrap()
}

/// A two-mode squeezed state sent through independent thermal-loss channels, with random local
/// phases and a small random mean.
pub fn random_noisy_tms<R: Rng>(rng: &mut R) -> GaussianState {
    let r = rng.gen_range(0.0..1.5);
    let tms = emech_bell::gaussian::two_mode_squeezed_cov(r, rng.gen_range(-3.2..3.2))
        .unwrap()
        .relabel(&["A", "B"])
        .unwrap();
    let mut cov = tms.cov().clone();
    for k in 0..2 {
        let t: f64 = rng.gen_range(0.7..1.0);
        let n: f64 = rng.gen_range(0.0..0.3);
        let scale = DMatrix::from_diagonal(&DVector::from_fn(4, |i, _| {
            if i / 2 == k {
                t.sqrt()
            } else {
                1.0
            }
        }));
        cov = &scale * cov * &scale;
        for i in 2 * k..2 * k + 2 {
            cov[(i, i)] += (1.0 - t) * (n + 0.5);
        }
    }
    let mean = DVector::from_fn(4, |_, _| rng.gen_range(-0.1..0.1));
    GaussianState::new(vec!["A".into(), "B".into()], mean, cov)
        .unwrap()
        .rotate_mode("A", rng.gen_range(-3.2..3.2))
        .unwrap()
        .rotate_mode("B", rng.gen_range(-3.2..3.2))
        .unwrap()
}
