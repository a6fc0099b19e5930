//! Reference implementations used to cross-check the Gaussian fast path.
//!
//! Nothing here calls into the covariance propagation, the quadrature or the
//! library's matrix exponential: the Fock-space amplitudes, the displacement
//! operator and the vectorized Lyapunov solution all run on a self-contained
//! Taylor exponential.

mod expm;
pub mod fock;
pub mod lyapunov;

pub use fock::{
    coherent_amplitudes, coherent_projection_fock, qubit_pi_pulse_povm, tms_fock_state,
    tms_fock_state_auto, FockVector, PovmCase, PovmCheck,
};
pub use lyapunov::lyapunov_closed_form;
