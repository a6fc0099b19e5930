//! Gaussian covariance simulation of a pulsed electromechanical CHSH test.
//!
//! A mechanical oscillator is entangled with a microwave pulse by a blue-sideband
//! drive, its state is then swapped onto a second pulse by a shaped red-sideband
//! drive, and both pulses are read out with vacuum-projection (weak-field
//! homodyne) measurements. All dynamics is linear, so the three-mode state stays
//! Gaussian and is carried as a covariance matrix integrated through the
//! differential Lyapunov equation.
//!
//! Modules, bottom-up:
//! - [`gaussian`]: zero-mean Gaussian states and the coherent projection probability.
//! - [`params`]: physical parameters and derived rates.
//! - [`dynamics`]: drift/diffusion generators and Lyapunov propagation.
//! - [`pulse`]: optimal red-pulse shapes and the state-transfer fidelity.
//! - [`bell`]: CHSH correlations and the settings optimizer.
//! - [`protocol`]: the three-step protocol, outer optimization and sweeps.
//! - [`oracle`]: truncated-Fock and vectorized-Lyapunov reference implementations.
//! - [`config`]: TOML run configuration.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bell;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod gaussian;
pub mod ode;
pub mod oracle;
pub mod params;
pub mod protocol;
pub mod pulse;
pub mod quadrature;
pub mod simplex;
pub mod validate;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use gaussian::GaussianState;
pub use params::SystemParams;
