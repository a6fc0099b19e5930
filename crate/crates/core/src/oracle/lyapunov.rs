//! Constant-coefficient Lyapunov solution through the vectorized, affine-augmented system.

use nalgebra::DMatrix;

use super::expm::expm;
use crate::error::{Error, Result};

/// `Σ(τ)` for `Σ' = FΣ + ΣFᵀ + N`, from `z' = A z` with `z = (vec Σ, 1)` and
/// `A = [[F⊗I + I⊗F, vec N], [0, 0]]`.
pub fn lyapunov_closed_form(
    f: &DMatrix<f64>,
    n: &DMatrix<f64>,
    sigma0: &DMatrix<f64>,
    tau: f64,
) -> Result<DMatrix<f64>> {
    let d = f.nrows();
    if !f.is_square() || n.shape() != (d, d) || sigma0.shape() != (d, d) {
        return Err(Error::invalid(
            "lyapunov_closed_form needs matching square matrices",
        ));
    }
    let dd = d * d;
    let mut a = DMatrix::<f64>::zeros(dd + 1, dd + 1);
    // column-major vec: vec(FΣ) = (I⊗F) vec Σ, vec(ΣFᵀ) = (F⊗I) vec Σ
    for j in 0..d {
        for i in 0..d {
            let row = i + d * j;
            for k in 0..d {
                a[(row, k + d * j)] += f[(i, k)];
                a[(row, i + d * k)] += f[(j, k)];
            }
            a[(row, dd)] = n[(i, j)];
        }
    }
    let e = expm(&(a * tau));
    let mut z0 = nalgebra::DVector::<f64>::zeros(dd + 1);
    for j in 0..d {
        for i in 0..d {
            z0[i + d * j] = sigma0[(i, j)];
        }
    }
    z0[dd] = 1.0;
    let z = e * z0;
    let out = DMatrix::from_fn(d, d, |i, j| z[i + d * j]);
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::Divergence {
            t: tau,
            reason: "vectorized exponential overflowed".into(),
        });
    }
    Ok(out)
}
