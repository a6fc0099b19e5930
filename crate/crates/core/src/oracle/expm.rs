use nalgebra::{ComplexField, DMatrix};

/// Scaling-and-squaring Taylor exponential.
pub(crate) fn expm<T>(a: &DMatrix<T>) -> DMatrix<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = a.nrows();
    let norm = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.modulus()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.map(|z| z.scale(0.5f64.powi(squarings)));
    let mut term = DMatrix::<T>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..40 {
        term = (&term * &scaled).map(|z| z.scale(1.0 / k as f64));
        sum += &term;
        let size = term.iter().map(|z| z.modulus()).fold(0.0, f64::max);
        if size < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn rotation_generator() {
        let t = 2.3;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, t, -t, 0.0]);
        let e = expm(&a);
        assert!((e[(0, 0)] - t.cos()).abs() < 1e-14);
        assert!((e[(0, 1)] - t.sin()).abs() < 1e-14);
    }

    #[test]
    fn complex_phase() {
        let a = DMatrix::from_element(1, 1, Complex64::new(-0.5, 3.0));
        let e = expm(&a);
        let want = Complex64::new(-0.5, 3.0).exp();
        assert!((e[(0, 0)] - want).norm() < 1e-14);
    }
}
