//! Dense symmetric positive-definite helpers for the small moment-space
//! matrices (dimension of the moment vector, typically 1 or 2).

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    factor: Array2<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factorizes a symmetric matrix; fails unless it is positive definite.
    pub fn new(a: &Array2<T>) -> Result<Self> {
        let (rows, cols) = a.dim();
        if rows != cols {
            return Err(Error::input(format!("matrix is {rows}x{cols}, expected square")));
        }
        let mut l = Array2::<T>::zeros((rows, rows));
        for j in 0..rows {
            let mut diag = a[[j, j]];
            for k in 0..j {
                diag = diag - l[[j, k]] * l[[j, k]];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::numerical(format!("matrix is not positive definite (pivot {j} = {diag})")));
            }
            let d = diag.sqrt();
            l[[j, j]] = d;
            for i in (j + 1)..rows {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s = s - l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / d;
            }
        }
        Ok(Self { factor: l })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn factor(&self) -> &Array2<T> {
        &self.factor
    }

    /// `log |A|`, from the factor diagonal.
    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.dim()).map(|i| two * self.factor[[i, i]].ln()).sum()
    }

    /// Solves `L y = b` in place.
    fn forward(&self, b: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - self.factor[[i, k]] * b[k];
            }
            b[i] = s / self.factor[[i, i]];
        }
    }

    /// `dᵀ A⁻¹ d` as `‖L⁻¹ d‖²`.
    pub fn quad_form(&self, d: &[T]) -> T {
        debug_assert_eq!(d.len(), self.dim());
        let mut buf = [T::zero(); 8];
        if d.len() <= buf.len() {
            let y = &mut buf[..d.len()];
            y.copy_from_slice(d);
            self.forward(y);
            y.iter().map(|&v| v * v).sum()
        } else {
            let mut y = d.to_vec();
            self.forward(&mut y);
            y.iter().map(|&v| v * v).sum()
        }
    }

    /// Returns `L z`.
    pub fn mul_lower(&self, z: &[T]) -> Vec<T> {
        let n = self.dim();
        (0..n).map(|i| (0..=i).map(|k| self.factor[[i, k]] * z[k]).sum()).collect()
    }
}

/// Identity matrix of the given dimension.
pub fn identity<T: Scalar>(dim: usize) -> Array2<T> {
    Array2::from_shape_fn((dim, dim), |(i, j)| if i == j { T::one() } else { T::zero() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn factor_reconstructs_matrix() {
        let a: Array2<f64> = array![[4.0, 2.0], [2.0, 3.0]];
        let c = Cholesky::new(&a).unwrap();
        let l = c.factor();
        let back = l.dot(&l.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
        // det = 12 - 4 = 8
        assert!((c.log_det() - 8f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn quad_form_matches_explicit_inverse() {
        let a: Array2<f64> = array![[2.0, 0.5], [0.5, 1.0]];
        let det = 2.0 - 0.25;
        let inv = array![[1.0 / det, -0.5 / det], [-0.5 / det, 2.0 / det]];
        let d = [0.3f64, -1.2];
        let expected =
            d[0] * (inv[[0, 0]] * d[0] + inv[[0, 1]] * d[1]) + d[1] * (inv[[1, 0]] * d[0] + inv[[1, 1]] * d[1]);
        let c = Cholesky::new(&a).unwrap();
        assert!((c.quad_form(&d) - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(Cholesky::new(&a), Err(Error::Numerical(_))));
        let z = array![[0.0f32]];
        assert!(Cholesky::new(&z).is_err());
    }
}
