use std::sync::Arc;

use crate::matfun::MatrixFunction;
use crate::{CMat, Error, Interval, Result, C64};

/// Pointwise `V = U L` with `U` unitary and `L` lower triangular with a
/// positive real diagonal, by modified Gram–Schmidt on the columns of `V`
/// taken from last to first, each projection pass done twice.
///
/// `tol` bounds the relative size of the pivot `‖w_j‖ / ‖v_j‖`.
pub fn ql_factor(v: &CMat, tol: f64) -> Result<(CMat, CMat)> {
    let n = v.nrows();
    if v.ncols() != n {
        return Err(Error::ShapeMismatch(format!("QL needs a square matrix, got {}×{}", n, v.ncols())));
    }
    let mut u = CMat::zeros(n, n);
    let mut l = CMat::zeros(n, n);
    for j in (0..n).rev() {
        let vj = v.column(j).into_owned();
        let mut w = vj.clone();
        for _pass in 0..2 {
            for i in j + 1..n {
                let ui = u.column(i);
                let c = ui.dotc(&w);
                w -= ui * c;
                l[(i, j)] += c;
            }
        }
        let norm = w.norm();
        let scale = vj.norm();
        if !(norm > tol * scale) || norm == 0.0 {
            return Err(Error::NearSingular { t: f64::NAN, pivot: if scale > 0.0 { norm / scale } else { 0.0 } });
        }
        l[(j, j)] = C64::new(norm, 0.0);
        u.set_column(j, &(w / C64::new(norm, 0.0)));
    }
    Ok((u, l))
}

/// Time-varying QL factorization of an invertible matrix function.
#[derive(Clone, Debug)]
pub struct QlFactorization {
    v: Arc<dyn MatrixFunction>,
    tol: f64,
}

pub fn ql_factorization(v: Arc<dyn MatrixFunction>, tol: f64) -> Result<QlFactorization> {
    let (r, c) = v.shape();
    if r != c {
        return Err(Error::ShapeMismatch(format!("QL needs a square matrix function, got {r}×{c}")));
    }
    Ok(QlFactorization { v, tol })
}

impl QlFactorization {
    fn factor(&self, v: &CMat, t: f64) -> Result<(CMat, CMat)> {
        ql_factor(v, self.tol).map_err(|e| match e {
            Error::NearSingular { pivot, .. } => Error::NearSingular { t, pivot },
            other => other,
        })
    }

    pub fn at(&self, t: f64) -> Result<(CMat, CMat)> {
        self.factor(&self.v.eval(t)?, t)
    }

    pub fn unitary(&self) -> QlUnitary {
        QlUnitary { ql: self.clone() }
    }

    pub fn lower(&self) -> QlLower {
        QlLower { ql: self.clone() }
    }

    /// `U' = U K` where `K = U* U'` is recovered from `M = U* V' L⁻¹`:
    /// `M = K + L' L⁻¹` with `K` skew-Hermitian and `L' L⁻¹` lower
    /// triangular with real diagonal.
    fn unitary_derivative(&self, v: &CMat, dv: &CMat, t: f64) -> Result<CMat> {
        let (u, l) = self.factor(v, t)?;
        let linv = l
            .clone()
            .try_inverse()
            .ok_or(Error::NearSingular { t, pivot: 0.0 })?;
        let m = u.adjoint() * dv * linv;
        let n = m.nrows();
        let mut k = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i < j {
                    k[(i, j)] = m[(i, j)];
                    k[(j, i)] = -m[(i, j)].conj();
                }
            }
            k[(i, i)] = C64::new(0.0, m[(i, i)].im);
        }
        Ok(u * k)
    }

    fn lower_derivative(&self, v: &CMat, dv: &CMat, t: f64) -> Result<CMat> {
        let (u, l) = self.factor(v, t)?;
        let du = self.unitary_derivative(v, dv, t)?;
        // V' = U' L + U L'  ⇒  L' = U* (V' − U' L)
        Ok(u.adjoint() * (dv - du * l))
    }
}

/// The unitary factor `U(t)` as a matrix function.
#[derive(Clone, Debug)]
pub struct QlUnitary {
    ql: QlFactorization,
}

/// The triangular factor `L(t)` as a matrix function.
#[derive(Clone, Debug)]
pub struct QlLower {
    ql: QlFactorization,
}

macro_rules! ql_view {
    ($ty:ident, $pick:tt, $deriv:ident) => {
        impl MatrixFunction for $ty {
            fn shape(&self) -> (usize, usize) {
                self.ql.v.shape()
            }
            fn domain(&self) -> Interval {
                self.ql.v.domain()
            }
            fn breakpoints(&self) -> Vec<f64> {
                self.ql.v.breakpoints()
            }
            fn eval(&self, t: f64) -> Result<CMat> {
                Ok(self.ql.factor(&self.ql.v.eval(t)?, t)?.$pick)
            }
            fn left_limit(&self, t: f64) -> Result<CMat> {
                Ok(self.ql.factor(&self.ql.v.left_limit(t)?, t)?.$pick)
            }
            fn right_limit(&self, t: f64) -> Result<CMat> {
                Ok(self.ql.factor(&self.ql.v.right_limit(t)?, t)?.$pick)
            }
            fn left_derivative(&self, t: f64) -> Result<CMat> {
                self.ql.$deriv(&self.ql.v.left_limit(t)?, &self.ql.v.left_derivative(t)?, t)
            }
            fn right_derivative(&self, t: f64) -> Result<CMat> {
                self.ql.$deriv(&self.ql.v.right_limit(t)?, &self.ql.v.right_derivative(t)?, t)
            }
            fn accuracy(&self) -> f64 {
                self.ql.v.accuracy()
            }
        }
    };
}

ql_view!(QlUnitary, 0, unitary_derivative);
ql_view!(QlLower, 1, lower_derivative);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, from_real, identity, max_abs};
    use crate::matfun::PiecewiseMatrixFunction;

    #[test]
    fn unitary_input_is_its_own_factor() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = from_real(2, 2, &[s, -s, s, s]);
        let (u, l) = ql_factor(&v, 1e-12).unwrap();
        assert!(max_abs(&(u - &v)) < 1e-15);
        assert!(max_abs(&(l - identity(2))) < 1e-15);
    }

    #[test]
    fn positive_diagonal_input() {
        let v = diag_real(&[2.0, 3.0, 0.5]);
        let (u, l) = ql_factor(&v, 1e-12).unwrap();
        assert_eq!(u, identity(3));
        assert_eq!(l, v);
    }

    #[test]
    fn reassembly_of_complex_matrix() {
        let mut v = from_real(3, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0, 2.0, 1.0, 1.0]);
        v[(0, 1)] += C64::new(0.0, 0.7);
        v[(2, 0)] += C64::new(0.0, -1.1);
        let (u, l) = ql_factor(&v, 1e-12).unwrap();
        assert!(max_abs(&(&u * &l - &v)) < 1e-13);
        assert!(max_abs(&(u.adjoint() * &u - identity(3))) < 1e-14);
        for i in 0..3 {
            assert!(l[(i, i)].re > 0.0 && l[(i, i)].im == 0.0);
            for j in i + 1..3 {
                assert_eq!(l[(i, j)], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let v = from_real(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(ql_factor(&v, 1e-10), Err(Error::NearSingular { .. })));
    }

    #[test]
    fn unitary_derivative_matches_difference_quotient() {
        let v = PiecewiseMatrixFunction::expressions(
            Interval::new(0.0, 2.0).unwrap(),
            2,
            2,
            &["1 + t", "t^2", "2*i*t", "3 - t"],
        )
        .unwrap();
        let ql = ql_factorization(Arc::new(v), 1e-12).unwrap();
        let (u, l) = (ql.unitary(), ql.lower());
        let h = 1e-6;
        for t in [0.3, 1.1, 1.7] {
            let fd_u = (u.eval(t + h).unwrap() - u.eval(t - h).unwrap()) / C64::new(2.0 * h, 0.0);
            let fd_l = (l.eval(t + h).unwrap() - l.eval(t - h).unwrap()) / C64::new(2.0 * h, 0.0);
            assert!(max_abs(&(u.derivative(t).unwrap() - fd_u)) < 1e-7);
            assert!(max_abs(&(l.derivative(t).unwrap() - fd_l)) < 1e-7);
        }
    }
}
