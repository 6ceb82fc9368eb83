//! The Green's operator `G_ε = (T − εI)⁻¹`, held as one LU factorization per ε.

use num_complex::Complex64;

use crate::error::SolveError;
use crate::linalg::{lu_factor, lu_solve, matvec, ComplexDenseMatrix, ComplexVector, LuFactorization};

#[derive(Debug, Clone)]
pub struct Resolvent {
    epsilon: Complex64,
    factorization: LuFactorization,
    t_norm: f64,
}

impl Resolvent {
    pub fn epsilon(&self) -> Complex64 {
        self.epsilon
    }

    pub fn factorization(&self) -> &LuFactorization {
        &self.factorization
    }

    /// `‖T‖∞` of the operator this resolvent was built from.
    pub fn t_norm(&self) -> f64 {
        self.t_norm
    }

    pub fn dim(&self) -> usize {
        self.factorization.dim()
    }

    /// `G_ε b`.
    pub fn apply(&self, b: &ComplexVector) -> Result<ComplexVector, SolveError> {
        Ok(lu_solve(&self.factorization, b)?)
    }
}

/// Factors `T − εI`. Fails with [`SolveError::SingularResolvent`] when ε sits
/// (numerically) on an eigenvalue of `T`.
pub fn make_resolvent(t: &ComplexDenseMatrix, epsilon: Complex64) -> Result<Resolvent, SolveError> {
    let factorization = lu_factor(&t.add_diagonal(-epsilon));
    if factorization.is_singular() {
        return Err(SolveError::SingularResolvent { epsilon });
    }
    Ok(Resolvent { epsilon, factorization, t_norm: t.norm_inf() })
}

/// `G_ε V u`.
pub fn apply_green_v(res: &Resolvent, v: &ComplexDenseMatrix, u: &ComplexVector) -> Result<ComplexVector, SolveError> {
    res.apply(&matvec(v, u)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(d: &[f64]) -> ComplexDenseMatrix {
        ComplexDenseMatrix::diag(&d.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn factors_shifted_diagonal() {
        let res = make_resolvent(&diag(&[2.0, 3.0]), c(1.0, 0.0)).unwrap();
        let d: Vec<_> = res.factorization().pivots_diagonal().collect();
        assert_eq!(d, vec![c(1.0, 0.0), c(2.0, 0.0)]);

        let res = make_resolvent(&diag(&[2.0, 3.0]), c(1.0, 1.0)).unwrap();
        let d: Vec<_> = res.factorization().pivots_diagonal().collect();
        assert_eq!(d, vec![c(1.0, -1.0), c(2.0, -1.0)]);
        assert_eq!(res.t_norm(), 3.0);
    }

    #[test]
    fn exact_pole_is_rejected() {
        let err = make_resolvent(&diag(&[2.0, 3.0]), c(2.0, 0.0)).unwrap_err();
        assert_eq!(err, SolveError::SingularResolvent { epsilon: c(2.0, 0.0) });
    }

    #[test]
    fn green_v_on_diagonal_problems() {
        let res = make_resolvent(&diag(&[2.0, 3.0]), c(1.0, 0.0)).unwrap();
        let out = apply_green_v(&res, &ComplexDenseMatrix::identity(2), &ComplexVector::ones(2)).unwrap();
        assert_eq!(out.as_slice(), &[c(1.0, 0.0), c(0.5, 0.0)]);

        let u = ComplexVector::new(vec![c(0.3, 2.0), c(-1.0, 0.1)]).unwrap();
        let out = apply_green_v(&res, &ComplexDenseMatrix::zeros(2), &u).unwrap();
        assert_eq!(out, ComplexVector::zeros(2));

        let res = make_resolvent(&diag(&[1.0, 5.0]), c(-1.0, 0.0)).unwrap();
        let out = apply_green_v(&res, &diag(&[2.0, 1.0]), &ComplexVector::ones(2)).unwrap();
        assert!((out[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((out[1] - c(1.0 / 6.0, 0.0)).norm() < 1e-15);
    }
}
