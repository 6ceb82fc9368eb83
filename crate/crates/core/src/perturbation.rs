//! Real ground states: a real ε sits on the φ(ε) = 0 ray, where the phase
//! search has nothing to work with. Replacing `V` by `V + iδI` shifts the
//! whole spectrum of `T − λ_ex V` by `−iλ_ex δ` and leaves eigenvectors
//! unchanged, so the perturbed solve is undone exactly by adding `iλ_ex δ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::fixed_point::{eigen_residual, lambda_of, EigenProblem, InnerConfig};
use crate::linalg::ComplexDenseMatrix;
use crate::resolvent::make_resolvent;
use crate::search::{solve_ground, SearchConfig, SolveReport, RESIDUAL_BOUND};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub delta: f64,
    /// Largest |Im ε| after the shift back that passes without a warning.
    pub tol_real: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self { delta: 0.1, tol_real: 1e-8 }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        check_delta(self.delta)?;
        if !(self.tol_real.is_finite() && self.tol_real > 0.0) {
            return Err(SolveError::InvalidConfig("tol_real must be positive".into()));
        }
        Ok(())
    }
}

fn check_delta(delta: f64) -> Result<(), SolveError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(SolveError::InvalidDelta(delta))
    }
}

/// `V + iδI`.
pub fn perturb_potential(v: &ComplexDenseMatrix, delta: f64) -> Result<ComplexDenseMatrix, SolveError> {
    check_delta(delta)?;
    Ok(v.add_diagonal(Complex64::new(0.0, delta)))
}

/// Solves with `V + iδI`, then moves ε back by `iλ_ex δ` and recomputes the
/// residual and the achieved coupling against the original problem.
pub fn solve_real_ground(
    problem: &EigenProblem,
    pcfg: &PerturbationConfig,
    cfg: &SearchConfig,
    inner: &InnerConfig,
) -> Result<SolveReport, SolveError> {
    pcfg.validate()?;
    let perturbed = problem.with_potential(perturb_potential(problem.v(), pcfg.delta)?)?;
    let mut report = solve_ground(&perturbed, cfg, inner)?;

    let shift = Complex64::new(0.0, problem.lambda_ex() * pcfg.delta);
    report.epsilon += shift;
    let lambda = Complex64::new(problem.lambda_ex(), 0.0);
    report.residual =
        eigen_residual(problem.t(), problem.v(), lambda, report.epsilon, &report.u)?.norm_inf() / report.u.norm_inf();
    if let Ok(res) = make_resolvent(problem.t(), report.epsilon) {
        if let Ok(l) = lambda_of(&res, problem.v(), problem.reference(), &report.u) {
            report.lambda_achieved = l;
        }
    }
    let bound = RESIDUAL_BOUND * problem.t().norm_inf();
    if report.converged && report.residual > bound {
        report.converged = false;
        report.diagnostics.warnings.push(format!("unperturbed residual {:e} exceeds the bound", report.residual));
    }
    if report.epsilon.im.abs() > pcfg.tol_real {
        report
            .diagnostics
            .warnings
            .push(format!("shifted-back ε has imaginary part {:e}; ground state is not real", report.epsilon.im));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn perturb_examples() {
        let z = perturb_potential(&ComplexDenseMatrix::zeros(2), 0.1).unwrap();
        assert_eq!(z, ComplexDenseMatrix::diag(&[c(0.0, 0.1), c(0.0, 0.1)]).unwrap());
        let id = perturb_potential(&ComplexDenseMatrix::identity(2), 0.5).unwrap();
        assert_eq!(id, ComplexDenseMatrix::diag(&[c(1.0, 0.5), c(1.0, 0.5)]).unwrap());
        assert_eq!(perturb_potential(&id, 1.0), Err(SolveError::InvalidDelta(1.0)));
        assert_eq!(perturb_potential(&id, 0.0), Err(SolveError::InvalidDelta(0.0)));
    }

    fn diag_problem(lambda_ex: f64) -> EigenProblem {
        EigenProblem::new(
            ComplexDenseMatrix::diag(&[c(1.0, 0.0), c(5.0, 0.0)]).unwrap(),
            ComplexDenseMatrix::diag(&[c(2.0, 0.0), c(1.0, 0.0)]).unwrap(),
            lambda_ex,
        )
        .unwrap()
    }

    #[test]
    fn shift_back_diagonal() {
        let report = solve_real_ground(
            &diag_problem(1.0),
            &PerturbationConfig::default(),
            &SearchConfig::default(),
            &InnerConfig::default(),
        )
        .unwrap();
        assert!(report.converged, "{:?}", report.diagnostics.warnings);
        assert!((report.epsilon - c(-1.0, 0.0)).norm() < 1e-10, "{}", report.epsilon);
        assert!((report.lambda_achieved - c(1.0, 0.0)).norm() < 1e-8, "{}", report.lambda_achieved);

        let pcfg = PerturbationConfig { delta: 0.25, ..Default::default() };
        let report =
            solve_real_ground(&diag_problem(2.0), &pcfg, &SearchConfig::default(), &InnerConfig::default()).unwrap();
        assert!(report.converged);
        assert!((report.epsilon - c(-3.0, 0.0)).norm() < 1e-10, "{}", report.epsilon);
    }
}
