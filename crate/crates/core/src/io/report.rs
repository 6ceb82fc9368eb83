//! JSON report documents and their independent re-check.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{read_text, write_text, IoError};
use crate::error::SolveError;
use crate::fixed_point::{eigen_residual, lambda_of, EigenProblem};
use crate::linalg::ComplexVector;
use crate::resolvent::make_resolvent;
use crate::search::{SearchConfig, SolveReport, RESIDUAL_BOUND};

/// Bounds a report must meet when re-checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute bound on `‖(T − λ_ex V)u − εu‖∞ / ‖u‖∞`.
    pub residual: f64,
    /// Bound on `|λ/λ_ex − 1|` for λ recomputed at (ε, u).
    pub lambda: f64,
}

impl Tolerances {
    /// The λ bound is ten times the larger search tolerance, leaving room
    /// for the shift back of a perturbed solve.
    pub fn for_problem(problem: &EigenProblem, cfg: &SearchConfig) -> Self {
        Self { residual: RESIDUAL_BOUND * problem.t().norm_inf(), lambda: 10.0 * cfg.tol_mag.max(cfg.tol_phase) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub epsilon_re: f64,
    pub epsilon_im: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub residual: f64,
    pub outer_cycles: usize,
    pub converged: bool,
    /// `[re, im]` pairs.
    pub eigenvector: Vec<[f64; 2]>,
    pub lambda_ex: f64,
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Result of re-checking a report against a problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOutcome {
    pub residual: f64,
    pub lambda: Complex64,
    pub passed: bool,
}

impl ReportDocument {
    pub fn from_report(report: &SolveReport, problem: &EigenProblem, cfg: &SearchConfig) -> Self {
        Self {
            epsilon_re: report.epsilon.re,
            epsilon_im: report.epsilon.im,
            lambda_re: report.lambda_achieved.re,
            lambda_im: report.lambda_achieved.im,
            residual: report.residual,
            outer_cycles: report.outer_cycles,
            converged: report.converged,
            eigenvector: report.u.iter().map(|z| [z.re, z.im]).collect(),
            lambda_ex: problem.lambda_ex(),
            tolerances: Tolerances::for_problem(problem, cfg),
            warnings: report.diagnostics.warnings.clone(),
        }
    }

    pub fn epsilon(&self) -> Complex64 {
        Complex64::new(self.epsilon_re, self.epsilon_im)
    }

    pub fn eigenvector(&self) -> Result<ComplexVector, SolveError> {
        Ok(ComplexVector::new(self.eigenvector.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())?)
    }

    /// Recomputes the residual and λ at the reported (ε, u) from scratch.
    pub fn verify(&self, problem: &EigenProblem) -> Result<VerifyOutcome, SolveError> {
        let u = self.eigenvector()?;
        if u.len() != problem.dim() {
            return Err(SolveError::InvalidProblem(format!(
                "eigenvector has length {}, problem has dimension {}",
                u.len(),
                problem.dim()
            )));
        }
        let eps = self.epsilon();
        let lambda_ex = problem.lambda_ex();
        let norm = u.norm_inf();
        if norm == 0.0 {
            return Err(SolveError::InvalidProblem("eigenvector is zero".into()));
        }
        let residual =
            eigen_residual(problem.t(), problem.v(), Complex64::new(lambda_ex, 0.0), eps, &u)?.norm_inf() / norm;
        let lambda = lambda_of(&make_resolvent(problem.t(), eps)?, problem.v(), problem.reference(), &u)?;
        let passed =
            residual <= self.tolerances.residual && (lambda / lambda_ex - 1.0).norm() <= self.tolerances.lambda;
        Ok(VerifyOutcome { residual, lambda, passed })
    }
}

/// One report, or one per state for excited-state runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReportFile {
    Single(ReportDocument),
    States(Vec<ReportDocument>),
}

impl ReportFile {
    pub fn documents(&self) -> &[ReportDocument] {
        match self {
            ReportFile::Single(d) => std::slice::from_ref(d),
            ReportFile::States(ds) => ds,
        }
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, IoError> {
        Self::from_json(&read_text(path.as_ref())?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        write_text(path.as_ref(), &self.to_json()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_point::InnerConfig;
    use crate::linalg::ComplexDenseMatrix;
    use crate::search::solve_ground;

    fn scalar() -> EigenProblem {
        EigenProblem::new(
            ComplexDenseMatrix::diag(&[Complex64::new(2.0, 1.0)]).unwrap(),
            ComplexDenseMatrix::identity(1),
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip_and_verify() {
        let p = scalar();
        let cfg = SearchConfig::default();
        let report = solve_ground(&p, &cfg, &InnerConfig::default()).unwrap();
        let doc = ReportDocument::from_report(&report, &p, &cfg);
        let text = ReportFile::Single(doc.clone()).to_json().unwrap();
        let back = ReportFile::from_json(&text).unwrap();
        assert_eq!(back.documents(), std::slice::from_ref(&doc));
        assert!(doc.verify(&p).unwrap().passed);

        let mut tampered = doc;
        tampered.epsilon_re += 1e-3;
        assert!(!tampered.verify(&p).unwrap().passed);
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"epsilon_re":0,"epsilon_im":1,"lambda_re":2,"lambda_im":0,"residual":0,
            "outer_cycles":1,"converged":true,"eigenvector":[[1,0]],"lambda_ex":2,
            "tolerances":{"residual":1e-8,"lambda":1e-8},"extra":1}"#;
        assert!(ReportFile::from_json(text).is_err());
    }
}
