use num_complex::Complex64;

use crate::linalg::LinalgError;

/// Failures of the resolvent, fixed-point, search, perturbation and deflation layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("T − εI is singular at ε = {epsilon}")]
    SingularResolvent { epsilon: Complex64 },
    #[error("reference vector nearly orthogonal to the iterate (|⟨r|w⟩|/‖w‖ = {ratio:e})")]
    DegenerateDenominator { ratio: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no sign change of the {coordinate} residual in [{lo}, {hi}]")]
    BracketFailure { coordinate: &'static str, lo: f64, hi: f64 },
    #[error("secant iteration on {coordinate} stalled after {steps} steps")]
    SecantStall { coordinate: &'static str, steps: usize },
    #[error("magnitude scan never brought |λ| across λ_ex; widen the scan window")]
    NoBracket,
    #[error("perturbation strength must satisfy 0 < δ < 1, got {0}")]
    InvalidDelta(f64),
    #[error("eigenpair {index} has a degenerate left/right pairing {pairing}")]
    DefectivePair { index: usize, pairing: Complex64 },
    #[error("deflated iterate overlaps a found state (overlap {overlap:e})")]
    DeflationBreakdown { overlap: f64 },
    #[error("requested {requested} states but the problem has dimension {dim}")]
    TooManyStates { requested: usize, dim: usize },
}
