//! Green's-operator fixed-point solver for `(T − λV)u = εu`.
//!
//! Given a target coupling `λ_ex`, the solver searches the complex ε plane for
//! the point where the fixed-point coupling `λ(ε)` equals `λ_ex`, which makes
//! `ε` an eigenvalue of `T − λ_ex V` and the fixed point its eigenvector.

pub mod deflation;
pub mod error;
pub mod fixed_point;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod perturbation;
pub mod resolvent;
pub mod search;

pub use deflation::{deflate_vector, solve_excited, solve_left, DeflationConfig, EigenPair, ProjectionMode};
pub use error::SolveError;
pub use fixed_point::{
    iterate_once, lambda_of, run_fixed_point, run_fixed_point_with, seeded_vector, EigenProblem, InnerConfig,
    InnerResult, IterateHook, NoHook,
};
pub use linalg::{
    bilinear, from_polar, inner, lu_factor, lu_solve, matvec, to_polar, wrap_phase, ComplexDenseMatrix, ComplexScalar,
    ComplexVector, LinalgError, LuFactorization, PolarScalar,
};
pub use oracle::{char_logdet, eig_all_small, newton_root, residual_norm, LogDet, OracleConfig, OracleError, Spectrum};
pub use perturbation::{perturb_potential, solve_real_ground, PerturbationConfig};
pub use resolvent::{apply_green_v, make_resolvent, Resolvent};
pub use search::{
    refine_magnitude, refine_phase, scan_magnitude, scan_phase, solve_ground, Refined, ScanCurve, ScanSample,
    SearchConfig, SolveReport,
};
