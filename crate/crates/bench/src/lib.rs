//! Shared fixtures for the benchmarks.

use greenfix::io::{gen_random, MatrixKind};
use greenfix::EigenProblem;

/// Seeded complex-general problem with `λ_ex = 2`.
pub fn random_problem(n: usize, seed: u64) -> EigenProblem {
    let (t, v) = gen_random(n, seed, MatrixKind::ComplexGeneral);
    EigenProblem::new(t, v, 2.0).expect("generated matrices are square and equal-sized")
}
