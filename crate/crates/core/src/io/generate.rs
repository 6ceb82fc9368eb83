//! Reproducible random problems.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::ComplexDenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    /// Real and imaginary parts uniform on `[−1, 1]`.
    ComplexGeneral,
    /// Real symmetric, entries uniform on `[−1, 1]`.
    RealSymmetric,
}

impl std::str::FromStr for MatrixKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "complex-general" => Ok(Self::ComplexGeneral),
            "real-symmetric" => Ok(Self::RealSymmetric),
            other => Err(format!("unknown matrix kind `{other}` (complex-general, real-symmetric)")),
        }
    }
}

/// `(T, V)` drawn from one ChaCha8 stream: all of `T` (row-major), then `V`.
pub fn gen_random(n: usize, seed: u64, kind: MatrixKind) -> (ComplexDenseMatrix, ComplexDenseMatrix) {
    assert!(n >= 1, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = draw(&mut rng, n, kind);
    let v = draw(&mut rng, n, kind);
    (t, v)
}

fn draw(rng: &mut ChaCha8Rng, n: usize, kind: MatrixKind) -> ComplexDenseMatrix {
    let mut a = ComplexDenseMatrix::zeros(n);
    match kind {
        MatrixKind::ComplexGeneral => {
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
                }
            }
        }
        MatrixKind::RealSymmetric => {
            for i in 0..n {
                for j in i..n {
                    let x = Complex64::new(rng.gen_range(-1.0..=1.0), 0.0);
                    a[(i, j)] = x;
                    a[(j, i)] = x;
                }
            }
        }
    }
    a
}
