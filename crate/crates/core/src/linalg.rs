//! Dense complex vectors and matrices, LU factorization with partial pivoting,
//! and the polar / inner-product helpers the solvers are built on.

use std::f64::consts::PI;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

/// Complex scalar used throughout the crate.
pub type ComplexScalar = Complex64;

/// Relative pivot threshold: a pivot below `PIVOT_THRESHOLD * ‖A‖∞` flags the
/// factorization as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-13;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty vector or matrix")]
    Empty,
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("matrix data has {len} entries, which is not n*n for n = {n}")]
    NotSquare { n: usize, len: usize },
    #[error("factorization is singular (min pivot {min_pivot:e})")]
    SingularFactorization { min_pivot: f64 },
}

fn check_finite(entries: &[Complex64]) -> Result<(), LinalgError> {
    match entries.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        Some(index) => Err(LinalgError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Dense complex column vector of fixed length `n >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector(Vec<Complex64>);

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self, LinalgError> {
        if entries.is_empty() {
            return Err(LinalgError::Empty);
        }
        check_finite(&entries)?;
        Ok(Self(entries))
    }

    /// Builds a vector from real entries.
    pub fn from_real(entries: &[f64]) -> Result<Self, LinalgError> {
        Self::new(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "vector length must be positive");
        Self(vec![ZERO; n])
    }

    pub fn ones(n: usize) -> Self {
        assert!(n > 0, "vector length must be positive");
        Self(vec![ONE; n])
    }

    /// The `k`-th standard basis vector of length `n`.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[k] = ONE;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        check_finite(&self.0).is_ok()
    }

    /// Max-modulus norm.
    pub fn norm_inf(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: Complex64) -> Self {
        Self(self.0.iter().map(|z| z * alpha).collect())
    }

    pub fn scale_mut(&mut self, alpha: Complex64) {
        self.0.iter_mut().for_each(|z| *z *= alpha);
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: Complex64, x: &ComplexVector) -> Result<(), LinalgError> {
        same_len(self.len(), x.len())?;
        for (y, xi) in self.0.iter_mut().zip(&x.0) {
            *y += alpha * xi;
        }
        Ok(())
    }

    pub fn sub(&self, other: &ComplexVector) -> Result<ComplexVector, LinalgError> {
        same_len(self.len(), other.len())?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    /// `‖self − other‖∞`.
    pub fn dist_inf(&self, other: &ComplexVector) -> Result<f64, LinalgError> {
        same_len(self.len(), other.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

impl Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

fn same_len(expected: usize, actual: usize) -> Result<(), LinalgError> {
    if expected == actual {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected, actual })
    }
}

/// Square dense complex matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexDenseMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexDenseMatrix {
    /// `data` is row-major, length `n * n`.
    pub fn new(n: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if n == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != n * n {
            return Err(LinalgError::NotSquare { n, len: data.len() });
        }
        check_finite(&data)?;
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            same_len(n, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(n, data)
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let rows: Vec<Vec<Complex64>> =
            rows.iter().map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self, LinalgError> {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::new(n, data)
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "matrix dimension must be positive");
        Self { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn diag(entries: &[Complex64]) -> Result<Self, LinalgError> {
        if entries.is_empty() {
            return Err(LinalgError::Empty);
        }
        check_finite(entries)?;
        let mut m = Self::zeros(entries.len());
        for (i, &d) in entries.iter().enumerate() {
            m.data[i * m.n + i] = d;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Self { n, data }
    }

    /// `self − alpha·other`.
    pub fn sub_scaled(&self, alpha: Complex64, other: &Self) -> Result<Self, LinalgError> {
        same_len(self.n, other.n)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - alpha * b).collect();
        Ok(Self { n: self.n, data })
    }

    /// `self + shift·I`.
    pub fn add_diagonal(&self, shift: Complex64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i] += shift;
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        same_len(self.n, other.n)?;
        let n = self.n;
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn column(&self, j: usize) -> ComplexVector {
        ComplexVector((0..self.n).map(|i| self.data[i * self.n + j]).collect())
    }
}

impl Index<(usize, usize)> for ComplexDenseMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexDenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Row-pivoted LU factorization `PA = LU`, with unit-lower `L` and upper `U`
/// packed into a single matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LuFactorization {
    lu: ComplexDenseMatrix,
    /// `pivot[i]` is the row of `A` that ended up in row `i`.
    pivot: Vec<usize>,
    singular: bool,
    min_pivot_magnitude: f64,
    odd_permutation: bool,
}

impl LuFactorization {
    pub fn dim(&self) -> usize {
        self.lu.n
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn min_pivot_magnitude(&self) -> f64 {
        self.min_pivot_magnitude
    }

    pub fn pivot(&self) -> &[usize] {
        &self.pivot
    }

    /// True when the row permutation is odd (determinant sign flips).
    pub fn odd_permutation(&self) -> bool {
        self.odd_permutation
    }

    /// Diagonal of `U`.
    pub fn pivots_diagonal(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.lu.n).map(move |i| self.lu[(i, i)])
    }

    pub fn lower(&self) -> ComplexDenseMatrix {
        let n = self.lu.n;
        let mut l = ComplexDenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..i {
                l[(i, j)] = self.lu[(i, j)];
            }
        }
        l
    }

    pub fn upper(&self) -> ComplexDenseMatrix {
        let n = self.lu.n;
        let mut u = ComplexDenseMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                u[(i, j)] = self.lu[(i, j)];
            }
        }
        u
    }

    /// Returns `P·A` for a matrix `A` of matching dimension.
    pub fn permute_rows(&self, a: &ComplexDenseMatrix) -> ComplexDenseMatrix {
        let n = self.lu.n;
        let mut out = ComplexDenseMatrix::zeros(n);
        for (i, &src) in self.pivot.iter().enumerate() {
            out.data[i * n..(i + 1) * n].copy_from_slice(a.row(src));
        }
        out
    }

    pub fn solve(&self, b: &ComplexVector) -> Result<ComplexVector, LinalgError> {
        lu_solve(self, b)
    }

    /// Forward/back substitution without the singularity check. Exactly zero
    /// pivots still produce non-finite output, reported as an error.
    pub fn solve_unguarded(&self, b: &ComplexVector) -> Result<ComplexVector, LinalgError> {
        same_len(self.lu.n, b.len())?;
        let x = substitute(self, b);
        check_finite(&x)?;
        Ok(ComplexVector(x))
    }
}

/// Factors `A` with partial (row) pivoting. Never fails: near-singularity is
/// reported through [`LuFactorization::is_singular`].
pub fn lu_factor(a: &ComplexDenseMatrix) -> LuFactorization {
    let n = a.n;
    let threshold = PIVOT_THRESHOLD * a.norm_inf();
    let mut lu = a.clone();
    let mut pivot: Vec<usize> = (0..n).collect();
    let mut odd_permutation = false;
    let mut min_pivot = f64::INFINITY;

    for k in 0..n {
        let mut best = k;
        let mut best_mag = lu[(k, k)].norm_sqr();
        for i in k + 1..n {
            let mag = lu[(i, k)].norm_sqr();
            if mag > best_mag {
                best = i;
                best_mag = mag;
            }
        }
        if best != k {
            for j in 0..n {
                lu.data.swap(k * n + j, best * n + j);
            }
            pivot.swap(k, best);
            odd_permutation = !odd_permutation;
        }
        let p = lu[(k, k)];
        min_pivot = min_pivot.min(p.norm());
        if p == ZERO {
            continue;
        }
        let inv = p.inv();
        for i in k + 1..n {
            let factor = lu[(i, k)] * inv;
            lu[(i, k)] = factor;
            if factor == ZERO {
                continue;
            }
            for j in k + 1..n {
                let ukj = lu.data[k * n + j];
                lu.data[i * n + j] -= factor * ukj;
            }
        }
    }

    LuFactorization {
        lu,
        pivot,
        singular: min_pivot == 0.0 || min_pivot < threshold,
        min_pivot_magnitude: min_pivot,
        odd_permutation,
    }
}

/// Solves `A·x = b` with a factorization of `A`.
pub fn lu_solve(f: &LuFactorization, b: &ComplexVector) -> Result<ComplexVector, LinalgError> {
    if f.singular {
        return Err(LinalgError::SingularFactorization { min_pivot: f.min_pivot_magnitude });
    }
    same_len(f.lu.n, b.len())?;
    Ok(ComplexVector(substitute(f, b)))
}

fn substitute(f: &LuFactorization, b: &ComplexVector) -> Vec<Complex64> {
    let n = f.lu.n;
    let mut x: Vec<Complex64> = f.pivot.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        let row = f.lu.row(i);
        let mut acc = x[i];
        for j in 0..i {
            acc -= row[j] * x[j];
        }
        x[i] = acc;
    }
    for i in (0..n).rev() {
        let row = f.lu.row(i);
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= row[j] * x[j];
        }
        x[i] = acc / row[i];
    }
    x
}

/// `y = A·x`.
pub fn matvec(a: &ComplexDenseMatrix, x: &ComplexVector) -> Result<ComplexVector, LinalgError> {
    same_len(a.n, x.len())?;
    Ok(ComplexVector((0..a.n).map(|i| a.row(i).iter().zip(&x.0).map(|(aij, xj)| aij * xj).sum()).collect()))
}

/// `⟨r|u⟩ = Σ conj(r_i)·u_i`.
///
/// This is the only place the bra convention is fixed; every normalization
/// against the reference vector goes through here.
pub fn inner(r: &ComplexVector, u: &ComplexVector) -> Result<Complex64, LinalgError> {
    same_len(r.len(), u.len())?;
    Ok(r.0.iter().zip(&u.0).map(|(ri, ui)| ri.conj() * ui).sum())
}

/// Unconjugated pairing `aᵀb = Σ a_i·b_i`.
pub fn bilinear(a: &ComplexVector, b: &ComplexVector) -> Result<Complex64, LinalgError> {
    same_len(a.len(), b.len())?;
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum())
}

/// Magnitude / phase view of a complex scalar, phase in `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolarScalar {
    pub magnitude: f64,
    pub phase: f64,
}

impl PolarScalar {
    pub fn new(magnitude: f64, phase: f64) -> Self {
        Self { magnitude, phase }
    }

    pub fn to_complex(self) -> Complex64 {
        from_polar(self)
    }
}

/// Full-quadrant polar decomposition. `0 + 0i` maps to phase 0, and the
/// negative real axis (including `−0.0` imaginary parts) maps to `+π`.
pub fn to_polar(z: Complex64) -> PolarScalar {
    let magnitude = z.re.hypot(z.im);
    let phase = if z.im == 0.0 {
        if z.re < 0.0 {
            PI
        } else {
            0.0
        }
    } else {
        z.im.atan2(z.re)
    };
    PolarScalar { magnitude, phase }
}

pub fn from_polar(p: PolarScalar) -> Complex64 {
    Complex64::from_polar(p.magnitude, p.phase)
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let mut p = phase % (2.0 * PI);
    if p <= -PI {
        p += 2.0 * PI;
    } else if p > PI {
        p -= 2.0 * PI;
    }
    p
}
