//! Inner loop: at fixed ε, iterate `u ← G_ε V u / ⟨r|G_ε V u⟩` to the dominant
//! eigenvector of `G_ε V`, then read off the coupling `λ(ε) = ⟨r|G_ε V u⟩⁻¹`.
//!
//! The fixed point is the generalized eigenvector of `(T − εI, V)` whose
//! coupling has the smallest modulus; which state that is depends on ε and is
//! not tied to any ordering of the spectrum of `T − λV`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::linalg::{inner, matvec, ComplexDenseMatrix, ComplexVector};
use crate::resolvent::{apply_green_v, make_resolvent, Resolvent};

/// `(T − λV)u = εu` with a real target coupling `λ_ex` and a reference vector
/// `r` fixing the normalization `⟨r|u⟩ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenProblem {
    t: ComplexDenseMatrix,
    v: ComplexDenseMatrix,
    lambda_ex: f64,
    reference: ComplexVector,
}

impl EigenProblem {
    /// Uses the all-ones reference vector.
    pub fn new(t: ComplexDenseMatrix, v: ComplexDenseMatrix, lambda_ex: f64) -> Result<Self, SolveError> {
        let n = t.dim();
        Self::with_reference(t, v, lambda_ex, ComplexVector::ones(n))
    }

    pub fn with_reference(
        t: ComplexDenseMatrix,
        v: ComplexDenseMatrix,
        lambda_ex: f64,
        reference: ComplexVector,
    ) -> Result<Self, SolveError> {
        if t.dim() != v.dim() {
            return Err(SolveError::InvalidProblem(format!("T is {0}x{0} but V is {1}x{1}", t.dim(), v.dim())));
        }
        if reference.len() != t.dim() {
            return Err(SolveError::InvalidProblem(format!(
                "reference vector has length {}, expected {}",
                reference.len(),
                t.dim()
            )));
        }
        if !(lambda_ex.is_finite() && lambda_ex > 0.0) {
            return Err(SolveError::InvalidProblem(format!("lambda_ex must be a positive real, got {lambda_ex}")));
        }
        Ok(Self { t, v, lambda_ex, reference })
    }

    pub fn t(&self) -> &ComplexDenseMatrix {
        &self.t
    }

    pub fn v(&self) -> &ComplexDenseMatrix {
        &self.v
    }

    pub fn lambda_ex(&self) -> f64 {
        self.lambda_ex
    }

    pub fn reference(&self) -> &ComplexVector {
        &self.reference
    }

    pub fn dim(&self) -> usize {
        self.t.dim()
    }

    /// `H = T − λ_ex·V`.
    pub fn hamiltonian(&self) -> ComplexDenseMatrix {
        self.t.sub_scaled(Complex64::new(self.lambda_ex, 0.0), &self.v).expect("dimensions checked at construction")
    }

    /// Same problem with `V` replaced.
    pub fn with_potential(&self, v: ComplexDenseMatrix) -> Result<Self, SolveError> {
        Self::with_reference(self.t.clone(), v, self.lambda_ex, self.reference.clone())
    }

    /// `(Tᵀ, Vᵀ)` with the same coupling and reference; its fixed points are
    /// left eigenvectors of the original problem.
    pub fn transposed(&self) -> Self {
        Self {
            t: self.t.transpose(),
            v: self.v.transpose(),
            lambda_ex: self.lambda_ex,
            reference: self.reference.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerConfig {
    pub tol_vector: f64,
    pub tol_lambda: f64,
    pub max_iterations: usize,
    pub min_denominator: f64,
    /// Seed for the replacement start vector drawn on a degenerate denominator.
    pub reseed: u64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self { tol_vector: 1e-10, tol_lambda: 1e-10, max_iterations: 5000, min_denominator: 1e-13, reseed: 0x5eed }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(positive(self.tol_vector) && positive(self.tol_lambda) && positive(self.min_denominator)) {
            return Err(SolveError::InvalidConfig("inner tolerances must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    /// Iterate normalized so that `⟨r|u⟩ = 1`.
    pub u: ComplexVector,
    /// `λ(ε)` evaluated at `u`.
    pub lambda: Complex64,
    pub iterations: usize,
    pub converged: bool,
    pub last_delta: f64,
}

/// Hooks into the inner loop. `project` may modify every new iterate (the
/// loop renormalizes afterwards); `observe` sees each accepted, normalized
/// iterate.
pub trait IterateHook {
    fn project(&mut self, _u: &mut ComplexVector) -> Result<(), SolveError> {
        Ok(())
    }

    fn observe(&mut self, _iteration: usize, _u: &ComplexVector) {}
}

/// Hook that does nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoHook;

impl IterateHook for NoHook {}

/// Deterministic pseudo-random complex vector, entries uniform in `[−1, 1]²`.
pub fn seeded_vector(n: usize, seed: u64) -> ComplexVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))).collect();
    ComplexVector::new(entries).expect("finite entries")
}

fn normalize_against(
    r: &ComplexVector,
    w: &ComplexVector,
    min_denominator: f64,
) -> Result<(ComplexVector, Complex64), SolveError> {
    let d = inner(r, w)?;
    let scale = w.norm_inf();
    if scale == 0.0 || d.norm() < min_denominator * scale {
        let ratio = if scale == 0.0 { 0.0 } else { d.norm() / scale };
        return Err(SolveError::DegenerateDenominator { ratio });
    }
    Ok((w.scaled(d.inv()), d))
}

/// One step `|n+1⟩ = G_ε V|n⟩ / ⟨r|G_ε V|n⟩`.
pub fn iterate_once(
    res: &Resolvent,
    v: &ComplexDenseMatrix,
    r: &ComplexVector,
    u_n: &ComplexVector,
    min_denominator: f64,
) -> Result<ComplexVector, SolveError> {
    let w = apply_green_v(res, v, u_n)?;
    Ok(normalize_against(r, &w, min_denominator)?.0)
}

/// `λ = ⟨r|G_ε V|u⟩⁻¹`.
pub fn lambda_of(
    res: &Resolvent,
    v: &ComplexDenseMatrix,
    r: &ComplexVector,
    u: &ComplexVector,
) -> Result<Complex64, SolveError> {
    let w = apply_green_v(res, v, u)?;
    Ok(normalize_against(r, &w, f64::MIN_POSITIVE)?.1.inv())
}

/// Runs the inner loop at `epsilon` from `u0`.
pub fn run_fixed_point(
    problem: &EigenProblem,
    epsilon: Complex64,
    u0: &ComplexVector,
    cfg: &InnerConfig,
) -> Result<InnerResult, SolveError> {
    let res = make_resolvent(problem.t(), epsilon)?;
    run_fixed_point_with(problem, &res, u0, cfg, &mut NoHook)
}

/// Inner loop with a prebuilt resolvent and an iterate hook.
///
/// Stops when the vector change, the λ change, and the geometric tail
/// estimate `δ·ρ/(1−ρ)` of both (ρ the observed contraction ratio) are all
/// within tolerance. A degenerate denominator triggers one reseed of the start
/// vector; a second one is returned as an error.
pub fn run_fixed_point_with(
    problem: &EigenProblem,
    res: &Resolvent,
    u0: &ComplexVector,
    cfg: &InnerConfig,
    hook: &mut dyn IterateHook,
) -> Result<InnerResult, SolveError> {
    if u0.len() != problem.dim() {
        return Err(SolveError::InvalidProblem(format!(
            "start vector has length {}, expected {}",
            u0.len(),
            problem.dim()
        )));
    }
    let r = problem.reference();
    let v = problem.v();
    let mut reseeded = false;

    let start = |u: &ComplexVector, hook: &mut dyn IterateHook| -> Result<ComplexVector, SolveError> {
        let mut u = u.clone();
        hook.project(&mut u)?;
        Ok(normalize_against(r, &u, cfg.min_denominator)?.0)
    };
    let mut u = match start(u0, hook) {
        Ok(u) => u,
        Err(SolveError::DegenerateDenominator { .. }) => {
            reseeded = true;
            start(&seeded_vector(problem.dim(), cfg.reseed), hook)?
        }
        Err(e) => return Err(e),
    };
    hook.observe(0, &u);

    let mut prev_lambda: Option<Complex64> = None;
    let mut prev_delta: Option<f64> = None;
    let mut last_delta = f64::INFINITY;
    let mut lambda = Complex64::new(f64::NAN, f64::NAN);

    let mut iteration = 0;
    while iteration < cfg.max_iterations {
        iteration += 1;
        let mut w = apply_green_v(res, v, &u)?;
        hook.project(&mut w)?;
        let (next, d) = match normalize_against(r, &w, cfg.min_denominator) {
            Ok(ok) => ok,
            Err(SolveError::DegenerateDenominator { .. }) if !reseeded => {
                reseeded = true;
                u = start(&seeded_vector(problem.dim(), cfg.reseed), hook)?;
                prev_lambda = None;
                prev_delta = None;
                continue;
            }
            Err(e) => return Err(e),
        };
        lambda = d.inv();
        let delta = next.dist_inf(&u)?;
        last_delta = delta;

        if let Some(prev) = prev_lambda {
            let lambda_change = (lambda - prev).norm();
            let lambda_tol = cfg.tol_lambda * prev.norm().max(1.0);
            let floor = 1e-14 * u.norm_inf().max(1.0);
            // Tail of a geometric sequence with ratio ρ sums to δ·ρ/(1−ρ).
            let tail = match prev_delta {
                _ if delta <= floor => 0.0,
                Some(pd) if pd > 0.0 => {
                    let rho = delta / pd;
                    if rho < 1.0 {
                        rho / (1.0 - rho)
                    } else {
                        f64::INFINITY
                    }
                }
                _ => 0.0,
            };
            if delta <= cfg.tol_vector
                && lambda_change <= lambda_tol
                && delta * tail <= cfg.tol_vector
                && lambda_change * tail <= lambda_tol
            {
                return Ok(InnerResult { u, lambda, iterations: iteration, converged: true, last_delta: delta });
            }
        }
        prev_lambda = Some(lambda);
        prev_delta = Some(delta);
        u = next;
        hook.observe(iteration, &u);
    }

    // Not converged: report λ at the iterate actually returned.
    let mut w = apply_green_v(res, v, &u)?;
    hook.project(&mut w)?;
    if let Ok((_, d)) = normalize_against(r, &w, f64::MIN_POSITIVE) {
        lambda = d.inv();
    }
    Ok(InnerResult { u, lambda, iterations: iteration, converged: false, last_delta })
}

/// Matrix-free `(T − λV)u − εu`, used by consistency checks.
pub(crate) fn eigen_residual(
    t: &ComplexDenseMatrix,
    v: &ComplexDenseMatrix,
    lambda: Complex64,
    epsilon: Complex64,
    u: &ComplexVector,
) -> Result<ComplexVector, SolveError> {
    let mut out = matvec(t, u)?;
    out.axpy(-lambda, &matvec(v, u)?)?;
    out.axpy(-epsilon, u)?;
    Ok(out)
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

    fn scalar(x: Complex64) -> ComplexDenseMatrix {
        ComplexDenseMatrix::diag(&[x]).unwrap()
    }

    #[test]
    fn scalar_step_is_a_fixed_point() {
        let res = make_resolvent(&scalar(c(2.0, 0.0)), c(1.0, 0.0)).unwrap();
        let one = ComplexVector::ones(1);
        let next = iterate_once(&res, &scalar(c(1.0, 0.0)), &one, &one, 1e-13).unwrap();
        assert_eq!(next, one);
    }

    #[test]
    fn diagonal_step_by_hand() {
        let res = make_resolvent(&diag(&[1.0, 5.0]), c(-1.0, 0.0)).unwrap();
        let v = diag(&[2.0, 1.0]);
        let r = ComplexVector::ones(2);
        let next = iterate_once(&res, &v, &r, &r, 1e-13).unwrap();
        assert!((next[0] - c(6.0 / 7.0, 0.0)).norm() < 1e-15);
        assert!((next[1] - c(1.0 / 7.0, 0.0)).norm() < 1e-15);

        let e0 = ComplexVector::basis(2, 0);
        assert_eq!(iterate_once(&res, &v, &r, &e0, 1e-13).unwrap(), e0);
        assert!((lambda_of(&res, &v, &r, &e0).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn scalar_lambda_matches_closed_form() {
        let res = make_resolvent(&scalar(c(2.0, 0.0)), c(1.0, 1.0)).unwrap();
        let one = ComplexVector::ones(1);
        let lambda = lambda_of(&res, &scalar(c(1.0, 0.0)), &one, &one).unwrap();
        assert!((lambda - c(1.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_potential_is_degenerate() {
        let res = make_resolvent(&diag(&[1.0, 2.0]), c(0.5, 0.0)).unwrap();
        let r = ComplexVector::ones(2);
        let err = lambda_of(&res, &ComplexDenseMatrix::zeros(2), &r, &r).unwrap_err();
        assert!(matches!(err, SolveError::DegenerateDenominator { .. }));
        let err = iterate_once(&res, &ComplexDenseMatrix::zeros(2), &r, &r, 1e-13).unwrap_err();
        assert!(matches!(err, SolveError::DegenerateDenominator { .. }));
    }

    #[test]
    fn scalar_run_converges_immediately() {
        let p = EigenProblem::new(scalar(c(2.0, 0.0)), scalar(c(1.0, 0.0)), 1.0).unwrap();
        let out = run_fixed_point(&p, c(1.0, 1.0), &ComplexVector::ones(1), &InnerConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 2);
        assert!((out.lambda - c(1.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn diagonal_run_converges_geometrically() {
        let p = EigenProblem::new(diag(&[1.0, 5.0]), diag(&[2.0, 1.0]), 1.0).unwrap();
        let out = run_fixed_point(&p, c(-1.0, 0.0), &ComplexVector::ones(2), &InnerConfig::default()).unwrap();
        assert!(out.converged);
        // Error shrinks by 1/6 per step: 6^-14 ≈ 1.3e-11.
        assert!(out.iterations <= 20, "{} iterations", out.iterations);
        assert!((out.lambda - c(1.0, 0.0)).norm() < 1e-10);
        assert!(out.u.dist_inf(&ComplexVector::basis(2, 0)).unwrap() < 1e-10);
        assert!(out.last_delta <= 1e-10);
    }

    #[test]
    fn equal_magnitude_pair_does_not_converge() {
        let p = EigenProblem::new(diag(&[1.0, 3.0]), ComplexDenseMatrix::identity(2), 1.0).unwrap();
        let cfg = InnerConfig { max_iterations: 50, ..Default::default() };
        let out = run_fixed_point(&p, c(2.0, 0.0), &ComplexVector::ones(2), &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 50);
    }

    #[test]
    fn singular_resolvent_propagates() {
        let p = EigenProblem::new(diag(&[1.0, 3.0]), ComplexDenseMatrix::identity(2), 1.0).unwrap();
        let err = run_fixed_point(&p, c(3.0, 0.0), &ComplexVector::ones(2), &InnerConfig::default()).unwrap_err();
        assert!(matches!(err, SolveError::SingularResolvent { .. }));
    }

    #[test]
    fn problem_validation() {
        let t = diag(&[1.0, 2.0]);
        assert!(EigenProblem::new(t.clone(), diag(&[1.0]), 1.0).is_err());
        assert!(EigenProblem::new(t.clone(), t.clone(), 0.0).is_err());
        assert!(EigenProblem::new(t.clone(), t.clone(), f64::NAN).is_err());
        assert!(EigenProblem::with_reference(t.clone(), t.clone(), 1.0, ComplexVector::ones(3)).is_err());
    }

    #[test]
    fn seeded_vector_is_deterministic() {
        assert_eq!(seeded_vector(5, 7), seeded_vector(5, 7));
        assert_ne!(seeded_vector(5, 7), seeded_vector(5, 8));
    }
}
