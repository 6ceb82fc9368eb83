//! Excited states by deflation.
//!
//! Found states are removed from the iteration with the biorthogonal
//! projector `P = Π_k (I − u_k w_kᵀ / w_kᵀu_k)`, where `w_k` is the left
//! eigenvector of `H = T − λ_ex V` (`w_kᵀH = ε_k w_kᵀ`, plain transpose, no
//! conjugation). Right eigenvectors of a non-Hermitian `H` are not orthogonal,
//! so projecting with `u_k†` would leave a component that `G_ε V` re-amplifies.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::fixed_point::{eigen_residual, run_fixed_point_with, EigenProblem, InnerConfig, IterateHook, NoHook};
use crate::linalg::{bilinear, lu_factor, ComplexVector};
use crate::resolvent::make_resolvent;
use crate::search::{solve_ground, solve_ground_with, SearchConfig, SolveReport};

/// Smallest usable `|wᵀu|` for a normalized pair.
pub const PAIRING_THRESHOLD: f64 = 1e-10;

/// Relative nudge applied to ε when `T − εI` is singular.
const LEFT_NUDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub epsilon: Complex64,
    pub right: ComplexVector,
    /// Left eigenvector, unit 2-norm.
    pub left: ComplexVector,
    /// `leftᵀ·right`.
    pub pairing: Complex64,
}

impl EigenPair {
    pub fn new(epsilon: Complex64, right: ComplexVector, left: ComplexVector) -> Result<Self, SolveError> {
        let left = left.scaled(Complex64::new(1.0 / left.norm2(), 0.0));
        let pairing = bilinear(&left, &right)?;
        Ok(Self { epsilon, right, left, pairing })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// Project every inner iterate.
    EveryIteration,
    /// Project the start vector once and never again.
    StartVectorOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeflationConfig {
    pub mode: ProjectionMode,
    /// Largest relative overlap `|w_kᵀu| / (‖w_k‖‖u‖)` tolerated after projection.
    pub max_overlap: f64,
    /// Start-vector seeds tried per state before giving up.
    pub attempts: usize,
}

impl Default for DeflationConfig {
    fn default() -> Self {
        Self { mode: ProjectionMode::EveryIteration, max_overlap: 1e-6, attempts: 3 }
    }
}

/// Left eigenvector at a converged eigenvalue: the fixed point of the
/// transposed problem `(Tᵀ, Vᵀ)` at the same ε.
pub fn solve_left(
    problem: &EigenProblem,
    pair_epsilon: Complex64,
    inner: &InnerConfig,
) -> Result<ComplexVector, SolveError> {
    let start = ComplexVector::ones(problem.dim());
    solve_left_from(problem, pair_epsilon, &start, inner, &mut NoHook)
}

fn solve_left_from(
    problem: &EigenProblem,
    eps: Complex64,
    start: &ComplexVector,
    inner: &InnerConfig,
    hook: &mut dyn IterateHook,
) -> Result<ComplexVector, SolveError> {
    let tp = problem.transposed();
    let res = match make_resolvent(tp.t(), eps) {
        Ok(res) => res,
        Err(SolveError::SingularResolvent { .. }) => make_resolvent(tp.t(), eps * (1.0 + LEFT_NUDGE))?,
        Err(e) => return Err(e),
    };
    let lambda = Complex64::new(problem.lambda_ex(), 0.0);
    let bound = 1e-8 * problem.hamiltonian().norm_inf().max(f64::MIN_POSITIVE);
    if let Ok(out) = run_fixed_point_with(&tp, &res, start, inner, hook) {
        let r = eigen_residual(tp.t(), tp.v(), lambda, eps, &out.u)?.norm_inf() / out.u.norm_inf();
        if r <= bound {
            return Ok(out.u);
        }
    }
    // λ_ex is not the dominant coupling of the transposed map at ε: fall back
    // to inverse iteration on Hᵀ with a slightly moved shift.
    left_by_inverse_iteration(problem, eps, start, bound)
}

fn left_by_inverse_iteration(
    problem: &EigenProblem,
    eps: Complex64,
    start: &ComplexVector,
    bound: f64,
) -> Result<ComplexVector, SolveError> {
    let ht = problem.hamiltonian().transpose();
    let scale = ht.norm_inf().max(1.0);
    let shift = eps + Complex64::new(scale * 1e-10, scale * 1e-10);
    let f = lu_factor(&ht.add_diagonal(-shift));
    let mut w = start.clone();
    for _ in 0..4 {
        let next = f.solve_unguarded(&w)?;
        w = next.scaled(Complex64::new(1.0 / next.norm_inf(), 0.0));
    }
    let lambda = Complex64::new(problem.lambda_ex(), 0.0);
    let t = problem.t().transpose();
    let v = problem.v().transpose();
    let r = eigen_residual(&t, &v, lambda, eps, &w)?.norm_inf() / w.norm_inf();
    if r <= bound {
        Ok(w)
    } else {
        Err(SolveError::InvalidProblem(format!("no left eigenvector at ε = {eps} (residual {r:e})")))
    }
}

/// `P·x` with `P = Π_k (I − right_k left_kᵀ / pairing_k)`.
pub fn deflate_vector(x: &ComplexVector, pairs: &[EigenPair]) -> Result<ComplexVector, SolveError> {
    let mut y = x.clone();
    deflate_in_place(&mut y, pairs)?;
    Ok(y)
}

fn deflate_in_place(y: &mut ComplexVector, pairs: &[EigenPair]) -> Result<(), SolveError> {
    for (index, pair) in pairs.iter().enumerate() {
        if pair.pairing.norm() <= PAIRING_THRESHOLD {
            return Err(SolveError::DefectivePair { index, pairing: pair.pairing });
        }
        let c = bilinear(&pair.left, y)? / pair.pairing;
        y.axpy(-c, &pair.right)?;
    }
    Ok(())
}

/// Largest `|w_kᵀu| / (‖w_k‖‖u‖)` over the pairs.
pub fn max_overlap(u: &ComplexVector, pairs: &[EigenPair]) -> Result<f64, SolveError> {
    let norm = u.norm2();
    let mut worst: f64 = 0.0;
    for pair in pairs {
        let o = bilinear(&pair.left, u)?.norm() / (pair.left.norm2() * norm);
        worst = worst.max(o);
    }
    Ok(worst)
}

struct Deflator<'a> {
    pairs: &'a [EigenPair],
    max_overlap: f64,
}

impl IterateHook for Deflator<'_> {
    fn project(&mut self, u: &mut ComplexVector) -> Result<(), SolveError> {
        deflate_in_place(u, self.pairs)?;
        let overlap = max_overlap(u, self.pairs)?;
        if overlap > self.max_overlap {
            return Err(SolveError::DeflationBreakdown { overlap });
        }
        Ok(())
    }
}

/// Ground state plus `k` excited states, in discovery order.
pub fn solve_excited(
    problem: &EigenProblem,
    k: usize,
    cfg: &SearchConfig,
    inner: &InnerConfig,
) -> Result<Vec<SolveReport>, SolveError> {
    solve_excited_with(problem, k, cfg, inner, &DeflationConfig::default())
}

pub fn solve_excited_with(
    problem: &EigenProblem,
    k: usize,
    cfg: &SearchConfig,
    inner: &InnerConfig,
    dcfg: &DeflationConfig,
) -> Result<Vec<SolveReport>, SolveError> {
    if k == 0 || k + 1 > problem.dim() {
        return Err(SolveError::TooManyStates { requested: k + 1, dim: problem.dim() });
    }
    if dcfg.attempts == 0 || !(dcfg.max_overlap > 0.0) {
        return Err(SolveError::InvalidConfig("deflation attempts and max_overlap must be positive".into()));
    }
    let separation = 1e-6 * problem.t().norm_inf();
    let ground = solve_ground(problem, cfg, inner)?;
    if !ground.converged {
        return Ok(vec![ground]);
    }
    let mut pairs = vec![pair_for(problem, &ground, &[], inner)?];
    let mut reports = vec![ground];

    while reports.len() < k + 1 {
        let mut last = None;
        for attempt in 0..dcfg.attempts {
            let seed_cfg = SearchConfig { start_seed: cfg.start_seed.wrapping_add(attempt as u64 + 1), ..cfg.clone() };
            let u0 = deflate_vector(&crate::fixed_point::seeded_vector(problem.dim(), seed_cfg.start_seed), &pairs)?;
            let report = match dcfg.mode {
                ProjectionMode::EveryIteration => {
                    let mut hook = Deflator { pairs: &pairs, max_overlap: dcfg.max_overlap };
                    solve_ground_with(problem, &seed_cfg, inner, &mut hook, Some(u0))
                }
                ProjectionMode::StartVectorOnly => solve_ground_with(problem, &seed_cfg, inner, &mut NoHook, Some(u0)),
            };
            let report = match report {
                Ok(r) => r,
                Err(e) if attempt + 1 == dcfg.attempts && last.is_none() => return Err(e),
                Err(_) => continue,
            };
            let distinct = reports.iter().all(|r| (r.epsilon - report.epsilon).norm() > separation);
            let accepted = report.converged && distinct;
            last = Some(report);
            if accepted {
                break;
            }
        }
        let mut report = last.expect("at least one attempt produced a report");
        if !report.converged || reports.iter().any(|r| (r.epsilon - report.epsilon).norm() <= separation) {
            report.converged = false;
            report.diagnostics.warnings.push("deflated search did not find a new state".into());
            reports.push(report);
            break;
        }
        if reports.len() < k {
            let pair = pair_for(problem, &report, &pairs, inner)?;
            pairs.push(pair);
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Left vector for a converged state, deflating the left vectors of the
/// states already found (the transposed projector removes their right
/// vectors).
fn pair_for(
    problem: &EigenProblem,
    report: &SolveReport,
    found: &[EigenPair],
    inner: &InnerConfig,
) -> Result<EigenPair, SolveError> {
    let transposed: Vec<EigenPair> = found
        .iter()
        .map(|p| EigenPair { epsilon: p.epsilon, right: p.left.clone(), left: p.right.clone(), pairing: p.pairing })
        .collect();
    let start = deflate_vector(&report.u, &transposed)?;
    let mut hook = Deflator { pairs: &transposed, max_overlap: f64::INFINITY };
    let left = solve_left_from(problem, report.epsilon, &start, inner, &mut hook)?;
    let pair = EigenPair::new(report.epsilon, report.u.clone(), left)?;
    if pair.pairing.norm() <= PAIRING_THRESHOLD * pair.right.norm2() {
        return Err(SolveError::DefectivePair { index: found.len(), pairing: pair.pairing });
    }
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexDenseMatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cv(v: &[Complex64]) -> ComplexVector {
        ComplexVector::new(v.to_vec()).unwrap()
    }

    fn parallel(a: &ComplexVector, b: &ComplexVector) -> f64 {
        // |aᴴb| / (‖a‖‖b‖) = 1 for parallel vectors.
        let dot: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
        1.0 - dot.norm() / (a.norm2() * b.norm2())
    }

    #[test]
    fn left_of_upper_triangular() {
        // T − V = [[1, 1], [0, 2]] with V = I, λ_ex = 1.
        let t = ComplexDenseMatrix::from_real_rows(&[vec![2.0, 1.0], vec![0.0, 3.0]]).unwrap();
        let p = EigenProblem::new(t, ComplexDenseMatrix::identity(2), 1.0).unwrap();
        let w = solve_left(&p, c(1.0, 0.0), &InnerConfig::default()).unwrap();
        assert!(parallel(&w, &cv(&[c(1.0, 0.0), c(-1.0, 0.0)])) < 1e-12, "{w:?}");
    }

    #[test]
    fn left_of_diagonal_and_symmetric() {
        let t = ComplexDenseMatrix::diag(&[c(1.0, 0.5), c(4.0, 0.0)]).unwrap();
        let p = EigenProblem::new(t, ComplexDenseMatrix::identity(2), 2.0).unwrap();
        let w = solve_left(&p, c(-1.0, 0.5), &InnerConfig::default()).unwrap();
        assert!(parallel(&w, &ComplexVector::basis(2, 0)) < 1e-12);

        let t = ComplexDenseMatrix::from_real_rows(&[vec![2.0, 1.0], vec![1.0, 4.0]]).unwrap();
        let p = EigenProblem::new(t.clone(), ComplexDenseMatrix::identity(2), 1.0).unwrap();
        // Lower eigenvalue of [[1, 1], [1, 3]].
        let eps = c(2.0 - 2f64.sqrt(), 0.0);
        let w = solve_left(&p, eps, &InnerConfig::default()).unwrap();
        let right = cv(&[c(1.0 + 2f64.sqrt(), 0.0), c(-1.0, 0.0)]);
        assert!(parallel(&w, &right) < 1e-10);
    }

    #[test]
    fn deflate_examples() {
        let pair = EigenPair::new(c(1.0, 0.0), ComplexVector::basis(2, 0), ComplexVector::basis(2, 0)).unwrap();
        let y = deflate_vector(&cv(&[c(3.0, 1.0), c(2.0, -1.0)]), &[pair]).unwrap();
        assert_eq!(y, cv(&[c(0.0, 0.0), c(2.0, -1.0)]));

        let pair =
            EigenPair::new(c(1.0, 0.0), cv(&[c(1.0, 0.0), c(0.0, 0.0)]), cv(&[c(1.0, 0.0), c(-1.0, 0.0)])).unwrap();
        let y = deflate_vector(&cv(&[c(1.0, 0.0), c(0.0, 0.0)]), std::slice::from_ref(&pair)).unwrap();
        assert!(y.norm_inf() < 1e-15);
        let x = cv(&[c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(deflate_vector(&x, &[pair]).unwrap(), x);
    }

    #[test]
    fn defective_pair_rejected() {
        let pair = EigenPair::new(c(1.0, 0.0), ComplexVector::basis(2, 0), ComplexVector::basis(2, 1)).unwrap();
        let err = deflate_vector(&ComplexVector::ones(2), &[pair]).unwrap_err();
        assert!(matches!(err, SolveError::DefectivePair { index: 0, .. }));
    }

    #[test]
    fn excited_diagonal() {
        let t = ComplexDenseMatrix::diag(&[c(1.0, 0.5), c(4.0, 0.0)]).unwrap();
        let p = EigenProblem::new(t, ComplexDenseMatrix::identity(2), 2.0).unwrap();
        let states = solve_excited(&p, 1, &SearchConfig::default(), &InnerConfig::default()).unwrap();
        assert_eq!(states.len(), 2);
        assert!(states.iter().all(|s| s.converged));
        let mut found: Vec<Complex64> = states.iter().map(|s| s.epsilon).collect();
        found.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((found[0] - c(-1.0, 0.5)).norm() < 1e-9, "{found:?}");
        assert!((found[1] - c(2.0, 0.0)).norm() < 1e-9, "{found:?}");
    }

    #[test]
    fn excited_needs_room() {
        let p =
            EigenProblem::new(ComplexDenseMatrix::diag(&[c(2.0, 0.0)]).unwrap(), ComplexDenseMatrix::identity(1), 1.0)
                .unwrap();
        let err = solve_excited(&p, 1, &SearchConfig::default(), &InnerConfig::default()).unwrap_err();
        assert_eq!(err, SolveError::TooManyStates { requested: 2, dim: 1 });
    }
}
