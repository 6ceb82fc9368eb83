//! Brute-force verification of eigenvalues of `H = T − λV` as roots of the
//! characteristic function `det(H − εI)`.
//!
//! Only the dense LU routines in [`crate::linalg`] are used here, so a defect
//! in the fixed-point or search code cannot hide behind a matching defect in
//! the oracle.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{lu_factor, lu_solve, matvec, wrap_phase, ComplexDenseMatrix, ComplexVector, LinalgError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("Newton iteration did not settle within {iterations} steps (last ε = {last})")]
    NewtonStall { iterations: usize, last: Complex64 },
    #[error("derivative of log det vanishes at ε = {epsilon}")]
    ZeroDerivative { epsilon: Complex64 },
    #[error("residual of a zero vector is undefined")]
    ZeroVector,
    #[error("invalid oracle configuration: {0}")]
    InvalidConfig(String),
}

/// `det = exp(log_magnitude)·e^{i·phase}`; `singular` marks an exactly zero
/// pivot, in which case `log_magnitude` is `−∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub log_magnitude: f64,
    pub phase: f64,
    pub singular: bool,
}

impl LogDet {
    pub fn to_complex(self) -> Complex64 {
        if self.singular {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(self.log_magnitude.exp(), self.phase)
        }
    }
}

/// Rectangle `[re_min, re_max] × [im_min, im_max]` sampled on a regular grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub re_samples: usize,
    pub im_samples: usize,
}

impl GridSpec {
    fn validate(&self) -> Result<(), OracleError> {
        if self.re_samples < 2 || self.im_samples < 2 {
            return Err(OracleError::InvalidConfig("grid needs at least 2 samples per axis".into()));
        }
        if !(self.re_max > self.re_min && self.im_max > self.im_min) {
            return Err(OracleError::InvalidConfig("grid rectangle is degenerate".into()));
        }
        Ok(())
    }

    fn point(&self, i: usize, j: usize) -> Complex64 {
        let x = self.re_min + (self.re_max - self.re_min) * i as f64 / (self.re_samples - 1) as f64;
        let y = self.im_min + (self.im_max - self.im_min) * j as f64 / (self.im_samples - 1) as f64;
        Complex64::new(x, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// `None` selects the Gershgorin bounding box of `H`, padded by 10%.
    pub grid: Option<GridSpec>,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub dedupe_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { grid: None, newton_tol: 1e-12, newton_max: 50, dedupe_tol: 1e-8 }
    }
}

/// `log det(H − εI)` accumulated from the LU pivots.
pub fn char_logdet(h: &ComplexDenseMatrix, epsilon: Complex64) -> LogDet {
    let f = lu_factor(&h.add_diagonal(-epsilon));
    let mut log_magnitude = 0.0;
    let mut phase = if f.odd_permutation() { PI } else { 0.0 };
    for p in f.pivots_diagonal() {
        if p.norm() == 0.0 {
            return LogDet { log_magnitude: f64::NEG_INFINITY, phase: 0.0, singular: true };
        }
        log_magnitude += p.norm().ln();
        phase = wrap_phase(phase + p.arg());
    }
    LogDet { log_magnitude, phase, singular: false }
}

/// `tr((H − εI)⁻¹)` by `n` solves against basis vectors; `None` when the
/// shifted matrix has an exactly zero pivot.
fn resolvent_trace(h: &ComplexDenseMatrix, epsilon: Complex64) -> Result<Option<Complex64>, OracleError> {
    let n = h.dim();
    let f = lu_factor(&h.add_diagonal(-epsilon));
    if f.pivots_diagonal().any(|p| p.norm() == 0.0) {
        return Ok(None);
    }
    let mut trace = Complex64::new(0.0, 0.0);
    for i in 0..n {
        // Bypass the relative singularity flag: near a root the pivots are
        // legitimately tiny and the solve is still what Newton needs.
        let x = f.solve_unguarded(&ComplexVector::basis(n, i))?;
        trace += x[i];
    }
    Ok(Some(trace))
}

/// Newton on `det(H − εI)` with the logarithmic derivative
/// `d/dε log det(H − εI) = −tr((H − εI)⁻¹)`.
pub fn newton_root(h: &ComplexDenseMatrix, eps0: Complex64, cfg: &OracleConfig) -> Result<Complex64, OracleError> {
    newton_deflated(h, eps0, &[], cfg)
}

/// Newton on `det(H − εI) / Π(ε − r_k)`, which keeps already-found roots from
/// attracting the iteration.
fn newton_deflated(
    h: &ComplexDenseMatrix,
    eps0: Complex64,
    found: &[Complex64],
    cfg: &OracleConfig,
) -> Result<Complex64, OracleError> {
    let mut eps = eps0;
    for _ in 0..cfg.newton_max {
        let Some(trace) = resolvent_trace(h, eps)? else {
            return Ok(eps);
        };
        let pole_sum: Complex64 = found.iter().map(|r| (eps - r).inv()).sum();
        let denom = trace + pole_sum;
        if denom.norm() < 1e-14 {
            return Err(OracleError::ZeroDerivative { epsilon: eps });
        }
        let step = denom.inv();
        eps += step;
        if !(eps.re.is_finite() && eps.im.is_finite()) {
            break;
        }
        if step.norm() <= cfg.newton_tol * (1.0 + eps.norm()) {
            return Ok(eps);
        }
    }
    Err(OracleError::NewtonStall { iterations: cfg.newton_max, last: eps })
}

/// Gershgorin bounding box of `H`, padded by 10% on each side.
pub fn gershgorin_grid(h: &ComplexDenseMatrix, samples: usize) -> GridSpec {
    let n = h.dim();
    let (mut re_min, mut re_max, mut im_min, mut im_max) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let center = h[(i, i)];
        let radius: f64 = (0..n).filter(|&j| j != i).map(|j| h[(i, j)].norm()).sum();
        re_min = re_min.min(center.re - radius);
        re_max = re_max.max(center.re + radius);
        im_min = im_min.min(center.im - radius);
        im_max = im_max.max(center.im + radius);
    }
    let pad = |lo: f64, hi: f64| {
        let width = (hi - lo).max(1e-3 * (1.0 + lo.abs().max(hi.abs())));
        (lo - 0.1 * width, hi + 0.1 * width)
    };
    let (re_min, re_max) = pad(re_min, re_max);
    let (im_min, im_max) = pad(im_min, im_max);
    GridSpec { re_min, re_max, im_min, im_max, re_samples: samples, im_samples: samples }
}

/// Distinct eigenvalues found by [`eig_all_small`]. `complete` is false when
/// fewer than `n` roots survive deduplication (clustered or multiple roots).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub roots: Vec<Complex64>,
    pub complete: bool,
}

impl Spectrum {
    /// Distance from `z` to the closest root.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        self.roots.iter().map(|r| (r - z).norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn nearest(&self, z: Complex64) -> Option<Complex64> {
        self.roots.iter().copied().min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
    }
}

/// All eigenvalues of a small dense `H`: grid scan of `log|det(H − εI)|`,
/// Newton from every local minimum (deflated against roots already found),
/// deduplication, and an inverse-iteration residual check on every root.
pub fn eig_all_small(h: &ComplexDenseMatrix, cfg: &OracleConfig) -> Result<Spectrum, OracleError> {
    let n = h.dim();
    let grid = cfg.grid.unwrap_or_else(|| gershgorin_grid(h, (8 * n).clamp(40, 160)));
    grid.validate()?;
    let scale = h.norm_inf().max(f64::MIN_POSITIVE);

    let (nx, ny) = (grid.re_samples, grid.im_samples);
    let mut values = vec![0.0; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            values[i * ny + j] = char_logdet(h, grid.point(i, j)).log_magnitude;
        }
    }
    let mut minima: Vec<(f64, Complex64)> = Vec::new();
    let mut everything: Vec<(f64, Complex64)> = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let here = values[i * ny + j];
            everything.push((here, grid.point(i, j)));
            let is_min = (-1i64..=1).all(|di| {
                (-1i64..=1).all(|dj| {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    (di == 0 && dj == 0)
                        || a < 0
                        || b < 0
                        || a >= nx as i64
                        || b >= ny as i64
                        || here <= values[a as usize * ny + b as usize]
                })
            });
            if is_min {
                minima.push((here, grid.point(i, j)));
            }
        }
    }
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));
    everything.sort_by(|a, b| a.0.total_cmp(&b.0));
    everything.truncate(4 * n);

    let mut roots: Vec<Complex64> = Vec::new();
    let same = |a: Complex64, b: Complex64| (a - b).norm() <= cfg.dedupe_tol * (1.0 + a.norm());
    for (_, seed) in minima.into_iter().chain(everything) {
        if roots.len() == n {
            break;
        }
        let Ok(candidate) = newton_deflated(h, seed, &roots, cfg) else {
            continue;
        };
        let polished = newton_root(h, candidate, cfg).unwrap_or(candidate);
        if roots.iter().any(|&r| same(r, polished)) {
            continue;
        }
        if inverse_iteration_residual(h, polished)? <= 1e-8 * scale {
            roots.push(polished);
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(Spectrum { complete: roots.len() == n, roots })
}

/// Residual `‖Hx − εx‖∞/‖x‖∞` after two steps of shifted inverse iteration.
pub fn inverse_iteration_residual(h: &ComplexDenseMatrix, epsilon: Complex64) -> Result<f64, OracleError> {
    let n = h.dim();
    let nudge = epsilon + Complex64::new(1e-11, 1e-11) * (1.0 + epsilon.norm());
    let f = lu_factor(&h.add_diagonal(-nudge));
    let mut x =
        ComplexVector::new((0..n).map(|i| Complex64::new(1.0 + 0.37 * i as f64, 0.5 - 0.11 * i as f64)).collect())?;
    for _ in 0..2 {
        x = match f.solve_unguarded(&x) {
            Ok(x) => x,
            Err(_) => return Ok(f64::INFINITY),
        };
        let norm = x.norm_inf();
        if !(norm.is_finite() && norm > 0.0) {
            return Ok(f64::INFINITY);
        }
        x.scale_mut(Complex64::new(1.0 / norm, 0.0));
    }
    let mut r = matvec(h, &x)?;
    r.axpy(-epsilon, &x)?;
    Ok(r.norm_inf() / x.norm_inf())
}

/// `‖(T − λV)u − εu‖∞ / ‖u‖∞`.
pub fn residual_norm(
    t: &ComplexDenseMatrix,
    v: &ComplexDenseMatrix,
    lambda: Complex64,
    epsilon: Complex64,
    u: &ComplexVector,
) -> Result<f64, OracleError> {
    let norm = u.norm_inf();
    if norm == 0.0 {
        return Err(OracleError::ZeroVector);
    }
    let mut r = matvec(t, u)?;
    r.axpy(-lambda, &matvec(v, u)?)?;
    r.axpy(-epsilon, u)?;
    Ok(r.norm_inf() / norm)
}

/// Eigenvalues of the pencil `(T − εI, V)`, i.e. the couplings λ with
/// `(T − εI)x = λVx`, computed as the spectrum of `V⁻¹(T − εI)`.
pub fn coupling_spectrum(
    t: &ComplexDenseMatrix,
    v: &ComplexDenseMatrix,
    epsilon: Complex64,
    cfg: &OracleConfig,
) -> Result<Spectrum, OracleError> {
    let n = t.dim();
    let fv = lu_factor(v);
    let shifted = t.add_diagonal(-epsilon);
    let mut m = ComplexDenseMatrix::zeros(n);
    for j in 0..n {
        let col = lu_solve(&fv, &shifted.column(j))?;
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    eig_all_small(&m, cfg)
}
