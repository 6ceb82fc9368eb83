//! Outer search over ε in polar form.
//!
//! The inner loop maps ε to a coupling λ(ε). The search drives `|λ(ε)|` to
//! `λ_ex` by moving `|ε|` along a ray of fixed phase, then drives `φ(λ)` to
//! zero by moving `φ(ε)` on a circle of fixed modulus, and alternates the two
//! until both hold.
//!
//! Each one-dimensional refinement first looks for a sign change (scanning in
//! fixed steps), then runs a secant iteration kept inside the bracket.
//! Branch switches of λ(ε) show up as jumps, not roots: a bracket that
//! collapses onto a jump is discarded and the scan continues. When the
//! alternation stalls or a refinement cannot bracket, a complex secant step
//! on `λ(ε) − λ_ex` is tried from the best recent samples.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::fixed_point::{
    eigen_residual, lambda_of, run_fixed_point_with, seeded_vector, EigenProblem, InnerConfig, IterateHook, NoHook,
};
use crate::linalg::{to_polar, wrap_phase, ComplexVector, PolarScalar};
use crate::resolvent::make_resolvent;

/// Residual bound, relative to `‖T‖∞`, that a converged report must meet.
pub const RESIDUAL_BOUND: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Lower end of the initial |ε| scan; `None` picks `eps_mag_stop / 1000`.
    pub eps_mag_start: Option<f64>,
    /// Upper end of the initial |ε| scan; `None` picks `1.1·(‖T‖∞ + λ_ex‖V‖∞)`,
    /// which bounds every eigenvalue of `T − λ_ex V`.
    pub eps_mag_stop: Option<f64>,
    /// |ε| grid step; `None` splits the scan window into 240 steps.
    pub eps_mag_step: Option<f64>,
    pub tol_mag: f64,
    pub tol_phase: f64,
    pub max_outer_cycles: usize,
    pub max_secant_steps: usize,
    pub phase_start: f64,
    pub singular_nudge: f64,
    /// Step of the φ(ε) bracket search, in radians.
    pub phase_step: f64,
    /// Number of scan rays tried (1 to 8), starting at `phase_start`.
    pub scan_rays: usize,
    /// When no ray brackets a crossing, the angular spacing is halved until
    /// this many rays have been scanned. Values at or below `scan_rays`
    /// disable the refinement.
    pub max_scan_rays: usize,
    /// Seed of the start vector.
    pub start_seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            eps_mag_start: None,
            eps_mag_stop: None,
            eps_mag_step: None,
            tol_mag: 1e-9,
            tol_phase: 1e-9,
            max_outer_cycles: 40,
            max_secant_steps: 30,
            phase_start: 0.0,
            singular_nudge: 1e-8,
            phase_step: 0.05,
            scan_rays: 8,
            max_scan_rays: 64,
            start_seed: 1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let opt_positive = |x: Option<f64>| x.is_none_or(positive);
        if !(positive(self.tol_mag) && positive(self.tol_phase) && positive(self.singular_nudge)) {
            return Err(SolveError::InvalidConfig("search tolerances must be positive".into()));
        }
        if !(opt_positive(self.eps_mag_start) && opt_positive(self.eps_mag_stop) && opt_positive(self.eps_mag_step)) {
            return Err(SolveError::InvalidConfig("scan window values must be positive".into()));
        }
        if !positive(self.phase_step) || !self.phase_start.is_finite() {
            return Err(SolveError::InvalidConfig("phase_step must be positive".into()));
        }
        if self.max_outer_cycles == 0 || self.max_secant_steps == 0 || !(1..=8).contains(&self.scan_rays) {
            return Err(SolveError::InvalidConfig("cycle/step counts out of range".into()));
        }
        Ok(())
    }
}

/// Half-width, in scan steps, of the |ε| search after the first cycle. A
/// root further away means the alternation is on the wrong branch, and a
/// fresh scan bracket is cheaper than a long walk.
/// Refines one sign-change bracket `((x, f), (x, f))`.
type BracketAttempt<'a> = dyn FnMut(&mut Evaluator<'_>, (f64, f64), (f64, f64)) -> Option<Refined> + 'a;

const LOCAL_STEPS: f64 = 16.0;

/// Default number of |ε| scan intervals. Finer grids keep the samples next to
/// a crossing on one coupling branch, which makes the brackets cleaner.
const SCAN_STEPS: f64 = 240.0;

/// Resolved |ε| scan grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanWindow {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl ScanWindow {
    pub fn resolve(problem: &EigenProblem, cfg: &SearchConfig) -> Result<Self, SolveError> {
        let bound = 1.1 * (problem.t().norm_inf() + problem.lambda_ex() * problem.v().norm_inf());
        let stop = cfg.eps_mag_stop.unwrap_or(bound.max(1e-12));
        let start = cfg.eps_mag_start.unwrap_or(stop * 1e-3);
        if !(stop > start) {
            return Err(SolveError::InvalidConfig(format!("scan window [{start}, {stop}] is empty")));
        }
        let step = cfg.eps_mag_step.unwrap_or((stop - start) / SCAN_STEPS);
        Ok(Self { start, stop, step })
    }

    fn grid(&self) -> Vec<f64> {
        grid(self.start, self.stop, self.step)
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|k| lo + k as f64 * step).collect()
}

/// One inner solve seen in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub eps: PolarScalar,
    pub lambda: PolarScalar,
    pub inner_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanCurve {
    pub samples: Vec<ScanSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinate {
    Magnitude,
    Phase,
}

impl Coordinate {
    fn name(self) -> &'static str {
        match self {
            Coordinate::Magnitude => "magnitude",
            Coordinate::Phase => "phase",
        }
    }
}

/// Bookkeeping for one refinement call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineRecord {
    pub coordinate: Coordinate,
    /// Secant steps taken inside the bracket that produced the root.
    pub secant_steps: usize,
    /// Inner solves spent, bracket search included.
    pub evaluations: usize,
    pub success: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Scan along the ray whose crossing started the successful (or last) attempt.
    pub bracket_scan: ScanCurve,
    /// Phase of that ray and the |ε| bracket found on it.
    pub bracket_ray: f64,
    pub bracket: Option<(f64, f64)>,
    pub refinements: Vec<RefineRecord>,
    pub attempts: usize,
    pub polish_steps: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub epsilon: Complex64,
    /// Eigenvector normalized so that `⟨r|u⟩ = 1`.
    pub u: ComplexVector,
    pub lambda_achieved: Complex64,
    /// `‖(T − λ_ex V)u − εu‖∞ / ‖u‖∞`.
    pub residual: f64,
    pub outer_cycles: usize,
    pub trace: ScanCurve,
    pub converged: bool,
    pub diagnostics: Diagnostics,
}

/// Evaluation of λ at one ε.
#[derive(Debug, Clone)]
struct Eval {
    eps: Complex64,
    lambda: Complex64,
    u: ComplexVector,
    converged: bool,
    nudged: bool,
}

impl Eval {
    fn mag_residual(&self, lambda_ex: f64) -> f64 {
        self.lambda.norm() / lambda_ex - 1.0
    }

    fn phase_residual(&self) -> f64 {
        to_polar(self.lambda).phase
    }

    fn error(&self, lambda_ex: f64) -> f64 {
        (self.lambda / lambda_ex - 1.0).norm()
    }
}

/// Runs inner solves with warm starts and records every sample.
struct Evaluator<'a> {
    problem: &'a EigenProblem,
    inner: &'a InnerConfig,
    nudge: f64,
    warm: ComplexVector,
    hook: &'a mut dyn IterateHook,
    trace: Vec<ScanSample>,
    recent: VecDeque<Eval>,
    evaluations: usize,
}

impl<'a> Evaluator<'a> {
    fn new(
        problem: &'a EigenProblem,
        inner: &'a InnerConfig,
        nudge: f64,
        u0: ComplexVector,
        hook: &'a mut dyn IterateHook,
    ) -> Self {
        Self { problem, inner, nudge, warm: u0, hook, trace: Vec::new(), recent: VecDeque::new(), evaluations: 0 }
    }

    /// `None` when the inner solve failed outright (degenerate denominator or
    /// a pole that survives the nudge).
    fn eval(&mut self, eps: Complex64) -> Option<Eval> {
        self.evaluations += 1;
        let (res, actual, nudged) = match make_resolvent(self.problem.t(), eps) {
            Ok(res) => (res, eps, false),
            Err(SolveError::SingularResolvent { .. }) => {
                let moved = if eps.norm() > 0.0 { eps * (1.0 + self.nudge) } else { Complex64::new(self.nudge, 0.0) };
                match make_resolvent(self.problem.t(), moved) {
                    Ok(res) => (res, moved, true),
                    Err(_) => {
                        self.record_failure(eps);
                        return None;
                    }
                }
            }
            Err(_) => {
                self.record_failure(eps);
                return None;
            }
        };
        let out = match run_fixed_point_with(self.problem, &res, &self.warm, self.inner, &mut *self.hook) {
            Ok(out) => out,
            Err(_) => {
                self.record_failure(actual);
                return None;
            }
        };
        self.trace.push(ScanSample {
            eps: to_polar(actual),
            lambda: to_polar(out.lambda),
            inner_iterations: out.iterations,
            converged: out.converged,
        });
        let eval = Eval { eps: actual, lambda: out.lambda, u: out.u, converged: out.converged, nudged };
        if eval.converged {
            self.warm = eval.u.clone();
            self.recent.push_back(eval.clone());
            if self.recent.len() > 8 {
                self.recent.pop_front();
            }
        }
        Some(eval)
    }

    fn record_failure(&mut self, eps: Complex64) {
        self.trace.push(ScanSample {
            eps: to_polar(eps),
            lambda: PolarScalar::new(f64::NAN, f64::NAN),
            inner_iterations: 0,
            converged: false,
        });
    }

    fn at_polar(&mut self, magnitude: f64, phase: f64) -> Option<Eval> {
        self.eval(Complex64::from_polar(magnitude, phase))
    }
}

/// Outcome of a bracketed secant run.
enum SecantEnd {
    Root {
        x: f64,
        eval: Eval,
        steps: usize,
        slope: f64,
    },
    /// The bracket collapsed without the residual vanishing.
    Jump,
    Stall {
        steps: usize,
    },
}

/// Anderson–Björck regula falsi on a bracket `[a, b]` with `fa·fb < 0`.
/// Each step is a secant step between the bracket ends; when the same end is
/// kept twice in a row its value is scaled down so the iterate crosses over.
/// A step that fails to halve the bracket over three steps, or an inner
/// solve that fails, is replaced by bisection.
fn bracketed_secant(
    mut f: impl FnMut(f64) -> Option<(f64, Eval)>,
    (mut a, mut fa): (f64, f64),
    (mut b, mut fb): (f64, f64),
    tol: f64,
    max_steps: usize,
) -> SecantEnd {
    // Side of the bracket replaced last: -1 for b, +1 for a.
    let mut side = 0;
    let mut widths = [f64::INFINITY; 3];
    let mut last = (b, fb);
    for steps in 1..=max_steps {
        let mid = 0.5 * (a + b);
        let width = (b - a).abs();
        let mut x = (fa * b - fb * a) / (fa - fb);
        if !(x > a.min(b) && x < a.max(b)) || width > 0.5 * widths[0] {
            x = mid;
        }
        widths = [widths[1], widths[2], width];
        let (fx, eval) = match f(x) {
            Some(v) => v,
            None if x != mid => match f(mid) {
                Some(v) => {
                    x = mid;
                    v
                }
                None => return SecantEnd::Stall { steps },
            },
            None => return SecantEnd::Stall { steps },
        };
        let slope = (fx - last.1) / (x - last.0);
        if fx.abs() <= tol {
            return SecantEnd::Root { x, eval, steps, slope };
        }
        last = (x, fx);
        if (fx < 0.0) == (fb < 0.0) {
            if side == -1 {
                let m = 1.0 - fx / fb;
                fa *= if m > 0.0 { m } else { 0.5 };
            }
            b = x;
            fb = fx;
            side = -1;
        } else {
            if side == 1 {
                let m = 1.0 - fx / fa;
                fb *= if m > 0.0 { m } else { 0.5 };
            }
            a = x;
            fa = fx;
            side = 1;
        }
        if (b - a).abs() <= 64.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            return SecantEnd::Jump;
        }
    }
    SecantEnd::Stall { steps: max_steps }
}

/// A root of one refinement, with the secant cost of its bracket.
#[derive(Debug, Clone)]
pub struct Refined {
    pub value: f64,
    pub epsilon: Complex64,
    pub lambda: Complex64,
    pub u: ComplexVector,
    pub secant_steps: usize,
    /// Slope of the residual at the root, when the secant produced one.
    pub slope: Option<f64>,
}

impl Refined {
    fn at(x: f64, e: Eval, secant_steps: usize, slope: Option<f64>) -> Self {
        Self { value: x, epsilon: e.eps, lambda: e.lambda, u: e.u, secant_steps, slope }
    }
}

struct Objective {
    coordinate: Coordinate,
    /// Fixed polar coordinate (phase for magnitude refinement, and vice versa).
    fixed: f64,
    lambda_ex: f64,
}

impl Objective {
    fn point(&self, x: f64) -> (f64, f64) {
        match self.coordinate {
            Coordinate::Magnitude => (x, self.fixed),
            Coordinate::Phase => (self.fixed, x),
        }
    }

    fn value(&self, e: &Eval) -> f64 {
        match self.coordinate {
            Coordinate::Magnitude => e.mag_residual(self.lambda_ex),
            Coordinate::Phase => e.phase_residual(),
        }
    }

    /// Sign changes of φ(λ) across the ±π cut are wraps, not roots.
    fn continuous(&self, fa: f64, fb: f64) -> bool {
        match self.coordinate {
            Coordinate::Magnitude => true,
            Coordinate::Phase => (fa - fb).abs() < FRAC_PI_2,
        }
    }

    fn evaluate(&self, ev: &mut Evaluator<'_>, x: f64) -> Option<(f64, Eval)> {
        let (m, p) = self.point(x);
        if !(m > 0.0) {
            return None;
        }
        let e = ev.at_polar(m, p)?;
        if !e.converged {
            return None;
        }
        Some((self.value(&e), e))
    }
}

enum BracketOrder {
    /// Scan the candidate points in the given order.
    Ascending(Vec<f64>),
    /// Walk outward from a centre on both sides. With a slope estimate the
    /// first offset is twice the predicted distance to the root; the
    /// increment then doubles until it reaches `step`.
    Outward { center: f64, slope: Option<f64>, step: f64, lo: f64, hi: f64 },
}

/// Finds a sign change of the objective along the candidate points and runs
/// the bracketed secant on it. Brackets that collapse onto a jump or stall
/// are skipped and the search continues.
fn refine(
    ev: &mut Evaluator<'_>,
    obj: &Objective,
    order: BracketOrder,
    tol: f64,
    cfg: &SearchConfig,
    records: &mut Vec<RefineRecord>,
) -> Result<Refined, SolveError> {
    let start_evals = ev.evaluations;
    let mut stalled = None;
    let mut try_bracket = |ev: &mut Evaluator<'_>, a: (f64, f64), b: (f64, f64)| -> Option<Refined> {
        match bracketed_secant(|x| obj.evaluate(ev, x), a, b, tol, cfg.max_secant_steps) {
            SecantEnd::Root { x, eval, steps, slope } => Some(Refined::at(x, eval, steps, Some(slope))),
            SecantEnd::Jump => None,
            SecantEnd::Stall { steps } => {
                stalled = Some(steps);
                None
            }
        }
    };
    let crosses = |p: Option<(f64, f64)>, fx: f64| match p {
        Some((_, fp)) => (fp < 0.0) != (fx < 0.0) && obj.continuous(fp, fx),
        None => false,
    };

    let (found, lo, hi) = match order {
        BracketOrder::Ascending(points) => {
            let (lo, hi) = (points[0], points[points.len() - 1]);
            let mut prev: Option<(f64, f64)> = None;
            let mut seen: Vec<Option<(f64, f64)>> = Vec::with_capacity(points.len());
            let mut found = None;
            for x in points {
                let Some((fx, e)) = obj.evaluate(ev, x) else {
                    prev = None;
                    seen.push(None);
                    continue;
                };
                seen.push(Some((x, fx)));
                if fx.abs() <= tol {
                    found = Some(Refined::at(x, e, 0, None));
                    break;
                }
                if crosses(prev, fx) {
                    found = try_bracket(ev, prev.expect("checked"), (x, fx));
                    if found.is_some() {
                        break;
                    }
                }
                prev = Some((x, fx));
            }
            if found.is_none() {
                found = touching_root(ev, obj, &seen, tol, cfg.max_secant_steps);
            }
            (found, lo, hi)
        }
        BracketOrder::Outward { center, slope, step, lo, hi } => {
            (outward(ev, obj, center, slope, step, (lo, hi), tol, &mut try_bracket, &crosses), lo, hi)
        }
    };

    let out = match (found, stalled) {
        (Some(r), _) => Ok(r),
        (None, Some(steps)) => Err(SolveError::SecantStall { coordinate: obj.coordinate.name(), steps }),
        (None, None) => Err(SolveError::BracketFailure { coordinate: obj.coordinate.name(), lo, hi }),
    };
    records.push(RefineRecord {
        coordinate: obj.coordinate,
        secant_steps: out.as_ref().map_or(0, |r| r.secant_steps),
        evaluations: ev.evaluations - start_evals,
        success: out.is_ok(),
    });
    out
}

#[allow(clippy::too_many_arguments)]
fn outward(
    ev: &mut Evaluator<'_>,
    obj: &Objective,
    center: f64,
    slope: Option<f64>,
    step: f64,
    (lo, hi): (f64, f64),
    tol: f64,
    try_bracket: &mut BracketAttempt<'_>,
    crosses: &dyn Fn(Option<(f64, f64)>, f64) -> bool,
) -> Option<Refined> {
    let (fc, e) = obj.evaluate(ev, center)?;
    if fc.abs() <= tol {
        return Some(Refined::at(center, e, 0, None));
    }
    let floor = 1e-12 * center.abs().max(1.0);
    let first = match slope {
        Some(s) if s.is_finite() && s != 0.0 => (2.0 * (fc / s).abs()).clamp(floor, step),
        _ => step,
    };
    // Each side warm-starts from its own last point.
    let mut warm = [e.u.clone(), e.u];
    let mut prev = [Some((center, fc)); 2];
    let mut alive = [true, true];
    let (mut offset, mut increment) = (0.0, first.min(step));
    while alive[0] || alive[1] {
        offset += increment;
        increment = (2.0 * increment).min(step);
        for (side, dir) in [(0usize, 1.0f64), (1, -1.0)] {
            if !alive[side] {
                continue;
            }
            let x = center + dir * offset;
            if x > hi || x < lo {
                alive[side] = false;
                continue;
            }
            ev.warm = warm[side].clone();
            let Some((fx, e)) = obj.evaluate(ev, x) else {
                prev[side] = None;
                continue;
            };
            warm[side] = e.u.clone();
            if fx.abs() <= tol {
                return Some(Refined::at(x, e, 0, None));
            }
            if crosses(prev[side], fx) {
                if let Some(r) = try_bracket(ev, prev[side].expect("checked"), (x, fx)) {
                    return Some(r);
                }
            }
            prev[side] = Some((x, fx));
        }
    }
    None
}

/// Root where the residual touches zero without crossing it: minimizes `|f|`
/// by safeguarded parabolic interpolation from the smallest interior grid
/// minimum, switching to the bracketed secant if a sign change turns up.
fn touching_root(
    ev: &mut Evaluator<'_>,
    obj: &Objective,
    seen: &[Option<(f64, f64)>],
    tol: f64,
    max_steps: usize,
) -> Option<Refined> {
    let (mut a, mut b, mut c) = seen
        .windows(3)
        .filter_map(|w| match (w[0], w[1], w[2]) {
            (Some(a), Some(b), Some(c)) if b.1.abs() < a.1.abs() && b.1.abs() < c.1.abs() => Some((a, b, c)),
            _ => None,
        })
        .min_by(|x, y| x.1 .1.abs().total_cmp(&y.1 .1.abs()))?;
    let sign = b.1.signum();
    let g = |p: (f64, f64)| sign * p.1;
    for _ in 0..max_steps {
        let (ga, gb, gc) = (g(a), g(b), g(c));
        let num = (b.0 - a.0).powi(2) * (gb - gc) - (b.0 - c.0).powi(2) * (gb - ga);
        let den = (b.0 - a.0) * (gb - gc) - (b.0 - c.0) * (gb - ga);
        let mut x = if den != 0.0 { b.0 - 0.5 * num / den } else { f64::NAN };
        if !(x > a.0 && x < c.0) || x == b.0 {
            // Golden-section step into the larger side.
            x = if c.0 - b.0 > b.0 - a.0 { b.0 + 0.381_966 * (c.0 - b.0) } else { b.0 - 0.381_966 * (b.0 - a.0) };
        }
        let (fx, e) = obj.evaluate(ev, x)?;
        let p = (x, fx);
        if sign * fx < 0.0 {
            let outer = if x < b.0 { a } else { c };
            let end = bracketed_secant(|y| obj.evaluate(ev, y), p, outer, tol, max_steps);
            return match end {
                SecantEnd::Root { x, eval, steps, slope } => Some(Refined::at(x, eval, steps, Some(slope))),
                _ => None,
            };
        }
        let step = (x - b.0).abs();
        if g(p) < g(b) {
            if x < b.0 {
                c = b;
            } else {
                a = b;
            }
            b = p;
        } else if x < b.0 {
            a = p;
        } else {
            c = p;
        }
        if g(b) <= tol && step <= 1e-7 * b.0.abs().max(1.0) {
            let value = b.0;
            let e = if value == x { e } else { obj.evaluate(ev, value)?.1 };
            return Some(Refined::at(value, e, 0, Some(0.0)));
        }
    }
    None
}

fn validate_inputs(cfg: &SearchConfig, inner: &InnerConfig) -> Result<(), SolveError> {
    cfg.validate()?;
    inner.validate()
}

fn default_start(problem: &EigenProblem, cfg: &SearchConfig) -> ComplexVector {
    seeded_vector(problem.dim(), cfg.start_seed)
}

/// Inner solves along `ε = m·e^{i·phase}` for `m` on `lo, lo + step, … ≤ hi`,
/// each warm-started from the previous converged point.
pub fn scan_magnitude(
    problem: &EigenProblem,
    phase_eps: f64,
    (lo, hi): (f64, f64),
    step: f64,
    inner: &InnerConfig,
) -> Result<ScanCurve, SolveError> {
    if !(lo < hi && step > 0.0 && lo >= 0.0) {
        return Err(SolveError::InvalidConfig(format!("bad magnitude grid [{lo}, {hi}] step {step}")));
    }
    inner.validate()?;
    let cfg = SearchConfig::default();
    scan_grid(problem, &cfg, inner, grid(lo, hi, step).into_iter().map(|m| Complex64::from_polar(m, phase_eps)))
}

/// Inner solves on the circle `|ε| = eps_mag` for phases `lo, lo + step, … ≤ hi`.
pub fn scan_phase(
    problem: &EigenProblem,
    eps_mag: f64,
    (lo, hi): (f64, f64),
    step: f64,
    inner: &InnerConfig,
) -> Result<ScanCurve, SolveError> {
    if !(lo < hi && step > 0.0 && eps_mag > 0.0) {
        return Err(SolveError::InvalidConfig(format!("bad phase grid [{lo}, {hi}] step {step}")));
    }
    inner.validate()?;
    let cfg = SearchConfig::default();
    scan_grid(problem, &cfg, inner, grid(lo, hi, step).into_iter().map(|p| Complex64::from_polar(eps_mag, p)))
}

/// Grid samples that needed the singular nudge are reported as not converged
/// at their nominal grid point.
fn scan_grid(
    problem: &EigenProblem,
    cfg: &SearchConfig,
    inner: &InnerConfig,
    points: impl Iterator<Item = Complex64>,
) -> Result<ScanCurve, SolveError> {
    let mut hook = NoHook;
    let mut ev = Evaluator::new(problem, inner, cfg.singular_nudge, default_start(problem, cfg), &mut hook);
    let mut samples = Vec::new();
    for eps in points {
        let sample = match ev.eval(eps) {
            Some(e) => ScanSample {
                eps: grid_polar(eps),
                lambda: to_polar(e.lambda),
                inner_iterations: ev.trace.last().map_or(0, |s| s.inner_iterations),
                converged: e.converged && !e.nudged,
            },
            None => ScanSample {
                eps: grid_polar(eps),
                lambda: PolarScalar::new(f64::NAN, f64::NAN),
                inner_iterations: 0,
                converged: false,
            },
        };
        samples.push(sample);
    }
    Ok(ScanCurve { samples })
}

/// Polar form of a grid point, keeping the requested phase even at |ε| = 0.
fn grid_polar(eps: Complex64) -> PolarScalar {
    to_polar(eps)
}

/// Refines |ε| on the ray `φ(ε) = phase_eps` so that `|λ(ε)| = λ_ex`, scanning
/// the bracket in 16 steps for a sign change first.
pub fn refine_magnitude(
    problem: &EigenProblem,
    phase_eps: f64,
    (m1, m2): (f64, f64),
    cfg: &SearchConfig,
    inner: &InnerConfig,
) -> Result<Refined, SolveError> {
    validate_inputs(cfg, inner)?;
    if !(m2 > m1 && m1 >= 0.0) {
        return Err(SolveError::InvalidConfig(format!("bad magnitude bracket [{m1}, {m2}]")));
    }
    let mut hook = NoHook;
    let mut ev = Evaluator::new(problem, inner, cfg.singular_nudge, default_start(problem, cfg), &mut hook);
    let obj = Objective { coordinate: Coordinate::Magnitude, fixed: phase_eps, lambda_ex: problem.lambda_ex() };
    let points = grid(m1, m2, (m2 - m1) / 16.0);
    refine(&mut ev, &obj, BracketOrder::Ascending(points), 0.25 * cfg.tol_mag, cfg, &mut Vec::new())
}

/// Refines φ(ε) on the circle `|ε| = eps_mag` so that `φ(λ(ε)) = 0`.
pub fn refine_phase(
    problem: &EigenProblem,
    eps_mag: f64,
    (p1, p2): (f64, f64),
    cfg: &SearchConfig,
    inner: &InnerConfig,
) -> Result<Refined, SolveError> {
    validate_inputs(cfg, inner)?;
    if !(p2 > p1 && eps_mag > 0.0) {
        return Err(SolveError::InvalidConfig(format!("bad phase bracket [{p1}, {p2}]")));
    }
    let mut hook = NoHook;
    let mut ev = Evaluator::new(problem, inner, cfg.singular_nudge, default_start(problem, cfg), &mut hook);
    let obj = Objective { coordinate: Coordinate::Phase, fixed: eps_mag, lambda_ex: problem.lambda_ex() };
    let n = ((p2 - p1) / cfg.phase_step).ceil().max(2.0);
    let points = grid(p1, p2, (p2 - p1) / n);
    let mut out = refine(&mut ev, &obj, BracketOrder::Ascending(points), 0.25 * cfg.tol_phase, cfg, &mut Vec::new())?;
    out.value = wrap_phase(out.value);
    Ok(out)
}

/// Scan-ray phases tried in order: the configured start, its opposite, the
/// two perpendiculars, then the diagonals.
fn ray_phases(cfg: &SearchConfig) -> Vec<f64> {
    [0.0, PI, FRAC_PI_2, -FRAC_PI_2, FRAC_PI_4, -3.0 * FRAC_PI_4, 3.0 * FRAC_PI_4, -FRAC_PI_4]
        .iter()
        .take(cfg.scan_rays)
        .map(|d| wrap_phase(cfg.phase_start + d))
        .collect()
}

/// Ray batches: the base rays, then (only with the full base set) rays at
/// the angular midpoints of the previous batches, doubling the count until
/// `max_scan_rays`. A small |λ| = λ_ex contour can sit between base rays.
fn ray_batches(cfg: &SearchConfig) -> Vec<Vec<f64>> {
    let mut batches = vec![ray_phases(cfg)];
    if cfg.scan_rays < 8 {
        return batches;
    }
    let mut total = 8;
    while total * 2 <= cfg.max_scan_rays {
        let spacing = 2.0 * PI / total as f64;
        batches.push((0..total).map(|j| wrap_phase(cfg.phase_start + (j as f64 + 0.5) * spacing)).collect());
        total *= 2;
    }
    batches
}

/// Solves for the ε at which the fixed-point coupling equals `λ_ex`.
pub fn solve_ground(
    problem: &EigenProblem,
    cfg: &SearchConfig,
    inner: &InnerConfig,
) -> Result<SolveReport, SolveError> {
    solve_ground_with(problem, cfg, inner, &mut NoHook, None)
}

struct State {
    magnitude: f64,
    phase: f64,
    eval: Eval,
}

enum Attempt {
    Converged(State),
    Failed(Option<State>),
}

/// Search with an iterate hook (used by deflation) and an optional start vector.
pub(crate) fn solve_ground_with(
    problem: &EigenProblem,
    cfg: &SearchConfig,
    inner: &InnerConfig,
    hook: &mut dyn IterateHook,
    u0: Option<ComplexVector>,
) -> Result<SolveReport, SolveError> {
    validate_inputs(cfg, inner)?;
    let window = ScanWindow::resolve(problem, cfg)?;
    let lambda_ex = problem.lambda_ex();
    let u0 = u0.unwrap_or_else(|| default_start(problem, cfg));
    let mut ev = Evaluator::new(problem, inner, cfg.singular_nudge, u0.clone(), hook);
    let mut diag = Diagnostics::default();
    let mut cycles = 0usize;
    let mut best: Option<State> = None;
    let mut any_bracket = false;

    let rays = ray_batches(cfg)
        .into_iter()
        .enumerate()
        .flat_map(|(level, batch)| batch.into_iter().map(move |ray| (level, ray)));
    'rays: for (level, ray) in rays {
        // Refined batches only run while nothing has been bracketed.
        if level > 0 && any_bracket {
            break;
        }
        ev.warm = u0.clone();
        let scan_from = ev.trace.len();
        let mut scan: Vec<(f64, Option<(f64, Eval)>)> = Vec::new();
        let obj = Objective { coordinate: Coordinate::Magnitude, fixed: ray, lambda_ex };
        for m in window.grid() {
            scan.push((m, obj.evaluate(&mut ev, m)));
        }
        let scan_curve = ScanCurve { samples: ev.trace[scan_from..].to_vec() };
        let brackets: Vec<_> = scan
            .windows(2)
            .filter_map(|w| match (&w[0], &w[1]) {
                ((ma, Some((fa, ea))), (mb, Some((fb, _)))) if (*fa < 0.0) != (*fb < 0.0) => {
                    Some(((*ma, *fa), (*mb, *fb), ea.u.clone()))
                }
                _ => None,
            })
            .collect();

        for (a, b, warm) in brackets {
            any_bracket = true;
            diag.attempts += 1;
            diag.bracket_scan = scan_curve.clone();
            diag.bracket_ray = ray;
            diag.bracket = Some((a.0, b.0));
            ev.warm = warm;
            match alternate(&mut ev, ray, a, b, window, cfg, &mut cycles, &mut diag) {
                Attempt::Converged(state) => {
                    let state = tighten(&mut ev, state, cfg, &mut diag);
                    return finish_report(&mut ev, state, cycles, diag, true);
                }
                Attempt::Failed(Some(state)) => {
                    if best.as_ref().is_none_or(|b| state.eval.error(lambda_ex) < b.eval.error(lambda_ex)) {
                        best = Some(state);
                    }
                }
                Attempt::Failed(None) => {}
            }
            if cycles >= cfg.max_outer_cycles {
                break 'rays;
            }
        }
    }

    if !any_bracket {
        return Err(SolveError::NoBracket);
    }
    let state = match best {
        Some(s) => s,
        None => {
            // Nothing refined; report the closest converged sample seen.
            let eval = ev
                .recent
                .iter()
                .min_by(|a, b| a.error(lambda_ex).total_cmp(&b.error(lambda_ex)))
                .cloned()
                .ok_or(SolveError::NoBracket)?;
            let p = to_polar(eval.eps);
            State { magnitude: p.magnitude, phase: p.phase, eval }
        }
    };
    diag.warnings.push("outer search did not meet the magnitude and phase tolerances".into());
    finish_report(&mut ev, state, cycles, diag, false)
}

fn finish_report(
    ev: &mut Evaluator<'_>,
    state: State,
    cycles: usize,
    diagnostics: Diagnostics,
    met: bool,
) -> Result<SolveReport, SolveError> {
    let problem = ev.problem;
    let eps = state.eval.eps;
    let u = state.eval.u;
    let res = make_resolvent(problem.t(), eps)?;
    let lambda_achieved = lambda_of(&res, problem.v(), problem.reference(), &u)?;
    let residual = eigen_residual(problem.t(), problem.v(), Complex64::new(problem.lambda_ex(), 0.0), eps, &u)?
        .norm_inf()
        / u.norm_inf();
    let residual_ok = residual <= RESIDUAL_BOUND * problem.t().norm_inf().max(f64::MIN_POSITIVE);
    let mut diagnostics = diagnostics;
    if met && !residual_ok {
        diagnostics.warnings.push(format!("residual {residual:e} exceeds the bound"));
    }
    Ok(SolveReport {
        epsilon: eps,
        u,
        lambda_achieved,
        residual,
        outer_cycles: cycles,
        trace: ScanCurve { samples: std::mem::take(&mut ev.trace) },
        converged: met && residual_ok,
        diagnostics,
    })
}

fn solved(e: &Eval, lambda_ex: f64, cfg: &SearchConfig) -> bool {
    e.converged && e.mag_residual(lambda_ex).abs() <= cfg.tol_mag && e.phase_residual().abs() <= cfg.tol_phase
}

/// Complex secant on `λ(ε) − λ_ex` from the two best recent samples.
fn polish(ev: &mut Evaluator<'_>, cfg: &SearchConfig, diag: &mut Diagnostics) -> Option<Eval> {
    let lambda_ex = ev.problem.lambda_ex();
    let mut pool: Vec<Eval> = ev.recent.iter().cloned().collect();
    pool.sort_by(|a, b| a.error(lambda_ex).total_cmp(&b.error(lambda_ex)));
    let mut e1 = pool.first()?.clone();
    let mut e0 = pool.iter().skip(1).find(|e| (e.eps - e1.eps).norm() > 0.0)?.clone();
    let target = Complex64::new(lambda_ex, 0.0);
    for _ in 0..12 {
        let dl = e1.lambda - e0.lambda;
        if dl.norm() == 0.0 {
            return None;
        }
        let next = e1.eps - (e1.lambda - target) * (e1.eps - e0.eps) / dl;
        diag.polish_steps += 1;
        let e2 = ev.eval(next)?;
        if !e2.converged {
            return None;
        }
        if solved(&e2, lambda_ex, cfg) {
            return Some(e2);
        }
        if e2.error(lambda_ex) > 2.0 * e1.error(lambda_ex) {
            return None;
        }
        e0 = e1;
        e1 = e2;
    }
    None
}

/// Extra complex secant steps after the tolerances are met, each kept only
/// if it at least halves `|λ/λ_ex − 1|`. Meeting the λ tolerance pins ε only
/// to about `tol·|dε/dλ|·λ_ex`; these steps take it to the inner-loop floor.
fn tighten(ev: &mut Evaluator<'_>, state: State, cfg: &SearchConfig, diag: &mut Diagnostics) -> State {
    let lambda_ex = ev.problem.lambda_ex();
    let target = Complex64::new(lambda_ex, 0.0);
    let mut best = state.eval.clone();
    let Some(mut prev) = ev
        .recent
        .iter()
        .filter(|e| (e.eps - best.eps).norm() > 0.0)
        .min_by(|a, b| a.error(lambda_ex).total_cmp(&b.error(lambda_ex)))
        .cloned()
    else {
        return state;
    };
    for _ in 0..6 {
        if best.error(lambda_ex) <= 4.0 * f64::EPSILON {
            break;
        }
        let dl = best.lambda - prev.lambda;
        if dl.norm() == 0.0 {
            break;
        }
        let next = best.eps - (best.lambda - target) * (best.eps - prev.eps) / dl;
        diag.polish_steps += 1;
        let Some(e) = ev.eval(next) else { break };
        if !(e.converged && solved(&e, lambda_ex, cfg) && e.error(lambda_ex) <= 0.5 * best.error(lambda_ex)) {
            break;
        }
        prev = std::mem::replace(&mut best, e);
    }
    polished_state(best)
}

fn state_of(refined: Refined, magnitude: f64, phase: f64) -> State {
    State {
        magnitude,
        phase,
        eval: Eval { eps: refined.epsilon, lambda: refined.lambda, u: refined.u, converged: true, nudged: false },
    }
}

fn polished_state(e: Eval) -> State {
    let p = to_polar(e.eps);
    State { magnitude: p.magnitude, phase: p.phase, eval: e }
}

/// Alternating magnitude / phase refinement starting from a scan bracket.
#[allow(clippy::too_many_arguments)]
fn alternate(
    ev: &mut Evaluator<'_>,
    ray: f64,
    a: (f64, f64),
    b: (f64, f64),
    window: ScanWindow,
    cfg: &SearchConfig,
    cycles: &mut usize,
    diag: &mut Diagnostics,
) -> Attempt {
    let lambda_ex = ev.problem.lambda_ex();
    let mag_tol = 0.25 * cfg.tol_mag;
    let phase_tol = 0.25 * cfg.tol_phase;
    let mut state: Option<State> = None;
    let mut prev_error = f64::INFINITY;
    let mut stalls = 0;
    let (mut mag_slope, mut phase_slope) = (None, None);

    loop {
        if *cycles >= cfg.max_outer_cycles {
            return Attempt::Failed(state);
        }
        *cycles += 1;

        // |ε| at fixed φ(ε).
        let (phase, mag_order) = match &state {
            None => (ray, BracketOrder::Ascending(vec![a.0, b.0])),
            Some(s) => (
                s.phase,
                BracketOrder::Outward {
                    center: s.magnitude,
                    slope: mag_slope,
                    step: window.step,
                    lo: (s.magnitude - LOCAL_STEPS * window.step).max(0.25 * window.start),
                    hi: (s.magnitude + LOCAL_STEPS * window.step).min(2.0 * window.stop),
                },
            ),
        };
        let obj = Objective { coordinate: Coordinate::Magnitude, fixed: phase, lambda_ex };
        match refine(ev, &obj, mag_order, mag_tol, cfg, &mut diag.refinements) {
            Ok(r) => {
                let m = r.value;
                mag_slope = r.slope.or(mag_slope);
                state = Some(state_of(r, m, phase));
            }
            Err(_) => return rescue(ev, cfg, diag, state),
        }
        let s = state.as_ref().expect("set above");
        if solved(&s.eval, lambda_ex, cfg) {
            return Attempt::Converged(state.expect("set above"));
        }

        // φ(ε) at fixed |ε|: half-turn window first, then the full circle.
        let magnitude = s.magnitude;
        let center = s.phase;
        let obj = Objective { coordinate: Coordinate::Phase, fixed: magnitude, lambda_ex };
        let mut refined = None;
        for half_width in [FRAC_PI_2, PI] {
            let order = BracketOrder::Outward {
                center,
                slope: phase_slope,
                step: cfg.phase_step,
                lo: center - half_width,
                hi: center + half_width,
            };
            if let Ok(r) = refine(ev, &obj, order, phase_tol, cfg, &mut diag.refinements) {
                refined = Some(r);
                break;
            }
        }
        match refined {
            Some(r) => {
                let p = wrap_phase(r.value);
                phase_slope = r.slope.or(phase_slope);
                state = Some(state_of(r, magnitude, p));
            }
            None => return rescue(ev, cfg, diag, state),
        }
        let s = state.as_ref().expect("set above");
        if solved(&s.eval, lambda_ex, cfg) {
            return Attempt::Converged(state.expect("set above"));
        }

        let error = s.eval.error(lambda_ex);
        if error > 0.5 * prev_error {
            stalls += 1;
            if let Some(e) = polish(ev, cfg, diag) {
                return Attempt::Converged(polished_state(e));
            }
            if stalls >= 3 {
                return Attempt::Failed(state);
            }
        }
        prev_error = prev_error.min(error);
    }
}

fn rescue(ev: &mut Evaluator<'_>, cfg: &SearchConfig, diag: &mut Diagnostics, state: Option<State>) -> Attempt {
    match polish(ev, cfg, diag) {
        Some(e) => Attempt::Converged(polished_state(e)),
        None => Attempt::Failed(state),
    }
}
