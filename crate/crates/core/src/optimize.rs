//! Analytic variance gradients and design optimisation.
//!
//! The posterior variance `V(X) = I - z^T K^{-1} z` has partial derivatives
//!
//! ```text
//! dV/dx_{i,c} = 2 w_i r_{i,c},   r_{i,c} = sum_l w_l d/dz_c k(x_l, z)|_{z = x_i} - d/dx_c k_nu(x_i)
//! ```
//!
//! where `r_{i,c}` is the residual of the rule on the derivative translate at
//! `x_i`. The same expression holds with a jittered Gram matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bq::{BqProblem, GramSystem, QuadratureRule, OPTIMIZATION_JITTER};
use crate::design::Design;
use crate::error::{BqError, Result};
use crate::geometry::separation_radius;
use crate::linalg::dot;
use crate::measures::Measure;
use crate::scalar::Real;

/// `n x d` matrix of `dV/dx_{i,c}` and its largest magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport<T> {
    pub gradient: Vec<Vec<T>>,
    pub max_abs: T,
}

impl<T: Real> GradientReport<T> {
    fn from_rows(gradient: Vec<Vec<T>>) -> Self {
        let max_abs = gradient.iter().flatten().fold(T::zero(), |m, g| m.max(g.abs()));
        GradientReport { gradient, max_abs }
    }

    fn flat(&self) -> Vec<T> {
        self.gradient.concat()
    }
}

/// Variance, weights and per-point data shared by the gradient routines.
struct Evaluation<T> {
    variance: T,
    weights: Vec<T>,
    /// `r_{i,c}` from the module docs.
    residual: Vec<Vec<T>>,
}

fn evaluate<T: Real>(problem: &BqProblem<T>, design: &Design<T>, jitter: T) -> Result<Evaluation<T>> {
    let kernel = problem.kernel();
    if !kernel.is_differentiable() {
        return Err(BqError::NotDifferentiable {
            kernel: kernel.label(),
            reason: "variance gradient needs kernel derivatives".into(),
        });
    }
    if design.is_empty() {
        return Err(BqError::InvalidDesign("no points".into()));
    }
    let system = GramSystem::new(kernel, design, jitter)?;
    let z = problem.kernel_mean_vector(design)?;
    let v = system.cholesky().forward(&z);
    let weights = system.cholesky().backward(&v);
    let variance = problem.initial_variance() - dot(&v, &v);
    let residual = derivative_residual(problem, design, &weights)?;
    Ok(Evaluation { variance, weights, residual })
}

/// Residuals `sum_l w_l k^{(1)}_{x_i}(x_l) - I_nu(k^{(1)}_{x_i})` of a rule on
/// the derivative translates at its own nodes, one row per node.
pub fn derivative_residual<T: Real>(problem: &BqProblem<T>, design: &Design<T>, weights: &[T]) -> Result<Vec<Vec<T>>> {
    let kernel = problem.kernel();
    if weights.len() != design.len() {
        return Err(BqError::DimensionMismatch { expected: design.len(), found: weights.len() });
    }
    let d = design.dim();
    design
        .points()
        .enumerate()
        .map(|(i, xi)| {
            let grad_mean = problem.kernel_mean_grad(xi)?;
            (0..d)
                .map(|c| {
                    let mut s = T::zero();
                    for (l, xl) in design.points().enumerate() {
                        // Stationary kernels are flat at zero lag, and the
                        // Matérn-1/2 derivative is undefined there.
                        if l == i && kernel.is_stationary() {
                            continue;
                        }
                        s += weights[l] * kernel.eval_dy(xl, xi, c)?;
                    }
                    Ok(s - grad_mean[c])
                })
                .collect()
        })
        .collect()
}

/// `dV/dx_{i,c}` for every point and coordinate.
pub fn variance_gradient<T: Real>(problem: &BqProblem<T>, design: &Design<T>, jitter: T) -> Result<GradientReport<T>> {
    let e = evaluate(problem, design, jitter)?;
    Ok(gradient_from(&e))
}

fn gradient_from<T: Real>(e: &Evaluation<T>) -> GradientReport<T> {
    let two = T::lit(2.0);
    GradientReport::from_rows(
        e.residual.iter().zip(&e.weights).map(|(row, &w)| row.iter().map(|&r| two * w * r).collect()).collect(),
    )
}

/// Variance and its gradient from one factorisation.
pub fn variance_with_gradient<T: Real>(
    problem: &BqProblem<T>,
    design: &Design<T>,
    jitter: T,
) -> Result<(T, GradientReport<T>)> {
    let e = evaluate(problem, design, jitter)?;
    Ok((e.variance, gradient_from(&e)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsSettings {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once `max |g_k| <= gradient_tolerance`.
    pub gradient_tolerance: f64,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        LbfgsSettings { memory: 10, max_iterations: 1000, gradient_tolerance: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsOutcome<T> {
    pub x: Vec<T>,
    pub value: T,
    pub gradient: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Limited-memory BFGS with backtracking Armijo line search.
///
/// `objective` returns `None` where the function is undefined (the line
/// search then backtracks). Near convergence the objective is dominated by
/// round-off, so a step that fails Armijo by less than that noise floor is
/// still accepted when it reduces the gradient.
pub fn minimize_lbfgs<T: Real>(
    x0: Vec<T>,
    mut objective: impl FnMut(&[T]) -> Option<(T, Vec<T>)>,
    settings: &LbfgsSettings,
) -> Option<LbfgsOutcome<T>> {
    let (mut f, mut g) = objective(&x0)?;
    let mut x = x0;
    let mut s_hist: Vec<Vec<T>> = Vec::new();
    let mut y_hist: Vec<Vec<T>> = Vec::new();
    let tol = T::lit(settings.gradient_tolerance);
    let c1 = T::lit(1e-4);
    let noise = T::lit(64.0) * T::epsilon();
    let mut stalls = 0;
    for it in 0..settings.max_iterations {
        if max_abs(&g) <= tol {
            return Some(LbfgsOutcome { x, value: f, gradient: g, iterations: it, converged: true });
        }
        let mut d = two_loop(&g, &s_hist, &y_hist);
        let mut slope = dot(&g, &d);
        if !(slope < T::zero()) {
            s_hist.clear();
            y_hist.clear();
            d = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &d);
        }
        if s_hist.is_empty() {
            // Unit-length first step along the steepest direction.
            let scale = T::one() / max_abs(&d).max(T::lit(1e-300));
            let scale = scale.min(T::one());
            d.iter_mut().for_each(|v| *v *= scale);
            slope *= scale;
        }
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + t * di).collect();
            if let Some((ft, gt)) = objective(&trial) {
                let armijo = ft <= f + c1 * t * slope;
                let within_noise = ft - f <= noise * f.abs().max(T::lit(1e-300)) && max_abs(&gt) < max_abs(&g);
                if ft.is_finite() && (armijo || within_noise) {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            t *= T::lit(0.5);
        }
        let Some((xn, fnew, gn)) = accepted else {
            if s_hist.is_empty() {
                stalls += 1;
            }
            s_hist.clear();
            y_hist.clear();
            if stalls >= 2 {
                return Some(LbfgsOutcome { x, value: f, gradient: g, iterations: it, converged: false });
            }
            continue;
        };
        stalls = 0;
        let s: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        if dot(&s, &y) > T::zero() {
            if s_hist.len() == settings.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        x = xn;
        f = fnew;
        g = gn;
    }
    let converged = max_abs(&g) <= tol;
    Some(LbfgsOutcome { x, value: f, gradient: g, iterations: settings.max_iterations, converged })
}

fn two_loop<T: Real>(g: &[T], s_hist: &[Vec<T>], y_hist: &[Vec<T>]) -> Vec<T> {
    let mut q: Vec<T> = g.to_vec();
    let m = s_hist.len();
    let mut alpha = vec![T::zero(); m];
    for k in (0..m).rev() {
        let rho = T::one() / dot(&y_hist[k], &s_hist[k]);
        alpha[k] = rho * dot(&s_hist[k], &q);
        for (qi, yi) in q.iter_mut().zip(&y_hist[k]) {
            *qi -= alpha[k] * *yi;
        }
    }
    if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for k in 0..m {
        let rho = T::one() / dot(&y_hist[k], &s_hist[k]);
        let beta = rho * dot(&y_hist[k], &q);
        for (qi, si) in q.iter_mut().zip(&s_hist[k]) {
            *qi += (alpha[k] - beta) * *si;
        }
    }
    q.iter().map(|&v| -v).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    /// Perturbation standard deviation; `None` means 0.1 times the current
    /// design's separation radius.
    pub perturbation_scale: Option<f64>,
    pub jitter: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 20,
            perturbation_scale: None,
            jitter: OPTIMIZATION_JITTER,
            max_iterations: 2000,
            gradient_tolerance: 1e-8,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BqError::InvalidParameter(m.into()));
        if self.restarts == 0 {
            return bad("restarts must be positive");
        }
        if self.perturbation_scale.is_some_and(|s| !(s > 0.0)) {
            return bad("perturbation scale must be positive");
        }
        if !(self.jitter >= 0.0) {
            return bad("jitter must be non-negative");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.gradient_tolerance > 0.0) {
            return bad("gradient tolerance must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationResult<T> {
    pub design: Design<T>,
    /// Gradient at jitter zero.
    pub gradient: GradientReport<T>,
    /// Rule at jitter zero.
    pub rule: QuadratureRule<T>,
    /// False when the unjittered gradient did not reach the tolerance.
    pub converged: bool,
    /// Jittered variance at each restart's starting design.
    pub start_variances: Vec<T>,
    /// Jittered variance after each restart's local optimisation.
    pub restart_variances: Vec<T>,
}

fn objective<T: Real>(problem: &BqProblem<T>, dim: usize, jitter: T) -> impl Fn(&[T]) -> Option<(T, Vec<T>)> + '_ {
    move |flat: &[T]| {
        let design = Design::from_flat(dim, flat.to_vec()).ok()?;
        let (v, g) = variance_with_gradient(problem, &design, jitter).ok()?;
        v.is_finite().then(|| (v, g.flat()))
    }
}

fn local_minimize<T: Real>(
    problem: &BqProblem<T>,
    start: &Design<T>,
    jitter: T,
    settings: &LbfgsSettings,
) -> Option<(Design<T>, T)> {
    let out = minimize_lbfgs(start.coords().to_vec(), objective(problem, start.dim(), jitter), settings)?;
    Some((Design::from_flat(start.dim(), out.x).ok()?, out.value))
}

/// Finds `n` points locally minimising the posterior variance.
///
/// Starts from a sample of the measure, optimises with the jittered
/// variance, then repeatedly perturbs the best design so far and
/// re-optimises. The winner is polished and certified with the unjittered
/// variance.
pub fn optimize_points<T: Real>(
    problem: &BqProblem<T>,
    n: usize,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult<T>> {
    cfg.validate()?;
    if n == 0 {
        return Err(BqError::InvalidParameter("need at least one point".into()));
    }
    let jitter = T::lit(cfg.jitter);
    let settings = LbfgsSettings {
        max_iterations: cfg.max_iterations,
        gradient_tolerance: cfg.gradient_tolerance * 1e-2,
        ..LbfgsSettings::default()
    };
    let start = problem.measure().sample(n, cfg.seed)?;
    let mut start_variances = vec![problem.variance(&start, jitter)?];
    let (mut best, mut best_v) =
        local_minimize(problem, &start, jitter, &settings).ok_or(BqError::Factorization { n, jitter: cfg.jitter })?;
    let mut restart_variances = vec![best_v];
    for r in 1..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r as u64);
        let scale = match cfg.perturbation_scale {
            Some(s) => T::lit(s),
            None if n >= 2 => T::lit(0.1) * separation_radius(&best)?,
            None => T::lit(0.1),
        };
        let Some(perturbed) = perturb(&best, scale, &mut rng) else { continue };
        let Ok(v0) = problem.variance(&perturbed, jitter) else { continue };
        start_variances.push(v0);
        if let Some((cand, v)) = local_minimize(problem, &perturbed, jitter, &settings) {
            restart_variances.push(v);
            if v < best_v {
                best = cand;
                best_v = v;
            }
        }
    }
    let polish = LbfgsSettings { gradient_tolerance: cfg.gradient_tolerance * 1e-2, ..settings };
    if let Some((polished, _)) = local_minimize(problem, &best, T::zero(), &polish) {
        best = polished;
    }
    let gradient = variance_gradient(problem, &best, T::zero())?;
    let rule = problem.rule(&best, T::zero())?;
    let converged = gradient.max_abs <= T::lit(cfg.gradient_tolerance);
    Ok(OptimizationResult { design: best, gradient, rule, converged, start_variances, restart_variances })
}

fn perturb<T: Real>(design: &Design<T>, scale: T, rng: &mut ChaCha8Rng) -> Option<Design<T>> {
    let coords = design
        .coords()
        .iter()
        .map(|&c| {
            let z: f64 = rng.sample(StandardNormal);
            c + scale * T::lit(z)
        })
        .collect();
    Design::from_flat(design.dim(), coords).ok()
}

/// Default sequential-BQ candidates: a regular grid with 512 nodes in one
/// dimension and 64 per axis in two, over the box of a uniform measure or
/// `[-5, 5]^d` for the standard Gaussian.
pub fn default_candidate_grid<T: Real>(measure: &Measure<T>) -> Result<Design<T>> {
    let d = measure.dim();
    let per_axis = match d {
        1 => 512,
        2 => 64,
        _ => return Err(BqError::InvalidParameter("default candidate grid is defined for d <= 2".into())),
    };
    let (lo, hi): (Vec<T>, Vec<T>) = match measure {
        Measure::StdGaussian { .. } => (vec![T::lit(-5.0); d], vec![T::lit(5.0); d]),
        Measure::UniformBox(b) => (b.lower().to_vec(), b.upper().to_vec()),
    };
    let axis = |j: usize| -> Vec<T> {
        (0..per_axis).map(|i| lo[j] + (hi[j] - lo[j]) * T::from_count(i) / T::from_count(per_axis - 1)).collect()
    };
    let mut points: Vec<Vec<T>> = vec![Vec::new()];
    for j in 0..d {
        let ax = axis(j);
        points = points
            .into_iter()
            .flat_map(|p| {
                ax.iter()
                    .map(|&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    Design::new(points)
}

/// One greedy step `argmin_x V(X + {x})` over the candidate grid, with
/// optional gradient refinement of the chosen point. Ties go to the lowest
/// candidate index.
pub fn sequential_bq<T: Real>(
    problem: &BqProblem<T>,
    design: &Design<T>,
    candidates: &Design<T>,
    refine: bool,
) -> Result<Vec<T>> {
    let kernel = problem.kernel();
    if candidates.is_empty() {
        return Err(BqError::InvalidDesign("empty candidate grid".into()));
    }
    if candidates.dim() != kernel.dim() || design.dim() != kernel.dim() {
        return Err(BqError::DimensionMismatch { expected: kernel.dim(), found: candidates.dim() });
    }
    let system = if design.is_empty() { None } else { Some(GramSystem::new(kernel, design, T::zero())?) };
    let weights = match &system {
        Some(s) => s.solve(&problem.kernel_mean_vector(design)?),
        None => Vec::new(),
    };
    // Candidates whose conditional variance is lost to rounding are skipped.
    let floor = T::lit(64.0) * T::epsilon();
    let mut best: Option<(usize, T)> = None;
    for (idx, c) in candidates.points().enumerate() {
        if design.points().any(|p| p == c) {
            continue;
        }
        // Schur complement of the bordered Gram matrix.
        let kc = kernel.eval(c, c)?;
        let (num, den) = match &system {
            Some(s) => {
                let kx = s.kernel_vector(c)?;
                (problem.kernel_mean(c)? - dot(&kx, &weights), kc - s.quadratic_form(&kx))
            }
            None => (problem.kernel_mean(c)?, kc),
        };
        if !(den > floor * kc) {
            continue;
        }
        let reduction = num.square() / den;
        if best.is_none_or(|(_, r)| reduction > r) {
            best = Some((idx, reduction));
        }
    }
    let (idx, _) =
        best.ok_or_else(|| BqError::InvalidDesign("every candidate coincides with a design point".into()))?;
    let chosen = candidates.point(idx).to_vec();
    if !refine || !kernel.is_differentiable() {
        return Ok(chosen);
    }
    let grid_v = problem.variance(&design.with_point(&chosen)?, T::zero())?;
    let n = design.len();
    let d = design.dim();
    let refine_objective = |p: &[T]| -> Option<(T, Vec<T>)> {
        let x = design.with_point(p).ok()?;
        let (v, g) = variance_with_gradient(problem, &x, T::zero()).ok()?;
        v.is_finite().then(|| (v, g.gradient[n][..d].to_vec()))
    };
    let settings = LbfgsSettings { max_iterations: 200, gradient_tolerance: 1e-12, ..LbfgsSettings::default() };
    match minimize_lbfgs(chosen.clone(), refine_objective, &settings) {
        Some(out) if out.value < grid_v && design.with_point(&out.x).is_ok() => Ok(out.x),
        _ => Ok(chosen),
    }
}

/// Certificate of local optimality for a design.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalityReport<T> {
    /// Indices whose gradient row satisfies `max_c |dV/dx_{i,c}| <= tol`.
    pub certified: Vec<usize>,
    /// Indices with weight below `-ZERO_WEIGHT`; any entry disproves local
    /// optimality for totally positive kernels.
    pub negative_weights: Vec<usize>,
    pub weights: Vec<T>,
    pub gradient: GradientReport<T>,
}

impl<T> OptimalityReport<T> {
    pub fn all_certified(&self) -> bool {
        self.certified.len() == self.weights.len()
    }

    pub fn disproved(&self) -> bool {
        !self.negative_weights.is_empty()
    }
}

/// Unjittered gradient certificate.
pub fn local_optimality_report<T: Real>(
    problem: &BqProblem<T>,
    design: &Design<T>,
    tol: T,
) -> Result<OptimalityReport<T>> {
    let e = evaluate(problem, design, T::zero())?;
    let gradient = gradient_from(&e);
    let certified = gradient
        .gradient
        .iter()
        .enumerate()
        .filter(|(_, row)| row.iter().all(|g| g.abs() <= tol))
        .map(|(i, _)| i)
        .collect();
    let zero = T::lit(crate::diagnostics::ZERO_WEIGHT);
    let negative_weights = e.weights.iter().enumerate().filter(|(_, &w)| w < -zero).map(|(i, _)| i).collect();
    Ok(OptimalityReport { certified, negative_weights, weights: e.weights, gradient })
}
