//! Gram systems, BQ weights and posterior variance.

use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{BqError, Result};
use crate::kernels::{Kernel, KernelConfig};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::measures::{Measure, MeasureConfig};
use crate::oracle::{self, OracleOptions};
use crate::scalar::Real;

/// Variances in `[-VARIANCE_CLAMP, 0)` are treated as round-off and clamped.
pub const VARIANCE_CLAMP: f64 = 1e-10;

/// Default Gram jitter used while optimising designs.
pub const OPTIMIZATION_JITTER: f64 = 1e-6;

/// `[K]_{ij} = k(x_j, x_i) + jitter * delta_ij`. Fails if the result is not
/// numerically positive definite.
pub fn assemble_gram<T: Real>(kernel: &Kernel<T>, design: &Design<T>, jitter: T) -> Result<Matrix<T>> {
    let gram = raw_gram(kernel, design, jitter)?;
    if Cholesky::factor(&gram).is_none() {
        return Err(BqError::Factorization { n: design.len(), jitter: jitter.as_f64() });
    }
    Ok(gram)
}

fn raw_gram<T: Real>(kernel: &Kernel<T>, design: &Design<T>, jitter: T) -> Result<Matrix<T>> {
    if design.dim() != kernel.dim() {
        return Err(BqError::DimensionMismatch { expected: kernel.dim(), found: design.dim() });
    }
    if jitter < T::zero() {
        return Err(BqError::InvalidParameter("jitter must be non-negative".into()));
    }
    let n = design.len();
    let mut gram = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(design.point(j), design.point(i))?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    gram.add_diagonal(jitter);
    Ok(gram)
}

/// Factorised Gram matrix of a design, reusable for many right-hand sides.
#[derive(Clone, Debug)]
pub struct GramSystem<T> {
    kernel: Kernel<T>,
    design: Design<T>,
    jitter: T,
    chol: Cholesky<T>,
}

impl<T: Real> GramSystem<T> {
    pub fn new(kernel: &Kernel<T>, design: &Design<T>, jitter: T) -> Result<Self> {
        let gram = raw_gram(kernel, design, jitter)?;
        let chol =
            Cholesky::factor(&gram).ok_or(BqError::Factorization { n: design.len(), jitter: jitter.as_f64() })?;
        Ok(GramSystem { kernel: kernel.clone(), design: design.clone(), jitter, chol })
    }

    pub fn design(&self) -> &Design<T> {
        &self.design
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn cholesky(&self) -> &Cholesky<T> {
        &self.chol
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.chol.solve(b)
    }

    /// `k_X(x) = (k(x, x_i))_i`.
    pub fn kernel_vector(&self, x: &[T]) -> Result<Vec<T>> {
        self.design.points().map(|p| self.kernel.eval(x, p)).collect()
    }

    /// Lagrange cardinal functions `u_X(x) = K^{-1} k_X(x)`.
    pub fn cardinal(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.solve(&self.kernel_vector(x)?))
    }

    /// `k_X(x)^T K^{-1} f_X`.
    pub fn posterior_mean(&self, values: &[T], x: &[T]) -> Result<T> {
        if values.len() != self.design.len() {
            return Err(BqError::DimensionMismatch { expected: self.design.len(), found: values.len() });
        }
        Ok(dot(&self.cardinal(x)?, values))
    }

    /// `b^T K^{-1} b` via the forward solve.
    pub fn quadratic_form(&self, b: &[T]) -> T {
        let v = self.chol.forward(b);
        dot(&v, &v)
    }
}

pub fn posterior_mean<T: Real>(kernel: &Kernel<T>, design: &Design<T>, values: &[T], x: &[T], jitter: T) -> Result<T> {
    GramSystem::new(kernel, design, jitter)?.posterior_mean(values, x)
}

pub fn cardinal_functions<T: Real>(kernel: &Kernel<T>, design: &Design<T>, x: &[T], jitter: T) -> Result<Vec<T>> {
    GramSystem::new(kernel, design, jitter)?.cardinal(x)
}

/// Clamps round-off negatives; returns the value and whether it was clamped.
pub fn clamp_variance<T: Real>(v: T) -> Result<(T, bool)> {
    if v >= T::zero() {
        Ok((v, false))
    } else if v >= -T::lit(VARIANCE_CLAMP) {
        Ok((T::zero(), true))
    } else {
        Err(BqError::NegativeVariance(v.as_f64()))
    }
}

/// BQ weights with their posterior variance and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T> {
    pub design: Design<T>,
    pub weights: Vec<T>,
    pub variance: T,
    /// Set when a round-off negative variance was clamped to zero.
    pub variance_clamped: bool,
    pub jitter: T,
    pub kernel: KernelConfig,
    pub measure: MeasureConfig,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight_sum(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Applies the rule to integrand values at the design points.
    pub fn apply(&self, values: &[T]) -> T {
        dot(&self.weights, values)
    }

    pub fn to_record(&self) -> RuleRecord {
        RuleRecord {
            points: self.design.to_rows(),
            weights: self.weights.iter().map(|w| w.as_f64()).collect(),
            variance: self.variance.as_f64(),
            jitter: self.jitter.as_f64(),
            kernel: self.kernel.clone(),
            measure: self.measure.clone(),
        }
    }
}

/// Serialised quadrature rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub variance: f64,
    pub jitter: f64,
    pub kernel: KernelConfig,
    pub measure: MeasureConfig,
}

/// Worst-case error with a flag for clamped round-off.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorstCaseError<T> {
    pub value: T,
    pub clamped: bool,
}

/// A kernel paired with an integration measure.
///
/// Kernel means come from closed forms. Pairs without one are rejected
/// unless the problem was built with [`BqProblem::with_oracle`], which
/// integrates numerically instead.
#[derive(Clone, Debug)]
pub struct BqProblem<T> {
    kernel: Kernel<T>,
    measure: Measure<T>,
    oracle: Option<OracleOptions>,
    initial_variance: T,
}

impl<T: Real> BqProblem<T> {
    pub fn new(kernel: Kernel<T>, measure: Measure<T>) -> Result<Self> {
        let initial_variance = kernel.initial_variance(&measure)?;
        Ok(BqProblem { kernel, measure, oracle: None, initial_variance })
    }

    /// Uses closed forms where available and the numerical oracle otherwise.
    pub fn with_oracle(kernel: Kernel<T>, measure: Measure<T>, opts: OracleOptions) -> Result<Self> {
        let initial_variance = match kernel.initial_variance(&measure) {
            Ok(v) => v,
            Err(BqError::UnsupportedPair { .. }) => oracle::initial_variance(&kernel, &measure, &opts)?.value,
            Err(e) => return Err(e),
        };
        Ok(BqProblem { kernel, measure, oracle: Some(opts), initial_variance })
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn measure(&self) -> &Measure<T> {
        &self.measure
    }

    pub fn oracle_enabled(&self) -> bool {
        self.oracle.is_some()
    }

    /// `\int\int k dnu dnu`.
    pub fn initial_variance(&self) -> T {
        self.initial_variance
    }

    pub fn kernel_mean(&self, x: &[T]) -> Result<T> {
        match (self.kernel.kernel_mean(&self.measure, x), &self.oracle) {
            (Err(BqError::UnsupportedPair { .. }), Some(opts)) => {
                Ok(oracle::kernel_mean(&self.kernel, &self.measure, x, opts)?.value)
            }
            (r, _) => r,
        }
    }

    pub fn kernel_mean_grad(&self, x: &[T]) -> Result<Vec<T>> {
        match (self.kernel.kernel_mean_grad(&self.measure, x), &self.oracle) {
            (Err(BqError::UnsupportedPair { .. }), Some(opts)) => {
                Ok(oracle::kernel_mean_grad(&self.kernel, &self.measure, x, opts)?
                    .into_iter()
                    .map(|e| e.value)
                    .collect())
            }
            (r, _) => r,
        }
    }

    /// `k_{nu,X} = (k_nu(x_i))_i`.
    pub fn kernel_mean_vector(&self, design: &Design<T>) -> Result<Vec<T>> {
        design.points().map(|p| self.kernel_mean(p)).collect()
    }

    fn check_design(&self, design: &Design<T>) -> Result<()> {
        if design.dim() != self.kernel.dim() {
            return Err(BqError::DimensionMismatch { expected: self.kernel.dim(), found: design.dim() });
        }
        if design.is_empty() {
            return Err(BqError::InvalidDesign("no points".into()));
        }
        Ok(())
    }

    /// Weights and the unclamped variance `I - z^T (K + jI)^{-1} z`.
    pub fn solve(&self, design: &Design<T>, jitter: T) -> Result<(Vec<T>, T)> {
        self.check_design(design)?;
        let system = GramSystem::new(&self.kernel, design, jitter)?;
        let z = self.kernel_mean_vector(design)?;
        let v = system.cholesky().forward(&z);
        let weights = system.cholesky().backward(&v);
        Ok((weights, self.initial_variance - dot(&v, &v)))
    }

    /// Weights only; skips the variance sanity check. Use for positivity
    /// studies on badly conditioned designs.
    pub fn weights(&self, design: &Design<T>, jitter: T) -> Result<Vec<T>> {
        Ok(self.solve(design, jitter)?.0)
    }

    /// Posterior variance, clamped as in [`clamp_variance`].
    pub fn variance(&self, design: &Design<T>, jitter: T) -> Result<T> {
        if design.is_empty() {
            return Ok(self.initial_variance);
        }
        Ok(clamp_variance(self.solve(design, jitter)?.1)?.0)
    }

    /// Full quadrature rule.
    pub fn rule(&self, design: &Design<T>, jitter: T) -> Result<QuadratureRule<T>> {
        let (weights, raw) = self.solve(design, jitter)?;
        let (variance, variance_clamped) = clamp_variance(raw)?;
        Ok(QuadratureRule {
            design: design.clone(),
            weights,
            variance,
            variance_clamped,
            jitter,
            kernel: self.kernel.to_config(),
            measure: self.measure.to_config(),
        })
    }

    /// `sqrt(I - 2 w^T z + w^T K w)` for arbitrary weights.
    pub fn worst_case_error(&self, design: &Design<T>, weights: &[T]) -> Result<WorstCaseError<T>> {
        self.check_design(design)?;
        if weights.len() != design.len() {
            return Err(BqError::DimensionMismatch { expected: design.len(), found: weights.len() });
        }
        let gram = raw_gram(&self.kernel, design, T::zero())?;
        let z = self.kernel_mean_vector(design)?;
        let two = T::lit(2.0);
        let e2 = self.initial_variance - two * dot(weights, &z) + dot(weights, &gram.mul_vec(weights));
        let (e2, clamped) = clamp_variance(e2)?;
        Ok(WorstCaseError { value: e2.sqrt(), clamped })
    }

    /// `r_j = sum_i w_i k(x_j, x_i) - k_nu(x_j)`.
    pub fn exactness_residual(&self, rule: &QuadratureRule<T>) -> Result<Vec<T>> {
        let gram = raw_gram(&self.kernel, &rule.design, T::zero())?;
        let z = self.kernel_mean_vector(&rule.design)?;
        Ok(gram.mul_vec(&rule.weights).into_iter().zip(z).map(|(a, b)| a - b).collect())
    }
}

/// Product-rule weights on the tensor grid `X_1^d`. Index tuples
/// `(i_1, ..., i_d)` are ordered lexicographically with `i_1` slowest.
pub fn tensor_product_weights<T: Real>(w1: &[T], d: usize) -> Vec<T> {
    let mut out = vec![T::one()];
    for _ in 0..d {
        out = out.iter().flat_map(|&acc| w1.iter().map(move |&w| acc * w)).collect();
    }
    out
}

/// Tensor grid `X_1^d` in the ordering of [`tensor_product_weights`].
pub fn tensor_grid<T: Real>(nodes: &[T], d: usize) -> Result<Design<T>> {
    let mut points: Vec<Vec<T>> = vec![Vec::new()];
    for _ in 0..d {
        points = points
            .iter()
            .flat_map(|p| {
                nodes.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    Design::new(points)
}
