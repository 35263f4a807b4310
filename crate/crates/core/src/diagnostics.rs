//! Weight diagnostics: positivity counts, stability constant and the
//! a priori weight-sum bound.

use serde::{Deserialize, Serialize};

use crate::bq::BqProblem;
use crate::design::distance;
use crate::error::{BqError, Result};
use crate::measures::BoxDomain;
use crate::scalar::Real;

/// Weights with `|w| <= ZERO_WEIGHT` count as zero.
pub const ZERO_WEIGHT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsReport<T> {
    pub n_positive: usize,
    pub n_negative: usize,
    pub n_zero: usize,
    /// `sum |w_i|`.
    pub stability_constant: T,
    pub weight_sum: T,
    /// `|1 - sum w_i|`.
    pub sum_gap: T,
    pub lemma1_bound: Option<T>,
}

impl<T: Real> DiagnosticsReport<T> {
    pub fn len(&self) -> usize {
        self.n_positive + self.n_negative + self.n_zero
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn proportion_positive(&self) -> f64 {
        self.n_positive as f64 / self.len().max(1) as f64
    }

    pub fn to_record(&self) -> DiagnosticsRecord {
        DiagnosticsRecord {
            n_positive: self.n_positive,
            n_negative: self.n_negative,
            n_zero: self.n_zero,
            stability_constant: self.stability_constant.as_f64(),
            weight_sum: self.weight_sum.as_f64(),
            sum_gap: self.sum_gap.as_f64(),
            lemma1_bound: self.lemma1_bound.map(|b| b.as_f64()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub n_positive: usize,
    pub n_negative: usize,
    pub n_zero: usize,
    pub stability_constant: f64,
    pub weight_sum: f64,
    pub sum_gap: f64,
    pub lemma1_bound: Option<f64>,
}

pub fn analyze_weights<T: Real>(weights: &[T]) -> DiagnosticsReport<T> {
    let zero = T::lit(ZERO_WEIGHT);
    let mut report = DiagnosticsReport {
        n_positive: 0,
        n_negative: 0,
        n_zero: 0,
        stability_constant: T::zero(),
        weight_sum: T::zero(),
        sum_gap: T::zero(),
        lemma1_bound: None,
    };
    for &w in weights {
        if w.abs() <= zero {
            report.n_zero += 1;
        } else if w > T::zero() {
            report.n_positive += 1;
        } else {
            report.n_negative += 1;
        }
        report.stability_constant += w.abs();
        report.weight_sum += w;
    }
    report.sum_gap = (T::one() - report.weight_sum).abs();
    report
}

/// Lower bound on the number of positive weights for a totally positive
/// kernel of order one: `floor((n + 1) / 2)`.
pub fn min_positive_weights(n: usize) -> usize {
    n.div_ceil(2)
}

/// `sup_x k_nu(x) / inf_{x, x'} k(x, x')` over `omega`, an upper bound on the
/// sum of non-negative weights.
///
/// The numerator is maximised over a grid with `resolution` nodes per axis.
/// For stationary kernels the radial profile is decreasing, so the infimum
/// sits at the box diameter and is evaluated exactly; otherwise it is
/// minimised over pairs of nodes of a coarser grid.
pub fn lemma1_bound<T: Real>(problem: &BqProblem<T>, omega: &BoxDomain<T>, resolution: usize) -> Result<T> {
    let kernel = problem.kernel();
    if omega.dim() != kernel.dim() {
        return Err(BqError::DimensionMismatch { expected: kernel.dim(), found: omega.dim() });
    }
    if resolution < 2 {
        return Err(BqError::InvalidParameter("grid resolution must be at least 2".into()));
    }
    let grid = box_grid(omega, resolution);
    let mut numerator = None::<T>;
    for x in &grid {
        let m = problem.kernel_mean(x)?;
        numerator = Some(numerator.map_or(m, |a| a.max(m)));
    }
    let denominator = if kernel.is_stationary() {
        let r = distance(omega.lower(), omega.upper());
        let mut far = omega.lower().to_vec();
        far[0] += r;
        kernel.eval(omega.lower(), &far)?
    } else {
        let coarse = box_grid(omega, resolution.min(200));
        let mut inf = None::<T>;
        for x in &coarse {
            for y in &coarse {
                let v = kernel.eval(x, y)?;
                inf = Some(inf.map_or(v, |a| a.min(v)));
            }
        }
        inf.expect("non-empty grid")
    };
    if !(denominator > T::zero()) {
        return Err(BqError::DomainViolation(format!(
            "kernel infimum over the domain is {} and the bound is undefined",
            denominator.as_f64()
        )));
    }
    Ok(numerator.expect("non-empty grid") / denominator)
}

fn box_grid<T: Real>(omega: &BoxDomain<T>, resolution: usize) -> Vec<Vec<T>> {
    let d = omega.dim();
    let mut out = vec![Vec::new()];
    for j in 0..d {
        let step = (omega.upper()[j] - omega.lower()[j]) / T::from_count(resolution - 1);
        out = out
            .into_iter()
            .flat_map(|p: Vec<T>| {
                (0..resolution).map(move |i| {
                    let mut q = p.clone();
                    q.push(omega.lower()[j] + step * T::from_count(i));
                    q
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Kernel, Measure};
    use approx::assert_relative_eq;

    #[test]
    fn analyze_examples() {
        let r = analyze_weights(&[0.5, -0.25, 0.5]);
        assert_eq!((r.n_positive, r.n_negative, r.n_zero), (2, 1, 0));
        assert_eq!(r.stability_constant, 1.25);
        assert_eq!(r.weight_sum, 0.75);
        let r = analyze_weights(&[0.25, 0.5, 0.25]);
        assert_eq!(r.stability_constant, 1.0);
        assert_eq!(r.sum_gap, 0.0);
        let r = analyze_weights(&[1e-13, -1e-13, 2.0]);
        assert_eq!((r.n_positive, r.n_negative, r.n_zero), (1, 0, 2));
    }

    #[test]
    fn positive_count_bound() {
        assert_eq!(min_positive_weights(1), 1);
        assert_eq!(min_positive_weights(2), 1);
        assert_eq!(min_positive_weights(5), 3);
        assert_eq!(min_positive_weights(20), 10);
    }

    #[test]
    fn lemma1_gaussian_unit_interval() {
        // Reference values from 30-digit quadrature.
        let p = BqProblem::new(Kernel::gaussian(1.0, 1).unwrap(), Measure::unit_cube(1)).unwrap();
        let b = lemma1_bound(&p, &BoxDomain::unit(1), 10_001).unwrap();
        assert_relative_eq!(b, 1.582_525_833_689_155, max_relative = 1e-12);
    }

    #[test]
    fn lemma1_nearly_constant_kernel_is_one() {
        let p = BqProblem::new(Kernel::gaussian(1e6, 1).unwrap(), Measure::unit_cube(1)).unwrap();
        assert!((lemma1_bound(&p, &BoxDomain::unit(1), 101).unwrap() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn lemma1_rejects_vanishing_infimum() {
        let p = BqProblem::<f64>::new(Kernel::brownian(), Measure::unit_cube(1)).unwrap();
        assert!(lemma1_bound(&p, &BoxDomain::unit(1), 50).is_err());
    }
}
