//! Bayesian quadrature with positive-definite kernels, and the tools to study
//! when its weights are positive.
//!
//! Every numerical type is generic over a [`Real`] scalar. `f64` is the
//! workhorse; [`F384`] carries about 115 significant digits for Gram systems
//! too ill-conditioned for double precision. Aliases for both are exported
//! below.
//!
//! ```
//! use bqstab::{BqProblem64, Design, Kernel, Measure};
//!
//! let problem = BqProblem64::new(Kernel::brownian(), Measure::unit_cube(1)).unwrap();
//! let rule = problem.rule(&Design::from_nodes(&[0.5]).unwrap(), 0.0).unwrap();
//! assert!((rule.weights[0] - 0.75).abs() < 1e-15);
//! ```

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bq;
pub mod chebyshev;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod measures;
pub mod optimize;
pub mod oracle;
pub mod scalar;
pub mod wide;

pub use bq::{BqProblem, QuadratureRule, RuleRecord};
pub use design::Design;
pub use diagnostics::{analyze_weights, DiagnosticsReport};
pub use error::{BqError, Result};
pub use geometry::GeometryReport;
pub use kernels::{Kernel, KernelConfig, KernelFamily, Smoothness};
pub use measures::{BoxDomain, Measure, MeasureConfig};
pub use optimize::{GradientReport, OptimizerConfig};
pub use scalar::Real;
pub use wide::F384;

pub type Kernel64 = Kernel<f64>;
pub type Measure64 = Measure<f64>;
pub type Design64 = Design<f64>;
pub type BqProblem64 = BqProblem<f64>;
pub type QuadratureRule64 = QuadratureRule<f64>;

pub type KernelWide = Kernel<F384>;
pub type MeasureWide = Measure<F384>;
pub type DesignWide = Design<F384>;
pub type BqProblemWide = BqProblem<F384>;
pub type QuadratureRuleWide = QuadratureRule<F384>;
