//! Kernel families and their analytic integrals.
//!
//! Each [`Kernel`] provides point evaluation, the derivative with respect to a
//! coordinate of its second argument, and, where a closed form exists, the
//! kernel mean `k_nu(x) = \int k(y, x) dnu(y)`, its gradient and the double
//! integral `\int\int k dnu dnu`. Closed forms exist for
//!
//! | kernel   | measure              |
//! |----------|----------------------|
//! | Gaussian | standard Gaussian    |
//! | Gaussian | uniform box          |
//! | Matérn   | uniform interval     |
//! | Brownian | uniform `[a, b]`, `a >= 0` |
//!
//! Everything else returns [`BqError::UnsupportedPair`]; see
//! [`crate::BqProblem`] for the numerical fallback.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{BqError, Result};
use crate::measures::{BoxDomain, Measure};
use crate::scalar::Real;

/// Matérn smoothness `rho`, restricted to the half-integer cases with
/// polynomial-times-exponential closed forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl Smoothness {
    pub fn value(self) -> f64 {
        match self {
            Smoothness::Half => 0.5,
            Smoothness::ThreeHalves => 1.5,
            Smoothness::FiveHalves => 2.5,
        }
    }

    pub fn from_value(v: f64) -> Result<Self> {
        match v {
            0.5 => Ok(Smoothness::Half),
            1.5 => Ok(Smoothness::ThreeHalves),
            2.5 => Ok(Smoothness::FiveHalves),
            _ => Err(BqError::InvalidParameter(format!("Matérn smoothness must be 0.5, 1.5 or 2.5, got {v}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// `exp(-|x - y|^2 / (2 l^2))`
    Gaussian,
    /// Matérn with half-integer smoothness and Euclidean distance.
    Matern(Smoothness),
    /// `min(x, y)` on `[0, inf)`.
    Brownian,
    /// `r^2 / (r^2 - x y)` for `|x y| < r^2`.
    Hardy,
}

/// Positive-definite kernel. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel<T> {
    family: KernelFamily,
    length_scale: T,
    hardy_r: T,
    dim: usize,
}

impl<T: Real> Kernel<T> {
    pub fn gaussian(length_scale: T, dim: usize) -> Result<Self> {
        Self::build(KernelFamily::Gaussian, length_scale, T::one(), dim)
    }

    pub fn matern(smoothness: Smoothness, length_scale: T, dim: usize) -> Result<Self> {
        Self::build(KernelFamily::Matern(smoothness), length_scale, T::one(), dim)
    }

    pub fn brownian() -> Self {
        Kernel { family: KernelFamily::Brownian, length_scale: T::one(), hardy_r: T::one(), dim: 1 }
    }

    pub fn hardy(r: T) -> Result<Self> {
        Self::build(KernelFamily::Hardy, T::one(), r, 1)
    }

    fn build(family: KernelFamily, length_scale: T, hardy_r: T, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(BqError::InvalidParameter("kernel dimension must be positive".into()));
        }
        if !(length_scale > T::zero()) || !length_scale.is_finite() {
            return Err(BqError::InvalidParameter("length-scale must be positive".into()));
        }
        if !(hardy_r > T::zero()) || !hardy_r.is_finite() {
            return Err(BqError::InvalidParameter("Hardy radius must be positive".into()));
        }
        if matches!(family, KernelFamily::Brownian | KernelFamily::Hardy) && dim != 1 {
            return Err(BqError::InvalidParameter("Brownian and Hardy kernels are one-dimensional".into()));
        }
        Ok(Kernel { family, length_scale, hardy_r, dim })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn length_scale(&self) -> T {
        self.length_scale
    }

    pub fn hardy_r(&self) -> T {
        self.hardy_r
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self.family, KernelFamily::Gaussian | KernelFamily::Matern(_))
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self.family, KernelFamily::Brownian)
    }

    /// Same family and parameters in another scalar type.
    pub fn cast<U: Real>(&self) -> Kernel<U> {
        Kernel {
            family: self.family,
            length_scale: U::lit(self.length_scale.as_f64()),
            hardy_r: U::lit(self.hardy_r.as_f64()),
            dim: self.dim,
        }
    }

    fn check_dims(&self, x: &[T], y: &[T]) -> Result<()> {
        for p in [x, y] {
            if p.len() != self.dim {
                return Err(BqError::DimensionMismatch { expected: self.dim, found: p.len() });
            }
        }
        Ok(())
    }

    /// `k(x, y)`.
    pub fn eval(&self, x: &[T], y: &[T]) -> Result<T> {
        self.check_dims(x, y)?;
        match self.family {
            KernelFamily::Gaussian => {
                let s = sq_dist(x, y);
                Ok((-s / (T::lit(2.0) * self.length_scale.square())).exp())
            }
            KernelFamily::Matern(nu) => Ok(matern_profile(nu, self.length_scale, sq_dist(x, y).sqrt())),
            KernelFamily::Brownian => {
                if x[0] < T::zero() || y[0] < T::zero() {
                    return Err(BqError::DomainViolation("Brownian kernel is defined on [0, inf)".into()));
                }
                Ok(x[0].min(y[0]))
            }
            KernelFamily::Hardy => {
                let r2 = self.hardy_r.square();
                let xy = x[0] * y[0];
                if !(xy.abs() < r2) {
                    return Err(BqError::DomainViolation(format!(
                        "Hardy kernel needs |x y| < r^2 (x = {}, y = {}, r = {})",
                        x[0].as_f64(),
                        y[0].as_f64(),
                        self.hardy_r.as_f64()
                    )));
                }
                Ok(r2 / (r2 - xy))
            }
        }
    }

    /// `d/dz_j k(x, z)` at `z = y`, for coordinate `j` (zero-based).
    pub fn eval_dy(&self, x: &[T], y: &[T], j: usize) -> Result<T> {
        self.check_dims(x, y)?;
        if j >= self.dim {
            return Err(BqError::InvalidParameter(format!("coordinate {j} out of range for dimension {}", self.dim)));
        }
        match self.family {
            KernelFamily::Gaussian => {
                let k = self.eval(x, y)?;
                Ok((x[j] - y[j]) / self.length_scale.square() * k)
            }
            KernelFamily::Matern(nu) => {
                let r = sq_dist(x, y).sqrt();
                if nu == Smoothness::Half && r == T::zero() {
                    return Err(self.not_differentiable("Matérn-1/2 has a kink at zero lag"));
                }
                Ok(matern_slope_over_r(nu, self.length_scale, r) * (y[j] - x[j]))
            }
            KernelFamily::Brownian => Err(self.not_differentiable("Brownian kernel derivatives are not provided")),
            KernelFamily::Hardy => {
                let r2 = self.hardy_r.square();
                self.eval(x, y)?;
                let den = r2 - x[0] * y[0];
                Ok(r2 * x[0] / den.square())
            }
        }
    }

    /// Half the derivative of `x -> k(x, x)` along coordinate `j`. Zero for
    /// stationary kernels; needed in the variance gradient for the Hardy
    /// kernel whose diagonal varies.
    pub fn diag_half_derivative(&self, x: &[T], j: usize) -> Result<T> {
        if self.is_stationary() {
            return Ok(T::zero());
        }
        self.eval_dy(x, x, j)
    }

    fn not_differentiable(&self, reason: &str) -> BqError {
        BqError::NotDifferentiable { kernel: self.label(), reason: reason.into() }
    }

    fn unsupported(&self, measure: &Measure<T>) -> BqError {
        BqError::UnsupportedPair { kernel: self.label(), measure: measure.label() }
    }

    fn check_measure(&self, measure: &Measure<T>) -> Result<()> {
        if measure.dim() != self.dim {
            return Err(BqError::DimensionMismatch { expected: self.dim, found: measure.dim() });
        }
        Ok(())
    }

    /// Closed-form kernel mean `k_nu(x)`.
    pub fn kernel_mean(&self, measure: &Measure<T>, x: &[T]) -> Result<T> {
        self.check_measure(measure)?;
        if x.len() != self.dim {
            return Err(BqError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let l = self.length_scale;
        match (self.family, measure) {
            (KernelFamily::Gaussian, Measure::StdGaussian { dim }) => {
                let s = T::one() + l.square();
                let scale = (l / s.sqrt()).powi(*dim as i32);
                Ok(scale * (-sq_norm(x) / (T::lit(2.0) * s)).exp())
            }
            (KernelFamily::Gaussian, Measure::UniformBox(b)) => Ok((0..self.dim)
                .map(|j| gauss_box_mean(l, b.lower()[j], b.upper()[j], x[j]))
                .fold(T::one(), |acc, v| acc * v)),
            (KernelFamily::Matern(nu), Measure::UniformBox(b)) if self.dim == 1 => {
                let (lo, hi) = (b.lower()[0], b.upper()[0]);
                let a = matern_rate(nu, l);
                Ok((signed_matern_primitive(nu, a, hi - x[0]) - signed_matern_primitive(nu, a, lo - x[0])) / (hi - lo))
            }
            (KernelFamily::Brownian, Measure::UniformBox(b)) if brownian_box(b) => {
                let (lo, hi) = (b.lower()[0], b.upper()[0]);
                if x[0] < T::zero() {
                    return Err(BqError::DomainViolation("Brownian kernel is defined on [0, inf)".into()));
                }
                Ok(brownian_mean(lo, hi, x[0]))
            }
            _ => Err(self.unsupported(measure)),
        }
    }

    /// Gradient of the closed-form kernel mean at `x`.
    pub fn kernel_mean_grad(&self, measure: &Measure<T>, x: &[T]) -> Result<Vec<T>> {
        self.check_measure(measure)?;
        if !self.is_differentiable() {
            return Err(self.not_differentiable("kernel mean gradient requested"));
        }
        if x.len() != self.dim {
            return Err(BqError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let l = self.length_scale;
        match (self.family, measure) {
            (KernelFamily::Gaussian, Measure::StdGaussian { .. }) => {
                let mean = self.kernel_mean(measure, x)?;
                let s = T::one() + l.square();
                Ok(x.iter().map(|&xj| -xj / s * mean).collect())
            }
            (KernelFamily::Gaussian, Measure::UniformBox(b)) => {
                let factors: Vec<T> =
                    (0..self.dim).map(|j| gauss_box_mean(l, b.lower()[j], b.upper()[j], x[j])).collect();
                Ok((0..self.dim)
                    .map(|j| {
                        let others =
                            factors.iter().enumerate().filter(|&(i, _)| i != j).fold(T::one(), |acc, (_, &v)| acc * v);
                        gauss_box_mean_slope(l, b.lower()[j], b.upper()[j], x[j]) * others
                    })
                    .collect())
            }
            (KernelFamily::Matern(nu), Measure::UniformBox(b)) if self.dim == 1 => {
                let (lo, hi) = (b.lower()[0], b.upper()[0]);
                let phi = |r: T| matern_profile(nu, l, r.abs());
                Ok(vec![(phi(lo - x[0]) - phi(hi - x[0])) / (hi - lo)])
            }
            _ => Err(self.unsupported(measure)),
        }
    }

    /// Closed-form `\int\int k(x, y) dnu(x) dnu(y)`.
    pub fn initial_variance(&self, measure: &Measure<T>) -> Result<T> {
        self.check_measure(measure)?;
        let l = self.length_scale;
        match (self.family, measure) {
            (KernelFamily::Gaussian, Measure::StdGaussian { dim }) => {
                Ok((l / (T::lit(2.0) + l.square()).sqrt()).powi(*dim as i32))
            }
            (KernelFamily::Gaussian, Measure::UniformBox(b)) => Ok((0..self.dim)
                .map(|j| gauss_box_pair(l, b.upper()[j] - b.lower()[j]))
                .fold(T::one(), |acc, v| acc * v)),
            (KernelFamily::Matern(nu), Measure::UniformBox(b)) if self.dim == 1 => {
                let width = b.upper()[0] - b.lower()[0];
                let a = matern_rate(nu, l);
                let (f, m) = (matern_primitive(nu, a, width), matern_first_moment(nu, a, width));
                Ok(T::lit(2.0) * (width * f - m) / width.square())
            }
            (KernelFamily::Brownian, Measure::UniformBox(b)) if brownian_box(b) => {
                let (lo, hi) = (b.lower()[0], b.upper()[0]);
                let integral = -(hi.powi(3) - lo.powi(3)) / T::lit(6.0)
                    + hi * (hi.square() - lo.square()) / T::lit(2.0)
                    - lo.square() * (hi - lo) / T::lit(2.0);
                Ok(integral / (hi - lo).square())
            }
            _ => Err(self.unsupported(measure)),
        }
    }

    /// True when the closed forms above cover this measure.
    pub fn has_closed_form(&self, measure: &Measure<T>) -> bool {
        self.initial_variance(measure).is_ok()
    }

    pub fn label(&self) -> String {
        match self.family {
            KernelFamily::Gaussian => format!("gaussian(l={}, d={})", self.length_scale.as_f64(), self.dim),
            KernelFamily::Matern(nu) => {
                format!("matern(rho={}, l={}, d={})", nu.value(), self.length_scale.as_f64(), self.dim)
            }
            KernelFamily::Brownian => "brownian".to_string(),
            KernelFamily::Hardy => format!("hardy(r={})", self.hardy_r.as_f64()),
        }
    }

    pub fn to_config(&self) -> KernelConfig {
        let (family, lengthscale, smoothness, hardy_r) = match self.family {
            KernelFamily::Gaussian => (FamilyName::Gaussian, Some(self.length_scale.as_f64()), None, None),
            KernelFamily::Matern(nu) => (FamilyName::Matern, Some(self.length_scale.as_f64()), Some(nu.value()), None),
            KernelFamily::Brownian => (FamilyName::Brownian, None, None, None),
            KernelFamily::Hardy => (FamilyName::Hardy, None, None, Some(self.hardy_r.as_f64())),
        };
        KernelConfig { family, lengthscale, smoothness, hardy_r, dim: self.dim }
    }

    pub fn from_config(c: &KernelConfig) -> Result<Self> {
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| BqError::InvalidParameter(format!("{what} missing from kernel config")))
        };
        match c.family {
            FamilyName::Gaussian => Kernel::gaussian(T::lit(need(c.lengthscale, "lengthscale")?), c.dim),
            FamilyName::Matern => Kernel::matern(
                Smoothness::from_value(need(c.smoothness, "smoothness")?)?,
                T::lit(need(c.lengthscale, "lengthscale")?),
                c.dim,
            ),
            FamilyName::Brownian => {
                if c.dim != 1 {
                    return Err(BqError::InvalidParameter("Brownian kernel is one-dimensional".into()));
                }
                Ok(Kernel::brownian())
            }
            FamilyName::Hardy => {
                if c.dim != 1 {
                    return Err(BqError::InvalidParameter("Hardy kernel is one-dimensional".into()));
                }
                Kernel::hardy(T::lit(need(c.hardy_r, "hardy_r")?))
            }
        }
    }
}

impl<T: Real> fmt::Display for Kernel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Gaussian,
    Matern,
    Brownian,
    Hardy,
}

/// Serialisable kernel record `{family, lengthscale, smoothness, hardy_r, dim}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengthscale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardy_r: Option<f64>,
    pub dim: usize,
}

fn sq_dist<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
}

fn sq_norm<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &a| acc + a * a)
}

fn brownian_box<T: Real>(b: &BoxDomain<T>) -> bool {
    b.dim() == 1 && b.lower()[0] >= T::zero()
}

/// `sqrt(2 rho) / l`.
fn matern_rate<T: Real>(nu: Smoothness, l: T) -> T {
    match nu {
        Smoothness::Half => T::one() / l,
        Smoothness::ThreeHalves => T::lit(3.0).sqrt() / l,
        Smoothness::FiveHalves => T::lit(5.0).sqrt() / l,
    }
}

fn matern_profile<T: Real>(nu: Smoothness, l: T, r: T) -> T {
    let a = matern_rate(nu, l);
    let ar = a * r;
    let e = (-ar).exp();
    match nu {
        Smoothness::Half => e,
        Smoothness::ThreeHalves => (T::one() + ar) * e,
        Smoothness::FiveHalves => (T::one() + ar + ar.square() / T::lit(3.0)) * e,
    }
}

/// `phi'(r) / r` for the radial profile; callers must avoid `r = 0` for the
/// non-smooth `rho = 1/2` case.
fn matern_slope_over_r<T: Real>(nu: Smoothness, l: T, r: T) -> T {
    let a = matern_rate(nu, l);
    let e = (-a * r).exp();
    match nu {
        Smoothness::Half => -a * e / r,
        Smoothness::ThreeHalves => -a.square() * e,
        Smoothness::FiveHalves => -(a.square() / T::lit(3.0)) * (T::one() + a * r) * e,
    }
}

/// `F(c) = \int_0^c phi(t) dt` for `c >= 0`.
fn matern_primitive<T: Real>(nu: Smoothness, a: T, c: T) -> T {
    let ac = a * c;
    let e = (-ac).exp();
    match nu {
        Smoothness::Half => (T::one() - e) / a,
        Smoothness::ThreeHalves => (T::lit(2.0) - (T::lit(2.0) + ac) * e) / a,
        Smoothness::FiveHalves => {
            (T::lit(8.0) - (T::lit(8.0) + T::lit(5.0) * ac + ac.square()) * e) / (T::lit(3.0) * a)
        }
    }
}

/// `\int_0^c t phi(t) dt` for `c >= 0`.
fn matern_first_moment<T: Real>(nu: Smoothness, a: T, c: T) -> T {
    let ac = a * c;
    let e = (-ac).exp();
    let a2 = a.square();
    match nu {
        Smoothness::Half => (T::one() - (T::one() + ac) * e) / a2,
        Smoothness::ThreeHalves => (T::lit(3.0) - (T::lit(3.0) + T::lit(3.0) * ac + ac.square()) * e) / a2,
        Smoothness::FiveHalves => {
            let poly = T::lit(15.0) + T::lit(15.0) * ac + T::lit(6.0) * ac.square() + ac.powi(3);
            (T::lit(15.0) - poly * e) / (T::lit(3.0) * a2)
        }
    }
}

/// Odd extension of [`matern_primitive`]: `\int_0^c phi(|t|) dt` for any `c`.
fn signed_matern_primitive<T: Real>(nu: Smoothness, a: T, c: T) -> T {
    if c < T::zero() {
        -matern_primitive(nu, a, -c)
    } else {
        matern_primitive(nu, a, c)
    }
}

/// One-dimensional Gaussian kernel mean under uniform `[lo, hi]`.
fn gauss_box_mean<T: Real>(l: T, lo: T, hi: T, t: T) -> T {
    let s = T::lit(2.0).sqrt() * l;
    let c = l * (T::pi() / T::lit(2.0)).sqrt();
    c * (((hi - t) / s).erf() - ((lo - t) / s).erf()) / (hi - lo)
}

fn gauss_box_mean_slope<T: Real>(l: T, lo: T, hi: T, t: T) -> T {
    let two_l2 = T::lit(2.0) * l.square();
    ((-(lo - t).square() / two_l2).exp() - (-(hi - t).square() / two_l2).exp()) / (hi - lo)
}

/// `\int\int exp(-(x-y)^2 / 2l^2)` over `[0, w]^2`, divided by `w^2`.
fn gauss_box_pair<T: Real>(l: T, w: T) -> T {
    let two = T::lit(2.0);
    let c = l * (T::pi() / two).sqrt();
    let inner =
        w * c * (w / (two.sqrt() * l)).erf() - l.square() * (T::one() - (-w.square() / (two * l.square())).exp());
    two * inner / w.square()
}

/// `\int_lo^hi min(x, y) dy / (hi - lo)` for `x >= 0`.
fn brownian_mean<T: Real>(lo: T, hi: T, x: T) -> T {
    let two = T::lit(2.0);
    let v = if x <= lo {
        x * (hi - lo)
    } else if x >= hi {
        (hi.square() - lo.square()) / two
    } else {
        (x.square() - lo.square()) / two + x * (hi - x)
    };
    v / (hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> Measure<f64> {
        Measure::unit_cube(1)
    }

    #[test]
    fn evaluation_examples() {
        let g = Kernel::gaussian(1.0, 1).unwrap();
        assert_eq!(g.eval(&[0.7], &[0.7]).unwrap(), 1.0);
        let m = Kernel::matern(Smoothness::Half, 1.0, 1).unwrap();
        assert_relative_eq!(m.eval(&[0.0], &[0.5]).unwrap(), (-0.5f64).exp(), max_relative = 1e-15);
        let b = Kernel::<f64>::brownian();
        assert_eq!(b.eval(&[0.3], &[0.8]).unwrap(), 0.3);
    }

    #[test]
    fn evaluation_errors() {
        let g = Kernel::gaussian(1.0, 2).unwrap();
        assert!(matches!(g.eval(&[0.0], &[0.0, 1.0]), Err(BqError::DimensionMismatch { .. })));
        let h = Kernel::hardy(1.0).unwrap();
        assert!(matches!(h.eval(&[1.0], &[1.0]), Err(BqError::DomainViolation(_))));
        assert!(h.eval(&[0.5], &[0.9]).is_ok());
        assert!(Kernel::<f64>::brownian().eval(&[-0.1], &[0.2]).is_err());
        assert!(Kernel::gaussian(0.0, 1).is_err());
        assert!(Kernel::hardy(-1.0).is_err());
    }

    #[test]
    fn matern_profiles_match_bessel_forms_at_known_lags() {
        // rho = 3/2: (1 + sqrt3 r / l) exp(-sqrt3 r / l)
        let m = Kernel::matern(Smoothness::ThreeHalves, 0.5, 1).unwrap();
        let r: f64 = 0.2;
        let a = 3f64.sqrt() / 0.5;
        assert_relative_eq!(m.eval(&[0.0], &[r]).unwrap(), (1.0 + a * r) * (-a * r).exp(), max_relative = 1e-15);
        // rho = 5/2 at r = l: (1 + sqrt5 + 5/3) e^{-sqrt5}
        let m = Kernel::matern(Smoothness::FiveHalves, 1.0, 1).unwrap();
        let s5 = 5f64.sqrt();
        assert_relative_eq!(
            m.eval(&[0.0], &[1.0]).unwrap(),
            (1.0 + s5 + 5.0 / 3.0) * (-s5).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn derivative_examples() {
        let g = Kernel::gaussian(1.0, 1).unwrap();
        assert_eq!(g.eval_dy(&[0.4], &[0.4], 0).unwrap(), 0.0);
        // d/dz exp(-(0 - z)^2 / 2) at z = 1 is -e^{-1/2}.
        assert_relative_eq!(g.eval_dy(&[0.0], &[1.0], 0).unwrap(), -(-0.5f64).exp(), max_relative = 1e-15);
        let m = Kernel::matern(Smoothness::ThreeHalves, 0.5, 1).unwrap();
        let h = 1e-6;
        let fd = (m.eval(&[0.0], &[0.2 + h]).unwrap() - m.eval(&[0.0], &[0.2 - h]).unwrap()) / (2.0 * h);
        assert_relative_eq!(m.eval_dy(&[0.0], &[0.2], 0).unwrap(), fd, max_relative = 1e-6);
        assert!(matches!(Kernel::<f64>::brownian().eval_dy(&[0.2], &[0.3], 0), Err(BqError::NotDifferentiable { .. })));
        let half = Kernel::matern(Smoothness::Half, 1.0, 1).unwrap();
        assert!(half.eval_dy(&[0.3], &[0.3], 0).is_err());
        assert!(g.eval_dy(&[0.0], &[1.0], 1).is_err());
    }

    #[test]
    fn kernel_mean_examples() {
        let g = Kernel::gaussian(1.0, 1).unwrap();
        let n1 = Measure::std_gaussian(1).unwrap();
        assert_relative_eq!(g.kernel_mean(&n1, &[0.0]).unwrap(), 0.5f64.sqrt(), max_relative = 1e-15);
        let b = Kernel::brownian();
        assert_relative_eq!(b.kernel_mean(&unit(), &[0.5]).unwrap(), 0.375, max_relative = 1e-15);
        let m = Kernel::matern(Smoothness::Half, 1.0, 1).unwrap();
        assert_relative_eq!(m.kernel_mean(&unit(), &[0.5]).unwrap(), 2.0 - 2.0 * (-0.5f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn kernel_mean_gradient_examples() {
        let g = Kernel::gaussian(1.0, 1).unwrap();
        let n1 = Measure::std_gaussian(1).unwrap();
        assert_eq!(g.kernel_mean_grad(&n1, &[0.0]).unwrap()[0], 0.0);
        let expected = -0.5 * 0.5f64.sqrt() * (-0.25f64).exp();
        assert_relative_eq!(g.kernel_mean_grad(&n1, &[1.0]).unwrap()[0], expected, max_relative = 1e-14);
        let m = Kernel::matern(Smoothness::ThreeHalves, 0.5, 1).unwrap();
        assert!(m.kernel_mean_grad(&unit(), &[0.5]).unwrap()[0].abs() < 1e-15);
        assert!(Kernel::brownian().kernel_mean_grad(&unit(), &[0.5]).is_err());
    }

    #[test]
    fn initial_variance_examples() {
        let g = Kernel::gaussian(1.0, 1).unwrap();
        assert_relative_eq!(
            g.initial_variance(&Measure::std_gaussian(1).unwrap()).unwrap(),
            (1.0f64 / 3.0).sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(Kernel::brownian().initial_variance(&unit()).unwrap(), 1.0 / 3.0, max_relative = 1e-15);
        let g2 = Kernel::gaussian(1.0, 2).unwrap();
        assert_relative_eq!(
            g2.initial_variance(&Measure::std_gaussian(2).unwrap()).unwrap(),
            1.0 / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn unsupported_pairs_are_reported() {
        let m = Kernel::matern(Smoothness::ThreeHalves, 1.0, 1).unwrap();
        let n1 = Measure::std_gaussian(1).unwrap();
        assert!(matches!(m.kernel_mean(&n1, &[0.0]), Err(BqError::UnsupportedPair { .. })));
        let h = Kernel::hardy(2.0).unwrap();
        assert!(h.initial_variance(&unit()).is_err());
        assert!(!Kernel::<f64>::brownian().has_closed_form(&Measure::interval(-1.0, 1.0).unwrap()));
    }

    #[test]
    fn config_round_trips_exactly() {
        for k in [
            Kernel::gaussian(0.123_456_789_012_345_68, 3).unwrap(),
            Kernel::matern(Smoothness::FiveHalves, 1.0 / 3.0, 1).unwrap(),
            Kernel::brownian(),
            Kernel::hardy(0.7).unwrap(),
        ] {
            let json = serde_json::to_string(&k.to_config()).unwrap();
            let back: KernelConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(Kernel::<f64>::from_config(&back).unwrap(), k, "{json}");
        }
        let bad: KernelConfig =
            serde_json::from_str(r#"{"family":"matern","lengthscale":1.0,"smoothness":2.0,"dim":1}"#).unwrap();
        assert!(Kernel::<f64>::from_config(&bad).is_err());
    }
}
