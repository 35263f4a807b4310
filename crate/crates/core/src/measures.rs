//! Integration measures: the standard Gaussian on `R^d` and uniform
//! probability measures on axis-aligned boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{BqError, Result};
use crate::scalar::Real;

/// Axis-aligned box `[lower, upper]` with `lower < upper` componentwise.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> BoxDomain<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.is_empty() {
            return Err(BqError::InvalidParameter("box needs at least one dimension".into()));
        }
        if lower.len() != upper.len() {
            return Err(BqError::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(BqError::InvalidParameter("box bounds must satisfy lower < upper".into()));
        }
        Ok(BoxDomain { lower, upper })
    }

    /// `[a, b]^d`.
    pub fn cube(a: T, b: T, dim: usize) -> Result<Self> {
        BoxDomain::new(vec![a; dim], vec![b; dim])
    }

    pub fn unit(dim: usize) -> Self {
        BoxDomain::cube(T::zero(), T::one(), dim).expect("unit cube is valid")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn volume(&self) -> T {
        self.lower.iter().zip(&self.upper).fold(T::one(), |v, (&a, &b)| v * (b - a))
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| a <= v && v <= b)
    }
}

/// Where design points live; fill distances only exist on bounded regions.
#[derive(Clone, Debug, PartialEq)]
pub enum Region<T> {
    Box(BoxDomain<T>),
    Unbounded { dim: usize },
}

/// Integration measure.
#[derive(Clone, Debug, PartialEq)]
pub enum Measure<T> {
    /// Zero-mean, identity-covariance Gaussian on `R^d`.
    StdGaussian { dim: usize },
    /// Uniform probability measure on a box.
    UniformBox(BoxDomain<T>),
}

impl<T: Real> Measure<T> {
    pub fn std_gaussian(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(BqError::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Measure::StdGaussian { dim })
    }

    pub fn uniform(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        Ok(Measure::UniformBox(BoxDomain::new(lower, upper)?))
    }

    /// Uniform measure on `[0, 1]^d`.
    pub fn unit_cube(dim: usize) -> Self {
        Measure::UniformBox(BoxDomain::unit(dim))
    }

    /// Uniform measure on `[a, b]`.
    pub fn interval(a: T, b: T) -> Result<Self> {
        Measure::uniform(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        match self {
            Measure::StdGaussian { dim } => *dim,
            Measure::UniformBox(b) => b.dim(),
        }
    }

    /// Supremum of the Lebesgue density.
    pub fn density_sup(&self) -> T {
        match self {
            Measure::StdGaussian { dim } => T::one() / (T::lit(2.0) * T::pi()).sqrt().powi(*dim as i32),
            Measure::UniformBox(b) => T::one() / b.volume(),
        }
    }

    pub fn region(&self) -> Region<T> {
        match self {
            Measure::StdGaussian { dim } => Region::Unbounded { dim: *dim },
            Measure::UniformBox(b) => Region::Box(b.clone()),
        }
    }

    pub fn as_box(&self) -> Option<&BoxDomain<T>> {
        match self {
            Measure::UniformBox(b) => Some(b),
            Measure::StdGaussian { .. } => None,
        }
    }

    /// `n` i.i.d. draws, reproducible for a fixed seed. Exact collisions are
    /// redrawn so the result is always a valid design.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Design<T>> {
        if n == 0 {
            return Err(BqError::InvalidParameter("sample size must be at least 1".into()));
        }
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coords: Vec<T> = Vec::with_capacity(n * d);
        let mut p = vec![T::zero(); d];
        let mut count = 0;
        while count < n {
            self.draw(&mut rng, &mut p);
            let clash = coords.chunks_exact(d).any(|q| q == p.as_slice());
            if !clash {
                coords.extend_from_slice(&p);
                count += 1;
            }
        }
        Design::from_flat(d, coords)
    }

    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [T]) {
        match self {
            Measure::StdGaussian { .. } => {
                for v in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = T::lit(z);
                }
            }
            Measure::UniformBox(b) => {
                for (i, v) in out.iter_mut().enumerate() {
                    let u: f64 = rng.random();
                    *v = b.lower[i] + (b.upper[i] - b.lower[i]) * T::lit(u);
                }
            }
        }
    }

    /// Equispaced nodes on a one-dimensional box. Without endpoints the nodes
    /// are `a + i (b - a) / (n + 1)`, `i = 1..n`; with endpoints they span
    /// `[a, b]` (a single node sits at the midpoint).
    pub fn equispaced(&self, n: usize, include_endpoints: bool) -> Result<Design<T>> {
        let b = match self {
            Measure::UniformBox(b) if b.dim() == 1 => b,
            _ => return Err(BqError::InvalidParameter("equispaced designs need a one-dimensional uniform box".into())),
        };
        if n == 0 {
            return Err(BqError::InvalidParameter("n must be at least 1".into()));
        }
        let (lo, hi) = (b.lower[0], b.upper[0]);
        let width = hi - lo;
        let nodes: Vec<T> = if include_endpoints && n > 1 {
            let step = width / T::from_count(n - 1);
            (0..n).map(|i| if i + 1 == n { hi } else { lo + step * T::from_count(i) }).collect()
        } else if include_endpoints {
            vec![lo + width / T::lit(2.0)]
        } else {
            let step = width / T::from_count(n + 1);
            (1..=n).map(|i| lo + step * T::from_count(i)).collect()
        };
        Design::from_nodes(&nodes)
    }

    /// Short provenance label, e.g. `std_gaussian(d=2)` or `uniform[0,1]`.
    pub fn label(&self) -> String {
        match self {
            Measure::StdGaussian { dim } => format!("std_gaussian(d={dim})"),
            Measure::UniformBox(b) => {
                let sides: Vec<String> =
                    b.lower.iter().zip(&b.upper).map(|(a, c)| format!("[{},{}]", a.as_f64(), c.as_f64())).collect();
                format!("uniform{}", sides.join("x"))
            }
        }
    }

    pub fn to_config(&self) -> MeasureConfig {
        match self {
            Measure::StdGaussian { dim } => {
                MeasureConfig { kind: MeasureKind::StdGaussian, dim: *dim, lower: Vec::new(), upper: Vec::new() }
            }
            Measure::UniformBox(b) => MeasureConfig {
                kind: MeasureKind::UniformBox,
                dim: b.dim(),
                lower: b.lower.iter().map(|v| v.as_f64()).collect(),
                upper: b.upper.iter().map(|v| v.as_f64()).collect(),
            },
        }
    }

    pub fn from_config(c: &MeasureConfig) -> Result<Self> {
        match c.kind {
            MeasureKind::StdGaussian => Measure::std_gaussian(c.dim),
            MeasureKind::UniformBox => {
                let lower: Vec<T> = c.lower.iter().map(|&v| T::lit(v)).collect();
                let upper: Vec<T> = c.upper.iter().map(|&v| T::lit(v)).collect();
                if lower.len() != c.dim {
                    return Err(BqError::DimensionMismatch { expected: c.dim, found: lower.len() });
                }
                Measure::uniform(lower, upper)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    StdGaussian,
    UniformBox,
}

/// Serialisable measure record `{kind, dim, lower[], upper[]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub kind: MeasureKind,
    pub dim: usize,
    #[serde(default)]
    pub lower: Vec<f64>,
    #[serde(default)]
    pub upper: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equispaced_examples() {
        let m = Measure::<f64>::unit_cube(1);
        assert_eq!(m.equispaced(1, false).unwrap().coords(), &[0.5]);
        assert_eq!(m.equispaced(3, false).unwrap().coords(), &[0.25, 0.5, 0.75]);
        assert_eq!(m.equispaced(2, true).unwrap().coords(), &[0.0, 1.0]);
        assert!(Measure::<f64>::unit_cube(2).equispaced(3, false).is_err());
        assert!(Measure::<f64>::std_gaussian(1).unwrap().equispaced(3, false).is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let m = Measure::<f64>::unit_cube(1);
        let a = m.sample(3, 7).unwrap();
        let b = m.sample(3, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.points().all(|p| (0.0..=1.0).contains(&p[0])));
        let sq = Measure::<f64>::unit_cube(2);
        assert_eq!(sq.sample(2, 11).unwrap(), sq.sample(2, 11).unwrap());
        assert_ne!(sq.sample(2, 11).unwrap(), sq.sample(2, 12).unwrap());
        assert!(m.sample(0, 1).is_err());
    }

    #[test]
    fn gaussian_sample_mean_within_three_sigma() {
        let m = Measure::<f64>::std_gaussian(4).unwrap();
        let x = m.sample(1000, 1).unwrap();
        let mut mean = [0.0; 4];
        for p in x.points() {
            for j in 0..4 {
                mean[j] += p[j] / 1000.0;
            }
        }
        let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 4.0 / 1000f64.sqrt() * 3.0, "{norm}");
    }

    #[test]
    fn uniform_sampler_passes_kolmogorov_smirnov() {
        let m = Measure::<f64>::unit_cube(1);
        let mut u: Vec<f64> = m.sample(10_000, 5).unwrap().coords().to_vec();
        u.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = u.len() as f64;
        let d = u
            .iter()
            .enumerate()
            .map(|(i, &v)| ((i as f64 + 1.0) / n - v).abs().max((v - i as f64 / n).abs()))
            .fold(0.0, f64::max);
        // 1% critical value 1.628 / sqrt(n)
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn density_suprema() {
        let g = Measure::<f64>::std_gaussian(2).unwrap();
        assert!((g.density_sup() - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        let b = Measure::uniform(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        assert!((b.density_sup() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn config_roundtrip() {
        let b = Measure::uniform(vec![0.1, -2.5], vec![0.3, 7.0]).unwrap();
        let json = serde_json::to_string(&b.to_config()).unwrap();
        let back: MeasureConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(Measure::<f64>::from_config(&back).unwrap(), b);
        assert!(Measure::<f64>::uniform(vec![1.0], vec![0.0]).is_err());
    }
}
