//! Fill distance, separation radius and mesh ratio.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{distance, Design};
use crate::error::{BqError, Result};
use crate::measures::{BoxDomain, Measure, Region};
use crate::scalar::Real;

/// `q_X = min_{i != j} |x_i - x_j| / 2`.
pub fn separation_radius<T: Real>(design: &Design<T>) -> Result<T> {
    let n = design.len();
    if n < 2 {
        return Err(BqError::InvalidDesign("separation radius needs at least two points".into()));
    }
    if design.dim() == 1 {
        let mut xs: Vec<T> = design.coords().to_vec();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite design"));
        let gap = xs.windows(2).map(|w| w[1] - w[0]).fold(xs[1] - xs[0], T::min);
        return Ok(gap / T::lit(2.0));
    }
    let mut best = distance(design.point(0), design.point(1));
    for i in 0..n {
        for j in 0..i {
            best = best.min(distance(design.point(i), design.point(j)));
        }
    }
    Ok(best / T::lit(2.0))
}

fn nearest<T: Real>(design: &Design<T>, x: &[T]) -> T {
    design
        .points()
        .map(|p| distance(p, x))
        .fold(None, |acc: Option<T>, d| Some(acc.map_or(d, |a| a.min(d))))
        .expect("non-empty design")
}

/// `h = sup_{x in omega} min_i |x - x_i|`.
///
/// Exact in one dimension. In higher dimensions the supremum is taken over a
/// tensor grid with `resolution` nodes per axis (endpoints included), which
/// gives a lower bound converging as the grid is refined.
pub fn fill_distance<T: Real>(design: &Design<T>, omega: &BoxDomain<T>, resolution: usize) -> Result<T> {
    if design.is_empty() {
        return Err(BqError::InvalidDesign("fill distance of an empty design".into()));
    }
    if design.dim() != omega.dim() {
        return Err(BqError::DimensionMismatch { expected: omega.dim(), found: design.dim() });
    }
    if design.dim() == 1 {
        return Ok(fill_distance_1d(design, omega.lower()[0], omega.upper()[0]));
    }
    fill_distance_grid(design, omega, resolution)
}

fn fill_distance_1d<T: Real>(design: &Design<T>, a: T, b: T) -> T {
    let mut xs: Vec<T> = design.coords().to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("finite design"));
    let two = T::lit(2.0);
    // The distance to the nearest node is piecewise linear; its maximum over
    // [a, b] sits at an endpoint or at a midpoint between neighbours.
    let mut candidates = vec![a, b];
    candidates.extend(xs.windows(2).map(|w| (w[0] + w[1]) / two).filter(|&m| m > a && m < b));
    candidates
        .into_iter()
        .map(|c| xs.iter().map(|&x| (x - c).abs()).fold(T::lit(f64::INFINITY), T::min))
        .fold(T::zero(), T::max)
}

/// Grid estimate of the fill distance in any dimension.
pub fn fill_distance_grid<T: Real>(design: &Design<T>, omega: &BoxDomain<T>, resolution: usize) -> Result<T> {
    if resolution < 2 {
        return Err(BqError::InvalidParameter("grid resolution must be at least 2".into()));
    }
    let d = omega.dim();
    let total = resolution
        .checked_pow(d as u32)
        .ok_or_else(|| BqError::InvalidParameter("fill-distance grid too large".into()))?;
    let step: Vec<T> = (0..d).map(|j| (omega.upper()[j] - omega.lower()[j]) / T::from_count(resolution - 1)).collect();
    Ok((0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = vec![T::zero(); d];
            for j in (0..d).rev() {
                x[j] = omega.lower()[j] + step[j] * T::from_count(idx % resolution);
                idx /= resolution;
            }
            nearest(design, &x)
        })
        .reduce(T::zero, T::max))
}

/// Fill distance against a measure's support; unbounded supports are rejected.
pub fn fill_distance_for<T: Real>(design: &Design<T>, measure: &Measure<T>, resolution: usize) -> Result<T> {
    match measure.region() {
        Region::Box(b) => fill_distance(design, &b, resolution),
        Region::Unbounded { .. } => Err(BqError::UnboundedDomain),
    }
}

pub fn mesh_ratio<T: Real>(design: &Design<T>, omega: &BoxDomain<T>, resolution: usize) -> Result<T> {
    Ok(fill_distance(design, omega, resolution)? / separation_radius(design)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub fill_distance: f64,
    pub separation_radius: f64,
    pub mesh_ratio: f64,
    /// Grid nodes per axis used for the fill distance; 0 marks the exact 1D formula.
    pub resolution: usize,
}

pub fn geometry_report<T: Real>(design: &Design<T>, omega: &BoxDomain<T>, resolution: usize) -> Result<GeometryReport> {
    let h = fill_distance(design, omega, resolution)?;
    let q = separation_radius(design)?;
    Ok(GeometryReport {
        fill_distance: h.as_f64(),
        separation_radius: q.as_f64(),
        mesh_ratio: (h / q).as_f64(),
        resolution: if design.dim() == 1 { 0 } else { resolution },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn nodes(x: &[f64]) -> Design<f64> {
        Design::from_nodes(x).unwrap()
    }

    #[test]
    fn separation_examples() {
        assert_relative_eq!(separation_radius(&nodes(&[0.0, 0.1, 0.5])).unwrap(), 0.05, max_relative = 1e-15);
        assert_eq!(separation_radius(&nodes(&[0.25, 0.75])).unwrap(), 0.25);
        let grid = Design::new(vec![vec![0.0, 0.0], vec![0.0, 0.3], vec![0.3, 0.0], vec![0.3, 0.3]]).unwrap();
        assert_relative_eq!(separation_radius(&grid).unwrap(), 0.15, max_relative = 1e-15);
        assert!(separation_radius(&nodes(&[0.5])).is_err());
    }

    #[test]
    fn fill_distance_examples() {
        let unit = BoxDomain::unit(1);
        assert_eq!(fill_distance(&nodes(&[0.25, 0.75]), &unit, 0).unwrap(), 0.25);
        assert_eq!(fill_distance(&nodes(&[0.5]), &unit, 0).unwrap(), 0.5);
        let grid = Design::new(vec![vec![0.25, 0.25], vec![0.25, 0.75], vec![0.75, 0.25], vec![0.75, 0.75]]).unwrap();
        let h = fill_distance(&grid, &BoxDomain::unit(2), 101).unwrap();
        assert_relative_eq!(h, 2f64.sqrt() * 0.25, max_relative = 1e-12);
    }

    #[test]
    fn unbounded_support_is_rejected() {
        let m = Measure::std_gaussian(1).unwrap();
        assert_eq!(fill_distance_for(&nodes(&[0.0, 1.0]), &m, 100), Err(BqError::UnboundedDomain));
    }

    #[test]
    fn mesh_ratio_examples() {
        let unit = BoxDomain::unit(1);
        let eq = Measure::unit_cube(1).equispaced(10, false).unwrap();
        assert_relative_eq!(mesh_ratio(&eq, &unit, 0).unwrap(), 2.0, max_relative = 1e-12);
        assert_eq!(mesh_ratio(&nodes(&[0.25, 0.75]), &unit, 0).unwrap(), 1.0);
    }

    #[test]
    fn grid_agrees_with_exact_formula_in_1d() {
        let x = Measure::<f64>::unit_cube(1).sample(17, 5).unwrap();
        let exact = fill_distance(&x, &BoxDomain::unit(1), 0).unwrap();
        let grid = fill_distance_grid(&x, &BoxDomain::unit(1), 1001).unwrap();
        assert!(grid <= exact + 1e-15 && exact - grid <= 1e-3);
    }
}
