//! Ordered point sets.

use crate::error::{BqError, Result};
use crate::scalar::Real;

/// Ordered set of pairwise distinct points in `R^d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Design<T> {
    dim: usize,
    coords: Vec<T>,
}

impl<T: Real> Design<T> {
    /// Validates dimensions and pairwise distinctness.
    pub fn new(points: Vec<Vec<T>>) -> Result<Self> {
        let dim = match points.first() {
            Some(p) => p.len(),
            None => return Err(BqError::InvalidDesign("no points".into())),
        };
        if dim == 0 {
            return Err(BqError::InvalidDesign("zero-dimensional points".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(BqError::DimensionMismatch { expected: dim, found: p.len() });
        }
        Design::from_flat(dim, points.concat())
    }

    pub fn from_flat(dim: usize, coords: Vec<T>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(BqError::InvalidDesign(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(BqError::InvalidDesign("non-finite coordinate".into()));
        }
        let d = Design { dim, coords };
        if let Some((i, j)) = d.first_duplicate() {
            return Err(BqError::InvalidDesign(format!("points {i} and {j} coincide")));
        }
        Ok(d)
    }

    /// One-dimensional design from scalar nodes.
    pub fn from_nodes(nodes: &[T]) -> Result<Self> {
        Design::from_flat(1, nodes.to_vec())
    }

    /// Design with no points; only useful as the seed of a sequential rule.
    pub fn empty(dim: usize) -> Self {
        Design { dim, coords: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    /// Appends a point, rejecting duplicates.
    pub fn push(&mut self, p: &[T]) -> Result<()> {
        if p.len() != self.dim {
            return Err(BqError::DimensionMismatch { expected: self.dim, found: p.len() });
        }
        if self.points().any(|q| q == p) {
            return Err(BqError::InvalidDesign("appended point already present".into()));
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    pub fn with_point(&self, p: &[T]) -> Result<Self> {
        let mut d = self.clone();
        d.push(p)?;
        Ok(d)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points().map(|p| p.iter().map(|v| v.as_f64()).collect()).collect()
    }

    /// Converts to another scalar type through `f64`.
    pub fn cast<U: Real>(&self) -> Design<U> {
        Design { dim: self.dim, coords: self.coords.iter().map(|v| U::lit(v.as_f64())).collect() }
    }

    fn first_duplicate(&self) -> Option<(usize, usize)> {
        let n = self.len();
        for i in 0..n {
            for j in 0..i {
                if self.point(i) == self.point(j) {
                    return Some((j, i));
                }
            }
        }
        None
    }
}

/// Euclidean distance.
pub fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_ragged_points() {
        assert!(Design::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).is_err());
        assert!(matches!(
            Design::new(vec![vec![0.0, 1.0], vec![0.0]]),
            Err(BqError::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(Design::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn push_and_access() {
        let mut d = Design::from_nodes(&[0.1, 0.5]).unwrap();
        d.push(&[0.9]).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.point(2), &[0.9]);
        assert!(d.push(&[0.5]).is_err());
    }
}
