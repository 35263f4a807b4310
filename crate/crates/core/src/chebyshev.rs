//! Chebyshev systems: collocation matrices with derivative rows, Hermite
//! interpolation, sign-change counting and total-positivity probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BqError, Result};
use crate::kernels::Kernel;
use crate::linalg::{normalized_determinant, Lu, Matrix};
use crate::scalar::Real;

/// Collocation matrices with `|det| / prod(row norms)` below this are
/// reported singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

/// Values with magnitude at or below this are ignored by [`sign_changes`].
pub const SIGN_FLOOR: f64 = 1e-12;

/// Default sign-scan density, grid points per unit length.
pub const GRID_PER_UNIT: f64 = 1e4;

/// One-dimensional function system `phi_1, ..., phi_m`.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisSystem<T> {
    /// `phi_i(x) = x^{i-1}`.
    Monomial(usize),
    /// `phi_i(x) = e^x x^{i-1}`.
    ExpMonomial(usize),
    /// `phi_i(x) = k(x, c_i)`; derivatives of order one at most.
    KernelTranslates { kernel: Kernel<T>, centers: Vec<T> },
}

impl<T: Real> BasisSystem<T> {
    pub fn translates(kernel: Kernel<T>, centers: Vec<T>) -> Result<Self> {
        if kernel.dim() != 1 {
            return Err(BqError::InvalidParameter("translate systems are one-dimensional".into()));
        }
        if centers.is_empty() {
            return Err(BqError::InvalidParameter("need at least one centre".into()));
        }
        for i in 0..centers.len() {
            if centers[..i].contains(&centers[i]) {
                return Err(BqError::InvalidParameter("centres must be distinct".into()));
            }
        }
        Ok(BasisSystem::KernelTranslates { kernel, centers })
    }

    pub fn len(&self) -> usize {
        match self {
            BasisSystem::Monomial(m) | BasisSystem::ExpMonomial(m) => *m,
            BasisSystem::KernelTranslates { centers, .. } => centers.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `phi_i^{(order)}(x)` with zero-based `i`.
    pub fn derivative(&self, i: usize, x: T, order: usize) -> Result<T> {
        if i >= self.len() {
            return Err(BqError::InvalidParameter(format!("basis index {i} out of range")));
        }
        match self {
            BasisSystem::Monomial(_) => Ok(monomial_derivative(i, x, order)),
            BasisSystem::ExpMonomial(_) => {
                // Leibniz rule on e^x * x^i.
                let mut binom = T::one();
                let mut acc = T::zero();
                for k in 0..=order {
                    acc += binom * monomial_derivative(i, x, k);
                    binom = binom * T::from_count(order - k) / T::from_count(k + 1);
                }
                Ok(acc * x.exp())
            }
            BasisSystem::KernelTranslates { kernel, centers } => match order {
                0 => kernel.eval(&[x], &[centers[i]]),
                1 => kernel.eval_dy(&[centers[i]], &[x], 0),
                _ => {
                    Err(BqError::InvalidParameter("kernel translates support derivatives of order at most one".into()))
                }
            },
        }
    }

    pub fn value(&self, i: usize, x: T) -> Result<T> {
        self.derivative(i, x, 0)
    }
}

fn monomial_derivative<T: Real>(i: usize, x: T, order: usize) -> T {
    if order > i {
        return T::zero();
    }
    let falling = ((i - order + 1)..=i).fold(T::one(), |acc, f| acc * T::from_count(f));
    falling * x.powi((i - order) as i32)
}

/// Hermite data: at site `x_k` the values `f^{(j)}(x_k)` for `j < q_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteData<T> {
    pub points: Vec<T>,
    pub multiplicities: Vec<usize>,
    /// `values[k][j] = f^{(j)}(points[k])`.
    pub values: Vec<Vec<T>>,
}

impl<T: Real> HermiteData<T> {
    pub fn new(points: Vec<T>, values: Vec<Vec<T>>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(BqError::DimensionMismatch { expected: points.len(), found: values.len() });
        }
        if values.iter().any(Vec::is_empty) {
            return Err(BqError::InvalidParameter("every site needs at least a value".into()));
        }
        for i in 0..points.len() {
            if points[..i].contains(&points[i]) {
                return Err(BqError::InvalidParameter("Hermite sites must be distinct".into()));
            }
        }
        let multiplicities = values.iter().map(Vec::len).collect();
        Ok(HermiteData { points, multiplicities, values })
    }

    pub fn total(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    fn flat_values(&self) -> Vec<T> {
        self.values.concat()
    }
}

/// Data of the bump `F_i` used to show positivity of generalised Gaussian
/// weights: `F(a) = 0`, `F(x_i) = 1` and double zeros at the other nodes.
pub fn bump_data<T: Real>(a: T, nodes: &[T], i: usize) -> Result<HermiteData<T>> {
    if i >= nodes.len() {
        return Err(BqError::InvalidParameter(format!("node index {i} out of range")));
    }
    let mut points = vec![a];
    let mut values = vec![vec![T::zero()]];
    for (j, &x) in nodes.iter().enumerate() {
        points.push(x);
        values.push(if j == i { vec![T::one()] } else { vec![T::zero(), T::zero()] });
    }
    HermiteData::new(points, values)
}

/// Generalised Vandermonde matrix `[V]_{i,(k,j)} = phi_i^{(j)}(x_k)`: one row
/// per basis function and one column per (site, derivative order).
#[derive(Clone, Debug)]
pub struct Collocation<T> {
    pub matrix: Matrix<T>,
    pub normalized_det: T,
    pub singular: bool,
}

pub fn collocation_matrix<T: Real>(
    basis: &BasisSystem<T>,
    points: &[T],
    multiplicities: &[usize],
) -> Result<Collocation<T>> {
    if points.len() != multiplicities.len() {
        return Err(BqError::DimensionMismatch { expected: points.len(), found: multiplicities.len() });
    }
    let cols: Vec<(T, usize)> =
        points.iter().zip(multiplicities).flat_map(|(&x, &q)| (0..q).map(move |j| (x, j))).collect();
    if cols.len() != basis.len() {
        return Err(BqError::DimensionMismatch { expected: basis.len(), found: cols.len() });
    }
    let m = basis.len();
    let mut matrix = Matrix::zeros(m, m);
    for i in 0..m {
        for (c, &(x, j)) in cols.iter().enumerate() {
            matrix[(i, c)] = basis.derivative(i, x, j)?;
        }
    }
    let normalized_det = normalized_determinant(&matrix);
    let singular = normalized_det < T::lit(SINGULAR_THRESHOLD);
    Ok(Collocation { matrix, normalized_det, singular })
}

/// `s(x) = sum_i c_i phi_i(x)` matching Hermite data.
#[derive(Clone, Debug)]
pub struct HermiteInterpolant<T> {
    basis: BasisSystem<T>,
    coefficients: Vec<T>,
}

impl<T: Real> HermiteInterpolant<T> {
    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn derivative(&self, x: T, order: usize) -> Result<T> {
        let mut s = T::zero();
        for (i, &c) in self.coefficients.iter().enumerate() {
            s += c * self.basis.derivative(i, x, order)?;
        }
        Ok(s)
    }

    pub fn eval(&self, x: T) -> Result<T> {
        self.derivative(x, 0)
    }
}

/// Solves `V^T c = f`.
///
/// Only exact singularity (a zero pivot or non-finite solution) is an error.
/// Monomial-type systems of moderate size have tiny normalised determinants
/// without being singular, so the [`SINGULAR_THRESHOLD`] flag of the
/// collocation matrix is left to callers as a diagnostic.
pub fn hermite_interpolant<T: Real>(basis: &BasisSystem<T>, data: &HermiteData<T>) -> Result<HermiteInterpolant<T>> {
    let col = collocation_matrix(basis, &data.points, &data.multiplicities)?;
    let coefficients = Lu::factor(&col.matrix.transpose())
        .solve(&data.flat_values())
        .filter(|c| c.iter().all(|v| v.is_finite()))
        .ok_or_else(|| {
            BqError::Singular(format!(
                "collocation matrix is singular (normalised determinant {:e})",
                col.normalized_det.as_f64()
            ))
        })?;
    Ok(HermiteInterpolant { basis: basis.clone(), coefficients })
}

/// Strict sign alternations of `f` on a uniform grid of `grid_size` points
/// over `[a, b]`, ignoring values with `|f| <= SIGN_FLOOR`.
pub fn sign_changes<T: Real>(f: impl Fn(T) -> T, a: T, b: T, grid_size: usize) -> Result<usize> {
    if grid_size < 2 {
        return Err(BqError::InvalidParameter("grid needs at least two points".into()));
    }
    let floor = T::lit(SIGN_FLOOR);
    let mut last: Option<bool> = None;
    let mut changes = 0;
    for k in 0..grid_size {
        let x = a + (b - a) * T::from_count(k) / T::from_count(grid_size - 1);
        let v = f(x);
        if v.abs() <= floor {
            continue;
        }
        let positive = v > T::zero();
        if last.is_some_and(|p| p != positive) {
            changes += 1;
        }
        last = Some(positive);
    }
    Ok(changes)
}

/// Grid size for [`sign_changes`] at the default density.
pub fn default_grid_size<T: Real>(a: T, b: T) -> usize {
    ((b - a).as_f64() * GRID_PER_UNIT).ceil().max(2.0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub trial: usize,
    pub min_normalized_det: f64,
    pub flag: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    pub min_normalized_det: f64,
    pub singular_count: usize,
}

impl ProbeReport {
    fn from_rows(rows: Vec<ProbeRow>) -> Self {
        let min_normalized_det = rows.iter().map(|r| r.min_normalized_det).fold(f64::INFINITY, f64::min);
        let singular_count = rows.iter().filter(|r| r.flag).count();
        ProbeReport { rows, min_normalized_det, singular_count }
    }
}

/// Normalised determinant of `[K_{Y,X}]_{j,i} = k(y_j, x_i)`.
pub fn translate_matrix_det<T: Real>(kernel: &Kernel<T>, xs: &[T], ys: &[T]) -> Result<T> {
    if xs.len() != ys.len() {
        return Err(BqError::DimensionMismatch { expected: xs.len(), found: ys.len() });
    }
    let n = xs.len();
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            m[(j, i)] = kernel.eval(&[ys[j]], &[xs[i]])?;
        }
    }
    Ok(normalized_determinant(&m))
}

/// Where the random `X` and `Y` of a probe are drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbeLayout {
    /// Both sets uniform on `[lo, hi]`.
    Mixed { lo: f64, hi: f64 },
    /// `X` uniform on `[lo, mid)` and `Y` on `(mid, hi]`, so `max X < min Y`.
    Separated { lo: f64, mid: f64, hi: f64 },
}

/// Order-one total positivity probe: for `trials` random sets of `n` distinct
/// points, the normalised determinant of the translate matrix `K_{Y,X}`.
///
/// Points in each set are kept at least `min_spacing` apart (zero disables)
/// so that near-coincident draws do not masquerade as singularity.
pub fn total_positivity_probe<T: Real>(
    kernel: &Kernel<T>,
    n: usize,
    trials: usize,
    seed: u64,
    layout: ProbeLayout,
    min_spacing: f64,
) -> Result<ProbeReport> {
    if kernel.dim() != 1 {
        return Err(BqError::InvalidParameter("total positivity probes need a 1D kernel".into()));
    }
    if n == 0 {
        return Err(BqError::InvalidParameter("need at least one point".into()));
    }
    let (xr, yr) = match layout {
        ProbeLayout::Mixed { lo, hi } => ((lo, hi), (lo, hi)),
        ProbeLayout::Separated { lo, mid, hi } => ((lo, mid), (mid, hi)),
    };
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let xs = draw_spaced(&mut rng, n, xr, min_spacing)?;
        let ys = draw_spaced(&mut rng, n, yr, min_spacing)?;
        let det = translate_matrix_det(kernel, &xs, &ys)?.as_f64();
        rows.push(ProbeRow { trial, min_normalized_det: det, flag: det < SINGULAR_THRESHOLD });
    }
    Ok(ProbeReport::from_rows(rows))
}

fn draw_spaced<T: Real>(rng: &mut ChaCha8Rng, n: usize, (lo, hi): (f64, f64), spacing: f64) -> Result<Vec<T>> {
    if spacing * (n as f64) >= hi - lo {
        return Err(BqError::InvalidParameter("minimum spacing too large for the interval".into()));
    }
    let mut pts: Vec<f64> = Vec::with_capacity(n);
    let mut attempts = 0;
    while pts.len() < n {
        attempts += 1;
        if attempts > 100_000 {
            return Err(BqError::InvalidParameter("could not place spaced points".into()));
        }
        let x = rng.random_range(lo..hi);
        if x > lo && pts.iter().all(|&p| (p - x).abs() > spacing && p != x) {
            pts.push(x);
        }
    }
    pts.sort_by(f64::total_cmp);
    Ok(pts.into_iter().map(T::lit).collect())
}

/// The exponential-kernel counterexample: `X = {x1, x2}`, `Y = X + h` with
/// `h > x2 - x1`. Every `y` exceeds every `x`, so `K_{Y,X}` has rank one.
pub fn shifted_pair_det<T: Real>(kernel: &Kernel<T>, x1: T, x2: T, h: T) -> Result<T> {
    translate_matrix_det(kernel, &[x1, x2], &[x1 + h, x2 + h])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Smoothness;
    use approx::assert_relative_eq;

    #[test]
    fn monomial_collocation() {
        let c = collocation_matrix(&BasisSystem::<f64>::Monomial(2), &[0.0, 1.0], &[1, 1]).unwrap();
        assert_eq!(c.matrix.to_f64_rows(), vec![vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!(!c.singular);
    }

    #[test]
    fn exp_monomial_collocation() {
        let c = collocation_matrix(&BasisSystem::<f64>::ExpMonomial(2), &[0.0, 1.0], &[1, 1]).unwrap();
        let e = 1f64.exp();
        let m = c.matrix.to_f64_rows();
        assert_relative_eq!(m[0][1], e, max_relative = 1e-15);
        assert_eq!(m[1][0], 0.0);
        assert_relative_eq!(m[1][1], e, max_relative = 1e-15);
        assert_relative_eq!(Lu::factor(&c.matrix).determinant(), e, max_relative = 1e-15);
    }

    #[test]
    fn exp_monomial_derivatives_match_finite_differences() {
        let b = BasisSystem::<f64>::ExpMonomial(4);
        let h = 1e-5;
        for i in 0..4 {
            for order in 0..2 {
                let fd =
                    (b.derivative(i, 0.7 + h, order).unwrap() - b.derivative(i, 0.7 - h, order).unwrap()) / (2.0 * h);
                assert_relative_eq!(b.derivative(i, 0.7, order + 1).unwrap(), fd, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn quadratic_hermite_example() {
        let data = HermiteData::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0, 0.0]]).unwrap();
        let s = hermite_interpolant(&BasisSystem::Monomial(3), &data).unwrap();
        let c = s.coefficients();
        assert!(c[0].abs() < 1e-15 && (c[1] - 2.0).abs() < 1e-14 && (c[2] + 1.0).abs() < 1e-14);
        let zero = HermiteData::new(vec![0.0, 0.5, 1.0], vec![vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        let s = hermite_interpolant(&BasisSystem::ExpMonomial(3), &zero).unwrap();
        assert!(s.coefficients().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn bump_has_no_sign_change() {
        let nodes = [0.2, 0.45, 0.7, 0.9];
        for i in 0..nodes.len() {
            let data = bump_data(0.0, &nodes, i).unwrap();
            let s = hermite_interpolant(&BasisSystem::ExpMonomial(2 * nodes.len()), &data).unwrap();
            assert!((s.eval(nodes[i]).unwrap() - 1.0).abs() < 1e-8);
            let n = sign_changes(|x| s.eval(x).unwrap(), 0.0, 1.0, 10_000).unwrap();
            assert_eq!(n, 0, "bump {i}");
        }
    }

    #[test]
    fn sign_change_examples() {
        assert_eq!(sign_changes(|x: f64| x - 0.5, 0.0, 1.0, 1000).unwrap(), 1);
        assert_eq!(sign_changes(|x: f64| (x - 0.5).powi(2), 0.0, 1.0, 1000).unwrap(), 0);
        assert_eq!(sign_changes(|x: f64| (10.0 * x).sin(), 0.0, 1.0, 1000).unwrap(), 3);
    }

    #[test]
    fn exponential_shift_is_singular() {
        let k = Kernel::matern(Smoothness::Half, 1.0, 1).unwrap();
        let det: f64 = shifted_pair_det(&k, 0.1, 0.4, 0.5).unwrap();
        assert!(det < SINGULAR_THRESHOLD, "{det}");
        let g = Kernel::gaussian(1.0, 1).unwrap();
        assert!(shifted_pair_det(&g, 0.1, 0.4, 0.5).unwrap() > 1e-6);
    }

    #[test]
    fn separated_matern32_is_singular_beyond_two_points() {
        let k = Kernel::matern(Smoothness::ThreeHalves, 0.5, 1).unwrap();
        let layout = ProbeLayout::Separated { lo: 0.0, mid: 0.5, hi: 1.0 };
        let r = total_positivity_probe(&k, 3, 50, 1, layout, 0.0).unwrap();
        assert_eq!(r.singular_count, 50);
        let r = total_positivity_probe(&k, 2, 50, 1, layout, 0.0).unwrap();
        assert_eq!(r.singular_count, 0);
    }

    #[test]
    fn determinant_sign_under_reordering() {
        let b = BasisSystem::<f64>::ExpMonomial(3);
        let a = collocation_matrix(&b, &[0.1, 0.5, 0.9], &[1, 1, 1]).unwrap();
        let swapped = collocation_matrix(&b, &[0.5, 0.1, 0.9], &[1, 1, 1]).unwrap();
        let da = Lu::factor(&a.matrix).determinant();
        let ds = Lu::factor(&swapped.matrix).determinant();
        assert_relative_eq!(da, -ds, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(HermiteData::new(vec![0.0, 0.0], vec![vec![1.0], vec![1.0]]).is_err());
        assert!(collocation_matrix(&BasisSystem::<f64>::Monomial(3), &[0.0, 1.0], &[1, 1]).is_err());
        let k = Kernel::gaussian(1.0, 1).unwrap();
        let b = BasisSystem::translates(k, vec![0.0, 1.0]).unwrap();
        assert!(b.derivative(0, 0.5, 2).is_err());
    }
}
