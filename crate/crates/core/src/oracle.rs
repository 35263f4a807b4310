//! Independent numerical integration.
//!
//! Used to validate the closed-form kernel means and as the fallback for
//! kernel/measure pairs without one. One-dimensional integrals use adaptive
//! Gauss–Kronrod 7–15 with user breakpoints (kernel kinks); two-dimensional
//! integrals nest the 1D rule; higher dimensions use seeded Monte Carlo.
//!
//! The Gauss–Kronrod nodes are double-precision constants, so results in a
//! wider scalar type are still only double-accurate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{BqError, Result};
use crate::kernels::Kernel;
use crate::measures::Measure;
use crate::scalar::Real;

/// Standard-Gaussian integrals are truncated to `[-8, 8]` per coordinate.
/// The discarded mass `erfc(8 / sqrt 2)` is about `1.2e-15`.
pub const GAUSSIAN_TRUNCATION: f64 = 8.0;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Value with an error estimate (absolute error for adaptive rules, standard
/// error for Monte Carlo).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Samples for the Monte Carlo fallback in `d > 2`.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { abs_tol: 1e-13, rel_tol: 1e-12, max_subdivisions: 4000, mc_samples: 100_000, seed: 0 }
    }
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn gauss_kronrod<T: Real>(f: &mut impl FnMut(T) -> Result<T>, a: T, b: T) -> Result<Segment<T>> {
    let two = T::lit(2.0);
    let centre = (a + b) / two;
    let half = (b - a) / two;
    let fc = f(centre)?;
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for k in 0..7 {
        let dx = half * T::lit(XGK[k]);
        let pair = f(centre - dx)? + f(centre + dx)?;
        kronrod += T::lit(WGK[k]) * pair;
        if k % 2 == 1 {
            gauss += T::lit(WG[k / 2]) * pair;
        }
    }
    Ok(Segment { a, b, value: kronrod * half, error: ((kronrod - gauss) * half).abs() })
}

/// Adaptive integral of `f` over `[a, b]`, splitting first at `breakpoints`
/// that fall strictly inside the interval.
pub fn integrate_interval<T: Real>(
    mut f: impl FnMut(T) -> Result<T>,
    a: T,
    b: T,
    breakpoints: &[T],
    opts: &OracleOptions,
) -> Result<Estimate<T>> {
    if !(a < b) {
        return Err(BqError::InvalidParameter("integration interval must satisfy a < b".into()));
    }
    let mut cuts: Vec<T> = breakpoints.iter().copied().filter(|&p| p > a && p < b).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    cuts.dedup();
    let mut edges = vec![a];
    edges.extend(cuts);
    edges.push(b);

    let mut segments = Vec::new();
    for w in edges.windows(2) {
        segments.push(gauss_kronrod(&mut f, w[0], w[1])?);
    }
    let tol = |value: T| T::lit(opts.abs_tol).max(T::lit(opts.rel_tol) * value.abs());
    loop {
        let value: T = segments.iter().map(|s| s.value).sum();
        let error: T = segments.iter().map(|s| s.error).sum();
        if error <= tol(value) {
            return Ok(Estimate { value, error });
        }
        if segments.len() >= opts.max_subdivisions {
            return Err(BqError::NoConvergence { subdivisions: segments.len(), error: error.as_f64() });
        }
        let worst =
            segments.iter().enumerate().fold(0, |best, (i, s)| if s.error > segments[best].error { i } else { best });
        let s = segments.swap_remove(worst);
        let mid = (s.a + s.b) / T::lit(2.0);
        if !(mid > s.a && mid < s.b) {
            return Err(BqError::NoConvergence { subdivisions: segments.len() + 1, error: error.as_f64() });
        }
        segments.push(gauss_kronrod(&mut f, s.a, mid)?);
        segments.push(gauss_kronrod(&mut f, mid, s.b)?);
    }
}

/// Effective integration range and density of a one-dimensional measure
/// along coordinate `j`.
fn coordinate_range<T: Real>(measure: &Measure<T>, j: usize) -> (T, T, T) {
    match measure {
        Measure::StdGaussian { .. } => {
            let t = T::lit(GAUSSIAN_TRUNCATION);
            (-t, t, T::zero())
        }
        Measure::UniformBox(b) => (b.lower()[j], b.upper()[j], T::one() / (b.upper()[j] - b.lower()[j])),
    }
}

fn density_factor<T: Real>(measure: &Measure<T>, t: T, uniform_density: T) -> T {
    match measure {
        Measure::StdGaussian { .. } => (-t.square() / T::lit(2.0)).exp() / (T::lit(2.0) * T::pi()).sqrt(),
        Measure::UniformBox(_) => uniform_density,
    }
}

/// `\int f dnu` for a one-dimensional measure.
pub fn integrate_1d<T: Real>(f: impl Fn(T) -> T, measure: &Measure<T>, abs_tol: f64) -> Result<Estimate<T>> {
    let opts = OracleOptions { abs_tol, ..OracleOptions::default() };
    integrate_1d_with(|t| Ok(f(t)), measure, &[], &opts)
}

/// As [`integrate_1d`] with a fallible integrand, breakpoints and options.
pub fn integrate_1d_with<T: Real>(
    mut f: impl FnMut(T) -> Result<T>,
    measure: &Measure<T>,
    breakpoints: &[T],
    opts: &OracleOptions,
) -> Result<Estimate<T>> {
    if measure.dim() != 1 {
        return Err(BqError::DimensionMismatch { expected: 1, found: measure.dim() });
    }
    let (a, b, u) = coordinate_range(measure, 0);
    integrate_interval(|t| Ok(f(t)? * density_factor(measure, t, u)), a, b, breakpoints, opts)
}

/// `\int f dnu` for a two-dimensional measure by nesting the adaptive rule.
/// `breakpoints[j]` are kink locations along coordinate `j`.
pub fn integrate_2d_with<T: Real>(
    mut f: impl FnMut(&[T]) -> Result<T>,
    measure: &Measure<T>,
    breakpoints: [&[T]; 2],
    opts: &OracleOptions,
) -> Result<Estimate<T>> {
    if measure.dim() != 2 {
        return Err(BqError::DimensionMismatch { expected: 2, found: measure.dim() });
    }
    let (a0, b0, u0) = coordinate_range(measure, 0);
    let (a1, b1, u1) = coordinate_range(measure, 1);
    let inner_opts = OracleOptions { abs_tol: opts.abs_tol * 0.1, ..*opts };
    let mut inner_error = T::zero();
    let outer = integrate_interval(
        |s| {
            let inner = integrate_interval(
                |t| Ok(f(&[s, t])? * density_factor(measure, t, u1)),
                a1,
                b1,
                breakpoints[1],
                &inner_opts,
            )?;
            inner_error = inner_error.max(inner.error);
            Ok(inner.value * density_factor(measure, s, u0))
        },
        a0,
        b0,
        breakpoints[0],
        opts,
    )?;
    Ok(Estimate { value: outer.value, error: outer.error + inner_error })
}

/// Monte Carlo mean of `f` under `nu` with its standard error. Draws are
/// consumed sequentially from one seeded stream, so results are bit-stable.
pub fn integrate_mc<T: Real>(
    mut f: impl FnMut(&[T]) -> T,
    measure: &Measure<T>,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate<T>> {
    if n_samples < 2 {
        return Err(BqError::InvalidParameter("Monte Carlo needs at least two samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = measure.dim();
    let mut x = vec![T::zero(); d];
    // Welford accumulation.
    let mut mean = T::zero();
    let mut m2 = T::zero();
    for i in 0..n_samples {
        draw(measure, &mut rng, &mut x);
        let v = f(&x);
        let delta = v - mean;
        mean += delta / T::from_count(i + 1);
        m2 += delta * (v - mean);
    }
    let n = T::from_count(n_samples);
    let var = m2 / (n - T::one());
    let var = if var < T::zero() { T::zero() } else { var };
    Ok(Estimate { value: mean, error: (var / n).sqrt() })
}

fn draw<T: Real>(measure: &Measure<T>, rng: &mut ChaCha8Rng, x: &mut [T]) {
    match measure {
        Measure::StdGaussian { .. } => {
            for xi in x.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *xi = T::lit(z);
            }
        }
        Measure::UniformBox(b) => {
            for (j, xi) in x.iter_mut().enumerate() {
                let u: f64 = rng.random();
                *xi = b.lower()[j] + (b.upper()[j] - b.lower()[j]) * T::lit(u);
            }
        }
    }
}

/// Numerical kernel mean `\int k(y, x) dnu(y)`.
pub fn kernel_mean<T: Real>(
    kernel: &Kernel<T>,
    measure: &Measure<T>,
    x: &[T],
    opts: &OracleOptions,
) -> Result<Estimate<T>> {
    check(kernel, measure, x)?;
    match measure.dim() {
        1 => integrate_1d_with(|t| kernel.eval(&[t], x), measure, &[x[0]], opts),
        2 => integrate_2d_with(|y| kernel.eval(y, x), measure, [&[x[0]], &[x[1]]], opts),
        _ => {
            let mut failure = None;
            let est = integrate_mc(
                |y| {
                    kernel.eval(y, x).unwrap_or_else(|e| {
                        failure.get_or_insert(e);
                        T::zero()
                    })
                },
                measure,
                opts.mc_samples,
                opts.seed,
            )?;
            failure.map_or(Ok(est), Err)
        }
    }
}

/// Numerical gradient of the kernel mean, `\int d/dx_j k(y, x) dnu(y)`.
pub fn kernel_mean_grad<T: Real>(
    kernel: &Kernel<T>,
    measure: &Measure<T>,
    x: &[T],
    opts: &OracleOptions,
) -> Result<Vec<Estimate<T>>> {
    check(kernel, measure, x)?;
    (0..measure.dim())
        .map(|j| match measure.dim() {
            1 => integrate_1d_with(|t| kernel.eval_dy(&[t], x, j), measure, &[x[0]], opts),
            2 => integrate_2d_with(|y| kernel.eval_dy(y, x, j), measure, [&[x[0]], &[x[1]]], opts),
            _ => {
                let mut failure = None;
                let est = integrate_mc(
                    |y| {
                        kernel.eval_dy(y, x, j).unwrap_or_else(|e| {
                            failure.get_or_insert(e);
                            T::zero()
                        })
                    },
                    measure,
                    opts.mc_samples,
                    opts.seed.wrapping_add(j as u64 + 1),
                )?;
                failure.map_or(Ok(est), Err)
            }
        })
        .collect()
}

/// Numerical `\int\int k dnu dnu`: nested adaptive in `d = 1`, Monte Carlo
/// over pairs otherwise.
pub fn initial_variance<T: Real>(
    kernel: &Kernel<T>,
    measure: &Measure<T>,
    opts: &OracleOptions,
) -> Result<Estimate<T>> {
    if kernel.dim() != measure.dim() {
        return Err(BqError::DimensionMismatch { expected: kernel.dim(), found: measure.dim() });
    }
    if measure.dim() == 1 {
        let inner_opts = OracleOptions { abs_tol: opts.abs_tol * 0.1, ..*opts };
        let mut inner_error = T::zero();
        let outer = integrate_1d_with(
            |s| {
                let inner = integrate_1d_with(|t| kernel.eval(&[t], &[s]), measure, &[s], &inner_opts)?;
                inner_error = inner_error.max(inner.error);
                Ok(inner.value)
            },
            measure,
            &[],
            opts,
        )?;
        return Ok(Estimate { value: outer.value, error: outer.error + inner_error });
    }
    let d = measure.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut x, mut y) = (vec![T::zero(); d], vec![T::zero(); d]);
    let mut mean = T::zero();
    let mut m2 = T::zero();
    for i in 0..opts.mc_samples.max(2) {
        draw(measure, &mut rng, &mut x);
        draw(measure, &mut rng, &mut y);
        let v = kernel.eval(&x, &y)?;
        let delta = v - mean;
        mean += delta / T::from_count(i + 1);
        m2 += delta * (v - mean);
    }
    let n = T::from_count(opts.mc_samples.max(2));
    Ok(Estimate { value: mean, error: (m2 / (n - T::one()) / n).sqrt() })
}

fn check<T: Real>(kernel: &Kernel<T>, measure: &Measure<T>, x: &[T]) -> Result<()> {
    if kernel.dim() != measure.dim() {
        return Err(BqError::DimensionMismatch { expected: kernel.dim(), found: measure.dim() });
    }
    if x.len() != kernel.dim() {
        return Err(BqError::DimensionMismatch { expected: kernel.dim(), found: x.len() });
    }
    Ok(())
}
