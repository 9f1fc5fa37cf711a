//! Adaptive Gauss–Kronrod quadrature (1-D and nested n-D) and trapezoid
//! weights on uniform node sets.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

// 15-point Kronrod nodes on [0, 1] (positive half, symmetric) with the
// embedded 7-point Gauss weights.
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
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Tolerances and work limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 400 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_err: T,
    pub evaluations: usize,
    pub converged: bool,
}

fn kronrod<T: Scalar, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut result_k = fc * T::lit(WGK[7]);
    let mut result_g = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        result_k = result_k + T::lit(WGK[j]) * (f1 + f2);
        // Gauss nodes are the odd-indexed Kronrod nodes.
        if j % 2 == 1 {
            result_g = result_g + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let value = result_k * half_len;
    let err = ((result_k - result_g) * half_len).abs();
    (value, err)
}

/// Globally adaptive G7–K15 quadrature of `f` over `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the total
/// error meets `max(abs_tol, rel_tol·|I|)` or the interval budget runs out;
/// in the latter case `converged` is false and the best estimate is returned.
pub fn integrate<T: Scalar, F: FnMut(T) -> T>(mut f: F, a: T, b: T, opts: &QuadOptions) -> QuadResult<T> {
    if !(b > a) {
        return QuadResult { value: T::zero(), abs_err: T::zero(), evaluations: 0, converged: true };
    }
    let mut intervals: Vec<(T, T, T, T)> = Vec::with_capacity(64);
    let (v, e) = kronrod(&mut f, a, b);
    intervals.push((a, b, v, e));
    let mut evaluations = 15;
    let abs_tol = T::lit(opts.abs_tol);
    let rel_tol = T::lit(opts.rel_tol);
    loop {
        let total: T = intervals.iter().map(|iv| iv.2).sum();
        let err: T = intervals.iter().map(|iv| iv.3).sum();
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target || !err.is_finite() {
            return QuadResult { value: total, abs_err: err, evaluations, converged: err.is_finite() };
        }
        if intervals.len() >= opts.max_intervals {
            return QuadResult { value: total, abs_err: err, evaluations, converged: false };
        }
        let (idx, _) =
            intervals
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |acc, (i, iv)| if iv.3 > acc.1 { (i, iv.3) } else { acc });
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = T::lit(0.5) * (lo + hi);
        if !(mid > lo && mid < hi) {
            // Interval exhausted at floating-point resolution.
            let total: T = intervals.iter().map(|iv| iv.2).sum();
            let err: T = intervals.iter().map(|iv| iv.3).sum();
            return QuadResult { value: total, abs_err: err, evaluations, converged: false };
        }
        let (v1, e1) = kronrod(&mut f, lo, mid);
        let (v2, e2) = kronrod(&mut f, mid, hi);
        evaluations += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Nested adaptive quadrature over a region described coordinate by
/// coordinate: `limits(k, outer)` returns the integration range of
/// coordinate `k` given the already-fixed coordinates `outer = x[0..k]`.
pub fn integrate_nested<T, F, L>(f: &F, dim: usize, limits: &L, opts: &QuadOptions) -> Result<T>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
    L: Fn(usize, &[T]) -> (T, T),
{
    if dim == 0 {
        return Err(Error::input("nested quadrature needs at least one dimension"));
    }
    let point = vec![T::zero(); dim];
    let inner =
        QuadOptions { abs_tol: opts.abs_tol * 1e-2, rel_tol: opts.rel_tol * 1e-2, max_intervals: opts.max_intervals };
    Ok(nested_level(f, limits, 0, &point, opts, &inner))
}

fn nested_level<T, F, L>(f: &F, limits: &L, level: usize, point: &[T], opts: &QuadOptions, inner: &QuadOptions) -> T
where
    T: Scalar,
    F: Fn(&[T]) -> T,
    L: Fn(usize, &[T]) -> (T, T),
{
    let dim = point.len();
    let (lo, hi) = limits(level, &point[..level]);
    if !(hi > lo) {
        return T::zero();
    }
    let level_opts = if level == 0 { opts } else { inner };
    let mut scratch = point.to_vec();
    integrate(
        |x| {
            scratch[level] = x;
            if level + 1 == dim {
                f(&scratch)
            } else {
                nested_level(f, limits, level + 1, &scratch, opts, inner)
            }
        },
        lo,
        hi,
        level_opts,
    )
    .value
}

/// Composite trapezoid weights for a strictly increasing node set.
pub fn trapezoid_weights<T: Scalar>(nodes: &[T]) -> Vec<T> {
    let n = nodes.len();
    let mut w = vec![T::zero(); n];
    if n < 2 {
        return w;
    }
    let half = T::lit(0.5);
    for i in 0..n - 1 {
        let h = nodes[i + 1] - nodes[i];
        w[i] = w[i] + half * h;
        w[i + 1] = w[i + 1] + half * h;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::std_normal_pdf;

    #[test]
    fn integrates_polynomial_exactly() {
        let r = integrate(|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, &QuadOptions::default());
        assert!((r.value - 0.0).abs() < 1e-13);
        let r = integrate(|x: f64| x.powi(6), -1.0, 1.0, &QuadOptions::default());
        assert!((r.value - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn narrow_gaussian_over_wide_interval() {
        let s = 1e-3;
        let r = integrate(
            |x: f64| std_normal_pdf((x - 0.3) / s) / s,
            0.3 - 10.0 * s,
            0.3 + 10.0 * s,
            &QuadOptions::default(),
        );
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_function_converges_by_bisection() {
        let opts = QuadOptions { abs_tol: 1e-10, rel_tol: 1e-10, max_intervals: 2000 };
        let r = integrate(|x: f64| if x < 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, &opts);
        assert!((r.value - 0.3).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn nested_triangle_area() {
        // { 0 <= x <= y <= 1 } has area 1/2.
        let v = integrate_nested(
            &|_: &[f64]| 1.0,
            2,
            &|k, outer: &[f64]| if k == 0 { (0.0, 1.0) } else { (outer[0], 1.0) },
            &QuadOptions::default(),
        )
        .unwrap();
        assert!((v - 0.5).abs() < 1e-13);
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let nodes: Vec<f32> = (0..11).map(|i| i as f32 * 0.1).collect();
        let w = trapezoid_weights(&nodes);
        let s: f32 = w.iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
        assert!((w[0] - 0.05).abs() < 1e-7);
    }
}
