//! Rectangular node grids over Θ (dimension 1 or 2) shared by density and
//! region grids, with trapezoid weights, piecewise-(bi)linear interpolation
//! and inverse-CDF sampling of the interpolant.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParamBox;
use crate::quadrature::trapezoid_weights;
use crate::scalar::Scalar;

/// Default node count per axis for one-dimensional grids.
pub const DEFAULT_NODES_1D: usize = 2048;
/// Default node count per axis for two-dimensional grids.
pub const DEFAULT_NODES_2D: usize = 256;
/// Largest Θ dimension accepted by grid-based operations.
pub const MAX_GRID_DIM: usize = 2;

/// Requested grid resolution; `None` picks the per-dimension default.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nodes_per_axis: Option<Vec<usize>>,
}

impl GridSpec {
    pub fn uniform(nodes: usize) -> Self {
        Self { nodes_per_axis: Some(vec![nodes]) }
    }

    pub fn resolve(&self, dim: usize) -> Result<Vec<usize>> {
        if dim == 0 || dim > MAX_GRID_DIM {
            return Err(Error::unsupported(format!(
                "grid operations need 1 <= dim(theta) <= {MAX_GRID_DIM}, got {dim}"
            )));
        }
        let nodes = match &self.nodes_per_axis {
            None => vec![if dim == 1 { DEFAULT_NODES_1D } else { DEFAULT_NODES_2D }; dim],
            Some(v) if v.len() == 1 => vec![v[0]; dim],
            Some(v) if v.len() == dim => v.clone(),
            Some(v) => return Err(Error::input(format!("grid spec has {} axes, theta has {dim}", v.len()))),
        };
        if nodes.iter().any(|&k| k < 2) {
            return Err(Error::input("every grid axis needs at least 2 nodes"));
        }
        Ok(nodes)
    }
}

/// Strictly increasing node axes; nodes are stored first-axis-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxes<T> {
    axes: Vec<Vec<T>>,
}

impl<T: Scalar> GridAxes<T> {
    pub fn from_axes(axes: Vec<Vec<T>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_GRID_DIM {
            return Err(Error::unsupported(format!("grids support 1..={MAX_GRID_DIM} axes, got {}", axes.len())));
        }
        for (k, ax) in axes.iter().enumerate() {
            if ax.len() < 2 {
                return Err(Error::input(format!("axis {k} needs at least 2 nodes")));
            }
            if ax.windows(2).any(|w| !(w[1] > w[0])) || ax.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("axis {k} must be finite and strictly increasing")));
            }
        }
        Ok(Self { axes })
    }

    /// Evenly spaced nodes spanning the box, endpoints included exactly.
    pub fn uniform(bounds: &ParamBox<T>, spec: &GridSpec) -> Result<Self> {
        let counts = spec.resolve(bounds.dim())?;
        let axes = counts
            .iter()
            .enumerate()
            .map(|(k, &m)| {
                let (lo, hi) = (bounds.lower()[k], bounds.upper()[k]);
                let step = (hi - lo) / T::from_count(m - 1);
                (0..m).map(|i| if i + 1 == m { hi } else { lo + step * T::from_count(i) }).collect()
            })
            .collect();
        Self::from_axes(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<T>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lower(&self) -> Vec<T> {
        self.axes.iter().map(|a| a[0]).collect()
    }

    pub fn upper(&self) -> Vec<T> {
        self.axes.iter().map(|a| a[a.len() - 1]).collect()
    }

    /// Multi-index of the flat node index.
    pub fn index(&self, flat: usize) -> Vec<usize> {
        match self.dim() {
            1 => vec![flat],
            _ => {
                let m = self.axes[1].len();
                vec![flat / m, flat % m]
            }
        }
    }

    pub fn node(&self, flat: usize) -> Vec<T> {
        self.index(flat).iter().zip(&self.axes).map(|(&i, ax)| ax[i]).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<T>> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// Tensor-product trapezoid weights, one per node.
    pub fn trapezoid_weights(&self) -> Vec<T> {
        let per_axis: Vec<Vec<T>> = self.axes.iter().map(|a| trapezoid_weights(a)).collect();
        (0..self.len())
            .map(|flat| self.index(flat).iter().zip(&per_axis).fold(T::one(), |acc, (&i, w)| acc * w[i]))
            .collect()
    }

    pub fn integrate(&self, values: &[T]) -> T {
        self.trapezoid_weights().iter().zip(values).map(|(w, v)| *w * *v).sum()
    }

    /// Volume of one grid cell (product of mean node spacings).
    pub fn cell_volume(&self) -> T {
        self.axes.iter().map(|a| (a[a.len() - 1] - a[0]) / T::from_count(a.len() - 1)).fold(T::one(), |acc, h| acc * h)
    }

    pub fn same_axes(&self, other: &Self) -> bool {
        self.axes == other.axes
    }

    /// Cell index and fractional position of `x` along axis `k`; `None` outside.
    pub fn locate(&self, k: usize, x: T) -> Option<(usize, T)> {
        let ax = &self.axes[k];
        let last = ax.len() - 1;
        if !(x >= ax[0] && x <= ax[last]) {
            return None;
        }
        let upper = ax.partition_point(|v| *v <= x).clamp(1, last);
        let i = upper - 1;
        Some((i, (x - ax[i]) / (ax[i + 1] - ax[i])))
    }

    /// Piecewise-(bi)linear interpolant of node values; zero outside the grid.
    pub fn interpolate(&self, values: &[T], x: &[T]) -> T {
        match self.dim() {
            1 => match self.locate(0, x[0]) {
                Some((i, t)) => values[i] * (T::one() - t) + values[i + 1] * t,
                None => T::zero(),
            },
            _ => match (self.locate(0, x[0]), self.locate(1, x[1])) {
                (Some((i, s)), Some((j, t))) => {
                    let m = self.axes[1].len();
                    let v = |a: usize, b: usize| values[a * m + b];
                    let one = T::one();
                    v(i, j) * (one - s) * (one - t)
                        + v(i + 1, j) * s * (one - t)
                        + v(i, j + 1) * (one - s) * t
                        + v(i + 1, j + 1) * s * t
                }
                _ => T::zero(),
            },
        }
    }

    /// `∫_a^b` of each hat basis function along axis `k`.
    fn hat_integrals(&self, k: usize, a: T, b: T) -> Vec<T> {
        let ax = &self.axes[k];
        let mut out = vec![T::zero(); ax.len()];
        let half = T::lit(0.5);
        for i in 0..ax.len() - 1 {
            let (x0, x1) = (ax[i], ax[i + 1]);
            let lo = a.max(x0);
            let hi = b.min(x1);
            if !(hi > lo) {
                continue;
            }
            let h = x1 - x0;
            // Left hat decreases 1 -> 0 over the cell, right hat increases.
            let mid = half * (lo + hi);
            let right = (mid - x0) / h * (hi - lo);
            out[i + 1] = out[i + 1] + right;
            out[i] = out[i] + (hi - lo) - right;
        }
        out
    }

    /// Exact integral of the interpolant over the axis-aligned box `[lo, hi]`.
    pub fn integrate_box(&self, values: &[T], lo: &[T], hi: &[T]) -> T {
        let hats: Vec<Vec<T>> = (0..self.dim()).map(|k| self.hat_integrals(k, lo[k], hi[k])).collect();
        match self.dim() {
            1 => hats[0].iter().zip(values).map(|(h, v)| *h * *v).sum(),
            _ => {
                let m = self.axes[1].len();
                let mut s = T::zero();
                for (i, hi_) in hats[0].iter().enumerate() {
                    if *hi_ == T::zero() {
                        continue;
                    }
                    for (j, hj) in hats[1].iter().enumerate() {
                        if *hj != T::zero() {
                            s = s + *hi_ * *hj * values[i * m + j];
                        }
                    }
                }
                s
            }
        }
    }

    /// One draw from the density proportional to the interpolant of `values`.
    pub fn sample_interpolant<R: Rng + ?Sized>(&self, values: &[T], rng: &mut R) -> Result<Vec<T>> {
        InterpolantSampler::new(self, values)?.draw(rng)
    }
}

/// Cumulative cell masses of a piecewise-linear density on one axis.
#[derive(Debug, Clone)]
struct LinearCdf<T> {
    cum: Vec<T>,
}

impl<T: Scalar> LinearCdf<T> {
    fn new(nodes: &[T], values: &[T]) -> Result<Self> {
        let half = T::lit(0.5);
        let mut cum = Vec::with_capacity(nodes.len());
        let mut acc = T::zero();
        cum.push(acc);
        for (x, f) in nodes.windows(2).zip(values.windows(2)) {
            acc = acc + half * (x[1] - x[0]) * (f[0] + f[1]);
            cum.push(acc);
        }
        if !(acc > T::zero()) || !acc.is_finite() {
            return Err(Error::input("cannot sample from a grid with no positive mass"));
        }
        Ok(Self { cum })
    }

    /// Inverse CDF at `u ∈ [0, 1)`.
    fn invert(&self, nodes: &[T], values: &[T], u: f64) -> T {
        let total = self.cum[self.cum.len() - 1];
        let target = T::lit(u) * total;
        let cells = self.cum.len() - 1;
        let mut cell = self.cum.partition_point(|c| *c <= target).clamp(1, cells) - 1;
        // Skip empty cells left behind by rounding.
        while self.cum[cell + 1] <= self.cum[cell] && cell > 0 {
            cell -= 1;
        }
        let mass = self.cum[cell + 1] - self.cum[cell];
        let frac =
            if mass > T::zero() { ((target - self.cum[cell]) / mass).max(T::zero()).min(T::one()) } else { T::lit(u) };
        let t = solve_linear_cell(values[cell], values[cell + 1], frac);
        nodes[cell] + t * (nodes[cell + 1] - nodes[cell])
    }
}

/// Position `t ∈ [0, 1]` inside a cell with end values `f0, f1` at which the
/// fraction `frac` of the cell mass lies to the left.
fn solve_linear_cell<T: Scalar>(f0: T, f1: T, frac: T) -> T {
    let half = T::lit(0.5);
    // f0 t + (f1 − f0) t²/2 = frac (f0 + f1)/2
    let a = half * (f1 - f0);
    let b = f0;
    let c = -frac * half * (f0 + f1);
    let t = if a.abs() <= T::epsilon() * (f0.abs() + f1.abs()) {
        if b > T::zero() {
            -c / b
        } else {
            frac
        }
    } else {
        let disc = (b * b - T::lit(4.0) * a * c).max(T::zero());
        let q = -half * (b + disc.sqrt());
        let r1 = q / a;
        let r2 = if q != T::zero() { c / q } else { r1 };
        if r2 >= T::zero() && r2 <= T::one() {
            r2
        } else {
            r1
        }
    };
    t.max(T::zero()).min(T::one())
}

/// Reusable inverse-CDF sampler for the interpolant of node values: axis 1
/// from its marginal, then axis 2 from the conditional at the drawn point.
#[derive(Debug, Clone)]
pub struct InterpolantSampler<'a, T> {
    grid: &'a GridAxes<T>,
    values: &'a [T],
    marginal: Vec<T>,
    first: LinearCdf<T>,
}

impl<'a, T: Scalar> InterpolantSampler<'a, T> {
    pub fn new(grid: &'a GridAxes<T>, values: &'a [T]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::input(format!("{} values for {} grid nodes", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::input("grid values must be finite and nonnegative"));
        }
        let marginal: Vec<T> = match grid.dim() {
            1 => values.to_vec(),
            _ => {
                let w1 = trapezoid_weights(&grid.axes[1]);
                values
                    .chunks_exact(grid.axes[1].len())
                    .map(|row| row.iter().zip(&w1).map(|(v, w)| *v * *w).sum())
                    .collect()
            }
        };
        let first = LinearCdf::new(&grid.axes[0], &marginal)?;
        Ok(Self { grid, values, marginal, first })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<T>> {
        let x = self.first.invert(&self.grid.axes[0], &self.marginal, rng.gen::<f64>());
        if self.grid.dim() == 1 {
            return Ok(vec![x]);
        }
        let m = self.grid.axes[1].len();
        let (i, s) = self.grid.locate(0, x).expect("draw inside axis");
        let conditional: Vec<T> =
            (0..m).map(|j| self.values[i * m + j] * (T::one() - s) + self.values[(i + 1) * m + j] * s).collect();
        let cdf = LinearCdf::new(&self.grid.axes[1], &conditional)?;
        let y = cdf.invert(&self.grid.axes[1], &conditional, rng.gen::<f64>());
        Ok(vec![x, y])
    }
}
