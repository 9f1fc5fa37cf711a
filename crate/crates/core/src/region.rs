//! Identification regions on θ-grids and prior mass of the δ-boundary.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridAxes, GridSpec};
use crate::limit::{check_prior, check_variant, lambda_hat, write_node_csv, LimitKind};
use crate::model::{Dataset, MomentModel, Prior};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionSource {
    Estimated,
    Population,
}

/// Node indicator of `{θ : λ̂(θ) ∈ Λ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid<T> {
    pub axes: GridAxes<T>,
    pub membership: Vec<bool>,
    pub source: RegionSource,
}

impl<T: Scalar> RegionGrid<T> {
    pub fn count(&self) -> usize {
        self.membership.iter().filter(|m| **m).count()
    }

    pub fn is_empty_region(&self) -> bool {
        self.count() == 0
    }

    /// Trapezoid prior mass `∫ p(θ)·1[θ ∈ region] dθ`.
    pub fn prior_mass(&self, prior: &Prior<T>) -> T {
        let vals: Vec<T> = self
            .axes
            .nodes()
            .zip(&self.membership)
            .map(|(t, m)| if *m { prior.theta_density(&t) } else { T::zero() })
            .collect();
        self.axes.integrate(&vals)
    }

    /// Smallest and largest member node along each axis.
    pub fn bounding_box(&self) -> Option<(Vec<T>, Vec<T>)> {
        let d = self.axes.dim();
        let mut lo = vec![T::infinity(); d];
        let mut hi = vec![T::neg_infinity(); d];
        for (t, m) in self.axes.nodes().zip(&self.membership) {
            if *m {
                for k in 0..d {
                    lo[k] = lo[k].min(t[k]);
                    hi[k] = hi[k].max(t[k]);
                }
            }
        }
        (!self.is_empty_region()).then_some((lo, hi))
    }

    /// CSV with columns `theta_1[,theta_2],member`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let flags = self.membership.iter().map(|m| if *m { "1" } else { "0" }.to_string());
        write_node_csv(&self.axes, "member", flags, writer)
    }
}

fn region_grid<T: Scalar>(
    model: &MomentModel<T>,
    data: Option<&Dataset<T>>,
    kind: LimitKind,
    resolution: &GridSpec,
) -> Result<RegionGrid<T>> {
    check_variant(model, data, kind)?;
    let axes = GridAxes::uniform(model.theta_box(), resolution)?;
    let region = model.lambda_region();
    let membership = (0..axes.len())
        .into_par_iter()
        .map(|i| Ok(region.contains(&lambda_hat(model, data, kind, &axes.node(i))?)))
        .collect::<Result<Vec<bool>>>()?;
    let source = match kind {
        LimitKind::Plugin => RegionSource::Estimated,
        LimitKind::Population => RegionSource::Population,
    };
    Ok(RegionGrid { axes, membership, source })
}

/// `{θ : λ̃(θ) ∈ Λ}`; an empty result is legal here.
pub fn estimate_region<T: Scalar>(
    model: &MomentModel<T>,
    data: &Dataset<T>,
    resolution: &GridSpec,
) -> Result<RegionGrid<T>> {
    region_grid(model, Some(data), LimitKind::Plugin, resolution)
}

/// `{θ : λ(θ) ∈ Λ}` from the population oracle.
pub fn population_region<T: Scalar>(model: &MomentModel<T>, resolution: &GridSpec) -> Result<RegionGrid<T>> {
    region_grid(model, None, LimitKind::Population, resolution)
}

/// Cell volume times the number of nodes where exactly one region holds.
pub fn region_symmetric_difference<T: Scalar>(a: &RegionGrid<T>, b: &RegionGrid<T>) -> Result<T> {
    if !a.axes.same_axes(&b.axes) {
        return Err(Error::input("region grids have different axes"));
    }
    let xor = a.membership.iter().zip(&b.membership).filter(|(x, y)| x != y).count();
    Ok(a.axes.cell_volume() * T::from_count(xor))
}

/// Sub-steps per base cell keep the change of `λ` below δ/`REFINE` per step.
const REFINE: f64 = 16.0;
const MAX_SUBSTEPS_1D: usize = 4096;
/// Cap on refined points per 2-D grid.
const MAX_POINTS_2D: f64 = 2.0e7;

/// Trapezoid estimate of `∫ p(θ)·1[λ(θ) ∈ ∂_δΛ] dθ`.
pub fn boundary_mass<T: Scalar>(
    model: &MomentModel<T>,
    prior: &Prior<T>,
    delta: T,
    resolution: &GridSpec,
) -> Result<T> {
    Ok(boundary_mass_curve(model, prior, &[delta], resolution)?[0])
}

/// `boundary_mass` at several δ on one shared refinement (fixed by the
/// smallest δ), so the curve is nondecreasing in δ.
pub fn boundary_mass_curve<T: Scalar>(
    model: &MomentModel<T>,
    prior: &Prior<T>,
    deltas: &[T],
    resolution: &GridSpec,
) -> Result<Vec<T>> {
    check_prior(model, prior)?;
    check_variant(model, None, LimitKind::Population)?;
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > T::zero()) || !d.is_finite()) {
        return Err(Error::input("boundary mass needs positive finite delta values"));
    }
    let axes = GridAxes::uniform(model.theta_box(), resolution)?;
    let lambdas = (0..axes.len())
        .into_par_iter()
        .map(|i| model.population_moment(&axes.node(i)))
        .collect::<Result<Vec<Vec<T>>>>()?;
    let step = deltas.iter().fold(T::infinity(), |m, d| m.min(*d)) / T::lit(REFINE);
    let region = model.lambda_region();
    let cells = cell_origins(&axes);
    let max_sub = match axes.dim() {
        1 => MAX_SUBSTEPS_1D,
        _ => ((MAX_POINTS_2D / cells.len() as f64).sqrt().floor() as usize).max(1),
    };
    let lambdas = &lambdas;
    let per_cell: Vec<Vec<T>> = cells
        .par_iter()
        .map(|origin| {
            let corners = cell_corners(&axes, origin);
            let spread = corners
                .iter()
                .flat_map(|a| corners.iter().map(move |b| crate::model::euclidean(&lambdas[*a], &lambdas[*b])))
                .fold(T::zero(), |m, d| m.max(d));
            let r = ((spread / step).ceil().as_f64() as usize).clamp(1, max_sub);
            cell_masses(&axes, lambdas, origin, &corners, r, prior, deltas, |l| region.boundary_distance(l))
        })
        .collect();
    let mut total = vec![T::zero(); deltas.len()];
    for masses in per_cell {
        for (t, m) in total.iter_mut().zip(masses) {
            *t = *t + m;
        }
    }
    Ok(total)
}

fn cell_origins<T: Scalar>(axes: &GridAxes<T>) -> Vec<Vec<usize>> {
    let shape = axes.shape();
    match shape.len() {
        1 => (0..shape[0] - 1).map(|i| vec![i]).collect(),
        _ => (0..shape[0] - 1).flat_map(|i| (0..shape[1] - 1).map(move |j| vec![i, j])).collect(),
    }
}

/// Flat indices of the cell corners, axis-1 offset major.
fn cell_corners<T: Scalar>(axes: &GridAxes<T>, origin: &[usize]) -> Vec<usize> {
    match origin.len() {
        1 => vec![origin[0], origin[0] + 1],
        _ => {
            let m = axes.shape()[1];
            let (i, j) = (origin[0], origin[1]);
            vec![i * m + j, i * m + j + 1, (i + 1) * m + j, (i + 1) * m + j + 1]
        }
    }
}

/// Per-δ trapezoid masses over one base cell split into `r` steps per axis,
/// with `λ` multilinear between the corner values.
#[allow(clippy::too_many_arguments)]
fn cell_masses<T: Scalar>(
    axes: &GridAxes<T>,
    lambdas: &[Vec<T>],
    origin: &[usize],
    corners: &[usize],
    r: usize,
    prior: &Prior<T>,
    deltas: &[T],
    bdist: impl Fn(&[T]) -> T,
) -> Vec<T> {
    let d = origin.len();
    let k = lambdas[0].len();
    let lo: Vec<T> = (0..d).map(|a| axes.axes()[a][origin[a]]).collect();
    let hi: Vec<T> = (0..d).map(|a| axes.axes()[a][origin[a] + 1]).collect();
    let rr = T::from_count(r);
    let half = T::lit(0.5);
    let weight = |i: usize| if i == 0 || i == r { half } else { T::one() };
    let mut out = vec![T::zero(); deltas.len()];
    let points: Vec<Vec<usize>> = match d {
        1 => (0..=r).map(|i| vec![i]).collect(),
        _ => (0..=r).flat_map(|i| (0..=r).map(move |j| vec![i, j])).collect(),
    };
    let mut lambda = vec![T::zero(); k];
    for p in points {
        let s: Vec<T> = p.iter().map(|i| T::from_count(*i) / rr).collect();
        let theta: Vec<T> = (0..d).map(|a| lo[a] + s[a] * (hi[a] - lo[a])).collect();
        let dens = prior.theta_density(&theta);
        if dens == T::zero() {
            continue;
        }
        let coef: Vec<T> = match d {
            1 => vec![T::one() - s[0], s[0]],
            _ => vec![
                (T::one() - s[0]) * (T::one() - s[1]),
                (T::one() - s[0]) * s[1],
                s[0] * (T::one() - s[1]),
                s[0] * s[1],
            ],
        };
        for (j, l) in lambda.iter_mut().enumerate() {
            *l = corners.iter().zip(&coef).map(|(c, w)| lambdas[*c][j] * *w).sum();
        }
        let dist = bdist(&lambda);
        let w = p.iter().fold(dens, |acc, i| acc * weight(*i));
        for (o, delta) in out.iter_mut().zip(deltas) {
            if dist <= *delta {
                *o = *o + w;
            }
        }
    }
    let vol = (0..d).fold(T::one(), |acc, a| acc * (hi[a] - lo[a]) / rr);
    out.into_iter().map(|m| m * vol).collect()
}
