use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit::DensityGrid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    GridGrid,
    SampleGrid,
}

/// Unnormalized L1 distance `∫|f − g| ∈ [0, 2]` with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub l1: f64,
    pub method: DistanceMethod,
    /// Grid nodes (grid-grid) or histogram cells (sample-grid).
    pub bins_or_nodes: usize,
    /// Bootstrap noise level of the sample-based estimate.
    pub mc_se: Option<f64>,
    /// Draws that fell outside the grid's box.
    #[serde(default)]
    pub outside: usize,
}

/// Minimum draw count accepted by [`l1_samples_vs_grid`].
pub const MIN_DRAWS: usize = 1000;
const MAX_OUTSIDE_FRACTION: f64 = 0.01;

/// `⌈N^{1/3}⌉` clamped to `[16, 256]`.
pub fn default_bins(draws: usize) -> usize {
    ((draws as f64).cbrt().ceil() as usize).clamp(16, 256)
}

fn check_normalized<T: Scalar>(g: &DensityGrid<T>, what: &str) -> Result<()> {
    if !g.normalized {
        return Err(Error::input(format!("{what} grid is not normalized")));
    }
    Ok(())
}

/// Trapezoid `∫|f − g|` over shared axes.
pub fn l1_grid<T: Scalar>(f: &DensityGrid<T>, g: &DensityGrid<T>) -> Result<DistanceResult> {
    check_normalized(f, "first")?;
    check_normalized(g, "second")?;
    if !f.axes.same_axes(&g.axes) {
        return Err(Error::input("density grids have different axes"));
    }
    let diff: Vec<T> = f.values.iter().zip(&g.values).map(|(a, b)| (*a - *b).abs()).collect();
    let l1 = f.axes.integrate(&diff).as_f64().clamp(0.0, 2.0);
    Ok(DistanceResult { l1, method: DistanceMethod::GridGrid, bins_or_nodes: f.axes.len(), mc_se: None, outside: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub resamples: usize,
    /// Length of the circular blocks; 1 is the iid bootstrap.
    pub block_len: usize,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self { resamples: 200, block_len: 1, seed: 0 }
    }
}

struct Histogram {
    per_axis: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Histogram {
    fn cells(&self, dim: usize) -> usize {
        self.per_axis.pow(dim as u32)
    }

    /// Cell index of an in-box draw.
    fn cell(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for k in 0..x.len() {
            if !(x[k] >= self.lo[k] && x[k] <= self.hi[k]) {
                return None;
            }
            let b = (((x[k] - self.lo[k]) / (self.hi[k] - self.lo[k])) * self.per_axis as f64) as usize;
            idx = idx * self.per_axis + b.min(self.per_axis - 1);
        }
        Some(idx)
    }

    fn bounds(&self, cell: usize, dim: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rest = cell;
        let mut idx = vec![0; dim];
        for k in (0..dim).rev() {
            idx[k] = rest % self.per_axis;
            rest /= self.per_axis;
        }
        let lo =
            (0..dim).map(|k| self.lo[k] + (self.hi[k] - self.lo[k]) * idx[k] as f64 / self.per_axis as f64).collect();
        let hi = (0..dim)
            .map(|k| self.lo[k] + (self.hi[k] - self.lo[k]) * (idx[k] + 1) as f64 / self.per_axis as f64)
            .collect();
        (lo, hi)
    }
}

fn histogram_l1(counts: &[usize], outside: usize, total: usize, masses: &[f64]) -> f64 {
    let n = total as f64;
    let inside: f64 = counts.iter().zip(masses).map(|(c, p)| (*c as f64 / n - p).abs()).sum();
    (inside + outside as f64 / n).clamp(0.0, 2.0)
}

/// L1 between the histogram of `draws` and the grid's cell masses.
///
/// `bins` is the total cell count; 2-D grids use `⌊√bins⌋` cells per axis.
/// `mc_se` is the bootstrap mean of the L1 between a resampled histogram
/// and the observed one, the Monte Carlo noise floor of the estimate.
pub fn l1_samples_vs_grid<T: Scalar>(
    draws: &[Vec<T>],
    grid: &DensityGrid<T>,
    bins: Option<usize>,
    bootstrap: &BootstrapOptions,
) -> Result<DistanceResult> {
    check_normalized(grid, "reference")?;
    let total = draws.len();
    if total < MIN_DRAWS {
        return Err(Error::input(format!("sample-grid distance needs at least {MIN_DRAWS} draws, got {total}")));
    }
    let dim = grid.dim();
    if draws.iter().any(|d| d.len() != dim) {
        return Err(Error::input(format!("draws must have {dim} coordinates")));
    }
    if bootstrap.resamples == 0 || bootstrap.block_len == 0 {
        return Err(Error::input("bootstrap needs at least one resample and block length >= 1"));
    }
    let bins = bins.unwrap_or_else(|| default_bins(total));
    let per_axis = match dim {
        1 => bins,
        _ => (bins as f64).sqrt().floor() as usize,
    };
    if per_axis < 1 {
        return Err(Error::input("histogram needs at least one bin"));
    }
    let hist = Histogram {
        per_axis,
        lo: grid.axes.lower().iter().map(|x| x.as_f64()).collect(),
        hi: grid.axes.upper().iter().map(|x| x.as_f64()).collect(),
    };
    let cells = hist.cells(dim);
    let index: Vec<Option<usize>> =
        draws.iter().map(|d| hist.cell(&d.iter().map(|x| x.as_f64()).collect::<Vec<_>>())).collect();
    let outside = index.iter().filter(|c| c.is_none()).count();
    if outside as f64 > MAX_OUTSIDE_FRACTION * total as f64 {
        return Err(Error::input(format!("{outside} of {total} draws fall outside the parameter box")));
    }
    let masses: Vec<f64> = (0..cells)
        .map(|c| {
            let (lo, hi) = hist.bounds(c, dim);
            let lo: Vec<T> = lo.into_iter().map(T::lit).collect();
            let hi: Vec<T> = hi.into_iter().map(T::lit).collect();
            grid.axes.integrate_box(&grid.values, &lo, &hi).as_f64()
        })
        .collect();
    let tally = |picks: &mut dyn Iterator<Item = usize>| {
        let mut counts = vec![0usize; cells];
        let mut out = 0;
        for i in picks {
            match index[i] {
                Some(c) => counts[c] += 1,
                None => out += 1,
            }
        }
        (counts, out)
    };
    let (counts, _) = tally(&mut (0..total));
    let l1 = histogram_l1(&counts, outside, total, &masses);
    let observed: Vec<f64> = counts.iter().map(|c| *c as f64 / total as f64).collect();
    let block = bootstrap.block_len.min(total);
    let replicate = |r: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(bootstrap.seed);
        rng.set_stream(r as u64 + 1);
        let starts: Vec<usize> = (0..total.div_ceil(block)).map(|_| rng.gen_range(0..total)).collect();
        let mut picks = starts.into_iter().flat_map(|s| (0..block).map(move |j| (s + j) % total)).take(total);
        let (c, out) = tally(&mut picks);
        histogram_l1(&c, out, total, &observed)
    };
    let reps: Vec<f64> = (0..bootstrap.resamples).into_par_iter().map(replicate).collect();
    let mc_se = reps.iter().sum::<f64>() / reps.len() as f64;
    Ok(DistanceResult { l1, method: DistanceMethod::SampleGrid, bins_or_nodes: cells, mc_se: Some(mc_se), outside })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridAxes, GridSpec};
    use crate::limit::{normalize_density_grid, sample_density_grid};
    use crate::model::ParamBox;

    fn uniform_on(lo: f64, hi: f64, bx: (f64, f64), nodes: usize) -> DensityGrid<f64> {
        let axes =
            GridAxes::uniform(&ParamBox::new(vec![bx.0], vec![bx.1]).unwrap(), &GridSpec::uniform(nodes)).unwrap();
        let v = axes.nodes().map(|t| if t[0] >= lo && t[0] <= hi { 1.0 } else { 0.0 }).collect();
        normalize_density_grid(DensityGrid::new(axes, v).unwrap()).unwrap()
    }

    #[test]
    fn grid_distance_examples() {
        let f = uniform_on(0.0, 1.0, (0.0, 3.0), 3001);
        assert_eq!(l1_grid(&f, &f).unwrap().l1, 0.0);
        let g = uniform_on(2.0, 3.0, (0.0, 3.0), 3001);
        assert!((l1_grid(&f, &g).unwrap().l1 - 2.0).abs() < 0.01);
        let h = uniform_on(0.5, 1.5, (0.0, 3.0), 3001);
        let d = l1_grid(&f, &h).unwrap();
        assert!((d.l1 - 1.0).abs() < 0.01, "{}", d.l1);
        assert_eq!(d.method, DistanceMethod::GridGrid);
        assert!(matches!(l1_grid(&f, &uniform_on(0.0, 1.0, (0.0, 3.0), 101)), Err(Error::Input(_))));
    }

    #[test]
    fn self_consistent_draws() {
        let axes = GridAxes::uniform(&ParamBox::new(vec![-3.0], vec![3.0]).unwrap(), &GridSpec::uniform(513)).unwrap();
        let v = axes.nodes().map(|t: Vec<f64>| (-0.5 * t[0] * t[0]).exp()).collect();
        let g = normalize_density_grid(DensityGrid::new(axes, v).unwrap()).unwrap();
        let draws = sample_density_grid(&g, 100_000, 4).unwrap();
        let d = l1_samples_vs_grid(&draws, &g, Some(64), &BootstrapOptions::default()).unwrap();
        assert!(d.l1 < 0.05, "{d:?}");
        assert!(d.l1 < 3.0 * d.mc_se.unwrap(), "{d:?}");
        assert_eq!(d.bins_or_nodes, 64);
    }

    #[test]
    fn half_overlap_with_draws() {
        let g = uniform_on(0.0, 2.0, (0.0, 2.0), 201);
        let draws: Vec<Vec<f64>> = (0..20_000).map(|i| vec![(i as f64 + 0.5) / 20_000.0]).collect();
        let d = l1_samples_vs_grid(&draws, &g, None, &BootstrapOptions::default()).unwrap();
        assert!((d.l1 - 1.0).abs() < 0.05, "{d:?}");
    }

    #[test]
    fn preconditions() {
        let g = uniform_on(0.0, 1.0, (0.0, 1.0), 101);
        let few = vec![vec![0.5]; 10];
        assert!(matches!(l1_samples_vs_grid(&few, &g, None, &BootstrapOptions::default()), Err(Error::Input(_))));
        let mut far = vec![vec![0.5]; 1000];
        for d in far.iter_mut().take(20) {
            d[0] = 7.0;
        }
        assert!(matches!(l1_samples_vs_grid(&far, &g, None, &BootstrapOptions::default()), Err(Error::Input(_))));
        far.truncate(1000);
        for d in far.iter_mut().skip(5) {
            d[0] = 0.5;
        }
        let d = l1_samples_vs_grid(&far, &g, None, &BootstrapOptions::default()).unwrap();
        assert_eq!(d.outside, 5);
    }

    #[test]
    fn bins_default_and_determinism() {
        assert_eq!(default_bins(10), 16);
        assert_eq!(default_bins(1_000_000), 100);
        assert_eq!(default_bins(usize::MAX / 2), 256);
        let g = uniform_on(0.0, 1.0, (0.0, 1.0), 101);
        let draws = sample_density_grid(&g, 2000, 1).unwrap();
        let opts = BootstrapOptions { block_len: 7, ..Default::default() };
        assert_eq!(
            l1_samples_vs_grid(&draws, &g, None, &opts).unwrap(),
            l1_samples_vs_grid(&draws, &g, None, &opts).unwrap()
        );
    }

    #[test]
    fn two_dimensional_histogram() {
        let bx = ParamBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let axes = GridAxes::uniform(&bx, &GridSpec::uniform(65)).unwrap();
        let v = axes.nodes().map(|t| t[0] + t[1]).collect();
        let g = normalize_density_grid(DensityGrid::new(axes, v).unwrap()).unwrap();
        let draws = sample_density_grid(&g, 50_000, 2).unwrap();
        let d = l1_samples_vs_grid(&draws, &g, Some(256), &BootstrapOptions::default()).unwrap();
        assert_eq!(d.bins_or_nodes, 256);
        assert!(d.l1 < 3.0 * d.mc_se.unwrap(), "{d:?}");
    }
}
