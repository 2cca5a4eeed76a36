//! Monte Carlo trajectories of level processes, mixtures and the stationary
//! pinned process, with goodness-of-fit checks against the analytic laws.
//!
//! Randomness: path `k` of a batch with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `k`; the level of a
//! mixture path is drawn from stream `k | 2^63` of the same seed. Paths are
//! therefore independent of each other, of the order in which they are
//! generated and of how many threads generate them.

mod bridge;
mod cdf;
mod stats;

pub use bridge::{bridge_conditional_check, BridgeCell, BridgeReport};
pub use stats::{
    chi_square_counts, chi_square_sf, chi_square_two_sample, ks_two_sample, ks_uniform, FitReport,
    MIN_EXPECTED,
};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::heat::HeatKernel;
use crate::io::{csv, fmt_real};
use crate::mixture::{StationaryProcess, WeightSequence};
use crate::observable::Region;
use crate::process::LevelProcess;
use crate::spectral::SpectralBasis;
use cdf::CellSampler;

const LEVEL_STREAM_BIT: u64 = 1 << 63;

/// The random stream of path `path`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Sampled coordinates (radius on the disk), one row per path.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub time_grid: Vec<f64>,
    /// `paths[k][j]` is path `k` at `time_grid[j]`.
    pub paths: Vec<Vec<f64>>,
    pub seed: u64,
    /// Stream id of each path.
    pub streams: Vec<u64>,
    /// Level drawn for each path of a mixture.
    pub levels: Option<Vec<usize>>,
    pub descriptor: String,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Index of `t` in the time grid.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.time_grid
            .iter()
            .position(|s| *s == t)
            .ok_or_else(|| Error::invalid("t", format!("{t} is not on the batch time grid")))
    }

    /// All coordinates at grid time `t`.
    pub fn column(&self, t: f64) -> Result<Vec<f64>> {
        let j = self.time_index(t)?;
        Ok(self.paths.iter().map(|p| p[j]).collect())
    }

    /// Fraction of paths inside `region` at time `t` and its standard error.
    pub fn fraction(&self, t: f64, region: Region) -> Result<(f64, f64)> {
        let column = self.column(t)?;
        let n = column.len() as f64;
        let p = column.iter().filter(|x| region.contains(**x)).count() as f64 / n;
        Ok((p, (p * (1.0 - p) / n).sqrt()))
    }

    /// `path,time,coord` CSV.
    pub fn to_csv(&self) -> String {
        csv(
            "path,time,coord",
            self.paths.iter().enumerate().flat_map(|(k, path)| {
                path.iter()
                    .zip(&self.time_grid)
                    .map(move |(x, t)| [k.to_string(), fmt_real(*t), fmt_real(*x)])
            }),
        )
    }
}

/// Points at which sampling densities are tabulated: the quadrature nodes
/// together with both end points of the domain.
struct SamplingGrid {
    points: Vec<f64>,
    /// `A w(x)`, turning an area density into a density in the coordinate.
    jacobian: Vec<f64>,
    modes: DMatrix<f64>,
}

impl SamplingGrid {
    fn new(kernel: &HeatKernel) -> Self {
        let basis = kernel.basis();
        let (lo, hi) = basis.bounds();
        let mut points = Vec::with_capacity(basis.nodes().len() + 2);
        points.push(lo);
        points.extend(basis.nodes().iter().copied().filter(|x| *x > lo && *x < hi));
        points.push(hi);
        let jacobian = points
            .iter()
            .map(|x| basis.area_factor() * basis.measure_weight(*x))
            .collect();
        let modes = kernel.mode_matrix(&points);
        SamplingGrid {
            points,
            jacobian,
            modes,
        }
    }

    fn sampler(&self, area_density: impl Iterator<Item = f64>) -> Result<CellSampler<'_>> {
        CellSampler::new(
            &self.points,
            area_density.zip(&self.jacobian).map(|(f, j)| f * j),
        )
    }

    /// `diag(jacobian * weight) S diag(exp(-dt lambda))`, mapping the modes at a
    /// source point to the coordinate density of the next point.
    fn transition(&self, kernel: &HeatKernel, dt: f64, weight: &[f64]) -> DMatrix<f64> {
        let lambda = kernel.eigenvalues();
        let mut m = self.modes.clone();
        for (n, l) in lambda.iter().enumerate() {
            m.column_mut(n).scale_mut((-dt * l).exp());
        }
        for (i, (j, w)) in self.jacobian.iter().zip(weight).enumerate() {
            m.row_mut(i).scale_mut(j * w);
        }
        m
    }
}

fn check_path_grid(kernel: &HeatKernel, grid: &[f64], horizon: f64) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(Error::invalid("time_grid", "must start at 0"));
    }
    if grid[grid.len() - 1] > horizon {
        return Err(Error::invalid(
            "time_grid",
            format!("must end by T = {horizon}"),
        ));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid("time_grid", "must be strictly increasing"));
        }
        kernel.check_time(w[1] - w[0])?;
    }
    Ok(())
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "must be positive"));
    }
    Ok(())
}

/// Precomputed transition tables of one level process on a time grid.
struct LevelSampler<'a> {
    process: &'a LevelProcess,
    grid: &'a SamplingGrid,
    initial: CellSampler<'a>,
    /// transition from `time_grid[j]` to `time_grid[j + 1]`
    steps: Vec<DMatrix<f64>>,
    v_coeffs: Vec<DVector<f64>>,
    times: &'a [f64],
}

impl<'a> LevelSampler<'a> {
    fn new(process: &'a LevelProcess, grid: &'a SamplingGrid, times: &'a [f64]) -> Result<Self> {
        let kernel = process.kernel();
        check_path_grid(kernel, times, process.horizon())?;
        let rho = grid
            .points
            .iter()
            .map(|x| process.marginal_density(*x, 0.0));
        let initial = grid.sampler(rho)?;
        let mut steps = Vec::with_capacity(times.len() - 1);
        for w in times.windows(2) {
            let v: Vec<f64> = grid.points.iter().map(|y| process.v(*y, w[1])).collect();
            steps.push(grid.transition(kernel, w[1] - w[0], &v));
        }
        let v_coeffs = times
            .iter()
            .map(|t| DVector::from_vec(process.v_coeffs(*t)))
            .collect();
        Ok(LevelSampler {
            process,
            grid,
            initial,
            steps,
            v_coeffs,
            times,
        })
    }

    fn path(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let basis = self.process.kernel().basis();
        let n = self.process.kernel().truncation();
        let mut x = self.initial.quantile(rng.random::<f64>());
        let mut out = Vec::with_capacity(self.times.len());
        out.push(x);
        for (j, step) in self.steps.iter().enumerate() {
            let modes = DVector::from_vec(basis.modes_at(x, n));
            let vx = modes.dot(&self.v_coeffs[j]);
            if !(vx > 0.0) {
                return Err(Error::Singular {
                    which: "v",
                    x,
                    t: self.times[j],
                    value: vx,
                });
            }
            let q = step * modes;
            let next = CellSampler::new(&self.grid.points, q.iter().copied())?;
            x = next.quantile(rng.random::<f64>());
            out.push(x);
        }
        Ok(out)
    }
}

fn collect_paths(
    n_paths: usize,
    f: impl Fn(u64) -> Result<Vec<f64>> + Sync,
) -> Result<Vec<Vec<f64>>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            f(k).map_err(|e| Error::Path {
                path: k as usize,
                source: Box::new(e),
            })
        })
        .collect()
}

fn level_descriptor(p: &LevelProcess) -> String {
    let basis = p.kernel().basis();
    format!(
        "level domain={} m={} T={} levels={} truncation={} t_min={}",
        basis.domain().label(),
        p.level(),
        p.horizon(),
        basis.level_count(),
        p.kernel().truncation(),
        p.kernel().t_min()
    )
}

/// Paths of a level process on `time_grid` (starting at 0, gaps `>= t_min`).
pub fn sample_level_paths(
    p: &LevelProcess,
    time_grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<TrajectoryBatch> {
    check_paths(n_paths)?;
    p.require_positive()?;
    let grid = SamplingGrid::new(p.kernel());
    let sampler = LevelSampler::new(p, &grid, time_grid)?;
    let paths = collect_paths(n_paths, |k| sampler.path(&mut path_rng(seed, k)))?;
    Ok(TrajectoryBatch {
        time_grid: time_grid.to_vec(),
        paths,
        seed,
        streams: (0..n_paths as u64).collect(),
        levels: None,
        descriptor: level_descriptor(p),
    })
}

/// Paths of the mixture: each path draws its level with probability `p_m`
/// (weight `m` belongs to `processes[m]`), then follows that level.
pub fn sample_mixture_paths(
    processes: &[LevelProcess],
    w: &WeightSequence,
    time_grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<TrajectoryBatch> {
    check_paths(n_paths)?;
    let mix = crate::mixture::MixedProcess::new(processes.to_vec(), w.clone())?;
    let grid = SamplingGrid::new(mix.kernel());
    let weights = w.weights();
    let mut samplers = Vec::with_capacity(processes.len());
    for (p, weight) in processes.iter().zip(weights) {
        if *weight > 0.0 {
            p.require_positive()?;
            samplers.push(Some(LevelSampler::new(p, &grid, time_grid)?));
        } else {
            samplers.push(None);
        }
    }
    let total: f64 = weights.iter().sum();
    let choose = |k: u64| -> usize {
        let u = path_rng(seed, k | LEVEL_STREAM_BIT).random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (m, p) in weights.iter().enumerate() {
            if *p > 0.0 {
                acc += p;
                last = m;
                if u < acc {
                    return m;
                }
            }
        }
        last
    };
    let levels: Vec<usize> = (0..n_paths as u64).map(choose).collect();
    let paths = collect_paths(n_paths, |k| {
        let sampler = samplers[levels[k as usize]]
            .as_ref()
            .expect("positive weight");
        sampler.path(&mut path_rng(seed, k))
    })?;
    let descriptor = format!(
        "mixture weights=[{}] {}",
        weights
            .iter()
            .map(|p| fmt_real(*p))
            .collect::<Vec<_>>()
            .join(" "),
        level_descriptor(&processes[0])
    );
    Ok(TrajectoryBatch {
        time_grid: time_grid.to_vec(),
        paths,
        seed,
        streams: (0..n_paths as u64).collect(),
        levels: Some(levels),
        descriptor,
    })
}

/// Samples of the stationary process at `times` (strictly inside `(0, T)`,
/// gaps and the closing gap `T - (t_n - t_1)` at least `t_min`).
///
/// `x_1` is drawn from `g(x, T, x) / Z(T)`; given `x_1, ..., x_{k-1}` the
/// next point has density proportional to
/// `g(x_{k-1}, t_k - t_{k-1}, y) g(y, T - (t_k - t_1), x_1)`, which integrates
/// the remaining factors of the cyclic chain out by the semigroup property.
pub fn sample_stationary_pinned(
    kernel: &Arc<HeatKernel>,
    horizon: f64,
    times: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<TrajectoryBatch> {
    check_paths(n_paths)?;
    let process = StationaryProcess::new(Arc::clone(kernel), horizon)?;
    crate::process::check_fdd_times(times, times.len(), horizon)?;
    let closing = horizon - (times[times.len() - 1] - times[0]);
    for gap in times.windows(2).map(|w| w[1] - w[0]).chain([closing]) {
        kernel.check_time(gap)?;
    }
    let grid = SamplingGrid::new(kernel);
    let ones = vec![1.0; grid.points.len()];
    let initial = grid.sampler(grid.points.iter().map(|x| process.marginal_density(*x)))?;
    let forward: Vec<DMatrix<f64>> = times
        .windows(2)
        .map(|w| grid.transition(kernel, w[1] - w[0], &ones))
        .collect();
    // g(y, T - (t_k - t_1), x_1) as modes of x_1, without the jacobian
    let lambda = kernel.eigenvalues();
    let returns: Vec<DMatrix<f64>> = times[1..]
        .iter()
        .map(|t| {
            let dt = horizon - (t - times[0]);
            let mut m = grid.modes.clone();
            for (n, l) in lambda.iter().enumerate() {
                m.column_mut(n).scale_mut((-dt * l).exp());
            }
            m
        })
        .collect();
    let basis: &SpectralBasis = kernel.basis();
    let n = kernel.truncation();
    let paths = collect_paths(n_paths, |k| {
        let mut rng = path_rng(seed, k);
        let x1 = initial.quantile(rng.random::<f64>());
        let anchor = DVector::from_vec(basis.modes_at(x1, n));
        let mut out = Vec::with_capacity(times.len());
        out.push(x1);
        let mut x = x1;
        for (step, back) in forward.iter().zip(&returns) {
            let there = step * DVector::from_vec(basis.modes_at(x, n));
            let home = back * &anchor;
            let next = CellSampler::new(
                &grid.points,
                there.iter().zip(home.iter()).map(|(a, b)| a * b),
            )?;
            x = next.quantile(rng.random::<f64>());
            out.push(x);
        }
        Ok(out)
    })?;
    Ok(TrajectoryBatch {
        time_grid: times.to_vec(),
        paths,
        seed,
        streams: (0..n_paths as u64).collect(),
        levels: None,
        descriptor: format!(
            "stationary domain={} T={horizon} levels={} truncation={n} t_min={}",
            basis.domain().label(),
            basis.level_count(),
            kernel.t_min()
        ),
    })
}

/// `bins` equal-width coordinate bins over the domain.
pub fn equal_width_bins(basis: &SpectralBasis, bins: usize) -> Vec<Region> {
    let (lo, hi) = basis.bounds();
    let h = (hi - lo) / bins as f64;
    (0..bins)
        .map(|b| Region::Band {
            lo: lo + b as f64 * h,
            hi: if b + 1 == bins {
                hi
            } else {
                lo + (b + 1) as f64 * h
            },
        })
        .collect()
}

/// Counts of `samples` in consecutive bins (the upper edge belongs to the
/// last bin only).
pub fn bin_counts(samples: &[f64], bins: &[Region]) -> Vec<u64> {
    let mut counts = vec![0u64; bins.len()];
    for x in samples {
        let k = bins
            .iter()
            .position(|r| match r {
                Region::Band { lo, hi } => *x >= *lo && *x < *hi,
                Region::Whole => true,
            })
            .unwrap_or(bins.len() - 1);
        counts[k] += 1;
    }
    counts
}

/// Chi-square comparison of the batch at time `t` with an area density,
/// over `bins` equal-width coordinate bins whose probabilities are
/// integrated by quadrature; `bins - 1` degrees of freedom before merging.
pub fn goodness_of_fit(
    batch: &TrajectoryBatch,
    basis: &SpectralBasis,
    density: impl Fn(f64) -> f64,
    t: f64,
    bins: usize,
) -> Result<FitReport> {
    if bins == 0 {
        return Err(Error::invalid("bins", "must be positive"));
    }
    let regions = equal_width_bins(basis, bins);
    let probabilities: Vec<f64> = regions
        .iter()
        .map(|r| r.integrate_area(basis, &density).max(0.0))
        .collect();
    chi_square_counts(&bin_counts(&batch.column(t)?, &regions), &probabilities)
}
