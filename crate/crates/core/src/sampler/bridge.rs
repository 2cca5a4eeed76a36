use nalgebra::DMatrix;

use super::stats::{chi_square_counts, FitReport};
use super::{bin_counts, equal_width_bins, sample_level_paths, SamplingGrid, TrajectoryBatch};
use crate::error::{Error, Result};
use crate::observable::Region;
use crate::process::LevelProcess;

/// Cells with fewer paths are reported but not tested.
pub const MIN_CELL_PATHS: usize = 500;

/// Conditional check for one endpoint cell `(Z_s in A_row, Z_t in B_col)`.
#[derive(Debug, Clone)]
pub struct BridgeCell {
    pub row: usize,
    pub col: usize,
    pub initial: Region,
    pub terminal: Region,
    pub count: usize,
    /// `None` for undersampled cells.
    pub fit: Option<FitReport>,
}

#[derive(Debug, Clone)]
pub struct BridgeReport {
    pub cells: Vec<BridgeCell>,
    pub batch: TrajectoryBatch,
}

impl BridgeReport {
    pub fn tested(&self) -> usize {
        self.cells.iter().filter(|c| c.fit.is_some()).count()
    }

    pub fn passed(&self, alpha: f64) -> usize {
        self.cells
            .iter()
            .filter(|c| c.fit.as_ref().is_some_and(|f| f.passes(alpha)))
            .count()
    }

    /// Passing fraction of the tested cells (0 when nothing was tested).
    pub fn pass_fraction(&self, alpha: f64) -> f64 {
        match self.tested() {
            0 => 0.0,
            n => self.passed(alpha) as f64 / n as f64,
        }
    }
}

/// Splits the domain into `cells` bands of equal mass under an area density.
fn equal_mass_cells(
    grid: &SamplingGrid,
    density: impl Fn(f64) -> f64,
    cells: usize,
) -> Result<Vec<Region>> {
    let sampler = grid.sampler(grid.points.iter().map(|x| density(*x)))?;
    let (lo, hi) = (grid.points[0], grid.points[grid.points.len() - 1]);
    let edges: Vec<f64> = (0..=cells)
        .map(|k| match k {
            0 => lo,
            k if k == cells => hi,
            k => sampler.quantile(k as f64 / cells as f64),
        })
        .collect();
    edges.windows(2).map(|w| Region::band(w[0], w[1])).collect()
}

/// Samples `n_paths` paths through `0, s, r, t` and, for every pair of
/// equal-mass endpoint cells `(A, B)`, compares the law of `Z_r` given
/// `Z_s in A, Z_t in B` with
///
/// `int_{A x B} u(x, s) g(x, t - s, y) v(y, t) Q(x, t; C, r; y, s) dx dy`
///
/// (normalized over the bins `C`), where `Q` is the two-sided transition
/// density, by a chi-square test over `bins` coordinate bins.
#[allow(clippy::too_many_arguments)]
pub fn bridge_conditional_check(
    p: &LevelProcess,
    s: f64,
    r: f64,
    t: f64,
    cells: usize,
    bins: usize,
    n_paths: usize,
    seed: u64,
) -> Result<BridgeReport> {
    if !(0.0 <= s && s < r && r < t && t <= p.horizon()) {
        return Err(Error::invalid(
            "times",
            format!("need 0 <= s < r < t <= T, got {s}, {r}, {t}"),
        ));
    }
    if cells == 0 || bins == 0 {
        return Err(Error::invalid("cells", "cells and bins must be positive"));
    }
    let kernel = p.kernel();
    let basis = kernel.basis();
    let mut grid_times = vec![0.0];
    if s > 0.0 {
        grid_times.push(s);
    }
    grid_times.extend([r, t]);
    let batch = sample_level_paths(p, &grid_times, n_paths, seed)?;
    let (js, jr, jt) = (
        batch.time_index(s)?,
        batch.time_index(r)?,
        batch.time_index(t)?,
    );

    let grid = SamplingGrid::new(kernel);
    let initial_cells = equal_mass_cells(&grid, |x| p.marginal_density(x, s), cells)?;
    let terminal_cells = equal_mass_cells(&grid, |x| p.marginal_density(x, t), cells)?;
    let middle = equal_width_bins(basis, bins);

    let rules = |regions: &[Region]| -> Vec<(Vec<f64>, Vec<f64>)> {
        regions.iter().map(|c| c.rule(basis)).collect()
    };
    let initial_rules = rules(&initial_cells);
    let terminal_rules = rules(&terminal_cells);
    let middle_rules = rules(&middle);

    let mut out = Vec::with_capacity(cells * cells);
    for (row, (a_nodes, a_weights)) in initial_rules.iter().enumerate() {
        let u: Vec<f64> = a_nodes.iter().map(|x| p.u(*x, s)).collect();
        for (col, (b_nodes, b_weights)) in terminal_rules.iter().enumerate() {
            let (a_cell, b_cell) = (initial_cells[row], terminal_cells[col]);
            let sample: Vec<f64> = batch
                .paths
                .iter()
                .filter(|path| a_cell.contains(path[js]) && b_cell.contains(path[jt]))
                .map(|path| path[jr])
                .collect();
            if sample.len() < MIN_CELL_PATHS {
                out.push(BridgeCell {
                    row,
                    col,
                    initial: a_cell,
                    terminal: b_cell,
                    count: sample.len(),
                    fit: None,
                });
                continue;
            }
            let v: Vec<f64> = b_nodes.iter().map(|y| p.v(*y, t)).collect();
            let direct = kernel.cross_matrix(t - s, a_nodes, b_nodes)?;
            if let Some(((i, j), g)) = direct
                .iter()
                .enumerate()
                .map(|(k, g)| ((k % direct.nrows(), k / direct.nrows()), *g))
                .find(|(_, g)| !(*g >= 1e-300))
            {
                return Err(Error::PinningPoint {
                    x: a_nodes[i],
                    dt: t - s,
                    y: b_nodes[j],
                    value: g,
                });
            }
            // endpoint masses of the cell
            let endpoint = DMatrix::from_fn(a_nodes.len(), b_nodes.len(), |i, j| {
                a_weights[i] * b_weights[j] * u[i] * direct[(i, j)] * v[j]
            });
            let mut probabilities = Vec::with_capacity(bins);
            for (c_nodes, c_weights) in &middle_rules {
                let mut left = kernel.cross_matrix(r - s, a_nodes, c_nodes)?;
                for (k, w) in c_weights.iter().enumerate() {
                    left.column_mut(k).scale_mut(*w);
                }
                let right = kernel.cross_matrix(t - r, c_nodes, b_nodes)?;
                let q = (left * right).component_div(&direct);
                probabilities.push(endpoint.component_mul(&q).sum().max(0.0));
            }
            let fit = chi_square_counts(&bin_counts(&sample, &middle), &probabilities)?;
            out.push(BridgeCell {
                row,
                col,
                initial: a_cell,
                terminal: b_cell,
                count: sample.len(),
                fit: Some(fit),
            });
        }
    }
    Ok(BridgeReport { cells: out, batch })
}
