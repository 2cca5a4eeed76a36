use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::level::LevelProcess;
use crate::error::{Error, Result};
use crate::heat::HeatKernel;
use crate::observable::Region;

/// Smallest `g(x, T, y)` accepted as a pinning denominator.
const PINNING_FLOOR: f64 = 1e-300;

/// A joint law of `(Z_0, Z_T)` discretized on the quadrature grid.
///
/// `density[(i, j)]` is the density at `(x_i, x_j)` with respect to area in
/// each variable, so the mass of the cell is `w_i w_j density[(i, j)]`.
#[derive(Debug, Clone)]
pub struct JointMeasure {
    kernel: Arc<HeatKernel>,
    horizon: f64,
    density: DMatrix<f64>,
}

impl JointMeasure {
    /// Wraps a grid density; the total mass must be 1 within `1e-6`.
    pub fn from_density(
        kernel: Arc<HeatKernel>,
        horizon: f64,
        density: DMatrix<f64>,
    ) -> Result<Self> {
        kernel.check_time(horizon)?;
        let n = kernel.basis().nodes().len();
        if density.nrows() != n || density.ncols() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: density.nrows().max(density.ncols()),
            });
        }
        let measure = JointMeasure {
            kernel,
            horizon,
            density,
        };
        let total = measure.total_mass();
        if !((total - 1.0).abs() <= 1e-6) {
            return Err(Error::Unnormalized { value: total });
        }
        Ok(measure)
    }

    /// `phi(x) g(x, T, y) psi(y)` of a level process.
    pub fn markov(process: &LevelProcess) -> Result<Self> {
        let kernel = Arc::clone(process.kernel());
        let t = process.horizon();
        let phi = process.u_on_grid(0.0);
        let psi = process.v_on_grid(t);
        let g = kernel.grid_matrix(t)?;
        let density = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| phi[i] * g[(i, j)] * psi[j]);
        Self::from_density(kernel, t, density)
    }

    /// `g(x, T, y) sum_m p_m phi_m(x) psi_m(y)`.
    pub fn mixture(processes: &[LevelProcess], weights: &[f64]) -> Result<Self> {
        let first = processes
            .first()
            .ok_or_else(|| Error::invalid("processes", "need at least one level"))?;
        if weights.len() != processes.len() {
            return Err(Error::LengthMismatch {
                expected: processes.len(),
                got: weights.len(),
            });
        }
        let kernel = Arc::clone(first.kernel());
        let t = first.horizon();
        for p in processes {
            if p.horizon() != t {
                return Err(Error::invalid(
                    "horizon",
                    "all levels must share the horizon",
                ));
            }
            if !Arc::ptr_eq(p.kernel(), &kernel) {
                return Err(Error::invalid("kernel", "all levels must share the kernel"));
            }
        }
        let n = kernel.basis().nodes().len();
        let mut sum = DMatrix::zeros(n, n);
        for (p, w) in processes.iter().zip(weights) {
            if *w == 0.0 {
                continue;
            }
            let phi = DVector::from_vec(p.u_on_grid(0.0));
            let psi = DVector::from_vec(p.v_on_grid(t));
            sum += (phi * psi.transpose()) * *w;
        }
        let g = kernel.grid_matrix(t)?;
        Self::from_density(kernel, t, g.component_mul(&sum))
    }

    /// The diagonal measure `Z^{-1}(T) g(x, T, x) delta(x - y)`, discretized as
    /// the mass `w_i g(x_i, T, x_i) / Z` on the diagonal cell `(i, i)`.
    pub fn gibbs_diagonal(kernel: Arc<HeatKernel>, horizon: f64) -> Result<Self> {
        let z = kernel.partition_function(horizon)?;
        let g = kernel.grid_matrix(horizon)?;
        let w = kernel.basis().area_weights();
        let n = w.len();
        let mut density = DMatrix::zeros(n, n);
        for i in 0..n {
            density[(i, i)] = g[(i, i)] / (z * w[i]);
        }
        Self::from_density(kernel, horizon, density)
    }

    pub fn kernel(&self) -> &Arc<HeatKernel> {
        &self.kernel
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn density(&self) -> &DMatrix<f64> {
        &self.density
    }

    /// Cell masses `w_i w_j density_ij`.
    pub fn masses(&self) -> DMatrix<f64> {
        let w = self.kernel.basis().area_weights();
        DMatrix::from_fn(self.density.nrows(), self.density.ncols(), |i, j| {
            w[i] * w[j] * self.density[(i, j)]
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.masses().sum()
    }

    /// `mu(F x D)`, the law of `Z_0`, evaluated on the grid nodes in `F`.
    pub fn initial_marginal(&self, region: Region) -> f64 {
        let mask = region.node_mask(self.kernel.basis());
        let m = self.masses();
        (0..m.nrows())
            .filter(|i| mask[*i])
            .map(|i| m.row(i).sum())
            .sum()
    }

    /// `mu(D x F)`, the law of `Z_T`.
    pub fn final_marginal(&self, region: Region) -> f64 {
        let mask = region.node_mask(self.kernel.basis());
        let m = self.masses();
        (0..m.ncols())
            .filter(|j| mask[*j])
            .map(|j| m.column(j).sum())
            .sum()
    }
}

/// `P(Z_{t_1} in F_1, ..., Z_{t_n} in F_n)` for the Bernstein process with
/// endpoint law `joint`:
///
/// `sum_{i,j} M_ij / g(x_i, T, y_j) [G(t_1) W_1 G(t_2 - t_1) ... W_n G(T - t_n)]_ij`
///
/// with `M` the cell masses and `W_k` the quadrature weights of region `F_k`
/// ([`Region::rule`]).
pub fn fdd_from_measure(joint: &JointMeasure, times: &[f64], regions: &[Region]) -> Result<f64> {
    let kernel = joint.kernel();
    let horizon = joint.horizon();
    super::check_fdd_times(times, regions.len(), horizon)?;
    let basis = kernel.basis();
    let grid = kernel.grid_modes();
    let g_total = kernel.grid_matrix(horizon)?;
    let masses = joint.masses();
    // endpoint weights M_ij / g(x_i, T, y_j)
    let mut pinned = DMatrix::zeros(masses.nrows(), masses.ncols());
    for i in 0..masses.nrows() {
        for j in 0..masses.ncols() {
            let m = masses[(i, j)];
            if m == 0.0 {
                continue;
            }
            let g = g_total[(i, j)];
            if !(g >= PINNING_FLOOR) {
                return Err(Error::PinningPoint {
                    x: basis.nodes()[i],
                    dt: horizon,
                    y: basis.nodes()[j],
                    value: g,
                });
            }
            pinned[(i, j)] = m / g;
        }
    }
    let mut chain: Option<DMatrix<f64>> = None;
    let mut modes = grid.clone();
    let mut previous = 0.0;
    for (t, region) in times.iter().zip(regions) {
        kernel.check_time(t - previous)?;
        let (nodes, weights) = region.rule(basis);
        if nodes.is_empty() {
            return Ok(0.0);
        }
        let next = kernel.mode_matrix(&nodes);
        let mut step = kernel.cross_from_modes(t - previous, &modes, &next);
        for (j, w) in weights.iter().enumerate() {
            step.column_mut(j).scale_mut(*w);
        }
        chain = Some(match chain {
            None => step,
            Some(c) => c * step,
        });
        modes = next;
        previous = *t;
    }
    kernel.check_time(horizon - previous)?;
    let closing = kernel.cross_from_modes(horizon - previous, &modes, &grid);
    let chain = chain.expect("at least one time") * closing;
    Ok(pinned.component_mul(&chain).sum())
}

/// Outcome of the product-form (Markov) test.
#[derive(Debug, Clone)]
pub struct ProductForm {
    pub is_product: bool,
    /// Singular values of `mu / g`, descending.
    pub singular_values: Vec<f64>,
    /// `sigma_2 / sigma_1`
    pub ratio: f64,
    /// Rank-one factors `(nu_0, nu_T)` on the grid when `is_product`.
    pub factors: Option<(Vec<f64>, Vec<f64>)>,
}

/// Whether `mu(x, y) / g(x, T, y)` has rank one, i.e. whether the endpoint
/// law makes the process Markovian: `sigma_2 <= tol * sigma_1`.
pub fn is_product_form(joint: &JointMeasure, tol: f64) -> Result<ProductForm> {
    if !(tol >= 0.0) {
        return Err(Error::invalid("tol", "must be non-negative"));
    }
    let density = joint.density();
    let scale = density.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    if scale == 0.0 {
        return Err(Error::invalid(
            "joint",
            "zero measure has no product structure",
        ));
    }
    if density.iter().any(|v| *v < -1e-12 * scale) {
        return Err(Error::Positivity(
            "joint density has negative entries".into(),
        ));
    }
    let g = joint.kernel().grid_matrix(joint.horizon())?;
    let ratio_matrix = density.component_div(&g);
    let svd = ratio_matrix.svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let singular_values: Vec<f64> = order.iter().map(|k| svd.singular_values[*k]).collect();
    let sigma1 = singular_values[0];
    let sigma2 = singular_values.get(1).copied().unwrap_or(0.0);
    let ratio = sigma2 / sigma1;
    let is_product = sigma2 <= tol * sigma1;
    let factors = if is_product {
        let k = order[0];
        let u = svd.u.as_ref().expect("requested").column(k).into_owned();
        let v = svd.v_t.as_ref().expect("requested").row(k).transpose();
        // fix the sign so that the factors are non-negative
        let sign = if u.sum() < 0.0 { -1.0 } else { 1.0 };
        let root = sigma1.sqrt();
        Some((
            u.iter().map(|a| sign * root * a).collect(),
            v.iter().map(|a| sign * root * a).collect(),
        ))
    } else {
        None
    };
    Ok(ProductForm {
        is_product,
        singular_values,
        ratio,
        factors,
    })
}
