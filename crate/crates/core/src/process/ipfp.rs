use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Result of [`schroedinger_solve`].
#[derive(Debug, Clone)]
pub struct SchroedingerSolution {
    /// `phi` on the grid, gauge-fixed so that `sum_i w_i phi_i = 1`.
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub iterations: usize,
    /// Largest marginal residual (sup norm) after each sweep.
    pub residuals: Vec<f64>,
}

/// Solves the discretized Schrödinger system
///
/// `mu_0 = phi (G W psi)`, `mu_T = psi (G^T W phi)`
///
/// by iterative proportional fitting: `phi <- mu_0 / (G W psi)`, then
/// `psi <- mu_T / (G^T W phi)`, until both marginal residuals are below `tol`.
/// `kernel` holds `g(x_i, T, x_j)` and `weights` the quadrature weights; the
/// marginals are densities with respect to those weights.
pub fn schroedinger_solve(
    kernel: &DMatrix<f64>,
    weights: &[f64],
    mu0: &[f64],
    mu_t: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SchroedingerSolution> {
    let n = weights.len();
    if kernel.nrows() != n || kernel.ncols() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: kernel.nrows().max(kernel.ncols()),
        });
    }
    for (name, mu) in [("mu0", mu0), ("mu_t", mu_t)] {
        if mu.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: mu.len(),
            });
        }
        if let Some((i, v)) = mu.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Positivity(format!(
                "{name} must be strictly positive, entry {i} is {v}"
            )));
        }
        let mass: f64 = mu.iter().zip(weights).map(|(m, w)| m * w).sum();
        if !((mass - 1.0).abs() <= 1e-6) {
            return Err(Error::invalid(
                if name == "mu0" { "mu0" } else { "mu_t" },
                format!("must integrate to 1, integrates to {mass}"),
            ));
        }
    }
    if kernel.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::Positivity(
            "kernel matrix must be strictly positive".into(),
        ));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::invalid("tol", "need tol > 0 and max_iter > 0"));
    }
    let w = DVector::from_column_slice(weights);
    let target0 = DVector::from_column_slice(mu0);
    let target_t = DVector::from_column_slice(mu_t);
    let mut phi: DVector<f64>;
    let mut psi = DVector::from_element(n, 1.0);
    let mut residuals = Vec::new();
    for iteration in 1..=max_iter {
        let forward = kernel * psi.component_mul(&w);
        phi = divide(&target0, &forward)?;
        let backward = kernel.tr_mul(&phi.component_mul(&w));
        psi = divide(&target_t, &backward)?;
        let sweep = kernel * psi.component_mul(&w);
        let r0 = phi
            .component_mul(&sweep)
            .iter()
            .zip(target0.iter())
            .fold(0.0_f64, |a, (m, t)| a.max((m - t).abs()));
        let check = kernel.tr_mul(&phi.component_mul(&w));
        let r_t = psi
            .component_mul(&check)
            .iter()
            .zip(target_t.iter())
            .fold(0.0_f64, |a, (m, t)| a.max((m - t).abs()));
        let residual = r0.max(r_t);
        residuals.push(residual);
        if !residual.is_finite() {
            return Err(Error::NonConvergence {
                iterations: iteration,
                residual,
            });
        }
        if residual < tol {
            let gauge: f64 = phi.dot(&w);
            return Ok(SchroedingerSolution {
                phi: phi.iter().map(|p| p / gauge).collect(),
                psi: psi.iter().map(|p| p * gauge).collect(),
                iterations: iteration,
                residuals,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

fn divide(numerator: &DVector<f64>, denominator: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some((i, d)) = denominator.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(Error::Positivity(format!(
            "zero denominator {d} at node {i}"
        )));
    }
    Ok(numerator.component_div(denominator))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::HeatKernel;
    use crate::spectral::SpectralBasis;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn setup(horizon: f64) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
        let basis = Arc::new(SpectralBasis::interval(40, 128).unwrap());
        let k = HeatKernel::new(Arc::clone(&basis), 0.05, 1e-12).unwrap();
        let g = k.grid_matrix(horizon).unwrap();
        (g, basis.area_weights().to_vec(), basis.nodes().to_vec())
    }

    fn marginals(g: &DMatrix<f64>, w: &[f64], phi: &[f64], psi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let w = DVector::from_column_slice(w);
        let phi = DVector::from_column_slice(phi);
        let psi = DVector::from_column_slice(psi);
        let mu0 = phi.component_mul(&(g * psi.component_mul(&w)));
        let mu_t = psi.component_mul(&g.tr_mul(&phi.component_mul(&w)));
        (
            mu0.iter().copied().collect(),
            mu_t.iter().copied().collect(),
        )
    }

    #[test]
    fn recovers_generating_pair_up_to_gauge() {
        let (g, w, x) = setup(0.5);
        let phi: Vec<f64> = x.iter().map(|x| 1.0 + 0.4 * (PI * x).cos()).collect();
        let psi_raw: Vec<f64> = x.iter().map(|x| 2.0 + (3.0 * x).sin()).collect();
        let (m0, _) = marginals(&g, &w, &phi, &psi_raw);
        let total: f64 = m0.iter().zip(&w).map(|(a, b)| a * b).sum();
        let psi: Vec<f64> = psi_raw.iter().map(|p| p / total).collect();
        let (mu0, mu_t) = marginals(&g, &w, &phi, &psi);
        let sol = schroedinger_solve(&g, &w, &mu0, &mu_t, 1e-13, 500).unwrap();
        let gauge: f64 = phi.iter().zip(&w).map(|(a, b)| a * b).sum();
        for i in 0..x.len() {
            let phi_star = phi[i] / gauge;
            let psi_star = psi[i] * gauge;
            assert!((sol.phi[i] - phi_star).abs() <= 1e-6 * phi_star);
            assert!((sol.psi[i] - psi_star).abs() <= 1e-6 * psi_star);
        }
        assert_eq!(sol.residuals.len(), sol.iterations);
    }

    #[test]
    fn uniform_marginals_give_uniform_pair() {
        let (g, w, _) = setup(5.0);
        let ones = vec![1.0; w.len()];
        let sol = schroedinger_solve(&g, &w, &ones, &ones, 1e-12, 100).unwrap();
        assert!(sol.phi.iter().all(|p| (p - 1.0).abs() < 1e-8));
        assert!(sol.psi.iter().all(|p| (p - 1.0).abs() < 1e-8));
    }

    #[test]
    fn iterations_fall_as_horizon_grows() {
        let mut counts = Vec::new();
        for horizon in [0.25, 0.5, 1.0] {
            let (g, w, x) = setup(horizon);
            let mu0: Vec<f64> = x.iter().map(|x| 1.0 + 0.5 * (PI * x).cos()).collect();
            let mu_t: Vec<f64> = x.iter().map(|x| 1.0 - 0.3 * (2.0 * PI * x).cos()).collect();
            let sol = schroedinger_solve(&g, &w, &mu0, &mu_t, 1e-10, 1000).unwrap();
            counts.push(sol.iterations);
        }
        assert!(counts[0] > counts[1] && counts[1] > counts[2], "{counts:?}");
    }

    #[test]
    fn rejects_bad_input() {
        let (g, w, _) = setup(1.0);
        let mut mu = vec![1.0; w.len()];
        mu[3] = 0.0;
        let ones = vec![1.0; w.len()];
        assert!(matches!(
            schroedinger_solve(&g, &w, &mu, &ones, 1e-10, 10),
            Err(Error::Positivity(_))
        ));
        let twos = vec![2.0; w.len()];
        assert!(schroedinger_solve(&g, &w, &twos, &ones, 1e-10, 10).is_err());
        let (g, w, x) = setup(0.25);
        let mu0: Vec<f64> = x.iter().map(|x| 1.0 + 0.9 * (PI * x).cos()).collect();
        assert!(matches!(
            schroedinger_solve(&g, &w, &mu0, &ones, 1e-14, 2),
            Err(Error::NonConvergence { iterations: 2, .. })
        ));
    }
}
