use std::sync::Arc;

use nalgebra::DMatrix;

use super::weights::WeightSequence;
use crate::error::{Error, Result};
use crate::heat::HeatKernel;
use crate::observable::{Observable, Region};
use crate::process::{JointMeasure, LevelProcess};

/// The mixture `sum_m p_m P_m` of level processes sharing kernel and horizon.
///
/// Weight `k` belongs to `processes[k]`.
#[derive(Debug, Clone)]
pub struct MixedProcess {
    processes: Vec<LevelProcess>,
    weights: WeightSequence,
}

impl MixedProcess {
    pub fn new(processes: Vec<LevelProcess>, weights: WeightSequence) -> Result<Self> {
        let first = processes
            .first()
            .ok_or_else(|| Error::invalid("processes", "need at least one level"))?;
        if weights.len() != processes.len() {
            return Err(Error::LengthMismatch {
                expected: processes.len(),
                got: weights.len(),
            });
        }
        for p in &processes[1..] {
            if p.horizon() != first.horizon() {
                return Err(Error::invalid(
                    "horizon",
                    format!("levels disagree: {} vs {}", p.horizon(), first.horizon()),
                ));
            }
            if !Arc::ptr_eq(p.kernel(), first.kernel()) {
                return Err(Error::invalid("kernel", "all levels must share the kernel"));
            }
        }
        Ok(MixedProcess { processes, weights })
    }

    /// Levels `0..weights.len()` of the disk family, mixed with `weights`.
    pub fn disk_family(
        kernel: Arc<HeatKernel>,
        weights: WeightSequence,
        horizon: f64,
    ) -> Result<Self> {
        let processes = (0..weights.len())
            .map(|m| LevelProcess::disk_example(Arc::clone(&kernel), m, horizon))
            .collect::<Result<Vec<_>>>()?;
        Self::new(processes, weights)
    }

    pub fn processes(&self) -> &[LevelProcess] {
        &self.processes
    }

    pub fn weights(&self) -> &WeightSequence {
        &self.weights
    }

    pub fn horizon(&self) -> f64 {
        self.processes[0].horizon()
    }

    pub fn kernel(&self) -> &Arc<HeatKernel> {
        self.processes[0].kernel()
    }

    fn weighted_sum(&self, mut f: impl FnMut(&LevelProcess) -> Result<f64>) -> Result<f64> {
        let mut total = 0.0;
        for (p, w) in self.processes.iter().zip(self.weights.weights()) {
            if *w != 0.0 {
                total += w * f(p)?;
            }
        }
        Ok(total)
    }

    pub fn marginal_density(&self, x: f64, t: f64) -> f64 {
        self.processes
            .iter()
            .zip(self.weights.weights())
            .map(|(p, w)| w * p.marginal_density(x, t))
            .sum()
    }

    pub fn probability(&self, t: f64, region: Region) -> Result<f64> {
        self.weighted_sum(|p| p.probability(t, region))
    }

    pub fn expectation(&self, b: &Observable, t: f64) -> Result<f64> {
        self.weighted_sum(|p| p.expectation(b, t))
    }

    pub fn fdd(&self, times: &[f64], regions: &[Region]) -> Result<f64> {
        self.weighted_sum(|p| p.fdd(times, regions))
    }

    pub fn joint_measure(&self) -> Result<JointMeasure> {
        JointMeasure::mixture(&self.processes, self.weights.weights())
    }
}

/// `g(x, T, y) sum_m p_m phi_m(x) psi_m(y)` on the quadrature grid.
pub fn mixed_joint_density(processes: &[LevelProcess], w: &WeightSequence) -> Result<DMatrix<f64>> {
    Ok(MixedProcess::new(processes.to_vec(), w.clone())?
        .joint_measure()?
        .density()
        .clone())
}

/// Total mass `sum_n exp(T (lambda_m - lambda_n)) (f_m, f_n)^2` of the signed
/// measure built from the data `phi = f_m`, `psi = exp(T lambda_m) f_m`, with
/// the inner products taken by the basis quadrature. Equal to 1 exactly for an
/// orthonormal basis.
pub fn level_normalization(kernel: &HeatKernel, m: usize, horizon: f64) -> Result<f64> {
    kernel.check_time(horizon)?;
    let n = kernel.truncation();
    if m >= n {
        return Err(Error::invalid(
            "level",
            format!("{m} is beyond the truncation {n}"),
        ));
    }
    let basis = kernel.basis();
    let gram = basis.gram_matrix();
    let lambda = basis.eigenvalues();
    let mut total = 0.0;
    for k in 0..n {
        let overlap = gram[m][k];
        if overlap == 0.0 {
            continue;
        }
        let exponent = horizon * (lambda[m] - lambda[k]) + 2.0 * overlap.abs().ln();
        if exponent > f64::MAX_EXP as f64 * std::f64::consts::LN_2 {
            return Err(Error::Overflow(format!(
                "term {k} of the level-{m} normalization overflows: log = {exponent}"
            )));
        }
        total += exponent.exp();
    }
    Ok(total)
}
