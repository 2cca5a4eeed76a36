use std::sync::Arc;

use crate::error::{Error, Result};
use crate::heat::HeatKernel;
use crate::observable::{Observable, Region};
use crate::process::JointMeasure;

/// The stationary, non-Markovian mixture with Gibbs weights at `beta = T`:
/// marginal density `g(x, T, x) / Z(T)` at every time.
#[derive(Debug, Clone)]
pub struct StationaryProcess {
    kernel: Arc<HeatKernel>,
    horizon: f64,
    z: f64,
}

impl StationaryProcess {
    pub fn new(kernel: Arc<HeatKernel>, horizon: f64) -> Result<Self> {
        let z = kernel.partition_function(horizon)?;
        Ok(StationaryProcess { kernel, horizon, z })
    }

    pub fn kernel(&self) -> &Arc<HeatKernel> {
        &self.kernel
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn partition_function(&self) -> f64 {
        self.z
    }

    pub fn marginal_density(&self, x: f64) -> f64 {
        self.kernel.eval_unchecked(x, self.horizon, x) / self.z
    }

    /// `Z^{-1}(T) int_F g(x, T, x) dx`.
    pub fn marginal(&self, region: Region) -> f64 {
        region.integrate_area(self.kernel.basis(), |x| self.marginal_density(x))
    }

    pub fn expectation(&self, b: &Observable) -> f64 {
        b.integrate(self.kernel.basis(), |x| self.marginal_density(x))
    }

    /// `Z^{-1}(T) int g(x_1, t_2 - t_1, x_2) ... g(x_n, T - (t_n - t_1), x_1)`
    /// over `x_k in F_k`, the trace of the cyclic kernel chain. Depends on
    /// the times only through their gaps.
    pub fn fdd(&self, times: &[f64], regions: &[Region]) -> Result<f64> {
        crate::process::check_fdd_times(times, regions.len(), self.horizon)?;
        let closing = self.horizon - (times[times.len() - 1] - times[0]);
        for gap in times.windows(2).map(|w| w[1] - w[0]).chain([closing]) {
            self.kernel.check_time(gap)?;
        }
        let basis = self.kernel.basis();
        let rules: Vec<(Vec<f64>, Vec<f64>)> = regions.iter().map(|r| r.rule(basis)).collect();
        if rules.iter().any(|(nodes, _)| nodes.is_empty()) {
            return Ok(0.0);
        }
        let modes: Vec<_> = rules
            .iter()
            .map(|(nodes, _)| self.kernel.mode_matrix(nodes))
            .collect();
        let n = times.len();
        let mut chain: Option<nalgebra::DMatrix<f64>> = None;
        for k in 0..n {
            let (next, gap) = if k + 1 < n {
                (k + 1, times[k + 1] - times[k])
            } else {
                (0, closing)
            };
            let mut step = self.kernel.cross_from_modes(gap, &modes[k], &modes[next]);
            for (i, w) in rules[k].1.iter().enumerate() {
                step.row_mut(i).scale_mut(*w);
            }
            chain = Some(match chain {
                None => step,
                Some(c) => c * step,
            });
        }
        let trace = chain.expect("at least one time").trace();
        if !trace.is_finite() {
            return Err(Error::Invariant(format!("non-finite kernel chain {trace}")));
        }
        Ok(trace / self.z)
    }

    /// The diagonal endpoint law of the process.
    pub fn joint_measure(&self) -> Result<JointMeasure> {
        JointMeasure::gibbs_diagonal(Arc::clone(&self.kernel), self.horizon)
    }
}
