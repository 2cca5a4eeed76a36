//! Statistical operators diagonal in the eigenbasis and their time-dependent,
//! biorthogonal counterparts. Everything is represented by mode coefficients
//! against the area-normalized eigenfunctions.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::heat::HeatKernel;
use crate::io::{fmt_real, key_values};
use crate::mixture::WeightSequence;
use crate::observable::{Observable, Region};
use crate::process::LevelProcess;
use crate::spectral::SpectralBasis;

/// Largest `|trace - 1|` for which a state is classified.
pub const CLASSIFY_TRACE_TOL: f64 = 1e-8;
/// `trace(R^2) >= 1 - PURITY_TOL` counts as pure.
pub const PURITY_TOL: f64 = 1e-12;
/// Largest accepted `|(u_m, v_n) - delta_mn|` for time-dependent data.
pub const BIORTHONORMALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purity {
    Pure,
    Mixed,
}

impl fmt::Display for Purity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Purity::Pure => "pure",
            Purity::Mixed => "mixed",
        })
    }
}

fn classify_traces(trace: f64, trace_square: f64) -> Result<Purity> {
    let deficit = (trace - 1.0).abs();
    if !(deficit <= CLASSIFY_TRACE_TOL) {
        return Err(Error::TraceDeficit { deficit });
    }
    Ok(if trace_square >= 1.0 - PURITY_TOL {
        Purity::Pure
    } else {
        Purity::Mixed
    })
}

/// `R f = sum_m p_m (f, f_m) f_m`.
#[derive(Debug, Clone)]
pub struct StatOperator {
    basis: Arc<SpectralBasis>,
    weights: WeightSequence,
}

impl StatOperator {
    pub fn new(basis: Arc<SpectralBasis>, weights: WeightSequence) -> Result<Self> {
        if weights.len() > basis.level_count() {
            return Err(Error::LengthMismatch {
                expected: basis.level_count(),
                got: weights.len(),
            });
        }
        Ok(StatOperator { basis, weights })
    }

    pub fn weights(&self) -> &WeightSequence {
        &self.weights
    }

    /// Scales coefficient `m` by `p_m` (zero beyond the weights).
    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        let p = self.weights.weights();
        coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| p.get(m).map_or(0.0, |p| p * c))
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.weights.weights().iter().sum()
    }

    pub fn trace_square(&self) -> f64 {
        self.weights.weights().iter().map(|p| p * p).sum()
    }

    pub fn classify(&self) -> Result<Purity> {
        classify_traces(self.trace(), self.trace_square())
    }

    /// `tr(R B) = sum_m p_m int b |F_m|^2 dA` for the multiplication operator `B`.
    pub fn trace_rb(&self, b: &Observable) -> f64 {
        let p = self.weights.weights();
        let n = p.len();
        if b.region() == Region::Whole {
            let table = self.basis.mode_table();
            return self
                .basis
                .nodes()
                .iter()
                .zip(self.basis.area_weights())
                .enumerate()
                .map(|(i, (x, w))| {
                    let density: f64 = (0..n).map(|m| p[m] * table[m][i] * table[m][i]).sum();
                    w * b.eval(*x) * density
                })
                .sum();
        }
        b.integrate(&self.basis, |x| {
            self.basis
                .modes_at(x, n)
                .iter()
                .zip(p)
                .map(|(f, p)| p * f * f)
                .sum()
        })
    }

    /// `trace`, `trace_square` and `classification` lines.
    pub fn summary(&self) -> String {
        let class = self
            .classify()
            .map_or_else(|e| format!("refused ({e})"), |c| c.to_string());
        key_values([
            ("trace", fmt_real(self.trace())),
            ("trace_square", fmt_real(self.trace_square())),
            ("classification", class),
        ])
    }
}

/// `P f = (f, u) v`, idempotent when `(u, v) = 1`.
#[derive(Debug, Clone)]
pub struct ObliqueProjection {
    u: DVector<f64>,
    v: DVector<f64>,
}

impl ObliqueProjection {
    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = padded(coeffs, self.u.len());
        (&self.v * self.u.dot(&c)).iter().copied().collect()
    }

    /// `max_k |P^2 c_k - P c_k|` over the test vectors.
    pub fn idempotence_residual(&self, tests: &[Vec<f64>]) -> f64 {
        tests
            .iter()
            .map(|c| {
                let once = self.apply(c);
                let twice = self.apply(&once);
                once.iter()
                    .zip(&twice)
                    .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()))
            })
            .fold(0.0, f64::max)
    }
}

fn padded(coeffs: &[f64], n: usize) -> DVector<f64> {
    DVector::from_fn(n, |k, _| coeffs.get(k).copied().unwrap_or(0.0))
}

/// `R(t) f = sum_m p_m (f, u_m(., t)) v_m(., t)` for a biorthonormal family.
#[derive(Debug, Clone)]
pub struct TimeDepStatOperator {
    kernel: Arc<HeatKernel>,
    weights: WeightSequence,
    /// column `m` holds the coefficients of `u_m(., t)`
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    time: f64,
    horizon: f64,
    biorthonormality: f64,
}

impl TimeDepStatOperator {
    /// Built from `processes[m]`, weighted by `weights[m]`, at time `t`.
    ///
    /// The family must satisfy `|(u_m, v_n) - delta_mn| <= 1e-6` by quadrature.
    pub fn new(processes: &[LevelProcess], weights: WeightSequence, t: f64) -> Result<Self> {
        let first = processes
            .first()
            .ok_or_else(|| Error::invalid("processes", "need at least one level"))?;
        if processes.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: processes.len(),
                got: weights.len(),
            });
        }
        let horizon = first.horizon();
        if processes
            .iter()
            .any(|p| p.horizon() != horizon || !Arc::ptr_eq(p.kernel(), first.kernel()))
        {
            return Err(Error::invalid(
                "processes",
                "levels must share kernel and horizon",
            ));
        }
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::invalid(
                "t",
                format!("{t} is outside [0, {horizon}]"),
            ));
        }
        let kernel = Arc::clone(first.kernel());
        let n = kernel.truncation();
        let columns = |f: &dyn Fn(&LevelProcess) -> Vec<f64>| {
            DMatrix::from_fn(n, processes.len(), |k, m| f(&processes[m])[k])
        };
        let u = columns(&|p| p.u_coeffs(t));
        let v = columns(&|p| p.v_coeffs(t));
        let mut op = TimeDepStatOperator {
            kernel,
            weights,
            u,
            v,
            time: t,
            horizon,
            biorthonormality: 0.0,
        };
        let (residual, m, k) = op.biorthonormality_residual(processes);
        if residual > BIORTHONORMALITY_TOL {
            return Err(Error::NotBiorthonormal { m, n: k, residual });
        }
        op.biorthonormality = residual;
        Ok(op)
    }

    /// The family `phi = F_m`, `psi = exp(T lambda_m) F_m` for `m < weights.len()`.
    pub fn with_default_data(
        kernel: Arc<HeatKernel>,
        weights: WeightSequence,
        horizon: f64,
        t: f64,
    ) -> Result<Self> {
        let processes = default_family(&kernel, weights.len(), horizon)?;
        Self::new(&processes, weights, t)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn weights(&self) -> &WeightSequence {
        &self.weights
    }

    /// Largest relative pairing defect measured at construction.
    pub fn biorthonormality(&self) -> f64 {
        self.biorthonormality
    }

    /// Largest `|(u_m, v_n) - delta_mn| / (|u_m| |v_n|)` with inner products on
    /// the quadrature grid. The norms make the check scale free: `v_m` carries a
    /// factor `exp((T - t) lambda_m)` that magnifies rounding in the raw pairing.
    fn biorthonormality_residual(&self, processes: &[LevelProcess]) -> (f64, usize, usize) {
        let w = self.kernel.basis().area_weights();
        let us: Vec<Vec<f64>> = processes.iter().map(|p| p.u_on_grid(self.time)).collect();
        let vs: Vec<Vec<f64>> = processes.iter().map(|p| p.v_on_grid(self.time)).collect();
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            w.iter()
                .zip(a.iter().zip(b))
                .map(|(w, (x, y))| w * x * y)
                .sum()
        };
        let mut worst = (0.0, 0, 0);
        for (m, u) in us.iter().enumerate() {
            for (n, v) in vs.iter().enumerate() {
                let target = if m == n { 1.0 } else { 0.0 };
                let scale = (dot(u, u) * dot(v, v)).sqrt();
                let r = (dot(u, v) - target).abs() / scale;
                if r > worst.0 {
                    worst = (r, m, n);
                }
            }
        }
        worst
    }

    fn diag(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(self.weights.weights()))
    }

    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = padded(coeffs, self.u.nrows());
        (&self.v * (self.diag() * self.u.tr_mul(&c)))
            .iter()
            .copied()
            .collect()
    }

    /// `R*(t) f = sum_m p_m (f, v_m) u_m`.
    pub fn apply_adjoint(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = padded(coeffs, self.u.nrows());
        (&self.u * (self.diag() * self.v.tr_mul(&c)))
            .iter()
            .copied()
            .collect()
    }

    /// Coefficients of `u_m(., t)`.
    pub fn u_coeffs(&self, m: usize) -> Vec<f64> {
        self.u.column(m).iter().copied().collect()
    }

    /// Coefficients of `v_m(., t)`.
    pub fn v_coeffs(&self, m: usize) -> Vec<f64> {
        self.v.column(m).iter().copied().collect()
    }

    pub fn oblique_projection(&self, m: usize) -> Result<ObliqueProjection> {
        if m >= self.u.ncols() {
            return Err(Error::invalid("level", format!("{m} is not in the family")));
        }
        Ok(ObliqueProjection {
            u: self.u.column(m).into_owned(),
            v: self.v.column(m).into_owned(),
        })
    }

    /// `sum_m p_m (u_m(., t), v_m(., t))`.
    pub fn trace(&self) -> f64 {
        self.weights
            .weights()
            .iter()
            .enumerate()
            .map(|(m, p)| p * self.u.column(m).dot(&self.v.column(m)))
            .sum()
    }

    pub fn trace_square(&self) -> f64 {
        // R^2 = sum_{m,n} p_m p_n (v_m, u_n) ... whose trace is sum p_m p_n (v_m, u_n)(v_n, u_m)
        let g = self.u.tr_mul(&self.v);
        let p = self.weights.weights();
        let mut total = 0.0;
        for m in 0..p.len() {
            for n in 0..p.len() {
                total += p[m] * p[n] * g[(n, m)] * g[(m, n)];
            }
        }
        total
    }

    pub fn classify(&self) -> Result<Purity> {
        classify_traces(self.trace(), self.trace_square())
    }

    /// `tr(R(t) B) = sum_m p_m int b u_m(., t) v_m(., t) dA`.
    pub fn trace_rb(&self, b: &Observable) -> f64 {
        let basis = self.kernel.basis();
        let n = self.u.nrows();
        let p = self.weights.weights();
        let density = |modes: &DVector<f64>| -> f64 {
            let u = self.u.tr_mul(modes);
            let v = self.v.tr_mul(modes);
            (0..p.len()).map(|m| p[m] * u[m] * v[m]).sum()
        };
        if b.region() == Region::Whole {
            let grid = self.kernel.grid_modes();
            return basis
                .nodes()
                .iter()
                .zip(basis.area_weights())
                .enumerate()
                .map(|(i, (x, w))| w * b.eval(*x) * density(&grid.row(i).transpose()))
                .sum();
        }
        b.integrate(basis, |x| density(&DVector::from_vec(basis.modes_at(x, n))))
    }
}

/// Level processes with the signed data `phi = F_m`, `psi = exp(T lambda_m) F_m`.
pub fn default_family(
    kernel: &Arc<HeatKernel>,
    count: usize,
    horizon: f64,
) -> Result<Vec<LevelProcess>> {
    (0..count)
        .map(|m| LevelProcess::eigen_data(Arc::clone(kernel), m, horizon))
        .collect()
}
