//! Truncated spectral heat kernel and the semigroup it generates.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

/// Smallest `N` for which the discarded part of the heat-kernel expansion at
/// `t_min`, `sum_{N <= m < available} exp(-t_min lambda_m) sup|f_m|^2`, lies
/// below `tol`.
///
/// `sup|f_m|` is the basis-measure sup norm of each level (at most `sqrt 2` on
/// the interval, `sqrt 2 / |J0(z_m)|` on the disk, the largest tabulated value
/// for imported bases). At least one level beyond `N` has to exist to serve as
/// evidence for the tail, so `N` ranges over `1 ..= available - 1`; otherwise
/// [`Error::TruncationUncertified`] reports the tolerance that the last level
/// alone would certify.
pub fn truncation_level(basis: &SpectralBasis, t_min: f64, tol: f64) -> Result<usize> {
    if !(t_min > 0.0) || !t_min.is_finite() {
        return Err(Error::invalid(
            "t_min",
            format!("must be positive, got {t_min}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(
            "tol",
            format!("must be positive, got {tol}"),
        ));
    }
    if tol == f64::INFINITY {
        return Ok(1);
    }
    let available = basis.level_count();
    let lambda0 = basis.eigenvalue(0);
    let terms: Vec<f64> = basis
        .levels()
        .iter()
        .map(|l| (-t_min * (l.eigenvalue() - lambda0)).exp() * l.sup_norm().powi(2))
        .collect();
    // Tails shifted by lambda_0 are conservative for lambda_0 >= 0 and keep the
    // criterion meaningful for imported spectra with negative ground energy.
    let scale = (-t_min * lambda0).exp().clamp(f64::MIN_POSITIVE, 1.0);
    let mut tail = 0.0;
    let mut best = None;
    for n in (1..available).rev() {
        tail += terms[n];
        if tail * scale < tol {
            best = Some(n);
        } else {
            break;
        }
    }
    best.ok_or_else(|| Error::TruncationUncertified {
        available,
        requested: tol,
        achievable: terms
            .get(available.saturating_sub(1))
            .copied()
            .unwrap_or(f64::INFINITY)
            * scale,
    })
}

/// `g(x, t, y) = sum_{m < N} exp(-t lambda_m) F_m(x) F_m(y)` with area-normalized
/// modes `F_m`, i.e. the transition density with respect to area.
#[derive(Debug, Clone)]
pub struct HeatKernel {
    basis: Arc<SpectralBasis>,
    truncation: usize,
    t_min: f64,
}

impl HeatKernel {
    /// Kernel truncated at [`truncation_level`]`(basis, t_min, tol)`.
    pub fn new(basis: Arc<SpectralBasis>, t_min: f64, tol: f64) -> Result<Self> {
        let truncation = truncation_level(&basis, t_min, tol)?;
        Ok(HeatKernel {
            basis,
            truncation,
            t_min,
        })
    }

    /// Kernel with an explicit truncation, certified from `t_min` on by the caller.
    pub fn with_truncation(
        basis: Arc<SpectralBasis>,
        truncation: usize,
        t_min: f64,
    ) -> Result<Self> {
        if truncation == 0 || truncation > basis.level_count() {
            return Err(Error::invalid(
                "truncation",
                format!("must be in 1..={}, got {truncation}", basis.level_count()),
            ));
        }
        if !(t_min > 0.0) {
            return Err(Error::invalid(
                "t_min",
                format!("must be positive, got {t_min}"),
            ));
        }
        Ok(HeatKernel {
            basis,
            truncation,
            t_min,
        })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    /// Eigenvalues of the retained levels.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.basis.eigenvalues()[..self.truncation].to_vec()
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::invalid("t", "must be finite"));
        }
        if t < self.t_min {
            return Err(Error::BelowMinimumTime {
                t,
                t_min: self.t_min,
            });
        }
        Ok(())
    }

    /// `g(x, t, y)`; refuses `t < t_min`.
    pub fn eval(&self, x: f64, t: f64, y: f64) -> Result<f64> {
        self.check_time(t)?;
        for (name, z) in [("x", x), ("y", y)] {
            if !self.basis.contains(z) {
                return Err(Error::invalid(name, format!("{z} is outside the domain")));
            }
        }
        Ok(self.eval_unchecked(x, t, y))
    }

    pub(crate) fn eval_unchecked(&self, x: f64, t: f64, y: f64) -> f64 {
        let scale = self.basis.area_factor().recip();
        self.basis.levels()[..self.truncation]
            .iter()
            .map(|l| (-t * l.eigenvalue()).exp() * (l.eval(x) * l.eval(y)))
            .sum::<f64>()
            * scale
    }

    /// Multiplies coefficient `m` by `exp(-t lambda_m)`.
    pub fn semigroup_apply(&self, t: f64, coeffs: &[f64]) -> Result<Vec<f64>> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid(
                "t",
                format!("must be finite and >= 0, got {t}"),
            ));
        }
        if coeffs.len() > self.truncation {
            return Err(Error::LengthMismatch {
                expected: self.truncation,
                got: coeffs.len(),
            });
        }
        Ok(coeffs
            .iter()
            .zip(self.basis.levels())
            .map(|(c, l)| c * (-t * l.eigenvalue()).exp())
            .collect())
    }

    /// `Z(T) = sum_{m < N} exp(-T lambda_m)`.
    pub fn partition_function(&self, horizon: f64) -> Result<f64> {
        self.check_time(horizon)?;
        Ok(self.basis.levels()[..self.truncation]
            .iter()
            .map(|l| (-horizon * l.eigenvalue()).exp())
            .sum())
    }

    /// Area integral of the diagonal `g(x, T, x)` by quadrature; equals
    /// [`HeatKernel::partition_function`] up to quadrature error.
    pub fn diagonal_integral(&self, horizon: f64) -> Result<f64> {
        self.check_time(horizon)?;
        Ok(self
            .basis
            .integrate_area(|x| self.eval_unchecked(x, horizon, x)))
    }

    /// `g(x_i, t, x_j)` on the quadrature nodes.
    pub fn grid_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        self.check_time(t)?;
        let modes = self.grid_modes();
        Ok(self.cross_from_modes(t, &modes, &modes))
    }

    /// Area-normalized modes at `points`, one row per point.
    pub fn mode_matrix(&self, points: &[f64]) -> DMatrix<f64> {
        let n = self.truncation;
        let mut out = DMatrix::zeros(points.len(), n);
        for (i, x) in points.iter().enumerate() {
            for (j, f) in self.basis.modes_at(*x, n).into_iter().enumerate() {
                out[(i, j)] = f;
            }
        }
        out
    }

    /// Modes at the quadrature nodes, one row per node.
    pub fn grid_modes(&self) -> DMatrix<f64> {
        let table = &self.basis.mode_table()[..self.truncation];
        DMatrix::from_fn(self.basis.nodes().len(), self.truncation, |i, m| {
            table[m][i]
        })
    }

    /// `g(x_i, t, y_j)` for arbitrary point sets.
    pub fn cross_matrix(&self, t: f64, xs: &[f64], ys: &[f64]) -> Result<DMatrix<f64>> {
        self.check_time(t)?;
        Ok(self.cross_from_modes(t, &self.mode_matrix(xs), &self.mode_matrix(ys)))
    }

    /// `A diag(exp(-t lambda)) B^T` for mode matrices `A`, `B`.
    pub(crate) fn cross_from_modes(
        &self,
        t: f64,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let mut scaled = a.clone();
        for (m, level) in self.basis.levels()[..self.truncation].iter().enumerate() {
            let e = (-t * level.eigenvalue()).exp();
            scaled.column_mut(m).scale_mut(e);
        }
        scaled * b.transpose()
    }
}
