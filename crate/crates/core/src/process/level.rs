use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::heat::HeatKernel;
use crate::observable::{Observable, Region};

/// Real function of the domain coordinate.
pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tolerance on the normalization `sum_n exp(-T lambda_n) phi_n psi_n = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-4;

/// Boundary datum given either as a function or as mode coefficients.
#[derive(Clone)]
pub enum BoundarySpec {
    Function(Profile),
    Coefficients(Vec<f64>),
}

impl BoundarySpec {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        BoundarySpec::Function(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        BoundarySpec::function(move |_| c)
    }
}

impl fmt::Debug for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundarySpec::Function(_) => write!(f, "Function(<fn>)"),
            BoundarySpec::Coefficients(c) => f.debug_tuple("Coefficients").field(c).finish(),
        }
    }
}

/// Whether the boundary data are pointwise positive on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Positivity {
    Positive,
    Signed,
}

/// `phi_{0,m}` and `psi_{T,m}` in area-normalized mode coefficients.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub level: usize,
    pub phi0: Vec<f64>,
    pub psi_t: Vec<f64>,
    pub horizon: f64,
    pub positivity: Positivity,
    /// `sum_n exp(-T lambda_n) phi0_n psiT_n`
    pub normalization: f64,
}

/// The Markovian Bernstein process of one spectral level, with
/// `u(., t) = exp(-tH) phi` and `v(., t) = exp(-(T - t)H) psi`.
#[derive(Clone)]
pub struct LevelProcess {
    kernel: Arc<HeatKernel>,
    data: BoundaryData,
    phi_exact: Option<Profile>,
    psi_exact: Option<Profile>,
}

impl fmt::Debug for LevelProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelProcess")
            .field("data", &self.data)
            .field("truncation", &self.kernel.truncation())
            .finish()
    }
}

impl LevelProcess {
    /// Projects the boundary data, checks `|normalization - 1| <= 1e-4` and
    /// classifies positivity.
    pub fn new(
        kernel: Arc<HeatKernel>,
        level: usize,
        phi0: BoundarySpec,
        psi_t: BoundarySpec,
        horizon: f64,
    ) -> Result<Self> {
        let process = Self::new_unnormalized(kernel, level, phi0, psi_t, horizon)?;
        let value = process.data.normalization;
        if !((value - 1.0).abs() <= NORMALIZATION_TOL) {
            return Err(Error::Unnormalized { value });
        }
        Ok(process)
    }

    /// As [`LevelProcess::new`], without the normalization requirement.
    pub fn new_unnormalized(
        kernel: Arc<HeatKernel>,
        level: usize,
        phi0: BoundarySpec,
        psi_t: BoundarySpec,
        horizon: f64,
    ) -> Result<Self> {
        kernel.check_time(horizon)?;
        let n = kernel.truncation();
        let (phi_coeffs, phi_exact) = project(&kernel, phi0, "phi0")?;
        let (psi_coeffs, psi_exact) = project(&kernel, psi_t, "psi_t")?;
        let eigenvalues = kernel.eigenvalues();
        let normalization = (0..n)
            .map(|k| (-horizon * eigenvalues[k]).exp() * phi_coeffs[k] * psi_coeffs[k])
            .sum();
        let mut process = LevelProcess {
            kernel,
            data: BoundaryData {
                level,
                phi0: phi_coeffs,
                psi_t: psi_coeffs,
                horizon,
                positivity: Positivity::Positive,
                normalization,
            },
            phi_exact,
            psi_exact,
        };
        process.data.positivity = process.classify_positivity();
        Ok(process)
    }

    /// Level `m` of the disk family `phi = (1 + J0(z_m r)) / pi` (`1 / pi` for
    /// `m = 0`), `psi = 1`, for which `u = (1 + exp(-t lambda_m) J0(z_m r)) / pi`
    /// and `v = 1`.
    ///
    /// `m` must be retained by the kernel truncation. In area-normalized modes
    /// `phi = (F_0 + |J0(z_m)| F_m) / sqrt(pi)`, which is what is stored.
    pub fn disk_example(kernel: Arc<HeatKernel>, m: usize, horizon: f64) -> Result<Self> {
        let basis = kernel.basis();
        if basis.domain() != crate::spectral::Domain::DiskRadial {
            return Err(Error::invalid(
                "basis",
                "the disk example needs the disk basis",
            ));
        }
        if m >= kernel.truncation() {
            return Err(Error::invalid(
                "level",
                format!("{m} is beyond the truncation {}", kernel.truncation()),
            ));
        }
        let n = kernel.truncation();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut phi = vec![0.0; n];
        phi[0] = 1.0 / sqrt_pi;
        if m > 0 {
            // F_m = sqrt(2) J0(z_m r) / (|J0(z_m)| sqrt(2 pi)), so J0(z_m r) = |J0(z_m)| sqrt(pi) F_m
            let level = &basis.levels()[m];
            let j0_at_one = std::f64::consts::SQRT_2 / level.normalizer();
            phi[m] = j0_at_one / sqrt_pi;
        }
        let mut psi = vec![0.0; n];
        psi[0] = sqrt_pi;
        let zero = if m > 0 {
            (2.0 * basis.eigenvalue(m)).sqrt()
        } else {
            0.0
        };
        let phi_exact: Profile = if m == 0 {
            Arc::new(|_| 1.0 / std::f64::consts::PI)
        } else {
            Arc::new(move |r: f64| {
                (1.0 + crate::spectral::bessel_j0(zero * r).unwrap_or(f64::NAN))
                    / std::f64::consts::PI
            })
        };
        let mut process = Self::new(
            kernel,
            m,
            BoundarySpec::Coefficients(phi),
            BoundarySpec::Coefficients(psi),
            horizon,
        )?;
        process.phi_exact = Some(phi_exact);
        process.psi_exact = Some(Arc::new(|_| 1.0));
        process.data.positivity = process.classify_positivity();
        Ok(process)
    }

    /// The signed level-`m` data `phi = F_m`, `psi = exp(T lambda_m) F_m`.
    pub fn eigen_data(kernel: Arc<HeatKernel>, m: usize, horizon: f64) -> Result<Self> {
        let n = kernel.truncation();
        if m >= n {
            return Err(Error::invalid(
                "level",
                format!("{m} is beyond the truncation {n}"),
            ));
        }
        let lambda = kernel.basis().eigenvalue(m);
        let mut phi = vec![0.0; n];
        phi[m] = 1.0;
        let mut psi = vec![0.0; n];
        psi[m] = (horizon * lambda).exp();
        if !psi[m].is_finite() {
            return Err(Error::Overflow(format!(
                "exp(T lambda_{m}) overflows for T = {horizon}, lambda = {lambda}"
            )));
        }
        Self::new(
            kernel,
            m,
            BoundarySpec::Coefficients(phi),
            BoundarySpec::Coefficients(psi),
            horizon,
        )
    }

    /// Level `m` of the default positive family: the disk data on the disk,
    /// otherwise `phi = 1 + F_m / (2 sup|F_m|)` (the constant for `m = 0`), `psi = 1`.
    pub fn positive_example(kernel: Arc<HeatKernel>, m: usize, horizon: f64) -> Result<Self> {
        let basis = kernel.basis();
        if basis.domain() == crate::spectral::Domain::DiskRadial {
            return Self::disk_example(kernel, m, horizon);
        }
        if m >= kernel.truncation() {
            return Err(Error::invalid(
                "level",
                format!("{m} is beyond the truncation {}", kernel.truncation()),
            ));
        }
        let phi = if m == 0 {
            BoundarySpec::constant(1.0)
        } else {
            let level = basis.levels()[m].clone();
            let sup = level.sup_norm();
            BoundarySpec::function(move |x| 1.0 + 0.5 * level.eval(x) / sup)
        };
        Self::new_unnormalized(kernel, m, phi, BoundarySpec::constant(1.0), horizon)?.normalized()
    }

    /// The stationary ground-state process `phi = 1 / |D|`, `psi = 1`.
    pub fn ground_state(kernel: Arc<HeatKernel>, horizon: f64) -> Result<Self> {
        let area = Region::Whole.area(kernel.basis());
        Self::new(
            kernel,
            0,
            BoundarySpec::constant(1.0 / area),
            BoundarySpec::constant(1.0),
            horizon,
        )
    }

    pub fn kernel(&self) -> &Arc<HeatKernel> {
        &self.kernel
    }

    pub fn data(&self) -> &BoundaryData {
        &self.data
    }

    pub fn horizon(&self) -> f64 {
        self.data.horizon
    }

    pub fn level(&self) -> usize {
        self.data.level
    }

    pub fn positivity(&self) -> Positivity {
        self.data.positivity
    }

    /// Same process with `phi` rescaled so that the normalization is exactly 1.
    pub fn normalized(mut self) -> Result<Self> {
        let c = self.data.normalization;
        if !(c.abs() > 0.0) || !c.is_finite() {
            return Err(Error::Unnormalized { value: c });
        }
        self.data.phi0.iter_mut().for_each(|p| *p /= c);
        if let Some(f) = self.phi_exact.take() {
            self.phi_exact = Some(Arc::new(move |x| f(x) / c));
        }
        self.data.normalization = 1.0;
        Ok(self)
    }

    fn classify_positivity(&self) -> Positivity {
        let basis = self.kernel.basis();
        let (lo, hi) = basis.bounds();
        let mut points: Vec<f64> = basis.nodes().to_vec();
        points.push(lo);
        points.push(hi);
        let t = self.data.horizon;
        let positive = points
            .iter()
            .all(|x| self.u(*x, 0.0) > 0.0 && self.v(*x, t) > 0.0);
        if positive {
            Positivity::Positive
        } else {
            Positivity::Signed
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.data.horizon).contains(&t) {
            return Err(Error::invalid(
                "t",
                format!("{t} is outside [0, {}]", self.data.horizon),
            ));
        }
        Ok(())
    }

    pub(crate) fn require_positive(&self) -> Result<()> {
        if self.data.positivity == Positivity::Signed {
            return Err(Error::SignedData {
                level: self.data.level,
            });
        }
        Ok(())
    }

    /// Mode coefficients of `u(., t)`.
    pub fn u_coeffs(&self, t: f64) -> Vec<f64> {
        let lambda = self.kernel.eigenvalues();
        self.data
            .phi0
            .iter()
            .zip(&lambda)
            .map(|(p, l)| (-t * l).exp() * p)
            .collect()
    }

    /// Mode coefficients of `v(., t)`.
    pub fn v_coeffs(&self, t: f64) -> Vec<f64> {
        let lambda = self.kernel.eigenvalues();
        let dt = self.data.horizon - t;
        self.data
            .psi_t
            .iter()
            .zip(&lambda)
            .map(|(p, l)| (-dt * l).exp() * p)
            .collect()
    }

    fn synthesize(&self, coeffs: &[f64], x: f64) -> f64 {
        let modes = self.kernel.basis().modes_at(x, coeffs.len());
        coeffs.iter().zip(&modes).map(|(c, f)| c * f).sum()
    }

    /// `u(x, t)`; exact `phi` at `t = 0` when it was given as a function.
    pub fn u(&self, x: f64, t: f64) -> f64 {
        if t == 0.0 {
            if let Some(phi) = &self.phi_exact {
                return phi(x);
            }
        }
        self.synthesize(&self.u_coeffs(t), x)
    }

    /// `v(x, t)`; exact `psi` at `t = T` when it was given as a function.
    pub fn v(&self, x: f64, t: f64) -> f64 {
        if t == self.data.horizon {
            if let Some(psi) = &self.psi_exact {
                return psi(x);
            }
        }
        self.synthesize(&self.v_coeffs(t), x)
    }

    /// `u` on the quadrature nodes.
    pub fn u_on_grid(&self, t: f64) -> Vec<f64> {
        self.on_grid(t, true)
    }

    /// `v` on the quadrature nodes.
    pub fn v_on_grid(&self, t: f64) -> Vec<f64> {
        self.on_grid(t, false)
    }

    fn on_grid(&self, t: f64, forward: bool) -> Vec<f64> {
        let basis = self.kernel.basis();
        let exact = if forward {
            (t == 0.0).then_some(self.phi_exact.as_ref()).flatten()
        } else {
            (t == self.data.horizon)
                .then_some(self.psi_exact.as_ref())
                .flatten()
        };
        if let Some(f) = exact {
            return basis.nodes().iter().map(|x| f(*x)).collect();
        }
        let coeffs = if forward {
            self.u_coeffs(t)
        } else {
            self.v_coeffs(t)
        };
        let table = basis.mode_table();
        (0..basis.nodes().len())
            .map(|i| coeffs.iter().zip(table).map(|(c, row)| c * row[i]).sum())
            .collect()
    }

    /// `(u(., t), v(., t))` by quadrature.
    pub fn conservation(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let u = self.u_on_grid(t);
        let v = self.v_on_grid(t);
        Ok(self
            .kernel
            .basis()
            .area_weights()
            .iter()
            .zip(u.iter().zip(&v))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    /// Marginal density `rho(x, t) = u(x, t) v(x, t)` with respect to area.
    pub fn marginal_density(&self, x: f64, t: f64) -> f64 {
        self.u(x, t) * self.v(x, t)
    }

    /// Marginal density on the quadrature nodes.
    pub fn marginal_on_grid(&self, t: f64) -> Vec<f64> {
        let u = self.u_on_grid(t);
        let v = self.v_on_grid(t);
        u.iter().zip(&v).map(|(a, b)| a * b).collect()
    }

    /// `E[b(Z_t)] = int b u v dA`.
    pub fn expectation(&self, b: &Observable, t: f64) -> Result<f64> {
        self.check_time(t)?;
        if b.region() == Region::Whole {
            // the grid reuses the tabulated modes
            let rho = self.marginal_on_grid(t);
            let basis = self.kernel.basis();
            return Ok(basis
                .nodes()
                .iter()
                .zip(basis.area_weights())
                .zip(&rho)
                .map(|((x, w), r)| w * b.eval(*x) * r)
                .sum());
        }
        Ok(b.integrate(self.kernel.basis(), |x| self.marginal_density(x, t)))
    }

    /// `P(Z_t in F)`.
    pub fn probability(&self, t: f64, region: Region) -> Result<f64> {
        self.expectation(&Observable::indicator(region), t)
    }

    /// Forward transition density `g(x, t - s, y) v(y, t) / v(x, s)`.
    pub fn forward_density(&self, x: f64, s: f64, y: f64, t: f64) -> Result<f64> {
        self.require_positive()?;
        self.check_ordered(s, t)?;
        let vx = self.v(x, s);
        if !(vx > 0.0) {
            return Err(Error::Singular {
                which: "v",
                x,
                t: s,
                value: vx,
            });
        }
        Ok(self.kernel.eval(x, t - s, y)? * self.v(y, t) / vx)
    }

    /// Backward transition density `g(x, t - s, y) u(y, s) / u(x, t)`.
    pub fn backward_density(&self, x: f64, t: f64, y: f64, s: f64) -> Result<f64> {
        self.require_positive()?;
        self.check_ordered(s, t)?;
        let ux = self.u(x, t);
        if !(ux > 0.0) {
            return Err(Error::Singular {
                which: "u",
                x,
                t,
                value: ux,
            });
        }
        Ok(self.kernel.eval(x, t - s, y)? * self.u(y, s) / ux)
    }

    fn check_ordered(&self, s: f64, t: f64) -> Result<()> {
        self.check_time(s)?;
        self.check_time(t)?;
        if !(s < t) {
            return Err(Error::invalid(
                "times",
                format!("need s < t, got s = {s}, t = {t}"),
            ));
        }
        Ok(())
    }

    /// Two-sided density `q(x, t; z, r; y, s)` of the bridge from `(y, s)` to `(x, t)`.
    pub fn two_sided_density(&self, x: f64, t: f64, z: f64, r: f64, y: f64, s: f64) -> Result<f64> {
        self.check_time(s)?;
        self.check_time(t)?;
        bridge_density(&self.kernel, x, t, z, r, y, s)
    }

    /// `P(Z_{t_1} in F_1, ..., Z_{t_n} in F_n)` by the forward Markov chain,
    /// starting from `rho(., 0)` on the basis grid. Each region is integrated
    /// with its own quadrature rule ([`Region::rule`]).
    pub fn fdd(&self, times: &[f64], regions: &[Region]) -> Result<f64> {
        self.require_positive()?;
        super::check_fdd_times(times, regions.len(), self.data.horizon)?;
        let basis = self.kernel.basis();
        let mut nodes = basis.nodes().to_vec();
        let mut modes = self.kernel.grid_modes();
        let mut mass = DVector::from_iterator(
            nodes.len(),
            self.marginal_on_grid(0.0)
                .iter()
                .zip(basis.area_weights())
                .map(|(r, w)| r * w),
        );
        let mut v_prev = DVector::from_vec(self.v_on_grid(0.0));
        let mut previous = 0.0;
        for (t, region) in times.iter().zip(regions) {
            self.kernel.check_time(t - previous)?;
            let (next_nodes, weights) = region.rule(basis);
            if next_nodes.is_empty() {
                return Ok(0.0);
            }
            let next_modes = self.kernel.mode_matrix(&next_nodes);
            let v_next = &next_modes * DVector::from_vec(self.v_coeffs(*t));
            for (i, v) in v_prev.iter().enumerate() {
                if mass[i] != 0.0 && !(*v > 0.0) {
                    return Err(Error::Singular {
                        which: "v",
                        x: nodes[i],
                        t: previous,
                        value: *v,
                    });
                }
            }
            let scaled = mass.zip_map(&v_prev, |m, v| if m == 0.0 { 0.0 } else { m / v });
            let g = self
                .kernel
                .cross_from_modes(t - previous, &modes, &next_modes);
            let carried = g.tr_mul(&scaled);
            mass = DVector::from_iterator(
                next_nodes.len(),
                carried
                    .iter()
                    .zip(&weights)
                    .zip(v_next.iter())
                    .map(|((c, w), v)| c * w * v),
            );
            nodes = next_nodes;
            modes = next_modes;
            v_prev = v_next;
            previous = *t;
        }
        Ok(mass.sum())
    }
}

/// `g(x, t - r, z) g(z, r - s, y) / g(x, t - s, y)`.
pub fn bridge_density(
    kernel: &HeatKernel,
    x: f64,
    t: f64,
    z: f64,
    r: f64,
    y: f64,
    s: f64,
) -> Result<f64> {
    if !(s < r && r < t) {
        return Err(Error::invalid(
            "times",
            format!("need s < r < t, got s = {s}, r = {r}, t = {t}"),
        ));
    }
    let denominator = kernel.eval(x, t - s, y)?;
    if !(denominator >= 1e-300) {
        return Err(Error::PinningPoint {
            x,
            dt: t - s,
            y,
            value: denominator,
        });
    }
    Ok(kernel.eval(x, t - r, z)? * kernel.eval(z, r - s, y)? / denominator)
}

fn project(
    kernel: &HeatKernel,
    spec: BoundarySpec,
    field: &'static str,
) -> Result<(Vec<f64>, Option<Profile>)> {
    let n = kernel.truncation();
    match spec {
        BoundarySpec::Coefficients(c) => {
            if c.len() > n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(field, "non-finite coefficient"));
            }
            let mut padded = c;
            padded.resize(n, 0.0);
            Ok((padded, None))
        }
        BoundarySpec::Function(f) => {
            let basis = kernel.basis();
            let values: Vec<f64> = basis.nodes().iter().map(|x| f(*x)).collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(
                    field,
                    "non-finite value on the quadrature grid",
                ));
            }
            let coeffs = basis.mode_table()[..n]
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(basis.area_weights())
                        .zip(&values)
                        .map(|((m, w), v)| m * w * v)
                        .sum()
                })
                .collect();
            Ok((coeffs, Some(f)))
        }
    }
}
