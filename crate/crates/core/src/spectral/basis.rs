use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;
use std::io::BufRead;
use std::sync::Arc;

use super::bessel::{bessel_j1_positive_zeros, j0_unchecked};
use super::quadrature::QuadratureRule;
use crate::error::{Error, Result};
use crate::io::fmt_real;

/// Orthonormality tolerance of the built-in bases.
pub const BUILTIN_ORTHONORMALITY_TOL: f64 = 1e-8;
/// Orthonormality tolerance checked when importing a basis file.
pub const IMPORT_ORTHONORMALITY_TOL: f64 = 1e-4;
/// Smallest accepted quadrature order for the built-in bases.
pub const MIN_QUAD_ORDER: usize = 16;

/// Geometry of the coordinate the basis lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// The unit interval `(0, 1)` with Lebesgue measure.
    Interval,
    /// Radial coordinate `r` of the unit disk, measure `r dr`.
    DiskRadial,
    /// A tabulated basis on an arbitrary coordinate range, Lebesgue measure.
    Imported,
}

impl Domain {
    /// Density of the basis measure with respect to `d(coordinate)`.
    pub fn measure_weight(self, x: f64) -> f64 {
        match self {
            Domain::DiskRadial => x,
            Domain::Interval | Domain::Imported => 1.0,
        }
    }

    /// Factor turning a basis-measure integral into an area (Lebesgue) integral:
    /// `2 pi` for the disk, `1` otherwise.
    pub fn area_factor(self) -> f64 {
        match self {
            Domain::DiskRadial => 2.0 * PI,
            Domain::Interval | Domain::Imported => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Domain::Interval => "interval",
            Domain::DiskRadial => "disk",
            Domain::Imported => "imported",
        }
    }

    fn parse(token: &str) -> Option<Self> {
        match token {
            "interval" => Some(Domain::Interval),
            "disk" => Some(Domain::DiskRadial),
            "imported" => Some(Domain::Imported),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
enum Profile {
    Constant(f64),
    /// `amplitude * cos(frequency * x)`
    Cosine {
        amplitude: f64,
        frequency: f64,
    },
    /// `amplitude * J0(zero * r)`
    Bessel {
        amplitude: f64,
        zero: f64,
    },
    /// Piecewise-linear interpolation, constant extension outside the nodes.
    Tabulated {
        nodes: Arc<Vec<f64>>,
        values: Vec<f64>,
    },
}

impl Profile {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Constant(c) => *c,
            Profile::Cosine {
                amplitude,
                frequency,
            } => amplitude * (frequency * x).cos(),
            Profile::Bessel { amplitude, zero } => amplitude * j0_unchecked(zero * x),
            Profile::Tabulated { nodes, values } => interpolate(nodes, values, x),
        }
    }

    fn sup_norm(&self) -> f64 {
        match self {
            Profile::Constant(c) => c.abs(),
            Profile::Cosine { amplitude, .. } | Profile::Bessel { amplitude, .. } => {
                amplitude.abs()
            }
            Profile::Tabulated { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

fn interpolate(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let n = nodes.len();
    if x <= nodes[0] {
        return values[0];
    }
    if x >= nodes[n - 1] {
        return values[n - 1];
    }
    let k = nodes.partition_point(|node| *node <= x);
    let (x0, x1) = (nodes[k - 1], nodes[k]);
    let s = (x - x0) / (x1 - x0);
    values[k - 1] + s * (values[k] - values[k - 1])
}

/// One eigenpair `(lambda_m, f_m)` of the Neumann operator.
#[derive(Debug, Clone)]
pub struct EigenLevel {
    index: usize,
    eigenvalue: f64,
    normalizer: f64,
    profile: Profile,
}

impl EigenLevel {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn eigenvalue(&self) -> f64 {
        self.eigenvalue
    }

    /// Constant making the eigenfunction unit-norm in the basis measure.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// `f_m(x)`, normalized in the basis measure.
    pub fn eval(&self, x: f64) -> f64 {
        self.profile.eval(x)
    }

    pub fn sup_norm(&self) -> f64 {
        self.profile.sup_norm()
    }
}

/// An ordered, orthonormal eigenbasis together with its quadrature rule.
///
/// Two normalizations coexist. [`SpectralBasis::eigenfunction`] is unit-norm
/// in the basis measure (`r dr` on the disk). [`SpectralBasis::mode`] divides
/// it by `sqrt(area_factor)` and is unit-norm in the area measure of the
/// physical domain; every process-level formula (heat kernel, boundary data,
/// densities) is written in terms of modes, so the kernel is a genuine
/// transition density with respect to area.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    domain: Domain,
    bounds: (f64, f64),
    levels: Vec<EigenLevel>,
    quadrature: QuadratureRule,
    /// Area weights at the quadrature nodes.
    area_weights: Vec<f64>,
    /// `mode_table[m][i]` = mode `m` at node `i`.
    mode_table: Vec<Vec<f64>>,
}

impl SpectralBasis {
    /// Neumann basis of `-1/2 d^2/dx^2` on `(0, 1)`: `lambda_m = (m pi)^2 / 2`,
    /// `f_0 = 1`, `f_m = sqrt(2) cos(m pi x)`.
    pub fn interval(level_count: usize, quad_order: usize) -> Result<Self> {
        check_orders(level_count, quad_order)?;
        let levels = (0..level_count)
            .map(|m| {
                let frequency = m as f64 * PI;
                let (profile, normalizer) = if m == 0 {
                    (Profile::Constant(1.0), 1.0)
                } else {
                    (
                        Profile::Cosine {
                            amplitude: SQRT_2,
                            frequency,
                        },
                        SQRT_2,
                    )
                };
                EigenLevel {
                    index: m,
                    eigenvalue: 0.5 * frequency * frequency,
                    normalizer,
                    profile,
                }
            })
            .collect();
        let quadrature = QuadratureRule::gauss_legendre(quad_order, 0.0, 1.0)?;
        let basis = Self::assemble(Domain::Interval, (0.0, 1.0), levels, quadrature);
        basis.certify(quad_order, BUILTIN_ORTHONORMALITY_TOL)?;
        Ok(basis)
    }

    /// Radial Neumann basis of `-1/2 Laplacian` on the unit disk:
    /// `lambda_m = z_m^2 / 2` with `z_m` the zeros of `J1`,
    /// `f_0 = sqrt(2)`, `f_m(r) = sqrt(2) J0(z_m r) / |J0(z_m)|`.
    pub fn disk(level_count: usize, quad_order: usize) -> Result<Self> {
        check_orders(level_count, quad_order)?;
        let zeros = if level_count > 1 {
            bessel_j1_positive_zeros(level_count - 1)?
        } else {
            Vec::new()
        };
        let mut levels = vec![EigenLevel {
            index: 0,
            eigenvalue: 0.0,
            normalizer: SQRT_2,
            profile: Profile::Constant(SQRT_2),
        }];
        for (k, z) in zeros.iter().enumerate() {
            let normalizer = SQRT_2 / j0_unchecked(*z).abs();
            levels.push(EigenLevel {
                index: k + 1,
                eigenvalue: 0.5 * z * z,
                normalizer,
                profile: Profile::Bessel {
                    amplitude: normalizer,
                    zero: *z,
                },
            });
        }
        let quadrature = QuadratureRule::gauss_legendre_weighted(quad_order, 0.0, 1.0, |r| r)?;
        let basis = Self::assemble(Domain::DiskRadial, (0.0, 1.0), levels, quadrature);
        basis.certify(quad_order, BUILTIN_ORTHONORMALITY_TOL)?;
        Ok(basis)
    }

    /// Tabulated basis, re-verified for orthonormality.
    ///
    /// Levels are stably sorted by eigenvalue and re-indexed. The quadrature is
    /// the trapezoid rule on the supplied nodes (times the measure weight).
    pub fn from_tabulated(
        domain: Domain,
        nodes: Vec<f64>,
        eigenpairs: Vec<(f64, Vec<f64>)>,
    ) -> Result<Self> {
        let basis = Self::from_tabulated_unchecked(domain, nodes, eigenpairs)?;
        let (residual, m, n) = basis.orthonormality_residual();
        if residual > IMPORT_ORTHONORMALITY_TOL {
            return Err(Error::NotOrthonormal { m, n, residual });
        }
        Ok(basis)
    }

    /// Tabulated basis without the orthonormality check. Used to build
    /// deliberately perturbed bases for negative controls.
    pub fn from_tabulated_unchecked(
        domain: Domain,
        nodes: Vec<f64>,
        mut eigenpairs: Vec<(f64, Vec<f64>)>,
    ) -> Result<Self> {
        if eigenpairs.is_empty() {
            return Err(Error::invalid("level_count", "must be at least 1"));
        }
        for (lambda, values) in &eigenpairs {
            if values.len() != nodes.len() {
                return Err(Error::LengthMismatch {
                    expected: nodes.len(),
                    got: values.len(),
                });
            }
            if !lambda.is_finite() || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("eigenpair", "non-finite value"));
            }
        }
        let trapezoid = QuadratureRule::trapezoid(&nodes)?;
        let quadrature = trapezoid.reweighted(|x| domain.measure_weight(x));
        eigenpairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let shared = Arc::new(nodes);
        let bounds = (shared[0], shared[shared.len() - 1]);
        let levels = eigenpairs
            .into_iter()
            .enumerate()
            .map(|(index, (eigenvalue, values))| {
                let norm = quadrature
                    .nodes()
                    .iter()
                    .zip(quadrature.weights())
                    .map(|(x, w)| {
                        let v = interpolate(&shared, &values, *x);
                        w * v * v
                    })
                    .sum::<f64>()
                    .sqrt();
                EigenLevel {
                    index,
                    eigenvalue,
                    normalizer: if norm > 0.0 {
                        1.0 / norm
                    } else {
                        f64::INFINITY
                    },
                    profile: Profile::Tabulated {
                        nodes: Arc::clone(&shared),
                        values,
                    },
                }
            })
            .collect();
        Ok(Self::assemble(domain, bounds, levels, quadrature))
    }

    fn assemble(
        domain: Domain,
        bounds: (f64, f64),
        levels: Vec<EigenLevel>,
        quadrature: QuadratureRule,
    ) -> Self {
        let scale = domain.area_factor().sqrt().recip();
        let mode_table = levels
            .iter()
            .map(|level| {
                quadrature
                    .nodes()
                    .iter()
                    .map(|x| scale * level.eval(*x))
                    .collect()
            })
            .collect();
        let area_weights = quadrature
            .weights()
            .iter()
            .map(|w| w * domain.area_factor())
            .collect();
        SpectralBasis {
            domain,
            bounds,
            levels,
            quadrature,
            area_weights,
            mode_table,
        }
    }

    fn certify(&self, quad_order: usize, tol: f64) -> Result<()> {
        let (residual, m, n) = self.orthonormality_residual();
        if residual > tol {
            return Err(Error::InsufficientQuadrature {
                level_count: self.level_count(),
                quad_order,
                residual,
                m,
                n,
            });
        }
        Ok(())
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Closed coordinate range `[lo, hi]`.
    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.bounds.0 && x <= self.bounds.1
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[EigenLevel] {
        &self.levels
    }

    pub fn eigenvalue(&self, m: usize) -> f64 {
        self.levels[m].eigenvalue
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.eigenvalue).collect()
    }

    /// Eigenfunction `f_m(x)` normalized in the basis measure.
    pub fn eigenfunction(&self, m: usize, x: f64) -> f64 {
        self.levels[m].eval(x)
    }

    /// Eigenfunction normalized in the area measure of the domain.
    pub fn mode(&self, m: usize, x: f64) -> f64 {
        self.levels[m].eval(x) / self.area_factor().sqrt()
    }

    /// The first `count` modes at `x`.
    pub fn modes_at(&self, x: f64, count: usize) -> Vec<f64> {
        let scale = self.area_factor().sqrt().recip();
        self.levels[..count]
            .iter()
            .map(|l| scale * l.eval(x))
            .collect()
    }

    pub fn measure_weight(&self, x: f64) -> f64 {
        self.domain.measure_weight(x)
    }

    pub fn area_factor(&self) -> f64 {
        self.domain.area_factor()
    }

    /// Quadrature in the basis measure.
    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quadrature
    }

    pub fn nodes(&self) -> &[f64] {
        self.quadrature.nodes()
    }

    /// Quadrature weights for area integrals over the physical domain.
    pub fn area_weights(&self) -> &[f64] {
        &self.area_weights
    }

    /// Modes tabulated at the quadrature nodes, indexed `[level][node]`.
    pub fn mode_table(&self) -> &[Vec<f64>] {
        &self.mode_table
    }

    /// Area integral of a function of the coordinate over the whole domain.
    pub fn integrate_area(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes()
            .iter()
            .zip(&self.area_weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }

    /// Gram matrix `(f_m, f_n)` in the basis measure.
    #[allow(clippy::needless_range_loop)]
    pub fn gram_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.level_count();
        let mut gram = vec![vec![0.0; n]; n];
        for m in 0..n {
            for k in m..n {
                let value: f64 = self.mode_table[m]
                    .iter()
                    .zip(&self.mode_table[k])
                    .zip(&self.area_weights)
                    .map(|((a, b), w)| a * b * w)
                    .sum();
                gram[m][k] = value;
                gram[k][m] = value;
            }
        }
        gram
    }

    /// Largest `|(f_m, f_n) - delta_mn|` and the pair attaining it.
    pub fn orthonormality_residual(&self) -> (f64, usize, usize) {
        let gram = self.gram_matrix();
        let mut worst = (0.0, 0, 0);
        for (m, row) in gram.iter().enumerate() {
            for (n, value) in row.iter().enumerate() {
                let delta = if m == n { 1.0 } else { 0.0 };
                let residual = (value - delta).abs();
                if residual > worst.0 || residual.is_nan() {
                    worst = (residual, m, n);
                }
            }
        }
        worst
    }

    /// Reads the text basis format:
    ///
    /// ```text
    /// basis <domain> <level_count> <node_count>
    /// <node_count lines: coordinate>
    /// lambda <value>            (repeated level_count times)
    /// <node_count lines: eigenfunction value>
    /// ```
    pub fn import(reader: impl BufRead) -> Result<Self> {
        let (domain, nodes, pairs) = parse_basis_file(reader)?;
        Self::from_tabulated(domain, nodes, pairs)
    }

    /// Writes the basis tabulated on `nodes` in the import format.
    pub fn to_basis_file(&self, nodes: &[f64]) -> String {
        let domain = match self.domain {
            Domain::Imported => "imported",
            d => d.label(),
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "basis {} {} {}",
            domain,
            self.level_count(),
            nodes.len()
        );
        for x in nodes {
            let _ = writeln!(out, "{}", fmt_real(*x));
        }
        for level in &self.levels {
            let _ = writeln!(out, "lambda {}", fmt_real(level.eigenvalue));
            for x in nodes {
                let _ = writeln!(out, "{}", fmt_real(level.eval(*x)));
            }
        }
        out
    }
}

fn check_orders(level_count: usize, quad_order: usize) -> Result<()> {
    if level_count == 0 {
        return Err(Error::invalid("level_count", "must be at least 1"));
    }
    if quad_order < MIN_QUAD_ORDER {
        return Err(Error::invalid(
            "quad_order",
            format!("must be at least {MIN_QUAD_ORDER}, got {quad_order}"),
        ));
    }
    Ok(())
}

type ParsedBasis = (Domain, Vec<f64>, Vec<(f64, Vec<f64>)>);

/// Parses the tabulated basis format without validating orthonormality.
pub fn parse_basis_file(reader: impl BufRead) -> Result<ParsedBasis> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(line))) => Ok((n, line.trim().to_string())),
            Some((_, Err(e))) => Err(Error::Io(e)),
            None => Err(Error::MalformedBasis {
                line: 0,
                reason: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    let malformed = |line: usize, reason: String| Error::MalformedBasis { line, reason };
    let parse_real = |line: usize, token: &str| -> Result<f64> {
        token
            .parse::<f64>()
            .map_err(|_| malformed(line, format!("`{token}` is not a real number")))
    };

    let (n, header) = next("header")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "basis" {
        return Err(malformed(
            n,
            "expected `basis <domain> <level_count> <node_count>`".into(),
        ));
    }
    let domain = Domain::parse(fields[1])
        .ok_or_else(|| malformed(n, format!("unknown domain `{}`", fields[1])))?;
    let level_count: usize = fields[2]
        .parse()
        .map_err(|_| malformed(n, "bad level_count".into()))?;
    let node_count: usize = fields[3]
        .parse()
        .map_err(|_| malformed(n, "bad node_count".into()))?;
    if level_count == 0 || node_count < 2 {
        return Err(malformed(n, "need at least one level and two nodes".into()));
    }
    let mut nodes = Vec::with_capacity(node_count);
    for _ in 0..node_count {
        let (n, line) = next("node coordinate")?;
        nodes.push(parse_real(n, &line)?);
    }
    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(malformed(
            0,
            "node coordinates must be strictly increasing".into(),
        ));
    }
    let mut pairs = Vec::with_capacity(level_count);
    for _ in 0..level_count {
        let (n, line) = next("lambda line")?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some("lambda") {
            return Err(malformed(n, "expected `lambda <value>`".into()));
        }
        let token = parts
            .next()
            .ok_or_else(|| malformed(n, "missing eigenvalue".into()))?;
        let lambda = parse_real(n, token)?;
        let mut values = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            let (n, line) = next("eigenfunction value")?;
            values.push(parse_real(n, &line)?);
        }
        pairs.push((lambda, values));
    }
    if let Some((n, _)) = lines.next() {
        return Err(malformed(n, "trailing content after last level".into()));
    }
    Ok((domain, nodes, pairs))
}
