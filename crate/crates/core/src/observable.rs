//! Sets and bounded functions of the domain coordinate, integrated in area.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::spectral::{QuadratureRule, SpectralBasis};

/// A subset of the domain described by its coordinate: the whole domain, or
/// the coordinate band `lo <= x <= hi` (an annulus `lo <= |x| <= hi` on the disk).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Whole,
    Band { lo: f64, hi: f64 },
}

const PANEL_ORDER: usize = 24;
const PANELS_PER_UNIT: f64 = 8.0;

fn panel_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| QuadratureRule::gauss_legendre(PANEL_ORDER, 0.0, 1.0).expect("fixed order"))
}

impl Region {
    pub fn band(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid("region", format!("empty band [{lo}, {hi}]")));
        }
        Ok(Region::Band { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Region::Whole => true,
            Region::Band { lo, hi } => x >= lo && x <= hi,
        }
    }

    /// The band clipped to the basis domain, `None` when they do not overlap.
    fn clipped(&self, basis: &SpectralBasis) -> Option<(f64, f64)> {
        let (a, b) = basis.bounds();
        match *self {
            Region::Whole => Some((a, b)),
            Region::Band { lo, hi } => {
                let (lo, hi) = (lo.max(a), hi.min(b));
                (hi > lo).then_some((lo, hi))
            }
        }
    }

    /// Quadrature nodes and area weights covering the region.
    ///
    /// The whole domain uses the basis quadrature. A band uses composite
    /// Gauss-Legendre panels on its own end points, so that integrals of smooth
    /// densities over the band stay accurate wherever the band edges fall
    /// relative to the basis nodes.
    pub fn rule(&self, basis: &SpectralBasis) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Whole => (basis.nodes().to_vec(), basis.area_weights().to_vec()),
            Region::Band { .. } => {
                let Some((lo, hi)) = self.clipped(basis) else {
                    return (Vec::new(), Vec::new());
                };
                let rule = panel_rule();
                let panels = ((hi - lo) * PANELS_PER_UNIT).ceil().max(1.0) as usize;
                let width = (hi - lo) / panels as f64;
                let area = basis.area_factor();
                let mut nodes = Vec::with_capacity(panels * PANEL_ORDER);
                let mut weights = Vec::with_capacity(panels * PANEL_ORDER);
                for p in 0..panels {
                    let a = lo + p as f64 * width;
                    for (t, w) in rule.nodes().iter().zip(rule.weights()) {
                        let x = a + t * width;
                        nodes.push(x);
                        weights.push(w * width * area * basis.measure_weight(x));
                    }
                }
                (nodes, weights)
            }
        }
    }

    /// `int_region f dA`.
    pub fn integrate_area(&self, basis: &SpectralBasis, mut f: impl FnMut(f64) -> f64) -> f64 {
        match self {
            Region::Whole => basis.integrate_area(f),
            Region::Band { .. } => {
                let (nodes, weights) = self.rule(basis);
                nodes.iter().zip(&weights).map(|(x, w)| w * f(*x)).sum()
            }
        }
    }

    /// Area `|F|` of the region.
    pub fn area(&self, basis: &SpectralBasis) -> f64 {
        self.integrate_area(basis, |_| 1.0)
    }

    /// Membership of each basis quadrature node.
    pub fn node_mask(&self, basis: &SpectralBasis) -> Vec<bool> {
        basis.nodes().iter().map(|x| self.contains(*x)).collect()
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Whole => write!(f, "whole"),
            Region::Band { lo, hi } => write!(f, "[{lo}, {hi}]"),
        }
    }
}

/// A bounded observable `b(x) = f(x) 1_F(x)`.
#[derive(Clone)]
pub struct Observable {
    function: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    region: Region,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("function", &self.function.as_ref().map(|_| "<fn>"))
            .field("region", &self.region)
            .finish()
    }
}

impl Observable {
    pub fn one() -> Self {
        Observable {
            function: None,
            region: Region::Whole,
        }
    }

    pub fn indicator(region: Region) -> Self {
        Observable {
            function: None,
            region,
        }
    }

    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Observable {
            function: Some(Arc::new(f)),
            region: Region::Whole,
        }
    }

    /// `|x|^2`, the squared distance to the origin (or to the left end of the interval).
    pub fn radius_squared() -> Self {
        Observable::function(|r| r * r)
    }

    pub fn restricted_to(mut self, region: Region) -> Self {
        self.region = region;
        self
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !self.region.contains(x) {
            return 0.0;
        }
        self.function.as_ref().map_or(1.0, |f| f(x))
    }

    /// `int b(x) density(x) dA`.
    pub fn integrate(&self, basis: &SpectralBasis, mut density: impl FnMut(f64) -> f64) -> f64 {
        match &self.function {
            None => self.region.integrate_area(basis, density),
            Some(f) => self.region.integrate_area(basis, |x| f(x) * density(x)),
        }
    }
}
