use crate::error::{Error, Result};

/// Nodes and positive weights on a one-dimensional coordinate range.
///
/// The weights already contain whatever measure weight the rule was built
/// for (for the radial disk that is `r`, without the angular `2 pi`).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: nodes.len(),
                got: weights.len(),
            });
        }
        if nodes.is_empty() {
            return Err(Error::invalid(
                "nodes",
                "quadrature rule needs at least one node",
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(
                "weights",
                format!("non-positive weight {w}"),
            ));
        }
        Ok(QuadratureRule { nodes, weights })
    }

    /// Gauss-Legendre rule of `order` points on `[a, b]`.
    pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("quad_order", "must be positive"));
        }
        if !(b > a) {
            return Err(Error::invalid("bounds", format!("empty range [{a}, {b}]")));
        }
        let (x, w) = legendre_nodes(order);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let nodes = x.iter().map(|t| mid + half * t).collect();
        let weights = w.iter().map(|v| half * v).collect();
        Ok(QuadratureRule { nodes, weights })
    }

    /// Gauss-Legendre rule with a measure weight folded into the node weights.
    pub fn gauss_legendre_weighted(
        order: usize,
        a: f64,
        b: f64,
        measure: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let base = Self::gauss_legendre(order, a, b)?;
        let weights = base
            .nodes
            .iter()
            .zip(&base.weights)
            .map(|(x, w)| w * measure(*x))
            .collect();
        Ok(QuadratureRule {
            nodes: base.nodes,
            weights,
        })
    }

    /// Composite trapezoid rule on strictly increasing `nodes`.
    pub fn trapezoid(nodes: &[f64]) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("nodes", "trapezoid rule needs two nodes"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("nodes", "must be strictly increasing"));
        }
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let h = 0.5 * (nodes[i + 1] - nodes[i]);
            weights[i] += h;
            weights[i + 1] += h;
        }
        Ok(QuadratureRule {
            nodes: nodes.to_vec(),
            weights,
        })
    }

    /// Same nodes, weights multiplied by `measure(node)`.
    ///
    /// Nodes where the measure vanishes are dropped so that weights stay positive.
    pub(crate) fn reweighted(&self, measure: impl Fn(f64) -> f64) -> Self {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        let mut weights = Vec::with_capacity(self.nodes.len());
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = w * measure(*x);
            if v > 0.0 {
                nodes.push(*x);
                weights.push(v);
            }
        }
        QuadratureRule { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }

    /// Total weight, i.e. the measure of the range.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut derivative = 1.0;
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            derivative = dp;
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        if dp != 0.0 {
            derivative = dp;
        }
        let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
