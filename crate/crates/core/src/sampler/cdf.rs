use crate::error::{Error, Result};

/// Inverse-CDF sampler for a density known at ordered points and linearly
/// interpolated in between.
#[derive(Debug, Clone)]
pub(crate) struct CellSampler<'a> {
    points: &'a [f64],
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl<'a> CellSampler<'a> {
    /// Negative values (truncation ripple) are clipped to zero.
    pub(crate) fn new(points: &'a [f64], values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        debug_assert_eq!(values.len(), points.len());
        let mut cumulative = Vec::with_capacity(points.len());
        let mut total = 0.0;
        cumulative.push(0.0);
        for k in 1..points.len() {
            total += 0.5 * (values[k - 1] + values[k]) * (points[k] - points[k - 1]);
            cumulative.push(total);
        }
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Invariant(format!(
                "sampling density has total mass {total}"
            )));
        }
        Ok(CellSampler {
            points,
            values,
            cumulative,
        })
    }

    pub(crate) fn total(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    /// The point below which a fraction `u` of the mass lies.
    pub(crate) fn quantile(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.total();
        let k = self
            .cumulative
            .partition_point(|c| *c <= target)
            .clamp(1, self.points.len() - 1)
            - 1;
        let h = self.points[k + 1] - self.points[k];
        let (q0, q1) = (self.values[k], self.values[k + 1]);
        let rest = (target - self.cumulative[k]) / h;
        // solve q0 s + (q1 - q0) s^2 / 2 = rest for s in [0, 1]
        let a = 0.5 * (q1 - q0);
        let disc = (q0 * q0 + 4.0 * a * rest).max(0.0);
        let denom = q0 + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * rest / denom } else { 0.0 };
        self.points[k] + s.clamp(0.0, 1.0) * h
    }
}
