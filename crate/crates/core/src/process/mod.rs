//! Per-level Markovian Bernstein processes, joint endpoint measures and the
//! Schrödinger system.

mod ipfp;
mod level;
mod measure;

pub use ipfp::{schroedinger_solve, SchroedingerSolution};
pub use level::{
    bridge_density, BoundaryData, BoundarySpec, LevelProcess, Positivity, Profile,
    NORMALIZATION_TOL,
};
pub use measure::{fdd_from_measure, is_product_form, JointMeasure, ProductForm};

use crate::error::{Error, Result};

/// `0 < t_1 < ... < t_n < T` with one region per time.
pub(crate) fn check_fdd_times(times: &[f64], regions: usize, horizon: f64) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("times", "need at least one time"));
    }
    if times.len() != regions {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            got: regions,
        });
    }
    if !(times[0] > 0.0) || !(times[times.len() - 1] < horizon) {
        return Err(Error::invalid(
            "times",
            format!("must lie strictly inside (0, {horizon})"),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("times", "must be strictly increasing"));
    }
    Ok(())
}
