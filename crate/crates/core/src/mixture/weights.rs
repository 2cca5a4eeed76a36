use std::io::BufRead;

use crate::error::{Error, Result};
use crate::io::{csv, fmt_real, read_indexed_csv};

/// Largest accepted mass beyond the truncation unless a bound is given.
pub const DEFAULT_DEFICIT_BOUND: f64 = 1e-8;

const CSV_HEADER: &str = "level,p";

/// Finitely many probabilities `p_m`, indexed by basis level.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    weights: Vec<f64>,
    truncation_deficit: f64,
}

impl WeightSequence {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::with_deficit_bound(weights, DEFAULT_DEFICIT_BOUND)
    }

    /// Accepts sequences whose missing mass `1 - sum p_m` is at most `bound`.
    pub fn with_deficit_bound(weights: Vec<f64>, bound: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("empty sequence".into()));
        }
        if let Some((m, p)) = weights
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= 0.0 && **p <= 1.0))
        {
            return Err(Error::InvalidWeights(format!(
                "p_{m} = {p} is not in [0, 1]"
            )));
        }
        let sum: f64 = weights.iter().sum();
        // a few ulps of excess mass are rounding, not an error
        if sum > 1.0 + 1e-12 {
            return Err(Error::InvalidWeights(format!("weights sum to {sum} > 1")));
        }
        let deficit = (1.0 - sum).max(0.0);
        if !(deficit <= bound) {
            return Err(Error::InvalidWeights(format!(
                "truncation deficit {deficit:e} exceeds the bound {bound:e}"
            )));
        }
        Ok(WeightSequence {
            weights,
            truncation_deficit: deficit,
        })
    }

    /// `p_{m*} = 1` on `level`, zero below it.
    pub fn degenerate(level: usize) -> Self {
        let mut weights = vec![0.0; level + 1];
        weights[level] = 1.0;
        WeightSequence {
            weights,
            truncation_deficit: 0.0,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn truncation_deficit(&self) -> f64 {
        self.truncation_deficit
    }

    pub fn to_csv(&self) -> String {
        csv(
            CSV_HEADER,
            self.weights
                .iter()
                .enumerate()
                .map(|(m, p)| [m.to_string(), fmt_real(*p)]),
        )
    }

    pub fn from_csv(reader: impl BufRead) -> Result<Self> {
        Self::new(read_indexed_csv(reader, CSV_HEADER)?)
    }
}
