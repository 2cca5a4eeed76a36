use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::io::{fmt_real, key_values};

/// Bins with fewer expected counts are merged into a neighbour.
pub const MIN_EXPECTED: f64 = 5.0;

/// Outcome of a chi-square comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub statistic: f64,
    /// Number of bins after merging, minus one.
    pub dof: usize,
    pub p_value: f64,
    pub bins: usize,
    /// How many of the requested bins were absorbed into neighbours.
    pub merged: usize,
}

impl FitReport {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }

    pub fn to_key_values(&self) -> String {
        key_values([
            ("statistic", fmt_real(self.statistic)),
            ("dof", self.dof.to_string()),
            ("p_value", fmt_real(self.p_value)),
            ("bins", self.bins.to_string()),
            ("merged", self.merged.to_string()),
        ])
    }
}

/// Upper tail of the chi-square law; 1 for zero degrees of freedom.
pub fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let law = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    law.sf(statistic).clamp(0.0, 1.0)
}

/// Merges adjacent bins (left to right, then the tail into its left
/// neighbour) until every expected count reaches [`MIN_EXPECTED`].
fn merge(observed: &[f64], expected: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (a, b) in observed.iter().zip(expected) {
        o += a;
        e += b;
        if e >= MIN_EXPECTED {
            obs.push(o);
            exp.push(e);
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        if let (Some(lo), Some(le)) = (obs.last_mut(), exp.last_mut()) {
            *lo += o;
            *le += e;
        } else {
            obs.push(o);
            exp.push(e);
        }
    }
    (obs, exp)
}

/// Pearson chi-square of counts against probabilities (renormalized to sum 1).
pub fn chi_square_counts(counts: &[u64], probabilities: &[f64]) -> Result<FitReport> {
    if counts.len() != probabilities.len() || counts.is_empty() {
        return Err(Error::LengthMismatch {
            expected: probabilities.len(),
            got: counts.len(),
        });
    }
    if probabilities.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::invalid("probabilities", "must be non-negative"));
    }
    let n: u64 = counts.iter().sum();
    let total: f64 = probabilities.iter().sum();
    if n == 0 || !(total > 0.0) {
        return Err(Error::invalid(
            "counts",
            "no samples or no probability mass",
        ));
    }
    let observed: Vec<f64> = counts.iter().map(|c| *c as f64).collect();
    let expected: Vec<f64> = probabilities.iter().map(|p| p / total * n as f64).collect();
    let (obs, exp) = merge(&observed, &expected);
    let statistic = obs
        .iter()
        .zip(&exp)
        .map(|(o, e)| if *e > 0.0 { (o - e) * (o - e) / e } else { 0.0 })
        .sum();
    let dof = obs.len() - 1;
    Ok(FitReport {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        bins: obs.len(),
        merged: counts.len() - obs.len(),
    })
}

/// Chi-square test of homogeneity between two sets of counts over the same bins.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<FitReport> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("counts", "both samples must be non-empty"));
    }
    // merge on the pooled expectation of the smaller sample
    let pooled: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) as f64).collect();
    let scale = na.min(nb) / (na + nb);
    let expected: Vec<f64> = pooled.iter().map(|p| p * scale).collect();
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut ga, mut gb, mut ge) = (0.0, 0.0, 0.0);
    for ((x, y), e) in a.iter().zip(b).zip(&expected) {
        ga += *x as f64;
        gb += *y as f64;
        ge += e;
        if ge >= MIN_EXPECTED {
            groups.push((ga, gb));
            ga = 0.0;
            gb = 0.0;
            ge = 0.0;
        }
    }
    if ga > 0.0 || gb > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += ga;
                last.1 += gb;
            }
            None => groups.push((ga, gb)),
        }
    }
    let n = na + nb;
    let statistic = groups
        .iter()
        .map(|(x, y)| {
            let pool = x + y;
            let (ea, eb) = (pool * na / n, pool * nb / n);
            (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
        })
        .sum();
    let dof = groups.len() - 1;
    Ok(FitReport {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        bins: groups.len(),
        merged: a.len() - groups.len(),
    })
}

/// Upper tail `P(K > x)` of the Kolmogorov distribution.
fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Kolmogorov-Smirnov distance and p-value (asymptotic law with the usual
/// `sqrt(n) + 0.12 + 0.11 / sqrt(n)` correction).
fn ks_p_value(distance: f64, effective_n: f64) -> f64 {
    let root = effective_n.sqrt();
    kolmogorov_sf((root + 0.12 + 0.11 / root) * distance)
}

/// One-sample KS test against the uniform law on `[0, 1]`.
pub fn ks_uniform(samples: &[f64]) -> (f64, f64) {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let distance = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let v = v.clamp(0.0, 1.0);
            (v - i as f64 / n).max((i + 1) as f64 / n - v)
        })
        .fold(0.0, f64::max);
    (distance, ks_p_value(distance, n))
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut distance: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        distance = distance.max((i as f64 / na - j as f64 / nb).abs());
    }
    (distance, ks_p_value(distance, na * nb / (na + nb)))
}
