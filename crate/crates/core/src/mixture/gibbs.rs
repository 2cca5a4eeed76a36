use crate::error::{Error, Result};
use crate::io::{fmt_real, key_values};
use crate::spectral::SpectralBasis;

use super::weights::WeightSequence;

/// Solution of the mean-energy constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsParameters {
    pub beta: f64,
    /// `Z(beta)`; may underflow for large `beta`, see `ln_z`.
    pub z: f64,
    pub ln_z: f64,
    pub lambda_target: f64,
    /// `mean_energy(beta) - lambda_target`
    pub residual: f64,
    pub level_count: usize,
}

impl GibbsParameters {
    /// `beta=..`, `Z=..`, `lambda=..`, `S_max=..` lines.
    pub fn to_key_values(&self, s_max: f64) -> String {
        key_values([
            ("beta", fmt_real(self.beta)),
            ("Z", fmt_real(self.z)),
            ("lambda", fmt_real(self.lambda_target)),
            ("S_max", fmt_real(s_max)),
        ])
    }
}

/// Exponential sums over the first `level_count` eigenvalues, evaluated
/// relative to the ground energy so that no term overflows.
struct Spectrum {
    lambda: Vec<f64>,
    lambda0: f64,
}

struct Moments {
    weights: Vec<f64>,
    ln_z: f64,
    mean: f64,
    variance: f64,
}

impl Spectrum {
    fn new(basis: &SpectralBasis, level_count: usize) -> Result<Self> {
        if level_count == 0 || level_count > basis.level_count() {
            return Err(Error::invalid(
                "level_count",
                format!("must be in 1..={}, got {level_count}", basis.level_count()),
            ));
        }
        let lambda = basis.eigenvalues()[..level_count].to_vec();
        let lambda0 = lambda.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Spectrum { lambda, lambda0 })
    }

    fn moments(&self, beta: f64) -> Result<Moments> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::invalid(
                "beta",
                format!("must be positive and finite, got {beta}"),
            ));
        }
        let shifted: Vec<f64> = self
            .lambda
            .iter()
            .map(|l| (-beta * (l - self.lambda0)).exp())
            .collect();
        let sum: f64 = shifted.iter().sum();
        let weights: Vec<f64> = shifted.iter().map(|e| e / sum).collect();
        let mean = self.lambda0
            + weights
                .iter()
                .zip(&self.lambda)
                .map(|(p, l)| p * (l - self.lambda0))
                .sum::<f64>();
        let variance = weights
            .iter()
            .zip(&self.lambda)
            .map(|(p, l)| p * (l - mean) * (l - mean))
            .sum();
        Ok(Moments {
            weights,
            ln_z: -beta * self.lambda0 + sum.ln(),
            mean,
            variance,
        })
    }

    /// Mean energy in the limit `beta -> 0`, the largest value attainable
    /// on the truncation.
    fn arithmetic_mean(&self) -> f64 {
        self.lambda.iter().sum::<f64>() / self.lambda.len() as f64
    }

    /// Spacing to the first excited level, the natural scale of `1 / beta`.
    fn scale(&self) -> f64 {
        let gap = self
            .lambda
            .iter()
            .map(|l| l - self.lambda0)
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min);
        if gap.is_finite() {
            gap
        } else {
            1.0
        }
    }
}

/// `p_m = exp(-beta lambda_m) / sum_n exp(-beta lambda_n)` over the first
/// `level_count` levels.
pub fn gibbs_weights(
    basis: &SpectralBasis,
    beta: f64,
    level_count: usize,
) -> Result<WeightSequence> {
    let moments = Spectrum::new(basis, level_count)?.moments(beta)?;
    WeightSequence::with_deficit_bound(moments.weights, 1e-12)
}

/// `S = sum p_m ln(1 / p_m)` with `0 ln(1/0) = 0`.
pub fn entropy(w: &WeightSequence) -> f64 {
    w.weights()
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

/// Average eigenvalue under the Gibbs weights, `-(d/d beta) ln Z`.
pub fn mean_energy(basis: &SpectralBasis, beta: f64, level_count: usize) -> Result<f64> {
    Ok(Spectrum::new(basis, level_count)?.moments(beta)?.mean)
}

const MAX_BRACKET_WIDENINGS: usize = 60;
const BISECTION_STEPS: usize = 200;
const NEWTON_STEPS: usize = 50;

/// The `beta` whose Gibbs weights have mean energy `lambda_target`.
///
/// The mean energy is strictly decreasing in `beta` (its derivative is minus
/// the variance), so a bracket `[beta_lo, beta_hi]` is bisected on a log scale
/// and then polished by Newton steps kept inside the bracket.
pub fn solve_beta(
    basis: &SpectralBasis,
    lambda_target: f64,
    tol: f64,
    level_count: usize,
) -> Result<GibbsParameters> {
    if !(tol > 0.0) {
        return Err(Error::invalid(
            "tol",
            format!("must be positive, got {tol}"),
        ));
    }
    if !lambda_target.is_finite() {
        return Err(Error::invalid("lambda", "must be finite"));
    }
    let spectrum = Spectrum::new(basis, level_count)?;
    let lo_bound = spectrum.lambda0;
    let hi_bound = spectrum.arithmetic_mean();
    if lambda_target <= lo_bound {
        return Err(Error::Infeasible {
            target: lambda_target,
            lo: lo_bound,
            hi: hi_bound,
            reason: "the average cannot lie at or below the ground energy".into(),
        });
    }
    if lambda_target >= hi_bound {
        return Err(Error::Infeasible {
            target: lambda_target,
            lo: lo_bound,
            hi: hi_bound,
            reason: format!(
                "truncation too small: {level_count} levels reach averages below {hi_bound}"
            ),
        });
    }
    let f = |beta: f64| -> Result<(f64, Moments)> {
        let m = spectrum.moments(beta)?;
        Ok((m.mean - lambda_target, m))
    };
    let scale = spectrum.scale();
    let (mut lo, mut hi) = (1e-3 / scale, 1e3 / scale);
    for _ in 0..MAX_BRACKET_WIDENINGS {
        if f(lo)?.0 > 0.0 {
            break;
        }
        lo /= 10.0;
    }
    for _ in 0..MAX_BRACKET_WIDENINGS {
        if f(hi)?.0 < 0.0 {
            break;
        }
        hi *= 10.0;
    }
    if !(f(lo)?.0 > 0.0 && f(hi)?.0 < 0.0) {
        return Err(Error::NonConvergence {
            iterations: MAX_BRACKET_WIDENINGS,
            residual: f(hi)?.0.abs().min(f(lo)?.0.abs()),
        });
    }
    let mut beta = (lo * hi).sqrt();
    let mut value = f(beta)?;
    for _ in 0..BISECTION_STEPS {
        if value.0.abs() < tol || hi / lo < 1.0 + 1e-3 {
            break;
        }
        if value.0 > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        beta = (lo * hi).sqrt();
        value = f(beta)?;
    }
    for _ in 0..NEWTON_STEPS {
        if value.0.abs() < tol {
            break;
        }
        if value.0 > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let derivative = -value.1.variance;
        let step = beta - value.0 / derivative;
        beta = if step > lo && step < hi && step.is_finite() {
            step
        } else {
            0.5 * (lo + hi)
        };
        value = f(beta)?;
    }
    if !(value.0.abs() < tol) {
        return Err(Error::NonConvergence {
            iterations: BISECTION_STEPS + NEWTON_STEPS,
            residual: value.0.abs(),
        });
    }
    Ok(GibbsParameters {
        beta,
        z: value.1.ln_z.exp(),
        ln_z: value.1.ln_z,
        lambda_target,
        residual: value.0,
        level_count,
    })
}

/// `ln Z(beta) + beta <lambda>`, the entropy of the maximizing Gibbs weights.
pub fn max_entropy(
    params: &GibbsParameters,
    basis: &SpectralBasis,
    level_count: usize,
) -> Result<f64> {
    let m = Spectrum::new(basis, level_count)?.moments(params.beta)?;
    Ok(m.ln_z + params.beta * m.mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Domain, SpectralBasis};
    use proptest::prelude::*;

    /// Two orthonormal levels on the unit interval with eigenvalues 0 and 1.
    fn two_level() -> SpectralBasis {
        let nodes: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let f0 = vec![1.0; nodes.len()];
        let f1: Vec<f64> = nodes
            .iter()
            .map(|x| std::f64::consts::SQRT_2 * (std::f64::consts::PI * x).cos())
            .collect();
        SpectralBasis::from_tabulated_unchecked(Domain::Imported, nodes, vec![(0.0, f0), (1.0, f1)])
            .unwrap()
    }

    #[test]
    fn two_level_closed_forms() {
        let b = two_level();
        let beta = 3f64.ln();
        let w = gibbs_weights(&b, beta, 2).unwrap();
        assert!((w.weights()[0] - 0.75).abs() < 1e-15);
        assert!((w.weights()[1] - 0.25).abs() < 1e-15);
        assert!((entropy(&w) - 0.5623351446188083).abs() < 1e-12);
        assert!((mean_energy(&b, beta, 2).unwrap() - 0.25).abs() < 1e-15);
        let params = solve_beta(&b, 0.25, 1e-12, 2).unwrap();
        assert!((params.beta - beta).abs() < 1e-10);
        let s = max_entropy(&params, &b, 2).unwrap();
        assert!((s - ((4.0f64 / 3.0).ln() + beta / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn interval_direct_sum() {
        let b = SpectralBasis::interval(3, 64).unwrap();
        let w = gibbs_weights(&b, 1.0, 3).unwrap();
        let z: f64 = (0..3)
            .map(|m| (-(std::f64::consts::PI * m as f64).powi(2) / 2.0).exp())
            .sum();
        assert!((w.weights()[0] - 1.0 / z).abs() < 1e-15);
        assert!((w.weights()[0] - 0.99286).abs() < 1e-5);
        assert!(mean_energy(&b, 1.0, 3).unwrap() > mean_energy(&b, 2.0, 3).unwrap());
    }

    #[test]
    fn ground_state_concentration() {
        let b = SpectralBasis::interval(5, 64).unwrap();
        let w = gibbs_weights(&b, 1e4, 5).unwrap();
        assert_eq!(w.weights()[0], 1.0);
        assert_eq!(entropy(&w), 0.0);
        assert!(mean_energy(&b, 1e4, 5).unwrap().abs() < 1e-300);
        let uniform = WeightSequence::new(vec![0.25; 4]).unwrap();
        assert!((entropy(&uniform) - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn near_ground_target_converges() {
        let b = SpectralBasis::interval(10, 64).unwrap();
        let eps = 1e-6;
        let params = solve_beta(&b, eps, 1e-12, 10).unwrap();
        let l1 = b.eigenvalue(1);
        let estimate = (l1 / eps).ln() / l1;
        assert!(params.beta > 0.5 * estimate && params.beta < 2.0 * estimate);
        let s = max_entropy(&params, &b, 10).unwrap();
        assert!(s > 0.0 && s < 1e-4);
    }

    #[test]
    fn disk_target_five() {
        let b = SpectralBasis::disk(20, 128).unwrap();
        let params = solve_beta(&b, 5.0, 1e-12, 20).unwrap();
        assert!((mean_energy(&b, params.beta, 20).unwrap() - 5.0).abs() < 1e-10);
        let direct = entropy(&gibbs_weights(&b, params.beta, 20).unwrap());
        assert!((max_entropy(&params, &b, 20).unwrap() - direct).abs() < 1e-12);
        let kv = params.to_key_values(direct);
        assert!(kv.starts_with("beta=") && kv.contains("\nS_max="));
    }

    #[test]
    fn infeasible_targets() {
        let b = SpectralBasis::interval(4, 64).unwrap();
        assert!(matches!(
            solve_beta(&b, 0.0, 1e-10, 4),
            Err(Error::Infeasible { .. })
        ));
        assert!(matches!(
            solve_beta(&b, -1.0, 1e-10, 4),
            Err(Error::Infeasible { .. })
        ));
        let err = solve_beta(&b, 1e3, 1e-10, 4).unwrap_err();
        assert!(err.to_string().contains("truncation too small"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    proptest! {
        #[test]
        fn gradient_stationarity(beta in 0.01f64..20.0) {
            let b = SpectralBasis::interval(6, 64).unwrap();
            let w = gibbs_weights(&b, beta, 6).unwrap();
            let c0 = w.weights()[0].ln() + beta * b.eigenvalue(0);
            for m in 1..6 {
                let p = w.weights()[m];
                if p > 1e-300 {
                    let c = p.ln() + beta * b.eigenvalue(m);
                    prop_assert!((c - c0).abs() <= 1e-12 * (1.0 + beta * b.eigenvalue(m)));
                }
            }
        }

        #[test]
        fn solve_round_trip(frac in 0.001f64..0.999) {
            let b = SpectralBasis::disk(12, 96).unwrap();
            let lambda = b.eigenvalues()[..12].iter().sum::<f64>() / 12.0 * frac;
            let params = solve_beta(&b, lambda, 1e-10, 12).unwrap();
            prop_assert!((mean_energy(&b, params.beta, 12).unwrap() - lambda).abs() < 1e-10);
            let direct = entropy(&gibbs_weights(&b, params.beta, 12).unwrap());
            prop_assert!((max_entropy(&params, &b, 12).unwrap() - direct).abs() < 1e-12);
        }

        #[test]
        fn entropy_dominance(beta in 0.05f64..0.5, eps in -1.0f64..1.0, l in 1usize..4) {
            let b = SpectralBasis::interval(6, 64).unwrap();
            let w = gibbs_weights(&b, beta, 6).unwrap();
            let lam = b.eigenvalues();
            // direction on levels (0, l, l + 1) with zero mass and zero energy change
            let (i, j, k) = (0, l, l + 1);
            let mut d = vec![0.0; 6];
            d[i] = lam[k] - lam[j];
            d[j] = lam[i] - lam[k];
            d[k] = lam[j] - lam[i];
            let p = w.weights();
            let limit = (0..6)
                .filter(|m| d[*m] != 0.0)
                .map(|m| if eps * d[m] < 0.0 { p[m] / d[m].abs() } else { f64::INFINITY })
                .fold(f64::INFINITY, f64::min);
            let step = eps * limit.min(1.0) * 0.999;
            let q: Vec<f64> = p.iter().zip(&d).map(|(p, d)| (p + step * d).max(0.0)).collect();
            let total: f64 = q.iter().sum();
            let q = WeightSequence::new(q.iter().map(|v| v / total).collect()).unwrap();
            let params = solve_beta(&b, mean_energy(&b, beta, 6).unwrap(), 1e-12, 6).unwrap();
            prop_assert!(entropy(&q) <= max_entropy(&params, &b, 6).unwrap() + 1e-12);
        }
    }
}
