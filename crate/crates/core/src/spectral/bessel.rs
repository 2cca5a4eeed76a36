//! Bessel functions of the first kind of orders zero and one, and the
//! positive zeros of `J1`.
//!
//! Two evaluation regimes are stitched together at `|x| = 25`: the ascending
//! power series (in double-double arithmetic) below, and the Hankel asymptotic
//! expansion truncated at its smallest term above. At the seam the smallest
//! Hankel term is below `1e-20`, so both sides agree to rounding.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 25.0;

/// `J0(x)`.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(j0_unchecked(x))
}

/// `J1(x)`.
pub fn bessel_j1(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(j1_unchecked(x))
}

pub(crate) fn j0_unchecked(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_LIMIT {
        series(ax, 0)
    } else {
        hankel(ax, 0)
    }
}

pub(crate) fn j1_unchecked(x: f64) -> f64 {
    let ax = x.abs();
    let value = if ax <= SERIES_LIMIT {
        series(ax, 1)
    } else {
        hankel(ax, 1)
    };
    if x < 0.0 {
        -value
    } else {
        value
    }
}

/// Ascending series `sum_k (-1)^k (x/2)^(2k+order) / (k! (k+order)!)`.
///
/// Terms grow to about `1e9` before cancelling down to `O(1)` at `x = 25`, so
/// the recurrence and the sum are carried in double-double arithmetic; the
/// result is then within about one ulp of the value itself.
fn series(x: f64, order: u32) -> f64 {
    let q = DoubleDouble::square(x).scale(0.25);
    let mut term = if order == 0 {
        DoubleDouble::from(1.0)
    } else {
        DoubleDouble::from(0.5 * x)
    };
    let mut sum = term;
    let mut k = 1.0_f64;
    loop {
        term = term.mul(q).div_f64(-(k * (k + order as f64)));
        sum = sum.add(term);
        if term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) || k > 300.0 {
            break;
        }
        k += 1.0;
    }
    sum.hi + sum.lo
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl From<f64> for DoubleDouble {
    fn from(hi: f64) -> Self {
        DoubleDouble { hi, lo: 0.0 }
    }
}

impl DoubleDouble {
    fn two_sum(a: f64, b: f64) -> Self {
        let hi = a + b;
        let bb = hi - a;
        let lo = (a - (hi - bb)) + (b - bb);
        DoubleDouble { hi, lo }
    }

    fn quick_two_sum(a: f64, b: f64) -> Self {
        let hi = a + b;
        DoubleDouble {
            hi,
            lo: b - (hi - a),
        }
    }

    fn square(x: f64) -> Self {
        let hi = x * x;
        DoubleDouble {
            hi,
            lo: x.mul_add(x, -hi),
        }
    }

    /// Exact for powers of two.
    fn scale(self, factor: f64) -> Self {
        DoubleDouble {
            hi: self.hi * factor,
            lo: self.lo * factor,
        }
    }

    fn add(self, other: Self) -> Self {
        let s = Self::two_sum(self.hi, other.hi);
        let t = Self::two_sum(self.lo, other.lo);
        let u = Self::quick_two_sum(s.hi, s.lo + t.hi);
        Self::quick_two_sum(u.hi, u.lo + t.lo)
    }

    fn mul(self, other: Self) -> Self {
        let hi = self.hi * other.hi;
        let lo = self.hi.mul_add(other.hi, -hi) + (self.hi * other.lo + self.lo * other.hi);
        Self::quick_two_sum(hi, lo)
    }

    fn div_f64(self, d: f64) -> Self {
        let q1 = self.hi / d;
        // remainder self - q1 d, with the product split exactly by fma
        let p = q1 * d;
        let p_lo = q1.mul_add(d, -p);
        let r = ((self.hi - p) - p_lo) + self.lo;
        Self::quick_two_sum(q1, r / d)
    }
}

/// Hankel expansion `sqrt(2/(pi x)) (P cos chi - Q sin chi)` for `x > 0`.
fn hankel(x: f64, order: u32) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut previous = f64::INFINITY;
    for k in 1..200usize {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= previous || term.abs() < 1e-18 {
            break;
        }
        previous = term.abs();
        // a_k/x^k enters P with sign (-1)^(k/2) for even k, Q with (-1)^((k-1)/2) for odd k
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
    }
    let chi = x - (0.5 * order as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// The first `count` positive zeros of `J1`, strictly increasing.
///
/// Zero `k` is bracketed in `((k - 1/4) pi, (k + 3/4) pi)`, bisected to
/// `1e-12` and polished with a single Newton step using `J1' = J0 - J1/x`.
pub fn bessel_j1_positive_zeros(count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("count", "must be at least 1"));
    }
    let mut zeros = Vec::with_capacity(count);
    for k in 1..=count {
        let kf = k as f64;
        let (mut lo, mut hi) = ((kf - 0.25) * PI, (kf + 0.75) * PI);
        let mut f_lo = j1_unchecked(lo);
        let f_hi = j1_unchecked(hi);
        if f_lo * f_hi >= 0.0 {
            return Err(Error::RootBracket { index: k, lo, hi });
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            let f_mid = j1_unchecked(mid);
            if f_mid == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (f_mid < 0.0) == (f_lo < 0.0) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        let mut z = 0.5 * (lo + hi);
        let derivative = j0_unchecked(z) - j1_unchecked(z) / z;
        if derivative != 0.0 {
            let polished = z - j1_unchecked(z) / derivative;
            if (polished - z).abs() < 1e-10 {
                z = polished;
            }
        }
        zeros.push(z);
    }
    Ok(zeros)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIRST_J0_ZERO: f64 = 2.404_825_557_695_773;

    /// Bessel's integral `(1/pi) int_0^pi cos(n tau - x sin tau) dtau`, evaluated
    /// with the trapezoid rule (spectrally accurate for this periodic integrand).
    fn integral_oracle(order: u32, x: f64) -> f64 {
        let m = 2000;
        let h = PI / m as f64;
        let mut sum = 0.0;
        for i in 0..=m {
            let tau = i as f64 * h;
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            sum += w * (order as f64 * tau - x * tau.sin()).cos();
        }
        sum * h / PI
    }

    #[test]
    fn matches_integral_representation_up_to_100() {
        let mut x = -100.0;
        while x <= 100.0 {
            let e0 = (j0_unchecked(x) - integral_oracle(0, x)).abs();
            let e1 = (j1_unchecked(x) - integral_oracle(1, x)).abs();
            assert!(e0 <= 1e-12, "J0({x}) error {e0:e}");
            assert!(e1 <= 1e-12, "J1({x}) error {e1:e}");
            x += 0.37;
        }
    }

    #[test]
    fn regime_seam_agrees() {
        for x in [SERIES_LIMIT - 1.0, SERIES_LIMIT, SERIES_LIMIT + 1.0] {
            let (s0, s1) = (series(x, 0), series(x, 1));
            let (h0, h1) = (hankel(x, 0), hankel(x, 1));
            assert!((s0 - h0).abs() < 1e-13, "J0 seam at {x}: {s0} vs {h0}");
            assert!((s1 - h1).abs() < 1e-13, "J1 seam at {x}: {s1} vs {h1}");
        }
    }

    #[test]
    fn special_values() {
        assert_eq!(bessel_j0(0.0).unwrap(), 1.0);
        assert_eq!(bessel_j1(0.0).unwrap(), 0.0);
        assert!(bessel_j0(FIRST_J0_ZERO).unwrap().abs() <= 1e-10);
        assert!(bessel_j1(3.831_705_970_207_512_3).unwrap().abs() <= 1e-10);
        assert!((bessel_j0(3.831_705_970_207_512_3).unwrap() + 0.402_759).abs() < 1e-6);
        assert!((bessel_j1(1.841_183_781_3).unwrap() - 0.581_865).abs() < 1e-6);
        assert!((bessel_j1(-2.0).unwrap() + bessel_j1(2.0).unwrap()).abs() < 1e-16);
        assert!(matches!(bessel_j0(f64::NAN), Err(Error::NonFinite(_))));
        assert!(bessel_j1(f64::INFINITY).is_err());
    }

    #[test]
    fn j1_maximum_by_golden_section() {
        let (mut a, mut b) = (1.0_f64, 3.0_f64);
        let g = (5.0_f64.sqrt() - 1.0) / 2.0;
        while b - a > 1e-10 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if series(c, 1) > series(d, 1) {
                b = d;
            } else {
                a = c;
            }
        }
        let xmax = 0.5 * (a + b);
        assert!((xmax - 1.841_183_781_3).abs() < 1e-6);
        assert!((bessel_j1(xmax).unwrap() - 0.581_865).abs() < 1e-6);
    }

    #[test]
    fn derivative_identity() {
        let h = 1e-6;
        for i in 1..=40 {
            let x = 0.5 * i as f64;
            // divide by the spacing actually realised in floating point
            let (xp, xm) = (x + h, x - h);
            let d = (j0_unchecked(xp) - j0_unchecked(xm)) / (xp - xm);
            assert!((d + j1_unchecked(x)).abs() <= 1e-10, "x = {x}");
        }
    }

    /// Bisection directly on the ascending series, independent of the zero finder.
    fn series_zero(lo: f64, hi: f64) -> f64 {
        let (mut a, mut b) = (lo, hi);
        let fa = series(a, 1);
        while b - a > 1e-13 {
            let m = 0.5 * (a + b);
            if (series(m, 1) < 0.0) == (fa < 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn first_zeros() {
        let zeros = bessel_j1_positive_zeros(3).unwrap();
        assert!((zeros[0] - series_zero(3.5, 4.0)).abs() < 1e-10);
        assert!((zeros[1] - series_zero(6.8, 7.2)).abs() < 1e-10);
        assert!((zeros[2] - series_zero(10.0, 10.4)).abs() < 1e-10);
        assert!((zeros[0] - 3.831_705_970_2).abs() < 1e-10);
        assert!((zeros[1] - 7.015_586_669_8).abs() < 1e-10);
        assert!((zeros[2] - 10.173_468_135_1).abs() < 1e-10);
        assert!(bessel_j1_positive_zeros(0).is_err());
    }

    #[test]
    fn zeros_are_increasing_with_gap_tending_to_pi() {
        let zeros = bessel_j1_positive_zeros(30).unwrap();
        for w in zeros.windows(2) {
            assert!(w[1] > w[0]);
        }
        let last_gap = zeros[29] - zeros[28];
        assert!((last_gap - PI).abs() < 1e-3);
        for z in &zeros {
            assert!(j1_unchecked(*z).abs() < 1e-12);
        }
    }

    #[test]
    fn j0_zero_interlaces_j1_zeros() {
        let zeros = bessel_j1_positive_zeros(20).unwrap();
        for w in zeros.windows(2) {
            let mut sign_changes = 0;
            let steps = 2000;
            let mut previous = j0_unchecked(w[0]);
            for i in 1..=steps {
                let x = w[0] + (w[1] - w[0]) * i as f64 / steps as f64;
                let value = j0_unchecked(x);
                if value.signum() != previous.signum() {
                    sign_changes += 1;
                }
                previous = value;
            }
            assert_eq!(sign_changes, 1, "between {} and {}", w[0], w[1]);
        }
    }
}
