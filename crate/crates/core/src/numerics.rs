//! Special functions and log-domain helpers shared by the inference modules.
//!
//! Evidence values and model posteriors are far below the smallest positive
//! `f64`, so everything downstream works with natural logarithms.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the incomplete gamma series / continued fraction.
const GAMMA_EPS: f64 = 1e-12;
/// Base iteration budget for the incomplete gamma evaluation.
const GAMMA_BASE_ITERATIONS: usize = 500;
/// Above this many degrees of freedom `chi2_sf` uses Wilson–Hilferty.
const WILSON_HILFERTY_DF: f64 = 1e6;
/// Stirling's series is used once the argument has been shifted past this.
const STIRLING_CUTOFF: f64 = 10.0;

/// A non-negative quantity stored as its natural logarithm.
///
/// `LogReal(f64::NEG_INFINITY)` is zero. Multiplication adds logs; addition
/// goes through log-sum-exp, so values never leave the log domain.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogReal(pub f64);

impl LogReal {
    pub const ZERO: LogReal = LogReal(f64::NEG_INFINITY);
    pub const ONE: LogReal = LogReal(0.0);

    pub fn from_value(x: f64) -> Self {
        LogReal(x.ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    /// Back to the linear domain (may underflow to 0).
    pub fn value(self) -> f64 {
        self.0.exp()
    }

    /// Divides by `other`; dividing by zero is a caller bug and yields NaN.
    pub fn div(self, other: LogReal) -> LogReal {
        LogReal(self.0 - other.0)
    }

    /// Sums a set of log-domain values with the max pulled out of the sum.
    pub fn sum<I: IntoIterator<Item = LogReal>>(items: I) -> LogReal {
        let logs: Vec<f64> = items.into_iter().map(|v| v.0).collect();
        if logs.is_empty() {
            return LogReal::ZERO;
        }
        LogReal(lse(&logs))
    }
}

impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, rhs: LogReal) -> LogReal {
        LogReal(self.0 + rhs.0)
    }
}

impl Add for LogReal {
    type Output = LogReal;
    fn add(self, rhs: LogReal) -> LogReal {
        LogReal(lse(&[self.0, rhs.0]))
    }
}

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires finite x > 0, got {x}")));
    }
    Ok(ln_gamma(x))
}

/// `ln Γ(x)` without argument checking; `x` must be positive and finite.
///
/// Small arguments are shifted up with the recurrence Γ(x+1) = xΓ(x) and the
/// result is evaluated with Stirling's series.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut shift = 1.0;
    let mut z = x;
    while z < STIRLING_CUTOFF {
        shift *= z;
        z += 1.0;
    }
    stirling(z) - shift.ln()
}

fn stirling(z: f64) -> f64 {
    // Bernoulli terms B_2n / (2n (2n-1)) for n = 1..8.
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    for c in C.iter().rev() {
        series = series * inv2 + c;
    }
    series *= inv;
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

/// Regularized upper incomplete gamma function Q(a, x) = Γ(a, x) / Γ(a).
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("gamma_q requires a > 0, got {a}")));
    }
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain(format!("gamma_q requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    // Both expansions need O(sqrt(a)) terms near x ≈ a.
    let max_iter = GAMMA_BASE_ITERATIONS + 10 * a.sqrt().ceil() as usize;
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let p = lower_series(a, x, log_prefactor, max_iter)?;
        Ok((1.0 - p).clamp(0.0, 1.0))
    } else {
        let q = upper_continued_fraction(a, x, log_prefactor, max_iter)?;
        Ok(q.clamp(0.0, 1.0))
    }
}

fn lower_series(a: f64, x: f64, log_prefactor: f64, max_iter: usize) -> Result<f64> {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..max_iter {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            return Ok(sum * log_prefactor.exp());
        }
    }
    Err(Error::Convergence { what: "incomplete gamma series", iterations: max_iter })
}

/// Modified Lentz evaluation of the continued fraction for Γ(a, x).
fn upper_continued_fraction(a: f64, x: f64, log_prefactor: f64, max_iter: usize) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=max_iter {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            return Ok(h * log_prefactor.exp());
        }
    }
    Err(Error::Convergence { what: "incomplete gamma continued fraction", iterations: max_iter })
}

/// Upper tail P(X ≥ x) of a χ² variable with `df` degrees of freedom.
///
/// `df` is real because (|S|^m − |S|^k)(|S| − 1) overflows every integer type
/// for page-level vocabularies. Past 10^6 degrees of freedom the
/// Wilson–Hilferty normal approximation is used; an infinite `df` gives 1.
pub fn chi2_sf(x: f64, df: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain(format!("chi2_sf requires x >= 0, got {x}")));
    }
    if !(df >= 1.0) {
        return Err(Error::Domain(format!("chi2_sf requires df >= 1, got {df}")));
    }
    if x == 0.0 || df.is_infinite() {
        return Ok(1.0);
    }
    if df > WILSON_HILFERTY_DF {
        let v = 2.0 / (9.0 * df);
        let z = ((x / df).cbrt() - (1.0 - v)) / v.sqrt();
        return normal_sf(z);
    }
    gamma_q(df / 2.0, x / 2.0)
}

/// Standard normal upper tail via Q(1/2, z²/2) = erfc(|z|/√2).
fn normal_sf(z: f64) -> Result<f64> {
    let tail = 0.5 * gamma_q(0.5, 0.5 * z * z)?;
    Ok(if z >= 0.0 { tail } else { 1.0 - tail })
}

/// `ln Σ exp(v)`, computed as `max + ln Σ exp(v − max)`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("log_sum_exp of an empty list".into()));
    }
    Ok(lse(values))
}

fn lse(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn log_gamma_known_values() {
        assert!(close(log_gamma(5.0).unwrap(), 24f64.ln(), 1e-13));
        assert!(log_gamma(1.0).unwrap().abs() < 1e-14);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-14);
        let half = 0.5 * std::f64::consts::PI.ln();
        assert!(close(log_gamma(0.5).unwrap(), half, 1e-13));
        assert!((log_gamma(0.5).unwrap() - 0.5723649429).abs() < 1e-10);
    }

    #[test]
    fn log_gamma_matches_factorials() {
        // ln Γ(n) = ln((n-1)!) summed directly.
        let mut ln_fact = 0.0;
        for n in 1..=170u32 {
            let got = log_gamma(n as f64).unwrap();
            assert!(close(got, ln_fact, 1e-12), "n={n}: {got} vs {ln_fact}");
            ln_fact += (n as f64).ln();
        }
    }

    #[test]
    fn log_gamma_large_and_small_arguments() {
        // Γ(x) ~ 1/x - γ as x → 0.
        let x: f64 = 1e-3;
        let euler = 0.577_215_664_901_532_9;
        let approx = (1.0 / x - euler + 0.989_055_995_327_972_6 * x).ln();
        assert!(close(log_gamma(x).unwrap(), approx, 1e-9));
        // Stirling's leading terms dominate at 1e8.
        let big: f64 = 1e8;
        let leading = (big - 0.5) * big.ln() - big + 0.5 * (2.0 * std::f64::consts::PI).ln()
            + 1.0 / (12.0 * big);
        assert!(close(log_gamma(big).unwrap(), leading, 1e-14));
    }

    #[test]
    fn log_gamma_rejects_non_positive() {
        assert!(matches!(log_gamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(log_gamma(-1.5), Err(Error::Domain(_))));
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn chi2_examples() {
        assert_eq!(chi2_sf(0.0, 7.0).unwrap(), 1.0);
        assert!((chi2_sf(4.0, 2.0).unwrap() - 0.1353352832).abs() < 1e-10);
        assert!((chi2_sf(20.0, 2.0).unwrap() - (-10f64).exp()).abs() < 1e-14);
        assert!(chi2_sf(-1.0, 2.0).is_err());
        assert!(chi2_sf(1.0, 0.0).is_err());
    }

    #[test]
    fn chi2_huge_df_is_nearly_one_for_moderate_statistics() {
        let p = chi2_sf(1e5, 3.7e8).unwrap();
        assert!(p > 0.999_999);
        assert_eq!(chi2_sf(1e5, f64::INFINITY).unwrap(), 1.0);
        // Just below and above the switch the two routes agree closely.
        let df: f64 = 1e6;
        let x = df + 3.0 * (2.0 * df).sqrt();
        let exact = chi2_sf(x, df).unwrap();
        let approx = chi2_sf(x, df * (1.0 + 1e-12)).unwrap();
        assert!((exact - approx).abs() < 1e-5, "{exact} vs {approx}");
    }

    #[test]
    fn gamma_q_large_shape_converges() {
        // a = 5e5 needs thousands of series terms near x ≈ a.
        let q = gamma_q(5e5, 5e5).unwrap();
        assert!((q - 0.5).abs() < 1e-3, "{q}");
    }

    #[test]
    fn log_sum_exp_examples() {
        let v = log_sum_exp(&[-1000.0, -1000.0]).unwrap();
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, -5.0]).unwrap(), -5.0);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(log_sum_exp(&[]).is_err());
    }

    #[test]
    fn log_real_arithmetic() {
        let a = LogReal::from_value(2.0);
        let b = LogReal::from_value(3.0);
        assert!(((a * b).value() - 6.0).abs() < 1e-12);
        assert!(((a + b).value() - 5.0).abs() < 1e-12);
        assert_eq!((a + LogReal::ZERO).ln(), a.ln());
        assert_eq!(LogReal::sum([LogReal::ZERO, LogReal::ZERO]), LogReal::ZERO);
        assert!((a.div(b).value() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: KahanSum = [1e16, 1.0, -1e16, 1.0].into_iter().collect();
        assert_eq!(s.total(), 2.0);
    }
}
