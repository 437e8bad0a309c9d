//! Two-sample tests on next-symbol counts, and the total-variation metric.
//!
//! Both tests compare two count vectors over the same alphabet: a
//! Kolmogorov-Smirnov test on the empirical CDFs taken in alphabet order,
//! and a chi-squared test on the k x 2 contingency table.  The KS p-value
//! uses the asymptotic Kolmogorov distribution, which is conservative for
//! discrete data: its true rejection rate sits at or below the nominal
//! size.

use thiserror::Error;

use crate::tree::CountVector;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("distributions have different lengths ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("sample has no observations")]
    EmptySample,
    #[error("probabilities must be non-negative and sum to 1 (sum was {0})")]
    NotADistribution(f64),
}

/// Which two-sample test the splitting procedure uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Ks,
    ChiSquared,
}

impl TestKind {
    pub fn parse(s: &str) -> Option<TestKind> {
        match s {
            "ks" => Some(TestKind::Ks),
            "chisq" => Some(TestKind::ChiSquared),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestKind::Ks => "ks",
            TestKind::ChiSquared => "chisq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// True exactly when `p_value < alpha`.
    pub reject: bool,
}

/// A validated probability vector over the alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    pub probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, StatsError> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| *p < 0.0 || !p.is_finite()) || (sum - 1.0).abs() > 1e-9 {
            return Err(StatsError::NotADistribution(sum));
        }
        Ok(DiscreteDistribution { probs })
    }

    pub fn from_counts(counts: &CountVector) -> Result<Self, StatsError> {
        if counts.total() == 0 {
            return Err(StatsError::EmptySample);
        }
        Ok(DiscreteDistribution { probs: counts.fractions() })
    }
}

/// Total variation distance as the L1 sum, in [0, 2].
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64, StatsError> {
    if p.len() != q.len() {
        return Err(StatsError::DimensionMismatch(p.len(), q.len()));
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

/// Survival function of the Kolmogorov distribution,
/// Q(t) = 2 * sum_{j>=1} (-1)^(j-1) exp(-2 j^2 t^2).
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=1000 {
        let term = (-2.0 * (j as f64) * (j as f64) * t * t).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS test on counts over a shared, ordered alphabet.
///
/// The statistic is the largest gap between the two empirical CDFs across
/// alphabet-order prefixes; the p-value evaluates the asymptotic Kolmogorov
/// distribution at D * sqrt(n1 n2 / (n1 + n2)).
pub fn ks_two_sample(c1: &CountVector, c2: &CountVector, alpha: f64) -> Result<TestResult, StatsError> {
    if c1.counts.len() != c2.counts.len() {
        return Err(StatsError::DimensionMismatch(c1.counts.len(), c2.counts.len()));
    }
    let n1 = c1.total() as f64;
    let n2 = c2.total() as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return Err(StatsError::EmptySample);
    }
    let mut acc1 = 0.0;
    let mut acc2 = 0.0;
    let mut d: f64 = 0.0;
    for (a, b) in c1.counts.iter().zip(&c2.counts) {
        acc1 += *a as f64 / n1;
        acc2 += *b as f64 / n2;
        d = d.max((acc1 - acc2).abs());
    }
    let p = kolmogorov_sf(d * (n1 * n2 / (n1 + n2)).sqrt());
    Ok(TestResult { statistic: d, p_value: p, reject: p < alpha })
}

/// Two-sample chi-squared test on the k x 2 contingency table.
///
/// Adjacent cells (alphabet order) are pooled until every cell's smaller
/// expected count reaches 5.  Fewer than two cells after pooling is a
/// degenerate table: p = 1, no rejection.
pub fn chi_squared_two_sample(
    c1: &CountVector,
    c2: &CountVector,
    alpha: f64,
) -> Result<TestResult, StatsError> {
    if c1.counts.len() != c2.counts.len() {
        return Err(StatsError::DimensionMismatch(c1.counts.len(), c2.counts.len()));
    }
    let n1 = c1.total() as f64;
    let n2 = c2.total() as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return Err(StatsError::EmptySample);
    }
    let n = n1 + n2;
    // merge walk: (observed1, observed2) per retained cell
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut g1 = 0.0;
    let mut g2 = 0.0;
    for (a, b) in c1.counts.iter().zip(&c2.counts) {
        g1 += *a as f64;
        g2 += *b as f64;
        let pooled = g1 + g2;
        let e_min = pooled * n1.min(n2) / n;
        if e_min >= 5.0 {
            cells.push((g1, g2));
            g1 = 0.0;
            g2 = 0.0;
        }
    }
    if g1 + g2 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += g1;
                last.1 += g2;
            }
            None => cells.push((g1, g2)),
        }
    }
    if cells.len() < 2 {
        return Ok(TestResult { statistic: 0.0, p_value: 1.0, reject: false });
    }
    let mut stat = 0.0;
    for &(o1, o2) in &cells {
        let pooled = o1 + o2;
        let e1 = pooled * n1 / n;
        let e2 = pooled * n2 / n;
        stat += (o1 - e1).powi(2) / e1 + (o2 - e2).powi(2) / e2;
    }
    let df = (cells.len() - 1) as f64;
    let p = chi_squared_sf(stat, df);
    Ok(TestResult { statistic: stat, p_value: p, reject: p < alpha })
}

/// Dispatch on the configured test kind.
pub fn two_sample(
    kind: TestKind,
    c1: &CountVector,
    c2: &CountVector,
    alpha: f64,
) -> Result<TestResult, StatsError> {
    match kind {
        TestKind::Ks => ks_two_sample(c1, c2, alpha),
        TestKind::ChiSquared => chi_squared_two_sample(c1, c2, alpha),
    }
}

/// Upper tail of the chi-squared distribution with `df` degrees of freedom.
pub fn chi_squared_sf(stat: f64, df: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    regularized_gamma_upper(df / 2.0, stat / 2.0)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(a, x), by series or continued
/// fraction depending on the region.
fn regularized_gamma_upper(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        // lower series, Q = 1 - P
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        let p = sum * (-x + a * x.ln() - ln_gamma(a)).exp();
        (1.0 - p).clamp(0.0, 1.0)
    } else {
        // continued fraction (modified Lentz)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-15 {
                break;
            }
        }
        (h * (-x + a * x.ln() - ln_gamma(a)).exp()).clamp(0.0, 1.0)
    }
}
