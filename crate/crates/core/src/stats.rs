//! Deterministic reductions and the small set of statistical tests used by the audits.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pairwise (cascade) summation in index order. The result depends only on the
/// input order, never on how work was scheduled.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

pub fn mean_estimate(values: &[f64]) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate {
            value: f64::NAN,
            std_error: f64::NAN,
        };
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return Estimate {
            value: mean,
            std_error: 0.0,
        };
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    Estimate {
        value: mean,
        std_error: (var / n as f64).sqrt(),
    }
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Large-sample critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical(alpha: f64, na: usize, nb: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let (na, nb) = (na as f64, nb as f64);
    c * ((na + nb) / (na * nb)).sqrt()
}

/// Large-sample critical value of the one-sample KS statistic at level `alpha`.
pub fn ks_critical_one_sample(alpha: f64, n: usize) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

/// One-sample KS statistic of `sample` against the continuous CDF `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Result of a chi-square test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
}

impl ChiSquareTest {
    pub fn passes(&self) -> bool {
        self.statistic <= self.critical
    }
}

fn chi2_quantile(dof: usize, p: f64) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}

/// Two-sample chi-square homogeneity test on binned counts.
pub fn chi2_two_sample(a: &[u64], b: &[u64], alpha: f64) -> ChiSquareTest {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let (na, nb) = (na as f64, nb as f64);
    let mut stat = 0.0;
    let mut used = 0usize;
    for (&ca, &cb) in a.iter().zip(b) {
        let total = (ca + cb) as f64;
        if total == 0.0 {
            continue;
        }
        used += 1;
        let ea = total * na / (na + nb);
        let eb = total * nb / (na + nb);
        stat += (ca as f64 - ea).powi(2) / ea + (cb as f64 - eb).powi(2) / eb;
    }
    let dof = used.saturating_sub(1).max(1);
    ChiSquareTest {
        statistic: stat,
        dof,
        critical: chi2_quantile(dof, 1.0 - alpha),
    }
}

/// Goodness-of-fit chi-square test of counts against expected probabilities.
pub fn chi2_goodness(counts: &[u64], probs: &[f64], alpha: f64) -> ChiSquareTest {
    let n: u64 = counts.iter().sum();
    let n = n as f64;
    let mut stat = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = n * p;
        if e > 0.0 {
            stat += (c as f64 - e).powi(2) / e;
        }
    }
    let dof = counts.len().saturating_sub(1).max(1);
    ChiSquareTest {
        statistic: stat,
        dof,
        critical: chi2_quantile(dof, 1.0 - alpha),
    }
}

/// Hill estimate of the tail index from the `k` largest positive finite values.
///
/// Returns `+∞` when the top order statistics are all equal (no tail).
pub fn hill_tail_index(values: &[f64], k: usize) -> f64 {
    let mut v: Vec<f64> = values
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > 0.0)
        .collect();
    if v.len() < 3 {
        return f64::INFINITY;
    }
    v.sort_by(|a, b| b.total_cmp(a));
    let k = k.clamp(2, v.len() - 1);
    let threshold = v[k].ln();
    let mean_excess: f64 = v[..k].iter().map(|x| x.ln() - threshold).sum::<f64>() / k as f64;
    if mean_excess <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / mean_excess
    }
}

/// Radical inverse of `index` in base `base` (the Halton coordinate).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

pub const HALTON_BASES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn ks_identical_samples_is_zero() {
        let a = [0.1, 0.5, 0.9];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
    }

    #[test]
    fn ks_critical_matches_table() {
        // c(0.01) = 1.628
        let c = ks_critical(0.01, 100, 100) / (0.02f64).sqrt();
        assert_relative_eq!(c, 1.6276, epsilon = 1e-3);
    }

    #[test]
    fn hill_on_pareto_quantiles() {
        // Exact Pareto(α = 2) quantiles.
        let n = 100_000;
        let v: Vec<f64> = (0..n)
            .map(|i| (1.0 - (i as f64 + 0.5) / n as f64).powf(-0.5))
            .collect();
        let a = hill_tail_index(&v, 1000);
        assert!((a - 2.0).abs() < 0.05, "{a}");
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_relative_eq!(radical_inverse(5, 3), 7.0 / 9.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn pairwise_sum_matches_naive(values in proptest::collection::vec(-1e3f64..1e3, 0..500)) {
            let naive: f64 = values.iter().sum();
            prop_assert!((pairwise_sum(&values) - naive).abs() <= 1e-9 * (1.0 + naive.abs()) + 1e-9);
        }
    }
}
