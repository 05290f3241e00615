//! Wilcoxon signed-rank and rank-sum tests.
//!
//! Ranks are kept doubled (`2 × average rank`) so tied ranks stay integral and
//! the exact null distributions can be tabulated by counting.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest number of nonzero differences handled by the exact signed-rank distribution.
pub const SIGNED_RANK_EXACT_MAX: usize = 20;
/// Largest pooled sample size handled by the exact rank-sum distribution.
pub const RANK_SUM_EXACT_MAX: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestResult {
    /// Sum of positive ranks (signed-rank) or ranks of the first sample (rank-sum).
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Observations actually ranked (nonzero differences for the signed-rank test).
    pub n: usize,
    pub exact: bool,
}

/// Doubled average ranks (1-based) of `values`, plus the tie-group sizes.
pub fn doubled_ranks(values: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1; twice their mean is i+j+2
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

fn normal_two_sided(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Paired two-sided Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are dropped before ranking. Exact for up to
/// [`SIGNED_RANK_EXACT_MAX`] nonzero differences, normal approximation with
/// tie correction above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::Config(format!("paired samples differ in length ({} vs {})", a.len(), b.len())));
    }
    if a.len() < 5 {
        return Err(Error::Config("signed-rank test needs at least 5 pairs".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Config("signed-rank test needs finite values".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::Degenerate("all paired differences are zero".into()));
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = doubled_ranks(&abs);
    let w2: u64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total2: u64 = ranks.iter().sum();
    let statistic = w2 as f64 / 2.0;

    if n <= SIGNED_RANK_EXACT_MAX {
        // counts[s] = number of sign patterns with doubled positive-rank sum s
        let mut counts = vec![0u64; total2 as usize + 1];
        counts[0] = 1;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] > 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        // |2W - T| compared in doubled units: |2·w2 - total2|
        let obs = (2 * w2).abs_diff(total2);
        let extreme: u64 = counts
            .iter()
            .enumerate()
            .filter(|(s, _)| (2 * *s as u64).abs_diff(total2) >= obs)
            .map(|(_, c)| c)
            .sum();
        let p = extreme as f64 / (1u64 << n) as f64;
        return Ok(TestResult { statistic, p_value: p.min(1.0), n, exact: true });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
    let p = if var > 0.0 { normal_two_sided((statistic - mean) / var.sqrt()) } else { 1.0 };
    Ok(TestResult { statistic, p_value: p, n, exact: false })
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test of `a` against `b`.
///
/// The statistic is the rank sum of `a` in the pooled sample. Exact when the
/// pooled size is at most [`RANK_SUM_EXACT_MAX`], normal approximation with
/// tie correction otherwise.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 4 || b.len() < 4 {
        return Err(Error::Config("rank-sum test needs at least 4 observations per sample".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Config("rank-sum test needs finite values".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_ranks(&pooled);
    let w2: u64 = ranks[..n1].iter().sum();
    let statistic = w2 as f64 / 2.0;
    // doubled null mean n1 (N + 1)
    let mean2 = (n1 * (n + 1)) as u64;

    if n <= RANK_SUM_EXACT_MAX {
        let total2: u64 = ranks.iter().sum();
        // counts[k][s]: subsets of size k with doubled rank sum s
        let mut counts = vec![vec![0u128; total2 as usize + 1]; n1 + 1];
        counts[0][0] = 1;
        for (i, &r) in ranks.iter().enumerate() {
            let r = r as usize;
            for k in (1..=n1.min(i + 1)).rev() {
                let (lo, hi) = counts.split_at_mut(k);
                for (s, c) in lo[k - 1].iter().enumerate() {
                    if *c > 0 {
                        hi[0][s + r] += *c;
                    }
                }
            }
        }
        let obs = w2.abs_diff(mean2);
        let (mut extreme, mut total) = (0u128, 0u128);
        for (s, c) in counts[n1].iter().enumerate() {
            total += c;
            if (s as u64).abs_diff(mean2) >= obs {
                extreme += c;
            }
        }
        let p = extreme as f64 / total as f64;
        return Ok(TestResult { statistic, p_value: p.min(1.0), n, exact: true });
    }

    let (f1, f2, nf) = (n1 as f64, n2 as f64, n as f64);
    let mean = f1 * (nf + 1.0) / 2.0;
    let var = f1 * f2 / 12.0 * ((nf + 1.0) - tie_term(&ties) / (nf * (nf - 1.0)));
    let p = if var > 0.0 { normal_two_sided((statistic - mean) / var.sqrt()) } else { 1.0 };
    Ok(TestResult { statistic, p_value: p, n, exact: false })
}

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        let (r, t) = doubled_ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![7, 2, 7, 4]);
        assert_eq!(t, vec![1, 1, 2]);
    }

    #[test]
    fn dominated_pairs() {
        let a: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 1.0 + 0.1 * v).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 2.0 / 2048.0);
    }

    #[test]
    fn null_case_is_near_one() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0 + 1e-9, 2.0 - 1e-9, 3.0 + 2e-9, 4.0 - 2e-9, 5.0 + 3e-9, 6.0 - 3e-9];
        assert!(wilcoxon_signed_rank(&a, &b).unwrap().p_value > 0.8);
        assert!(wilcoxon_rank_sum(&a, &b).unwrap().p_value > 0.8);
    }

    #[test]
    fn zero_differences_rejected() {
        let a = [1.0; 6];
        assert!(matches!(wilcoxon_signed_rank(&a, &a), Err(Error::Degenerate(_))));
        assert!(wilcoxon_signed_rank(&a[..4], &a[..4]).is_err());
    }

    #[test]
    fn separated_samples() {
        let a: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..11).map(|i| 100.0 + i as f64).collect();
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        assert_eq!(r.p_value, 2.0 / 705_432.0);
    }

    #[test]
    fn large_samples_use_normal_approximation() {
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.53).cos()).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(!r.exact && r.p_value > 0.0 && r.p_value <= 1.0);
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        assert!(!r.exact && r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
    }
}
