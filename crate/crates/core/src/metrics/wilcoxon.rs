use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Two equally long score columns compared row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSamples<F: Real> {
    pub a: Vec<F>,
    pub b: Vec<F>,
    pub a_name: String,
    pub b_name: String,
}

impl<F: Real> PairedSamples<F> {
    pub fn new(a: Vec<F>, b: Vec<F>) -> Result<Self> {
        Self::named(a, b, "a", "b")
    }

    pub fn named(a: Vec<F>, b: Vec<F>, a_name: impl Into<String>, b_name: impl Into<String>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch(a.len(), b.len()));
        }
        if a.len() < 5 {
            return Err(Error::InsufficientData(format!("{} pairs, need at least 5", a.len())));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(invalid("paired samples must be finite"));
        }
        Ok(Self {
            a,
            b,
            a_name: a_name.into(),
            b_name: b_name.into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Normal-approximation statistic; positive when `a` tends to exceed `b`.
    pub z: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Median of `a - b` over all pairs.
    pub median_difference: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs left after dropping zero differences.
    pub n_used: usize,
}

/// Wilcoxon signed-rank test. Zero differences are dropped, tied absolute
/// differences share their average rank, and the normal approximation uses
/// the tie-corrected variance with a continuity correction of 1/2.
pub fn wilcoxon_signed_rank<F: Real>(p: &PairedSamples<F>) -> Result<WilcoxonResult> {
    let all: Vec<f64> = p.a.iter().zip(&p.b).map(|(&x, &y)| (x - y).as_f64()).collect();
    let diffs: Vec<f64> = all.iter().copied().filter(|&d| d != 0.0).collect();
    let n = diffs.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!("{n} nonzero differences, need at least 5")));
    }
    let (ranks, tie_groups) = average_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d < 0.0).map(|(_, r)| r).sum();

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_groups.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
    let dev = w_plus - mean;
    let corrected = if dev.abs() <= 0.5 { 0.0 } else { dev - 0.5 * dev.signum() };
    let z = corrected / sd;
    let p_value = erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0);
    Ok(WilcoxonResult {
        z,
        p_value,
        median_difference: median(&all),
        w_plus,
        w_minus,
        n_used: n,
    })
}

/// Exact two-sided p-value by enumerating all sign assignments of the
/// ranked nonzero differences. Limited to 20 nonzero pairs.
pub fn wilcoxon_exact_p<F: Real>(p: &PairedSamples<F>) -> Result<f64> {
    let diffs: Vec<f64> = p
        .a
        .iter()
        .zip(&p.b)
        .map(|(&x, &y)| (x - y).as_f64())
        .filter(|&d| d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 || n > 20 {
        return Err(invalid(format!("exact enumeration needs 1..=20 nonzero pairs, got {n}")));
    }
    let (ranks, _) = average_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let observed: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total: f64 = ranks.iter().sum();
    let w_obs = observed.min(total - observed);
    let mut hits = 0u64;
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        if w <= w_obs + 1e-9 {
            hits += 1;
        }
    }
    Ok((2.0 * hits as f64 / (1u64 << n) as f64).min(1.0))
}

/// 1-based average ranks and the sizes of tie groups larger than one.
pub(crate) fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = s.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}
