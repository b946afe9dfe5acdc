//! Paired significance tests, bootstrap intervals and rank correlation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF, Normal};

use crate::error::{Error, Result};

/// Two-sided significance level used throughout the reports.
pub const ALPHA: f64 = 0.05;

/// Discordant pairs below this count use the exact binomial test.
pub const MCNEMAR_EXACT_BELOW: usize = 25;

/// Bonferroni-adjusted threshold for `m` comparisons. Informational only.
pub fn bonferroni_alpha(alpha: f64, m: usize) -> f64 {
    alpha / m.max(1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    ChiSquared,
    ExactBinomial,
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// First selector violates, second complies.
    pub b: usize,
    /// Second selector violates, first complies.
    pub c: usize,
    /// Continuity-corrected χ², reported on every path.
    pub statistic: f64,
    pub p_value: f64,
    pub method: McNemarMethod,
}

fn same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("{what}: paired inputs of length {a} and {b}")));
    }
    Ok(())
}

fn stat_err(e: impl std::fmt::Display) -> Error {
    Error::Stats(e.to_string())
}

/// McNemar's test on paired violation flags (`true` = violates).
pub fn mcnemar(a_flags: &[bool], b_flags: &[bool]) -> Result<McNemarResult> {
    same_len(a_flags.len(), b_flags.len(), "mcnemar")?;
    let b = a_flags.iter().zip(b_flags).filter(|(a, b)| **a && !**b).count();
    let c = a_flags.iter().zip(b_flags).filter(|(a, b)| !**a && **b).count();
    mcnemar_counts(b, c)
}

pub fn mcnemar_counts(b: usize, c: usize) -> Result<McNemarResult> {
    let n = b + c;
    if n == 0 {
        return Ok(McNemarResult { b, c, statistic: 0.0, p_value: 1.0, method: McNemarMethod::Degenerate });
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let statistic = diff * diff / n as f64;
    let (p_value, method) = if n >= MCNEMAR_EXACT_BELOW {
        let chi = ChiSquared::new(1.0).map_err(stat_err)?;
        (chi.sf(statistic), McNemarMethod::ChiSquared)
    } else {
        let bin = Binomial::new(0.5, n as u64).map_err(stat_err)?;
        ((2.0 * bin.cdf(b.min(c) as u64)).min(1.0), McNemarMethod::ExactBinomial)
    };
    Ok(McNemarResult { b, c, statistic, p_value, method })
}

/// Average ranks (1-based) with ties sharing the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of tie groups in `values`.
fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        out.push(j - i + 1);
        i = j + 1;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub z: f64,
    pub p_value: f64,
}

/// Wilcoxon signed-rank test of `a - b`, normal approximation, two-sided.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    same_len(a.len(), b.len(), "wilcoxon")?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Stats("wilcoxon: non-finite difference".into()));
    }
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult { w_plus: 0.0, w_minus: 0.0, n: 0, z: 0.0, p_value: 1.0 });
    }
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&mags);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v < 0.0).map(|(_, r)| r).sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let ties: f64 = tie_groups(&mags).iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    if !(var > 0.0) {
        return Ok(WilcoxonResult { w_plus, w_minus, n, z: 0.0, p_value: 1.0 });
    }
    let z = (w_plus - mean) / var.sqrt();
    let normal = Normal::standard();
    let p_value = (2.0 * normal.sf(z.abs())).min(1.0);
    Ok(WilcoxonResult { w_plus, w_minus, n, z, p_value })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    use std::f64::consts::PI;
    if !(x > 0.0) {
        return 1.0;
    }
    if x < 1.0 {
        // theta-function form converges quickly for small x
        let w = PI * PI / (8.0 * x * x);
        let mut s = 0.0;
        for k in (1..40).step_by(2) {
            let term = (-(k * k) as f64 * w).exp();
            s += term;
            if term < 1e-18 {
                break;
            }
        }
        (1.0 - (2.0 * PI).sqrt() / x * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<KsResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Stats("ks_two_sample needs two non-empty samples".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Stats("ks_two_sample: NaN in sample".into()));
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = a[i].min(b[j]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult { d, p_value: kolmogorov_sf(d * en.sqrt()) })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapStatistic {
    #[default]
    Mean,
    /// Fraction of non-zero values.
    Rate,
}

impl BootstrapStatistic {
    fn apply(self, values: &[f64]) -> f64 {
        let n = values.len() as f64;
        match self {
            BootstrapStatistic::Mean => values.iter().sum::<f64>() / n,
            BootstrapStatistic::Rate => values.iter().filter(|v| **v != 0.0).count() as f64 / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval at 95%. Each resample draws from its own
/// ChaCha stream so the result does not depend on evaluation order.
pub fn bootstrap_ci(values: &[f64], statistic: BootstrapStatistic, resamples: usize, seed: u64) -> Result<Interval> {
    bootstrap_ci_level(values, statistic, resamples, seed, 0.95)
}

pub fn bootstrap_ci_level(
    values: &[f64],
    statistic: BootstrapStatistic,
    resamples: usize,
    seed: u64,
    level: f64,
) -> Result<Interval> {
    if values.is_empty() {
        return Err(Error::Stats("bootstrap needs at least one value".into()));
    }
    if resamples == 0 {
        return Err(Error::Stats("bootstrap needs at least one resample".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Stats(format!("confidence level must lie in (0, 1), got {level}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Stats("bootstrap: non-finite value".into()));
    }
    let n = values.len();
    let mut scratch = vec![0.0; n];
    let mut stats = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        for s in scratch.iter_mut() {
            *s = values[rng.random_range(0..n)];
        }
        stats.push(statistic.apply(&scratch));
    }
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(Interval {
        estimate: statistic.apply(values),
        lo: quantile(&stats, tail),
        hi: quantile(&stats, 1.0 - tail),
    })
}

/// Spearman rank correlation; `None` when either side has zero variance.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    same_len(x.len(), y.len(), "spearman")?;
    if x.len() < 2 {
        return Err(Error::Stats("spearman needs at least two pairs".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Stats("spearman: NaN in sample".into()));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}
