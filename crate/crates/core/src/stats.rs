//! Statistical verification harness.
//!
//! Every test returns a [`TestReport`] with `pass ⇔ statistic ≤ threshold`.
//! Discretization allowances are supplied by the caller and added to the
//! threshold explicitly; the report records them in `details`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Significance level used throughout the acceptance runs.
pub const DEFAULT_ALPHA: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub experiment: String,
    #[serde(rename = "statistic_name")]
    pub name: String,
    #[serde(rename = "value")]
    pub statistic: f64,
    pub threshold: f64,
    pub n: u64,
    pub seed: u64,
    pub pass: bool,
    #[serde(default)]
    pub details: BTreeMap<String, String>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64, n: usize) -> Self {
        Self {
            experiment: String::new(),
            name: name.into(),
            statistic,
            threshold,
            n: n as u64,
            seed: 0,
            pass: statistic <= threshold,
            details: BTreeMap::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, value: impl ToString) -> Self {
        self.details.insert(key.to_string(), value.to_string());
        self
    }

    pub fn tagged(mut self, experiment: &str, seed: u64) -> Self {
        self.experiment = experiment.to_string();
        self.seed = seed;
        self
    }
}

/// Kolmogorov distribution `K(x) = 1 - 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²x²}`.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 0.2 {
        // the alternating series converges slowly here and K is below 1e-20
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (1.0 - 2.0 * sum).clamp(0.0, 1.0)
}

/// `c(α)` with `K(c) = 1 - α`, by bisection.
pub fn kolmogorov_quantile(alpha: f64) -> f64 {
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Stats("samples contain NaN".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

/// Reference law for [`ks_test`].
pub enum KsReference<'a> {
    Cdf(&'a dyn Fn(f64) -> f64),
    Sample(&'a [f64]),
}

const KS_MIN_N: usize = 100;

/// Kolmogorov-Smirnov test. The threshold is `c(α)/√n_eff + allowance`.
pub fn ks_test(
    name: &str,
    samples: &[f64],
    reference: KsReference<'_>,
    alpha: f64,
    allowance: f64,
) -> Result<TestReport> {
    if samples.is_empty() {
        return Err(Error::Stats("empty sample".into()));
    }
    if samples.len() < KS_MIN_N {
        return Err(Error::Stats(format!("KS needs n >= {KS_MIN_N}, got {}", samples.len())));
    }
    let xs = sorted(samples)?;
    let n = xs.len() as f64;
    let (d, n_eff) = match reference {
        KsReference::Cdf(cdf) => {
            let mut d: f64 = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                let f = cdf(x);
                d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
            }
            (d, n)
        }
        KsReference::Sample(other) => {
            if other.is_empty() {
                return Err(Error::Stats("empty reference sample".into()));
            }
            let ys = sorted(other)?;
            let m = ys.len() as f64;
            let (mut i, mut j) = (0usize, 0usize);
            let mut d: f64 = 0.0;
            while i < xs.len() && j < ys.len() {
                let v = xs[i].min(ys[j]);
                while i < xs.len() && xs[i] <= v {
                    i += 1;
                }
                while j < ys.len() && ys[j] <= v {
                    j += 1;
                }
                d = d.max((i as f64 / n - j as f64 / m).abs());
            }
            (d, n * m / (n + m))
        }
    };
    let c = kolmogorov_quantile(alpha);
    let threshold = c / n_eff.sqrt() + allowance;
    Ok(TestReport::new(name, d, threshold, xs.len())
        .with_detail("alpha", alpha)
        .with_detail("allowance", allowance)
        .with_detail("n_eff", n_eff))
}

/// What [`mean_compare`] compares against.
pub enum MeanTarget<'a> {
    Value(f64),
    Sample(&'a [f64]),
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

const MEAN_MIN_N: usize = 30;

/// `|Δmean| / SE` against `k_se + allowance / SE`, where `allowance` is in the
/// units of the data.
pub fn mean_compare(
    name: &str,
    s1: &[f64],
    target: MeanTarget<'_>,
    k_se: f64,
    allowance: f64,
) -> Result<TestReport> {
    if s1.len() < MEAN_MIN_N {
        return Err(Error::Stats(format!("mean comparison needs n >= {MEAN_MIN_N}")));
    }
    let (m1, se1) = mean_and_se(s1);
    let (m2, se2) = match target {
        MeanTarget::Value(v) => (v, 0.0),
        MeanTarget::Sample(s2) => {
            if s2.len() < MEAN_MIN_N {
                return Err(Error::Stats(format!("mean comparison needs n >= {MEAN_MIN_N}")));
            }
            mean_and_se(s2)
        }
    };
    let se = (se1 * se1 + se2 * se2).sqrt();
    let diff = (m1 - m2).abs();
    let (statistic, threshold) = if se > 0.0 {
        (diff / se, k_se + allowance / se)
    } else if diff <= allowance {
        (0.0, k_se)
    } else {
        return Err(Error::Stats("zero variance with unequal means".into()));
    };
    Ok(TestReport::new(name, statistic, threshold, s1.len())
        .with_detail("mean", m1)
        .with_detail("target_mean", m2)
        .with_detail("se", se)
        .with_detail("k_se", k_se)
        .with_detail("allowance", allowance))
}

/// Upper `α` quantile of the chi-square law with `dof` degrees of freedom.
pub fn chi_square_quantile(dof: f64, alpha: f64) -> f64 {
    ChiSquared::new(dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha)
}

fn rank_bins(xs: &[f64], bins: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    let n = xs.len();
    let mut out = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank * bins / n;
    }
    out
}

/// Chi-square test of independence on the `bins × bins` table of
/// rank-binned pairs.
pub fn independence_test(name: &str, s1: &[f64], s2: &[f64], bins: usize, alpha: f64) -> Result<TestReport> {
    if s1.len() != s2.len() {
        return Err(Error::Stats("independence test needs equal lengths".into()));
    }
    let n = s1.len();
    if bins < 2 || bins * bins * 5 > n {
        return Err(Error::Stats(format!("need bins >= 2 and bins² <= n/5 (bins={bins}, n={n})")));
    }
    let distinct = |s: &[f64]| s.iter().any(|&x| x != s[0]);
    if !distinct(s1) || !distinct(s2) {
        return Err(Error::Stats("degenerate marginal".into()));
    }
    let r1 = rank_bins(s1, bins);
    let r2 = rank_bins(s2, bins);
    let mut table = vec![0.0; bins * bins];
    for (&a, &b) in r1.iter().zip(&r2) {
        table[a * bins + b] += 1.0;
    }
    let row: Vec<f64> = (0..bins).map(|i| table[i * bins..(i + 1) * bins].iter().sum()).collect();
    let col: Vec<f64> = (0..bins).map(|j| (0..bins).map(|i| table[i * bins + j]).sum()).collect();
    let nf = n as f64;
    let mut chi2 = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let e = row[i] * col[j] / nf;
            let d = table[i * bins + j] - e;
            chi2 += d * d / e;
        }
    }
    let dof = ((bins - 1) * (bins - 1)) as f64;
    let threshold = chi_square_quantile(dof, alpha);
    Ok(TestReport::new(name, chi2, threshold, n)
        .with_detail("bins", bins)
        .with_detail("dof", dof)
        .with_detail("alpha", alpha))
}

/// Two-sided normal quantile `z` with `P(|N| > z) = p`.
pub fn normal_two_sided(p: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - 0.5 * p)
}

/// Martingale drift test on a `replicas × checkpoints` matrix: the largest
/// pairwise mean difference in combined standard errors, against the
/// Bonferroni-corrected two-sided normal quantile.
pub fn drift_test(name: &str, series: &[Vec<f64>], alpha: f64) -> Result<TestReport> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Stats("drift test needs at least two replicas".into()));
    }
    let k = series[0].len();
    if k < 2 || series.iter().any(|r| r.len() != k) {
        return Err(Error::Stats("drift test needs >= 2 checkpoints in every replica".into()));
    }
    let cols: Vec<(f64, f64)> = (0..k)
        .map(|j| {
            let col: Vec<f64> = series.iter().map(|r| r[j]).collect();
            mean_and_se(&col)
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut worst_pair = (0, 0);
    for i in 0..k {
        for j in i + 1..k {
            let (mi, si) = cols[i];
            let (mj, sj) = cols[j];
            let se = (si * si + sj * sj).sqrt();
            let d = mi - mj;
            let z = if se > 0.0 {
                d.abs() / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            if z > worst {
                worst = z;
                worst_pair = (i, j);
            }
        }
    }
    let pairs = (k * (k - 1) / 2) as f64;
    let threshold = normal_two_sided(alpha / pairs);
    let means: Vec<String> = cols.iter().map(|(m, _)| format!("{m:.6}")).collect();
    Ok(TestReport::new(name, worst, threshold, n)
        .with_detail("checkpoints", k)
        .with_detail("means", means.join(";"))
        .with_detail("worst_pair", format!("{}-{}", worst_pair.0, worst_pair.1)))
}
