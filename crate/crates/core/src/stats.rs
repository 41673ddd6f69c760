//! Empirical distributions, Kolmogorov-Smirnov tests and the scaling
//! transforms that turn longest-path samples into normal or Tracy-Widom
//! candidates.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{bail, Result};
use crate::skeleton::SkeletonSequence;

/// Sorted samples with summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EcdfSummary {
    sorted: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

impl EcdfSummary {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.iter().any(|v| v.is_nan()) {
            bail!(Input, "samples contain NaN");
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self::from_sorted(sorted))
    }

    fn from_sorted(sorted: Vec<f64>) -> Self {
        let (mean, variance) =
            if sorted.is_empty() { (f64::NAN, f64::NAN) } else { crate::constants::mean_var(&sorted) };
        Self { sorted, mean, variance }
    }

    /// Sorted merge of two summaries.
    pub fn merge(&self, other: &EcdfSummary) -> EcdfSummary {
        let mut out = Vec::with_capacity(self.sorted.len() + other.sorted.len());
        let (mut i, mut j) = (0, 0);
        while i < self.sorted.len() && j < other.sorted.len() {
            if self.sorted[i] <= other.sorted[j] {
                out.push(self.sorted[i]);
                i += 1;
            } else {
                out.push(other.sorted[j]);
                j += 1;
            }
        }
        out.extend_from_slice(&self.sorted[i..]);
        out.extend_from_slice(&other.sorted[j..]);
        Self::from_sorted(out)
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn count(&self) -> usize {
        self.sorted.len()
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Fraction of samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Type-7 (linear) quantile.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.sorted.len();
        if n == 0 {
            return f64::NAN;
        }
        let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        self.sorted[lo] + (h - lo as f64) * (self.sorted[hi] - self.sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n1: usize,
    /// Second sample size for the two-sample test.
    pub n2: Option<usize>,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // the alternating series converges too slowly here; use the dual form
        let s = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let mut cdf = 0.0;
        for k in 1..=50 {
            let t = (2 * k - 1) as f64 * std::f64::consts::PI / (2.0 * lambda);
            cdf += (-t * t / 2.0).exp();
        }
        return (1.0 - s * cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_survival((s + 0.12 + 0.11 / s) * d)
}

fn check_samples(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        bail!(Input, "KS test needs samples");
    }
    if xs.iter().any(|v| v.is_nan()) {
        bail!(Input, "samples contain NaN");
    }
    Ok(())
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, alpha: f64) -> Result<KsResult> {
    check_samples(samples)?;
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let p_value = ks_p_value(d, n);
    Ok(KsResult { statistic: d, n1: s.len(), n2: None, p_value, alpha, reject: p_value < alpha })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult> {
    check_samples(a)?;
    check_samples(b)?;
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n1, n2) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n1 && j < n2 {
        let v = x[i].min(y[j]);
        while i < n1 && x[i] <= v {
            i += 1;
        }
        while j < n2 && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let p_value = ks_p_value(d, ne);
    Ok(KsResult { statistic: d, n1, n2: Some(n2), p_value, alpha, reject: p_value < alpha })
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// How the GUE centering `2√(n^a)` is read at finite `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Centering {
    /// `2√m` with `m = ⌊n^a⌋`.
    #[default]
    Lines,
    /// `2√(n^a)` literally.
    Literal,
}

/// Value of the Tracy-Widom transform; `warning` is set when `a` is outside `(0, 3/14)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwStatistic {
    pub value: f64,
    pub warning: bool,
}

/// `m = ⌊n^a⌋`, never below 1.
pub fn lines_for(n: u64, a: f64) -> u64 {
    ((n as f64).powf(a) + 1e-9).floor().max(1.0) as u64
}

/// `n^{a/6} ((L - C n) / (√(λ₀σ₀²) √n) - 2√m)`.
pub fn tw_statistic(l: f64, n: u64, a: f64, c: f64, lam_sig: f64, centering: Centering) -> Result<TwStatistic> {
    if n == 0 {
        bail!(Domain, "n must be positive");
    }
    if !(lam_sig > 0.0) {
        bail!(Domain, "λ₀σ₀² must be positive, got {lam_sig}");
    }
    let nf = n as f64;
    let center = match centering {
        Centering::Lines => 2.0 * (lines_for(n, a) as f64).sqrt(),
        Centering::Literal => 2.0 * nf.powf(a / 2.0),
    };
    let value = nf.powf(a / 6.0) * ((l - c * nf) / (lam_sig.sqrt() * nf.sqrt()) - center);
    Ok(TwStatistic { value, warning: !(a > 0.0 && a < 3.0 / 14.0) })
}

/// `(L - C n) / √(λ₀σ₀² n)`.
pub fn clt_statistic(l: f64, n: u64, c: f64, lam_sig: f64) -> Result<f64> {
    if n == 0 {
        bail!(Domain, "n must be positive");
    }
    if !(lam_sig > 0.0) {
        bail!(Domain, "λ₀σ₀² must be positive, got {lam_sig}");
    }
    let nf = n as f64;
    Ok((l - c * nf) / (lam_sig * nf).sqrt())
}

/// `sup_{0 <= t <= n} |Φ(t)/λ - t| / n^q` for one skeleton sequence.
pub fn counting_deviation(seq: &SkeletonSequence, lambda: f64, n: u64, q: f64) -> f64 {
    let nf = n as f64;
    let mut worst = 0.0f64;
    let mut count = 0.0;
    // Φ jumps at interior positions; check both sides of every jump and the ends
    for &g in seq.positions().iter().filter(|&&g| g > 0 && g as f64 <= nf) {
        let t = g as f64;
        worst = worst.max((count / lambda - t).abs());
        count += 1.0;
        worst = worst.max((count / lambda - t).abs());
    }
    worst = worst.max((count / lambda - nf).abs());
    worst / nf.powf(q)
}
