//! Renewal constants of the line graph: the skeleton rate `λ₀`, the growth
//! rate `C`, the per-gap variance `σ₀²` and the standardized increments `χ_k`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::model::{CoinField, ConnectivityKernel, EdgeOracle, OracleLayout, SeedSpec, Window};
use crate::par;
use crate::paths1d::longest_path_1d_lazy;
use crate::skeleton::{default_detect_window, detect_skeletons, gap_lengths, SkeletonSequence};

const Z95: f64 = 1.959_963_984_540_054;

/// `λ₀ = ∏_{k≥1} (1 - (1-p)^k)²`, truncated once a factor is within `tol` of 1.
pub fn lambda0_product(p: f64, tol: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        bail!(Domain, "lambda0 needs 0 < p < 1, got {p}");
    }
    if tol <= 0.0 {
        bail!(Domain, "tolerance must be positive");
    }
    let q = 1.0 - p;
    let mut qk = q;
    let mut prod = 1.0;
    loop {
        let f = (1.0 - qk) * (1.0 - qk);
        prod *= f;
        if 1.0 - f < tol {
            return Ok(prod);
        }
        qk *= q;
    }
}

/// A point estimate with the half-width of its 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub half_width: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn lower(&self) -> f64 {
        self.value - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.value + self.half_width
    }
}

/// Gap segments `(Γ_{k+1} - Γ_k, L[Γ_k, Γ_{k+1}])` of a skeleton sequence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GapSegments {
    pub gaps: Vec<u64>,
    pub lengths: Vec<u64>,
}

impl GapSegments {
    pub fn new(gaps: Vec<u64>, lengths: Vec<u64>) -> Result<Self> {
        if gaps.len() != lengths.len() {
            bail!(Input, "{} gaps but {} lengths", gaps.len(), lengths.len());
        }
        Ok(Self { gaps, lengths })
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// Drops the first `burnin` segments.
    pub fn after_burnin(&self, burnin: usize) -> GapSegments {
        let k = burnin.min(self.len());
        GapSegments { gaps: self.gaps[k..].to_vec(), lengths: self.lengths[k..].to_vec() }
    }

    pub fn extend(&mut self, other: &GapSegments) {
        self.gaps.extend_from_slice(&other.gaps);
        self.lengths.extend_from_slice(&other.lengths);
    }
}

/// How to estimate `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CMethod {
    /// Mean of `L[1, n] / n` over independent samples.
    Direct,
    /// `Σ L[Γ_k, Γ_{k+1}] / Σ (Γ_{k+1} - Γ_k)` over gap segments.
    Ratio,
}

/// Ratio estimate of `C` with a delta-method interval.
pub fn estimate_c_ratio(segments: &GapSegments) -> Result<Estimate> {
    if segments.is_empty() {
        bail!(Input, "no gap segments");
    }
    let n = segments.len() as f64;
    let sum_l: f64 = segments.lengths.iter().map(|&l| l as f64).sum();
    let sum_g: f64 = segments.gaps.iter().map(|&g| g as f64).sum();
    let c = sum_l / sum_g;
    let half_width = if segments.len() > 1 {
        let mean_g = sum_g / n;
        let var = segments
            .lengths
            .iter()
            .zip(&segments.gaps)
            .map(|(&l, &g)| {
                let r = l as f64 - c * g as f64;
                r * r
            })
            .sum::<f64>()
            / (n - 1.0);
        Z95 * (var / n).sqrt() / mean_g
    } else {
        f64::INFINITY
    };
    Ok(Estimate { value: c, half_width, samples: segments.len() })
}

/// Direct estimate of `C` from samples `(L[1, n], n)`.
pub fn estimate_c_direct(samples: &[(u64, u64)]) -> Result<Estimate> {
    if samples.is_empty() {
        bail!(Input, "no direct samples");
    }
    let ratios: Vec<f64> = samples.iter().map(|&(l, n)| l as f64 / n as f64).collect();
    let (mean, var) = mean_var(&ratios);
    let half_width = if ratios.len() > 1 { Z95 * (var / ratios.len() as f64).sqrt() } else { f64::INFINITY };
    Ok(Estimate { value: mean, half_width, samples: ratios.len() })
}

/// Dispatches on `method`; `direct` is only used by [`CMethod::Direct`].
pub fn estimate_c(method: CMethod, segments: &GapSegments, direct: &[(u64, u64)]) -> Result<Estimate> {
    match method {
        CMethod::Direct => estimate_c_direct(direct),
        CMethod::Ratio => estimate_c_ratio(segments),
    }
}

pub(crate) fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn residuals(segments: &GapSegments, c: f64) -> Vec<f64> {
    segments.lengths.iter().zip(&segments.gaps).map(|(&l, &g)| l as f64 - c * g as f64).collect()
}

/// Sample variance of `L[Γ_k, Γ_{k+1}] - C (Γ_{k+1} - Γ_k)` with a percentile bootstrap interval.
pub fn estimate_sigma0(segments: &GapSegments, c: f64, resamples: usize, seed: SeedSpec) -> Result<Estimate> {
    if segments.len() < 2 {
        bail!(Input, "need at least 2 segments, got {}", segments.len());
    }
    let res = residuals(segments, c);
    let (_, var) = mean_var(&res);
    if resamples == 0 {
        return Ok(Estimate { value: var, half_width: f64::NAN, samples: res.len() });
    }
    let mut rng = seed.derive_stream();
    let n = res.len();
    let mut boots: Vec<f64> = (0..resamples)
        .map(|_| {
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let x = res[rng.random_range(0..n)];
                s += x;
                s2 += x * x;
            }
            let m = s / n as f64;
            (s2 - n as f64 * m * m) / (n as f64 - 1.0)
        })
        .collect();
    boots.sort_by(f64::total_cmp);
    let lo = boots[((0.025 * resamples as f64) as usize).min(resamples - 1)];
    let hi = boots[((0.975 * resamples as f64) as usize).min(resamples - 1)];
    Ok(Estimate { value: var, half_width: (hi - var).max(var - lo), samples: n })
}

/// Standardized gap residuals `χ_k = (L[Γ_{k-1}, Γ_k] - C (Γ_k - Γ_{k-1})) / σ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSeries {
    pub values: Vec<f64>,
    pub c: f64,
    pub sigma: f64,
    /// `χ_1` comes from the stationary-delay gap and is not identically distributed.
    pub first_is_boundary: bool,
}

impl ChiSeries {
    /// The walk `R_i = Σ_{k≤i} χ_k`, with `R_0 = 0`.
    pub fn prefix_sums(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for v in &self.values {
            acc += v;
            out.push(acc);
        }
        out
    }
}

pub fn chi_series(segments: &GapSegments, c: f64, sigma: f64) -> Result<ChiSeries> {
    if sigma.is_nan() || sigma <= 0.0 {
        bail!(Domain, "sigma must be positive, got {sigma}");
    }
    let values = residuals(segments, c).into_iter().map(|r| r / sigma).collect();
    Ok(ChiSeries { values, c, sigma, first_is_boundary: true })
}

/// Largest admissible exponent `a` for moment order `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibleExponent {
    pub a_max: f64,
    /// Set when `r <= 2`: no exponent is admissible.
    pub warning: bool,
}

/// `min(3/14, (r - 2) / (3r/7 + 1))`; `r = ∞` gives `3/14`.
pub fn admissible_exponent(r: f64) -> AdmissibleExponent {
    let cap = 3.0 / 14.0;
    if r.is_nan() || r <= 2.0 {
        return AdmissibleExponent { a_max: 0.0, warning: true };
    }
    if r.is_infinite() {
        return AdmissibleExponent { a_max: cap, warning: false };
    }
    AdmissibleExponent { a_max: cap.min((r - 2.0) / (3.0 * r / 7.0 + 1.0)), warning: false }
}

/// Partial sums `Σ_{k≤K} k^{q-1} ∏_{l≤k} (1 - p_{l,0})` for `K = 1..=terms`.
///
/// Evidence for a claimed moment order; convergence is not decided.
pub fn moment_partial_sums(kernel: &ConnectivityKernel, q: f64, terms: usize) -> Vec<f64> {
    let mut prod = 1.0;
    let mut acc = 0.0;
    (1..=terms)
        .map(|k| {
            prod *= 1.0 - kernel.edge_prob(k as u64, 0).unwrap_or(0.0);
            acc += (k as f64).powf(q - 1.0) * prod;
            acc
        })
        .collect()
}

/// Settings for estimating constants from simulated lines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsParams {
    /// Length of each simulated line segment `[0, n]`.
    pub n: u64,
    pub detect_window: Option<u64>,
    pub burnin: usize,
    pub reps: u64,
    pub seed: u64,
    /// Length of each direct `L[1, n]` sample (constant kernel only).
    pub direct_n: u64,
    /// Number of direct samples.
    pub direct_reps: u64,
    pub bootstrap: usize,
}

impl Default for ConstantsParams {
    fn default() -> Self {
        Self {
            n: 100_000,
            detect_window: None,
            burnin: 10,
            reps: 10,
            seed: 1,
            direct_n: 100_000,
            direct_reps: 100,
            bootstrap: 200,
        }
    }
}

/// The constants of a kernel with their intervals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConstants {
    pub kernel: String,
    /// Product formula (constant kernel only).
    pub lambda0: Option<f64>,
    /// Detected rate of unthinned skeleton points.
    pub lambda0_empirical: Estimate,
    /// Thinning probability `p_{0,1}`.
    pub thinning_prob: f64,
    /// `p_{0,1} λ₀` (product value when available).
    pub lambda: f64,
    pub c_ratio: Estimate,
    pub c_direct: Option<Estimate>,
    /// The `C` used downstream: direct when available, else ratio.
    pub c_hat: Estimate,
    pub sigma0_sq: Estimate,
    /// `σ₀² / p_{0,1}`.
    pub sigma_sq: f64,
    /// `λ₀ σ₀²`, the CLT variance per unit length.
    pub lam_sig: f64,
    pub segments: usize,
    pub flips: u64,
    pub params: ConstantsParams,
}

/// Estimates every constant from `params.reps` independent lines.
pub fn estimate_constants(kernel: &ConnectivityKernel, params: &ConstantsParams) -> Result<ModelConstants> {
    if params.reps == 0 {
        bail!(Input, "reps must be positive");
    }
    let seed = params.seed;
    let per_rep = par::replicate(params.reps, |rep| -> Result<(GapSegments, u64, u64)> {
        let field = CoinField::new(kernel.clone(), SeedSpec::new(seed, rep));
        let w = params.detect_window.unwrap_or_else(|| default_detect_window(kernel));
        let reach = 2 * w;
        let ext = (w + reach) as i64;
        let window = Window::line(-ext, params.n as i64 + ext, 1)?;
        let oracle = EdgeOracle::from_field(&field, window, OracleLayout::banded_lines(reach), u64::MAX)?;
        let seq = detect_skeletons(&oracle, 1, 0, params.n as i64, w, w, true)?;
        let interior = SkeletonSequence::from_positions(seq.interior().to_vec(), 1, 0, params.n as i64, 0, false);
        let gs = gap_lengths(&oracle, &interior, Some(&field))?;
        let seg = GapSegments::new(gs.gaps, gs.lengths)?.after_burnin(params.burnin);
        Ok((seg, interior.len() as u64, seq.flips().unwrap_or(0)))
    });
    let mut segments = GapSegments::default();
    let mut rates = Vec::new();
    let mut flips = 0;
    for r in per_rep {
        let (seg, count, f) = r?;
        segments.extend(&seg);
        rates.push(count as f64 / params.n as f64);
        flips += f;
    }
    let (rate_mean, rate_var) = mean_var(&rates);
    let rate_hw = if rates.len() > 1 { Z95 * (rate_var / rates.len() as f64).sqrt() } else { f64::NAN };
    let lambda0_empirical = Estimate { value: rate_mean, half_width: rate_hw, samples: rates.len() };

    let c_ratio = estimate_c_ratio(&segments)?;
    let c_direct = match kernel.constant_p() {
        Some(_) if params.direct_reps > 0 => {
            let samples: Result<Vec<(u64, u64)>> = par::replicate(params.direct_reps, |rep| {
                let s = SeedSpec::new(seed, rep).child(1);
                longest_path_1d_lazy(kernel, params.direct_n, s).map(|l| (l, params.direct_n))
            })
            .into_iter()
            .collect();
            Some(estimate_c_direct(&samples?)?)
        }
        _ => None,
    };
    let c_hat = c_direct.unwrap_or(c_ratio);
    let sigma0_sq = estimate_sigma0(&segments, c_hat.value, params.bootstrap, SeedSpec::new(seed, u64::MAX))?;
    let lambda0 = kernel.constant_p().map(|p| lambda0_product(p, 1e-12)).transpose()?;
    let thinning_prob = kernel.vertical_prob();
    let l0 = lambda0.unwrap_or(lambda0_empirical.value);
    Ok(ModelConstants {
        kernel: kernel.to_string(),
        lambda0,
        lambda0_empirical,
        thinning_prob,
        lambda: thinning_prob * l0,
        c_ratio,
        c_direct,
        c_hat,
        sigma0_sq,
        sigma_sq: sigma0_sq.value / thinning_prob,
        lam_sig: l0 * sigma0_sq.value,
        segments: segments.len(),
        flips,
        params: params.clone(),
    })
}

/// One row of the shipped reference file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceConstants {
    pub p: f64,
    pub lambda0: f64,
    pub c: f64,
    pub c_half_width: f64,
    pub sigma0_sq: f64,
    pub sigma0_sq_half_width: f64,
}

impl ReferenceConstants {
    pub fn lam_sig(&self) -> f64 {
        self.lambda0 * self.sigma0_sq
    }
}

/// The reference constants shipped with the crate.
pub const REFERENCE_TABLE: &str = include_str!("../data/constants_reference.txt");

/// Parses a reference file: `p lambda0 C C_hw sigma0_sq sigma0_sq_hw` rows, `#` comments.
pub fn parse_reference(text: &str) -> Result<Vec<ReferenceConstants>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| crate::Error::Input(format!("reference line {}: bad number", i + 1)))?;
        if v.len() != 6 {
            bail!(Input, "reference line {}: expected 6 columns, got {}", i + 1, v.len());
        }
        rows.push(ReferenceConstants {
            p: v[0],
            lambda0: v[1],
            c: v[2],
            c_half_width: v[3],
            sigma0_sq: v[4],
            sigma0_sq_half_width: v[5],
        });
    }
    Ok(rows)
}

/// Reference constants for `p` from the shipped table.
pub fn reference_constants(p: f64) -> Result<ReferenceConstants> {
    parse_reference(REFERENCE_TABLE)?
        .into_iter()
        .find(|r| (r.p - p).abs() < 1e-12)
        .ok_or_else(|| crate::Error::Input(format!("no reference constants for p = {p}")))
}

/// Reference constants from a file.
pub fn load_reference(path: &Path, p: f64) -> Result<ReferenceConstants> {
    let text = std::fs::read_to_string(path)?;
    parse_reference(&text)?
        .into_iter()
        .find(|r| (r.p - p).abs() < 1e-12)
        .ok_or_else(|| crate::Error::Input(format!("no reference constants for p = {p} in {}", path.display())))
}
