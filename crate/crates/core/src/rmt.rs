//! Brownian directed percolation, GUE extreme eigenvalues and the
//! Tracy-Widom reference distribution.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::model::SeedSpec;

/// How breakpoints are placed relative to the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BdpRecursion {
    /// Grid increments plus one switch `j -> j+1` anywhere inside a cell,
    /// whose gain is the exact maximum of the Brownian bridge of
    /// `B^{(j)} - B^{(j+1)}` across the cell.
    #[default]
    Bridge,
    /// Breakpoints on the grid only; each increment belongs to exactly one line:
    /// `H(i, j) = max(H(i, j-1), H(i-1, j) + g_ij)`.
    Partition,
    /// Classical lattice LPP `H(i, j) = max(H(i-1, j), H(i, j-1)) + g_ij`,
    /// which counts the increment of each switching column twice.
    Lattice,
}

impl std::str::FromStr for BdpRecursion {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bridge" => Ok(Self::Bridge),
            "partition" => Ok(Self::Partition),
            "lattice" => Ok(Self::Lattice),
            _ => bail!(Config, "unknown recursion `{s}` (bridge, partition, lattice)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BdpResult {
    pub t: f64,
    pub m: u64,
    pub h: f64,
    pub z: f64,
}

/// `Z_{t,m}` from Brownian increments on the grid `h Z`, with the in-cell
/// bridge correction (see [`BdpRecursion::Bridge`]).
pub fn bdp_sample(t: f64, m: u64, h: f64, seed: SeedSpec) -> Result<BdpResult> {
    bdp_sample_with(t, m, h, seed, BdpRecursion::Bridge)
}

pub fn bdp_sample_with(t: f64, m: u64, h: f64, seed: SeedSpec, recursion: BdpRecursion) -> Result<BdpResult> {
    if !(h > 0.0) || !h.is_finite() {
        bail!(Domain, "grid step must be positive, got {h}");
    }
    if !(t > 0.0) || !t.is_finite() {
        bail!(Domain, "horizon must be positive, got {t}");
    }
    if m == 0 {
        bail!(Domain, "m must be at least 1");
    }
    let steps = (t / h).ceil() as usize;
    if (steps as u64) < m {
        bail!(Domain, "t / h = {steps} is smaller than m = {m}");
    }
    let scale = (t / steps as f64).sqrt();
    let mut rng = seed.derive_stream();
    let m = m as usize;
    let mut row = vec![0.0f64; m];
    match recursion {
        BdpRecursion::Bridge => {
            let var = 2.0 * scale * scale;
            let mut g = vec![0.0f64; m];
            for _ in 0..steps {
                for gj in g.iter_mut() {
                    *gj = rng.sample::<f64, _>(StandardNormal) * scale;
                }
                // row[j - 1] still holds H(i-1, j-1) while row[j] is updated
                let mut prev_old = 0.0;
                let mut left = f64::NEG_INFINITY;
                for j in 0..m {
                    let old = row[j];
                    let mut v = old + g[j];
                    if j > 0 {
                        let a = g[j - 1] - g[j];
                        let e: f64 = rng.sample(rand_distr::Exp1);
                        let bridge_max = 0.5 * (a + (a * a + 2.0 * var * e).sqrt());
                        v = v.max(prev_old + g[j] + bridge_max);
                    }
                    v = v.max(left);
                    row[j] = v;
                    left = v;
                    prev_old = old;
                }
            }
        }
        BdpRecursion::Partition => {
            // row[j] = H(i, j + 1); H(0, j) = 0
            for _ in 0..steps {
                let mut left = f64::NEG_INFINITY;
                for r in row.iter_mut() {
                    let g: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
                    let v = left.max(*r + g);
                    *r = v;
                    left = v;
                }
            }
        }
        BdpRecursion::Lattice => {
            let mut first = true;
            for _ in 0..steps {
                let mut left = f64::NEG_INFINITY;
                for (j, r) in row.iter_mut().enumerate() {
                    let g: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
                    let up = if first && j > 0 { f64::NEG_INFINITY } else { *r };
                    let prev = if first && j == 0 { 0.0 } else { up.max(left) };
                    *r = prev + g;
                    left = *r;
                }
                first = false;
            }
        }
    }
    Ok(BdpResult { t, m: m as u64, h: t / steps as f64, z: row[m - 1] })
}

/// Largest eigenvalue of an `m x m` GUE matrix with `E|H_ij|^2 = 1`, so that
/// `m = 1` is a standard normal and the spectral edge sits at `2√m`.
///
/// Uses the tridiagonal model: diagonal `N(0, 1)`, off-diagonal
/// `sqrt(Gamma(k, 1))` for `k = m-1, ..., 1`.
pub fn gue_lmax(m: u64, seed: SeedSpec) -> Result<f64> {
    if m == 0 {
        bail!(Domain, "m must be at least 1");
    }
    let mut rng = seed.derive_stream();
    let m = m as usize;
    let diag: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let mut off = Vec::with_capacity(m.saturating_sub(1));
    for k in (1..m).rev() {
        let g = Gamma::new(k as f64, 1.0).expect("valid shape");
        off.push(g.sample(&mut rng).sqrt());
    }
    Ok(tridiagonal_lmax(&diag, &off))
}

/// Number of eigenvalues of the symmetric tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let denom = if q == 0.0 { f64::EPSILON * (off[i - 1].abs() + 1.0) } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue by bisection on Sturm counts.
pub fn tridiagonal_lmax(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    if n == 1 {
        return diag[0];
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `m^{1/6} (λ - 2√m)`.
pub fn tw_rescale(lmax: f64, m: u64) -> f64 {
    let m = m as f64;
    m.powf(1.0 / 6.0) * (lmax - 2.0 * m.sqrt())
}

/// Tabulated Tracy-Widom (β = 2) CDF with linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwTable {
    x: Vec<f64>,
    f: Vec<f64>,
    pub provenance: String,
}

/// `tw_cdf` value with a flag for arguments outside the table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfValue {
    pub value: f64,
    pub clamped: bool,
}

/// The table shipped with the crate.
pub const SHIPPED_TW_TABLE: &str = include_str!("../data/tw2_cdf.txt");

impl TwTable {
    /// Parses and validates a two-column `x F` table (`#` comments).
    pub fn parse(text: &str) -> Result<Self> {
        let mut x = Vec::new();
        let mut f = Vec::new();
        let mut provenance = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(c) = line.strip_prefix('#') {
                provenance.push(c.trim().to_string());
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                bail!(Table, "line {}: expected two columns", i + 1);
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|_| crate::Error::Table(format!("line {}: bad number `{s}`", i + 1)));
            x.push(parse(cols[0])?);
            f.push(parse(cols[1])?);
        }
        let table = Self { x, f, provenance: provenance.join("\n") };
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn shipped() -> Self {
        Self::parse(SHIPPED_TW_TABLE).expect("shipped table is valid")
    }

    fn validate(&self) -> Result<()> {
        if self.x.len() < 2 {
            bail!(Table, "table needs at least two rows");
        }
        if self.x.windows(2).any(|w| !(w[0] < w[1])) {
            bail!(Table, "x values must be strictly increasing");
        }
        if self.f.iter().any(|v| !(0.0..=1.0).contains(v)) {
            bail!(Table, "F values must lie in [0, 1]");
        }
        if self.f.windows(2).any(|w| w[1] < w[0]) {
            bail!(Table, "F must be nondecreasing");
        }
        if self.f[0] >= 1e-3 || *self.f.last().unwrap() <= 0.999 {
            bail!(Table, "table must run from F < 0.001 to F > 0.999");
        }
        if self.x[0] > -8.0 || *self.x.last().unwrap() < 5.0 {
            bail!(Table, "table must cover [-8, 5]");
        }
        Ok(())
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.f)
    }

    pub fn cdf(&self, x: f64) -> CdfValue {
        let last = self.x.len() - 1;
        if x < self.x[0] {
            return CdfValue { value: 0.0, clamped: true };
        }
        if x > self.x[last] {
            return CdfValue { value: 1.0, clamped: true };
        }
        let i = self.x.partition_point(|&v| v <= x).clamp(1, last);
        let (x0, x1) = (self.x[i - 1], self.x[i]);
        let w = (x - x0) / (x1 - x0);
        CdfValue { value: self.f[i - 1] + w * (self.f[i] - self.f[i - 1]), clamped: false }
    }

    /// Mean of the piecewise-linear CDF.
    pub fn mean(&self) -> f64 {
        // E X = x_last - ∫ F dx over the table range
        let mut integral = 0.0;
        for i in 1..self.x.len() {
            integral += 0.5 * (self.f[i] + self.f[i - 1]) * (self.x[i] - self.x[i - 1]);
        }
        *self.x.last().unwrap() - integral - self.x[0] * self.f[0]
    }

    /// Variance of the piecewise-linear CDF.
    pub fn variance(&self) -> f64 {
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        for i in 1..self.x.len() {
            let dp = self.f[i] - self.f[i - 1];
            let (a, b) = (self.x[i - 1], self.x[i]);
            e1 += dp * 0.5 * (a + b);
            e2 += dp * (a * a + a * b + b * b) / 3.0;
        }
        let total = self.f.last().unwrap() - self.f[0];
        let m = e1 / total;
        e2 / total - m * m
    }

    /// Smallest `x` with `F(x) = q` on the interpolant.
    pub fn quantile(&self, q: f64) -> f64 {
        let i = self.f.partition_point(|&v| v < q);
        if i == 0 {
            return self.x[0];
        }
        if i >= self.f.len() {
            return *self.x.last().unwrap();
        }
        let (f0, f1) = (self.f[i - 1], self.f[i]);
        if f1 == f0 {
            return self.x[i];
        }
        self.x[i - 1] + (q - f0) / (f1 - f0) * (self.x[i] - self.x[i - 1])
    }

    /// `∫ F'(x) dx` from a central-difference derivative.
    pub fn density_mass(&self) -> f64 {
        let n = self.x.len();
        let mut mass = 0.0;
        for i in 1..n - 1 {
            let d = (self.f[i + 1] - self.f[i - 1]) / (self.x[i + 1] - self.x[i - 1]);
            mass += d * 0.5 * (self.x[i + 1] - self.x[i - 1]);
        }
        mass
    }
}

/// `F_TW(x)` from `table`, clamped to 0 or 1 outside its range.
pub fn tw_cdf(table: &TwTable, x: f64) -> CdfValue {
    table.cdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_table_is_valid() {
        let t = TwTable::shipped();
        assert!((t.mean() + 1.7711).abs() < 1e-3, "{}", t.mean());
        assert!((t.variance() - 0.8132).abs() < 2e-3, "{}", t.variance());
        assert!((t.density_mass() - 1.0).abs() < 0.01);
        let med = t.quantile(0.5);
        assert!((t.cdf(med).value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn table_clamps_and_interpolates() {
        let t = TwTable::shipped();
        assert_eq!(t.cdf(-20.0), CdfValue { value: 0.0, clamped: true });
        assert_eq!(t.cdf(20.0), CdfValue { value: 1.0, clamped: true });
        let (x, f) = t.nodes();
        let mid = 0.5 * (x[700] + x[701]);
        assert!((t.cdf(mid).value - 0.5 * (f[700] + f[701])).abs() < 1e-15);
        assert_eq!(t.cdf(x[700]).value, f[700]);
    }

    #[test]
    fn malformed_tables_rejected() {
        assert!(TwTable::parse("-8 0.0\n-9 0.5\n5 1.0\n").is_err());
        assert!(TwTable::parse("-8 0.0\n0 0.6\n1 0.5\n5 1.0\n").is_err());
        assert!(TwTable::parse("-8 0.0\n5 0.9\n").is_err());
        assert!(TwTable::parse("-7 0.0\n5 1.0\n").is_err());
        assert!(TwTable::parse("-8 0.0 3\n5 1.0\n").is_err());
        assert!(TwTable::parse("# ok\n-8 0.0\n5 1.0\n").is_ok());
    }

    #[test]
    fn sturm_bisection_on_known_matrix() {
        // tridiag(2, -1): eigenvalues 2 - 2 cos(k π / (n + 1))
        let n = 10;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let want = 2.0 - 2.0 * (n as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
        assert!((tridiagonal_lmax(&diag, &off) - want).abs() < 1e-12);
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(gue_lmax(0, SeedSpec::new(1, 1)), Err(crate::Error::Domain(_))));
        assert!(matches!(bdp_sample(1.0, 2, 0.0, SeedSpec::new(1, 1)), Err(crate::Error::Domain(_))));
        assert!(matches!(bdp_sample(1.0, 20, 0.1, SeedSpec::new(1, 1)), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn bdp_single_line_is_sum_of_increments() {
        let a = bdp_sample_with(2.0, 1, 0.5, SeedSpec::new(3, 4), BdpRecursion::Partition).unwrap();
        assert_eq!(a.z, bdp_sample(2.0, 1, 0.5, SeedSpec::new(3, 4)).unwrap().z);
        let mut rng = SeedSpec::new(3, 4).derive_stream();
        let s: f64 = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.5f64.sqrt()).sum();
        assert!((a.z - s).abs() < 1e-12);
    }
}
