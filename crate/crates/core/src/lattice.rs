//! `L_{n,m}`: the longest path in the window `[0, n] x [1, m]`.
//!
//! Three evaluators share the same semantics. [`longest_path_2d`] runs the
//! exact DP on a materialized oracle, [`longest_path_2d_field`] runs the same
//! DP straight off the coin field (no storage, same realization), and
//! [`longest_path_2d_lazy`] draws an independent sample exact in distribution
//! by level-bucket aggregation.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::model::{CoinField, ConnectivityKernel, EdgeOracle, SeedSpec, Vertex, Window};
use crate::paths1d::MissProbs;

/// Largest window accepted by [`brute_force_2d`].
pub const BRUTE_FORCE_MAX_VERTICES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeMode {
    Materialized,
    Streamed,
    Lazy,
    Brute,
}

impl std::str::FromStr for LatticeMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "materialized" => Self::Materialized,
            "streamed" => Self::Streamed,
            "lazy" => Self::Lazy,
            "brute" => Self::Brute,
            _ => bail!(Config, "unknown mode `{s}` (materialized, streamed, lazy, brute)"),
        })
    }
}

impl std::fmt::Display for LatticeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Materialized => "materialized",
            Self::Streamed => "streamed",
            Self::Lazy => "lazy",
            Self::Brute => "brute",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeResult {
    pub n: u64,
    pub m: u64,
    pub l: u64,
    pub mode: LatticeMode,
    pub seed: Option<SeedSpec>,
    pub wall_time: f64,
}

/// Longest path over the whole window of a materialized oracle.
pub fn longest_path_2d(oracle: &EdgeOracle) -> Result<LatticeResult> {
    let start = Instant::now();
    let w = oracle.window();
    if !oracle.layout().cross_lines && w.lines() > 1 {
        bail!(Input, "oracle does not store cross-line pairs");
    }
    if let Some(band) = oracle.layout().band {
        if band < w.width() - 1 {
            bail!(Range, "banded oracle cannot evaluate the full window");
        }
    }
    let l = lattice_dp(w, |v, src, visit| {
        for x in oracle.predecessors(v, src) {
            if !visit(x) {
                break;
            }
        }
    });
    Ok(LatticeResult {
        n: w.width() - 1,
        m: w.lines(),
        l,
        mode: LatticeMode::Materialized,
        seed: oracle.seed(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// `L_{n,m}` of the realization `field` over `[0, n] x [1, m]` without materializing it.
pub fn longest_path_2d_field(field: &CoinField, n: u64, m: u64) -> Result<LatticeResult> {
    let start = Instant::now();
    let w = Window::new(0, n as i64, 1, m as i64)?;
    let l = lattice_dp(w, |v, src, visit| {
        for d in field.predecessors(v, src, v.x as u64) {
            if !visit(v.x - d as i64) {
                break;
            }
        }
    });
    Ok(LatticeResult {
        n,
        m,
        l,
        mode: LatticeMode::Streamed,
        seed: Some(field.seed()),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Column-major DP. `preds(v, src, visit)` feeds predecessor x-coordinates on
/// line `src` nearest first and stops once `visit` returns false.
fn lattice_dp<P>(w: Window, mut preds: P) -> u64
where
    P: FnMut(Vertex, i64, &mut dyn FnMut(i64) -> bool),
{
    let width = w.width() as usize;
    let lines = w.lines() as usize;
    // level[j][i] and line_max[j][i] = max level on line j over columns <= i
    let mut level = vec![vec![0u64; width]; lines];
    let mut line_max = vec![vec![0u64; width]; lines];
    // below_max[j] = max level over lines <= j in columns processed so far
    let mut below_max = vec![0u64; lines];
    let mut has_vertex = vec![false; lines];
    let mut best_all = 0;
    for i in 0..width {
        let x = w.x_lo + i as i64;
        for j in 0..lines {
            let v = Vertex::new(x, w.y_lo + j as i64);
            let mut best: Option<u64> = None;
            for js in (0..=j).rev() {
                let reachable = if js == j { i > 0 } else { has_vertex[js] };
                if !reachable {
                    continue;
                }
                // everything on lines <= js is at most below_max[js]
                if best.is_some_and(|b| b >= below_max[js]) {
                    break;
                }
                let lvl = &level[js];
                let lm = &line_max[js];
                preds(v, w.y_lo + js as i64, &mut |ux| {
                    let k = (ux - w.x_lo) as usize;
                    if best.is_some_and(|b| b >= lm[k]) {
                        return false;
                    }
                    best = Some(best.map_or(lvl[k], |b| b.max(lvl[k])));
                    true
                });
            }
            let l = best.map_or(0, |b| b + 1);
            level[j][i] = l;
            line_max[j][i] = if i == 0 { l } else { line_max[j][i - 1].max(l) };
            has_vertex[j] = true;
            for bm in &mut below_max[j..] {
                *bm = (*bm).max(l);
            }
            best_all = best_all.max(l);
        }
    }
    best_all
}

/// Exhaustive maximum over all chains of the window with consecutive edges present.
pub fn brute_force_2d(oracle: &EdgeOracle) -> Result<u64> {
    let w = oracle.window();
    let count = w.vertex_count() as usize;
    if count > BRUTE_FORCE_MAX_VERTICES {
        bail!(Size, "brute force limited to {BRUTE_FORCE_MAX_VERTICES} vertices, got {count}");
    }
    // column-major order is a linear extension of the partial order
    let mut verts = Vec::with_capacity(count);
    for x in w.x_lo..=w.x_hi {
        for y in w.y_lo..=w.y_hi {
            verts.push(Vertex::new(x, y));
        }
    }
    let mut adj = vec![0u32; count];
    for (b, row) in adj.iter_mut().enumerate() {
        for a in 0..b {
            if verts[a].precedes(&verts[b]) && oracle.has_edge(verts[a], verts[b])? {
                *row |= 1 << a;
            }
        }
    }
    let mut best = 0u64;
    for set in 1u32..(1 << count) {
        let mut prev: Option<usize> = None;
        let mut ok = true;
        for (i, row) in adj.iter().enumerate() {
            if set >> i & 1 == 1 {
                if let Some(p) = prev {
                    if row >> p & 1 == 0 {
                        ok = false;
                        break;
                    }
                }
                prev = Some(i);
            }
        }
        if ok {
            best = best.max(u64::from(set.count_ones()) - 1);
        }
    }
    Ok(best)
}

/// One sample of `L_{n,m}`, exact in distribution, by 2D level-bucket sampling.
///
/// Vertices are visited column by column, bottom line first. Every earlier
/// vertex on a line `<= j` is a predecessor of `(i, j)`, so the number of
/// candidate predecessors at level `ℓ` is a running count over lines. Levels
/// are scanned from the highest occupied one down, one Bernoulli
/// `1 - (1-p)^{c_ℓ}` per level, stopping at the first success.
pub fn longest_path_2d_lazy(kernel: &ConnectivityKernel, n: u64, m: u64, seed: SeedSpec) -> Result<LatticeResult> {
    let Some(p) = kernel.constant_p() else {
        bail!(UnsupportedMode, "level-bucket sampling needs a constant kernel");
    };
    if m == 0 {
        bail!(Domain, "m must be at least 1");
    }
    let start = Instant::now();
    let mut rng = seed.derive_stream();
    let l = lazy_2d_with_rng(p, n, m, &mut rng);
    Ok(LatticeResult { n, m, l, mode: LatticeMode::Lazy, seed: Some(seed), wall_time: start.elapsed().as_secs_f64() })
}

pub(crate) fn lazy_2d_with_rng(p: f64, n: u64, m: u64, rng: &mut ChaCha8Rng) -> u64 {
    let miss = MissProbs::new(p);
    let lines = m as usize;
    let cap = 1024usize;
    // cum[j][ℓ] = number of processed vertices at level ℓ on lines <= j
    let mut cum: Vec<Vec<u32>> = vec![vec![0; cap]; lines];
    // top[j] = highest occupied level on lines <= j, if any
    let mut top: Vec<Option<usize>> = vec![None; lines];
    for _ in 0..=n {
        for j in 0..lines {
            let mut level = 0usize;
            if let Some(t) = top[j] {
                let counts = &cum[j];
                let mut l = t + 1;
                while l > 0 {
                    l -= 1;
                    let c = counts[l];
                    if c == 0 {
                        continue;
                    }
                    if rng.random::<f64>() >= miss.all_miss(u64::from(c)) {
                        level = l + 1;
                        break;
                    }
                }
            }
            if level >= cum[0].len() {
                let len = cum[0].len() * 2;
                for row in &mut cum {
                    row.resize(len, 0);
                }
            }
            for jj in j..lines {
                cum[jj][level] += 1;
                top[jj] = Some(top[jj].map_or(level, |t| t.max(level)));
            }
        }
    }
    top[lines - 1].unwrap_or(0) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OracleLayout;
    use crate::paths1d::longest_path_1d;

    #[test]
    fn explicit_chain_2d() {
        let w = Window::new(0, 1, 1, 2).unwrap();
        let e = [(Vertex::new(0, 1), Vertex::new(1, 1)), (Vertex::new(1, 1), Vertex::new(1, 2))];
        let o = EdgeOracle::from_edges(w, &e).unwrap();
        assert_eq!(longest_path_2d(&o).unwrap().l, 2);
        assert_eq!(brute_force_2d(&o).unwrap(), 2);
        let empty = EdgeOracle::from_edges(w, &[]).unwrap();
        assert_eq!(longest_path_2d(&empty).unwrap().l, 0);
        assert_eq!(brute_force_2d(&empty).unwrap(), 0);
    }

    #[test]
    fn complete_window_is_hamiltonian() {
        let w = Window::new(0, 3, 1, 3).unwrap();
        let o = EdgeOracle::complete(w, OracleLayout::FULL).unwrap();
        // a maximal chain climbs one corner: width + lines - 2 edges
        assert_eq!(longest_path_2d(&o).unwrap().l, 4 + 3 - 2);
        assert_eq!(brute_force_2d(&EdgeOracle::complete(Window::new(0, 2, 1, 3).unwrap(), OracleLayout::FULL).unwrap()).unwrap(), 4);
    }

    #[test]
    fn brute_force_size_limit() {
        let o = EdgeOracle::complete(Window::new(0, 4, 1, 3).unwrap(), OracleLayout::FULL).unwrap();
        assert!(matches!(brute_force_2d(&o), Err(crate::Error::Size(_))));
    }

    #[test]
    fn single_line_matches_1d() {
        let k = ConnectivityKernel::constant(0.3).unwrap();
        for s in 0..30 {
            let o = EdgeOracle::materialize_window(&k, Window::line(0, 80, 1).unwrap(), SeedSpec::new(4, s)).unwrap();
            assert_eq!(longest_path_2d(&o).unwrap().l, longest_path_1d(&o, 1, 0, 80).unwrap());
        }
    }

    #[test]
    fn streamed_matches_materialized() {
        let k = ConnectivityKernel::constant(0.5).unwrap();
        for s in 0..30 {
            let seed = SeedSpec::new(77, s);
            let field = CoinField::new(k.clone(), seed);
            let o = EdgeOracle::from_field(&field, Window::new(0, 60, 1, 4).unwrap(), OracleLayout::FULL, u64::MAX).unwrap();
            assert_eq!(longest_path_2d(&o).unwrap().l, longest_path_2d_field(&field, 60, 4).unwrap().l);
        }
    }

    #[test]
    fn lazy_single_column_near_certain() {
        let k = ConnectivityKernel::constant(1.0 - 1e-12).unwrap();
        let r = longest_path_2d_lazy(&k, 0, 7, SeedSpec::new(1, 1)).unwrap();
        assert_eq!(r.l, 6);
        let dd = ConnectivityKernel::parse("kernel=dd ph=0.5 pv=0.5").unwrap();
        assert!(matches!(longest_path_2d_lazy(&dd, 5, 2, SeedSpec::new(1, 1)), Err(crate::Error::UnsupportedMode(_))));
    }

    #[test]
    fn mode_round_trip() {
        for m in [LatticeMode::Materialized, LatticeMode::Streamed, LatticeMode::Lazy, LatticeMode::Brute] {
            assert_eq!(m.to_string().parse::<LatticeMode>().unwrap(), m);
        }
        assert!("fast".parse::<LatticeMode>().is_err());
    }
}
