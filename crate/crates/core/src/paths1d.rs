//! Longest paths on a single line (the directed Erdős–Rényi graph on `Z`).
//!
//! Lengths count edges. An interval `[a, b]` with `a >= b` has length 0.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};
use crate::model::{ConnectivityKernel, EdgeOracle, SeedSpec, Vertex};

/// Largest window accepted by [`brute_force_longest`].
pub const BRUTE_FORCE_MAX_VERTICES: usize = 14;

fn check_interval(oracle: &EdgeOracle, line: i64, a: i64, b: i64) -> Result<()> {
    let w = oracle.window();
    if !(w.y_lo..=w.y_hi).contains(&line) {
        bail!(Range, "line {line} outside oracle window");
    }
    if a < w.x_lo || b > w.x_hi {
        bail!(Range, "interval [{a}, {b}] outside oracle window [{}, {}]", w.x_lo, w.x_hi);
    }
    if let Some(band) = oracle.layout().band {
        if (b - a) as u64 > band {
            bail!(Range, "interval [{a}, {b}] is wider than the stored band {band}");
        }
    }
    Ok(())
}

/// Exact `L[a, b]` on `line` of a materialized oracle.
pub fn longest_path_1d(oracle: &EdgeOracle, line: i64, a: i64, b: i64) -> Result<u64> {
    if a >= b {
        return Ok(0);
    }
    check_interval(oracle, line, a, b)?;
    Ok(*line_levels(oracle, line, a, b).iter().max().unwrap())
}

/// `ℓ(v)` for `v` in `[a, b]`: the longest path inside `[a, b]` ending at `v`.
pub fn line_levels(oracle: &EdgeOracle, line: i64, a: i64, b: i64) -> Vec<u64> {
    let len = (b - a + 1) as usize;
    let mut level = vec![0u64; len];
    // prefix_max[i] = max level over [a, a + i]
    let mut prefix_max = vec![0u64; len];
    for i in 0..len {
        let v = Vertex::new(a + i as i64, line);
        let mut best: Option<u64> = None;
        for ux in oracle.predecessors(v, line) {
            if ux < a {
                break;
            }
            let k = (ux - a) as usize;
            if best.is_some_and(|bst| bst >= prefix_max[k]) {
                break;
            }
            best = Some(best.map_or(level[k], |bst| bst.max(level[k])));
        }
        level[i] = best.map_or(0, |bst| bst + 1);
        prefix_max[i] = if i == 0 { level[i] } else { prefix_max[i - 1].max(level[i]) };
    }
    level
}

/// A longest path from `from` to `to` on `line`, as the list of x coordinates.
///
/// Returns `None` when `to` is not reachable from `from`.
pub fn longest_path_between(oracle: &EdgeOracle, line: i64, from: i64, to: i64) -> Result<Option<Vec<i64>>> {
    if from > to {
        bail!(Range, "path endpoints out of order: {from} > {to}");
    }
    if from == to {
        return Ok(Some(vec![from]));
    }
    check_interval(oracle, line, from, to)?;
    let len = (to - from + 1) as usize;
    let mut level: Vec<Option<u64>> = vec![None; len];
    let mut parent = vec![usize::MAX; len];
    level[0] = Some(0);
    for i in 1..len {
        let v = Vertex::new(from + i as i64, line);
        for ux in oracle.predecessors(v, line) {
            if ux < from {
                break;
            }
            let k = (ux - from) as usize;
            if let Some(l) = level[k] {
                if level[i].is_none_or(|cur| l + 1 > cur) {
                    level[i] = Some(l + 1);
                    parent[i] = k;
                }
            }
        }
    }
    if level[len - 1].is_none() {
        return Ok(None);
    }
    let mut path = vec![to];
    let mut i = len - 1;
    while i != 0 {
        i = parent[i];
        path.push(from + i as i64);
    }
    path.reverse();
    Ok(Some(path))
}

/// Exhaustive longest path over all increasing vertex sequences of `[lo, hi]`.
pub fn brute_force_longest(oracle: &EdgeOracle, line: i64, lo: i64, hi: i64) -> Result<u64> {
    if lo > hi {
        return Ok(0);
    }
    let n = (hi - lo + 1) as usize;
    if n > BRUTE_FORCE_MAX_VERTICES {
        bail!(Size, "brute force limited to {BRUTE_FORCE_MAX_VERTICES} vertices, got {n}");
    }
    check_interval(oracle, line, lo, hi)?;
    let mut adj = vec![0u32; n];
    for (j, row) in adj.iter_mut().enumerate() {
        for i in 0..j {
            if oracle.has_edge(Vertex::new(lo + i as i64, line), Vertex::new(lo + j as i64, line))? {
                *row |= 1 << i;
            }
        }
    }
    let mut best = 0u64;
    for set in 1u32..(1 << n) {
        let mut prev: Option<usize> = None;
        let mut ok = true;
        for i in 0..n {
            if set >> i & 1 == 1 {
                if let Some(p) = prev {
                    if adj[i] >> p & 1 == 0 {
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

/// `(1 - p)^c` for small `c` from a table, larger `c` by `powi`.
#[derive(Debug, Clone)]
pub(crate) struct MissProbs {
    q: f64,
    table: Vec<f64>,
}

impl MissProbs {
    pub(crate) fn new(p: f64) -> Self {
        let q = 1.0 - p;
        let mut table = Vec::with_capacity(257);
        let mut acc = 1.0;
        for _ in 0..=256 {
            table.push(acc);
            acc *= q;
        }
        Self { q, table }
    }

    /// Probability that all of `c` independent coins fail.
    #[inline]
    pub(crate) fn all_miss(&self, c: u64) -> f64 {
        match self.table.get(c as usize) {
            Some(v) => *v,
            None => self.q.powf(c as f64),
        }
    }
}

fn lazy_p(kernel: &ConnectivityKernel) -> Result<f64> {
    kernel.constant_p().ok_or_else(|| {
        crate::Error::UnsupportedMode("level-bucket sampling needs a constant kernel".into())
    })
}

/// One sample of `L[1, n]`, exact in distribution, by level-bucket sampling.
///
/// Vertices are processed left to right while `counts[ℓ]` tracks how many
/// earlier vertices sit at level `ℓ`. The new vertex scans occupied levels
/// from the top, drawing one Bernoulli(`1 - (1-p)^counts[ℓ]`) per level, and
/// lands one above the first success (level 0 if none).
pub fn longest_path_1d_lazy(kernel: &ConnectivityKernel, n: u64, seed: SeedSpec) -> Result<u64> {
    let p = lazy_p(kernel)?;
    let mut rng = seed.derive_stream();
    Ok(lazy_with_rng(p, n, &mut rng))
}

pub(crate) fn lazy_with_rng(p: f64, n: u64, rng: &mut ChaCha8Rng) -> u64 {
    if n <= 1 {
        return 0;
    }
    let miss = MissProbs::new(p);
    let mut counts: Vec<u64> = vec![0; 1024];
    let mut top = 0usize;
    counts[0] = 1;
    for _ in 1..n {
        let mut level = 0usize;
        let mut l = top + 1;
        while l > 0 {
            l -= 1;
            let c = counts[l];
            if c == 0 {
                continue;
            }
            if rng.random::<f64>() >= miss.all_miss(c) {
                level = l + 1;
                break;
            }
        }
        if level >= counts.len() {
            counts.resize(counts.len() * 2, 0);
        }
        counts[level] += 1;
        top = top.max(level);
    }
    top as u64
}
