//! Skeleton points of a line.
//!
//! A vertex `γ` of line `j` is an (unthinned) skeleton point when every vertex
//! to its left reaches it and it reaches every vertex to its right. Detection
//! looks `W` vertices to each side: `γ` qualifies when all of `[γ - W, γ)`
//! reach `γ` and `γ` reaches all of `(γ, γ + W]`. The thinned sequence keeps
//! the points that also carry the vertical edge `(γ, j) -> (γ, j + 1)`.
//!
//! The window `[lo, hi]` plays the role of `[0, n]`: the counting process is
//! normalized by `Φ(lo) = 0`, and buffers of `B` vertices on both sides supply
//! the straddling points `X(lo) <= lo` and `Y(hi) > hi`.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::constants::lambda0_product;
use crate::error::{bail, Result};
use crate::model::{CoinField, ConnectivityKernel, EdgeOracle, OracleLayout, SeedSpec, Vertex, Window};
use crate::paths1d::longest_path_1d;

/// Largest local window materialized when a gap outgrows the stored band.
pub const EXTENSION_BUDGET: u64 = 100_000_000;

/// Detection window giving the same miss probability as `W = 256` at `p = 1/2`.
pub fn default_detect_window(kernel: &ConnectivityKernel) -> u64 {
    let p = match kernel {
        ConnectivityKernel::Constant { p } => *p,
        ConnectivityKernel::DistanceDependent(dd) => *dd.horizontal.last().unwrap(),
    };
    let p = p.clamp(1e-6, 1.0 - 1e-12);
    (256.0 * std::f64::consts::LN_2 / -(1.0 - p).ln()).ceil().max(8.0) as u64
}

/// Buffer of ten mean thinned gaps, and never less than the detection window.
pub fn default_buffer(kernel: &ConnectivityKernel, detect_window: u64) -> u64 {
    let gaps = match kernel.constant_p() {
        Some(p) => (10.0 / (p * lambda0_product(p, 1e-12).unwrap_or(1e-3))).ceil() as u64,
        None => 4 * detect_window,
    };
    gaps.max(detect_window)
}

/// Skeleton positions on one line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkeletonSequence {
    positions: Vec<i64>,
    line: i64,
    lo: i64,
    hi: i64,
    detect_window: u64,
    buffer: u64,
    thinned: bool,
    flips: Option<u64>,
}

impl SkeletonSequence {
    /// Builds a sequence from known positions (tests, replays).
    pub fn from_positions(mut positions: Vec<i64>, line: i64, lo: i64, hi: i64, buffer: u64, thinned: bool) -> Self {
        positions.sort_unstable();
        positions.dedup();
        Self { positions, line, lo, hi, detect_window: 0, buffer, thinned, flips: None }
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn line(&self) -> i64 {
        self.line
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn detect_window(&self) -> u64 {
        self.detect_window
    }

    pub fn buffer(&self) -> u64 {
        self.buffer
    }

    pub fn is_thinned(&self) -> bool {
        self.thinned
    }

    /// Candidates whose status differs between windows `W` and `2W`, when checked.
    pub fn flips(&self) -> Option<u64> {
        self.flips
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Number of stored positions `<= t`.
    pub fn count_at_or_below(&self, t: f64) -> usize {
        self.positions.partition_point(|&g| (g as f64) <= t)
    }

    /// `Φ(t)`, normalized so that `Φ(lo) = 0`.
    pub fn phi(&self, t: f64) -> i64 {
        self.count_at_or_below(t) as i64 - self.count_at_or_below(self.lo as f64) as i64
    }

    /// Index of `X(t)` in [`positions`](Self::positions).
    pub fn x_index(&self, t: f64) -> Result<usize> {
        match self.count_at_or_below(t) {
            0 => bail!(BufferExhausted, "no skeleton point at or below {t} on line {}", self.line),
            c => Ok(c - 1),
        }
    }

    /// Index of `Y(t)` in [`positions`](Self::positions).
    pub fn y_index(&self, t: f64) -> Result<usize> {
        let c = self.count_at_or_below(t);
        if c >= self.positions.len() {
            bail!(BufferExhausted, "no skeleton point above {t} on line {}", self.line);
        }
        Ok(c)
    }

    /// The straddling pair `(X(t), Y(t))` with `X(t) <= t < Y(t)`.
    pub fn straddle(&self, t: f64) -> Result<(i64, i64)> {
        Ok((self.positions[self.x_index(t)?], self.positions[self.y_index(t)?]))
    }

    /// Index of `X(lo)`, the point playing `Γ_0`.
    pub fn origin_index(&self) -> Result<usize> {
        self.x_index(self.lo as f64)
    }

    /// `Δ_n`: the largest gap between `X(lo)` and `Y(hi)`.
    pub fn max_gap(&self) -> Result<u64> {
        let first = self.x_index(self.lo as f64)?;
        let last = self.y_index(self.hi as f64)?;
        Ok(self.positions[first..=last].windows(2).map(|w| (w[1] - w[0]) as u64).max().unwrap_or(0))
    }

    pub fn gaps(&self) -> Vec<u64> {
        self.positions.windows(2).map(|w| (w[1] - w[0]) as u64).collect()
    }

    /// Positions inside `[lo, hi]`.
    pub fn interior(&self) -> &[i64] {
        let a = self.positions.partition_point(|&g| g < self.lo);
        let b = self.positions.partition_point(|&g| g <= self.hi);
        &self.positions[a..b]
    }
}

/// A `W`-bit set; bit `e - 1` stands for offset `e`.
#[derive(Clone)]
struct OffsetSet {
    words: Vec<u64>,
}

impl OffsetSet {
    fn new(bits: usize) -> Self {
        Self { words: vec![0; bits.div_ceil(64)] }
    }

    fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    #[inline]
    fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    /// `self |= other << shift`, truncated to the set's width.
    #[inline]
    fn or_shifted(&mut self, other: &OffsetSet, shift: usize) {
        let (ws, bs) = (shift / 64, shift % 64);
        let n = self.words.len();
        for i in (ws..n).rev() {
            let src = i - ws;
            let mut v = other.words[src] << bs;
            if bs != 0 && src > 0 {
                v |= other.words[src - 1] >> (64 - bs);
            }
            self.words[i] |= v;
        }
    }

    fn is_full(&self, bits: usize) -> bool {
        let full = bits / 64;
        if self.words[..full].iter().any(|&w| w != u64::MAX) {
            return false;
        }
        let rem = bits % 64;
        rem == 0 || self.words[full] & ((1u64 << rem) - 1) == (1u64 << rem) - 1
    }

    fn mask(&mut self, bits: usize) {
        let rem = bits % 64;
        if rem != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << rem) - 1;
        }
    }
}

/// Status of each vertex in `[from, to]` at window `w`.
fn skeleton_flags(oracle: &EdgeOracle, line: i64, from: i64, to: i64, w: u64) -> Vec<bool> {
    let win = oracle.window();
    let wb = w as usize;
    let len = (to - from + 1) as usize;
    let mut flags = vec![false; len];

    // Backward sets: vertices within w to the left that reach v.
    let start = from - w as i64;
    let ring = wb + 1;
    let mut sets = vec![OffsetSet::new(wb); ring];
    for v in start..=to {
        let slot = (v - start) as usize % ring;
        let mut cur = std::mem::replace(&mut sets[slot], OffsetSet::new(0));
        cur.clear();
        for ux in oracle.predecessors(Vertex::new(v, line), line) {
            let d = (v - ux) as usize;
            if d > wb {
                break;
            }
            if ux >= start {
                let prev = &sets[(ux - start) as usize % ring];
                cur.or_shifted(prev, d);
            }
            cur.set(d - 1);
        }
        cur.mask(wb);
        if v >= from {
            flags[(v - from) as usize] = cur.is_full(wb);
        }
        sets[slot] = cur;
    }

    // Forward sets: vertices within w to the right reached from v.
    let end = to + w as i64;
    debug_assert!(end <= win.x_hi);
    for s in sets.iter_mut() {
        s.clear();
    }
    for v in (from..=end).rev() {
        let slot = (end - v) as usize % ring;
        let mut cur = std::mem::replace(&mut sets[slot], OffsetSet::new(0));
        cur.clear();
        let reach = ((end - v) as usize).min(wb);
        for d in 1..=reach {
            if oracle.has_line_edge(v + d as i64, line, d as u64) {
                let next = &sets[(end - v - d as i64) as usize % ring];
                cur.or_shifted(next, d);
                cur.set(d - 1);
            }
        }
        cur.mask(wb);
        if v <= to {
            let i = (v - from) as usize;
            flags[i] = flags[i] && cur.is_full(wb);
        }
        sets[slot] = cur;
    }
    flags
}

/// Unthinned skeleton points of `line` with detection range `[lo - B, hi + B]`.
///
/// The oracle must store same-line pairs up to displacement `W` over
/// `[lo - B - W, hi + B + W]`. With `flip_check`, detection is repeated at
/// `2W` (which needs the matching band and extent) and differing candidates
/// are counted.
pub fn detect_skeletons(
    oracle: &EdgeOracle,
    line: i64,
    lo: i64,
    hi: i64,
    detect_window: u64,
    buffer: u64,
    flip_check: bool,
) -> Result<SkeletonSequence> {
    if detect_window == 0 || detect_window > buffer {
        bail!(Config, "detection window {detect_window} must be positive and at most the buffer {buffer}");
    }
    if lo > hi {
        bail!(Range, "empty window [{lo}, {hi}]");
    }
    let win = oracle.window();
    if !(win.y_lo..=win.y_hi).contains(&line) {
        bail!(Range, "line {line} outside oracle window");
    }
    let reach = if flip_check { 2 * detect_window } else { detect_window };
    let from = lo - buffer as i64;
    let to = hi + buffer as i64;
    if from - reach as i64 > win.x_hi || from - (reach as i64) < win.x_lo || to + reach as i64 > win.x_hi {
        bail!(
            Range,
            "oracle [{}, {}] does not cover [{}, {}]",
            win.x_lo,
            win.x_hi,
            from - reach as i64,
            to + reach as i64
        );
    }
    if oracle.layout().band.is_some_and(|b| b < reach) {
        bail!(Range, "oracle band is narrower than the detection window {reach}");
    }
    let flags = skeleton_flags(oracle, line, from, to, detect_window);
    let flips = if flip_check {
        let wide = skeleton_flags(oracle, line, from, to, 2 * detect_window);
        Some(flags.iter().zip(&wide).filter(|(a, b)| a != b).count() as u64)
    } else {
        None
    };
    let positions = flags.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| from + i as i64).collect();
    Ok(SkeletonSequence { positions, line, lo, hi, detect_window, buffer, thinned: false, flips })
}

/// Where the vertical coins used for thinning come from.
#[derive(Clone, Copy)]
pub enum Thinning<'a> {
    /// Pair-addressed coins of the realization.
    Coins(&'a CoinField),
    /// A materialized oracle that stores the vertical pairs.
    Oracle(&'a EdgeOracle),
    /// Fresh independent coins.
    Bernoulli { prob: f64, seed: SeedSpec },
}

/// Keeps the skeleton points carrying the vertical edge to the next line.
pub fn thin_skeletons(seq: &SkeletonSequence, source: Thinning<'_>) -> Result<SkeletonSequence> {
    if seq.thinned {
        bail!(Input, "sequence is already thinned");
    }
    let line = seq.line;
    let positions = match source {
        Thinning::Coins(field) => seq.positions.iter().copied().filter(|&g| field.vertical_edge(g, line)).collect(),
        Thinning::Oracle(oracle) => {
            let mut kept = Vec::new();
            for &g in &seq.positions {
                if oracle.has_edge(Vertex::new(g, line), Vertex::new(g, line + 1))? {
                    kept.push(g);
                }
            }
            kept
        }
        Thinning::Bernoulli { prob, seed } => {
            let mut rng = seed.derive_stream();
            seq.positions.iter().copied().filter(|_| rng.random::<f64>() < prob).collect()
        }
    };
    Ok(SkeletonSequence { positions, thinned: true, ..seq.clone() })
}

/// Consecutive gaps and their longest-path lengths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapStats {
    /// `Γ_{k+1} - Γ_k` for consecutive stored positions.
    pub gaps: Vec<u64>,
    /// `L[Γ_k, Γ_{k+1}]`.
    pub lengths: Vec<u64>,
    /// `Δ_n` over the sequence's window, when both straddling points exist.
    pub max_gap: Option<u64>,
    /// Gaps computed on a locally extended window.
    pub extended: usize,
}

impl GapStats {
    /// `prefix[k] = L[Γ_0, Γ_k]` by additivity over gaps (stored index 0 first).
    pub fn prefix_lengths(&self) -> Vec<u64> {
        let mut acc = Vec::with_capacity(self.lengths.len() + 1);
        acc.push(0);
        for l in &self.lengths {
            acc.push(acc.last().unwrap() + l);
        }
        acc
    }
}

/// Per-gap longest paths by restricted DP inside each gap.
///
/// Gaps wider than what `oracle` stores are recomputed on a fresh local window
/// drawn from `field` (the same realization); without a field they are an error.
pub fn gap_lengths(oracle: &EdgeOracle, seq: &SkeletonSequence, field: Option<&CoinField>) -> Result<GapStats> {
    let line = seq.line;
    let win = oracle.window();
    let band = oracle.layout().band.unwrap_or(u64::MAX);
    let mut lengths = Vec::with_capacity(seq.positions.len().saturating_sub(1));
    let mut extended = 0;
    for w in seq.positions.windows(2) {
        let (a, b) = (w[0], w[1]);
        let fits = a >= win.x_lo && b <= win.x_hi && (b - a) as u64 <= band;
        if fits {
            lengths.push(longest_path_1d(oracle, line, a, b)?);
            continue;
        }
        let Some(field) = field else {
            bail!(Range, "gap [{a}, {b}] exceeds the materialized extent");
        };
        let local = EdgeOracle::from_field(field, Window::line(a, b, line)?, OracleLayout::FULL, EXTENSION_BUDGET)?;
        lengths.push(longest_path_1d(&local, line, a, b)?);
        extended += 1;
    }
    Ok(GapStats { gaps: seq.gaps(), lengths, max_gap: seq.max_gap().ok(), extended })
}

/// Writes `position,gap,length,flip_flag` rows for a sequence.
pub fn write_diagnostic_csv<W: Write>(out: W, seq: &SkeletonSequence, stats: &GapStats) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["position", "gap", "length", "flips_in_run"])?;
    let flips = seq.flips.map(|f| f.to_string()).unwrap_or_default();
    for (i, g) in seq.positions.iter().enumerate() {
        let gap = stats.gaps.get(i).map(|v| v.to_string()).unwrap_or_default();
        let len = stats.lengths.get(i).map(|v| v.to_string()).unwrap_or_default();
        wtr.write_record([g.to_string(), gap, len, flips.clone()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parameters for analysing one line of a realization.
#[derive(Debug, Clone, Copy)]
pub struct LineParams {
    pub lo: i64,
    pub hi: i64,
    pub detect_window: u64,
    pub buffer: u64,
    pub flip_check: bool,
    /// Buffer doublings tried when a straddling point is missing.
    pub max_retries: u32,
}

impl LineParams {
    pub fn new(kernel: &ConnectivityKernel, lo: i64, hi: i64) -> Self {
        let w = default_detect_window(kernel);
        Self { lo, hi, detect_window: w, buffer: default_buffer(kernel, w), flip_check: false, max_retries: 6 }
    }
}

/// Skeleton structure of one line of a realization.
#[derive(Debug, Clone)]
pub struct LineAnalysis {
    pub unthinned: SkeletonSequence,
    pub thinned: SkeletonSequence,
    pub thinned_gaps: GapStats,
}

/// Detects, thins and measures the skeleton of `line` for the realization `field`.
///
/// The buffer doubles (up to `max_retries` times) until both straddling
/// thinned points `X(lo)` and `Y(hi)` exist.
pub fn analyze_line(field: &CoinField, line: i64, params: LineParams) -> Result<LineAnalysis> {
    let mut buffer = params.buffer.max(params.detect_window);
    let reach = if params.flip_check { 2 * params.detect_window } else { params.detect_window };
    for _ in 0..=params.max_retries {
        let ext = (buffer + reach) as i64;
        let window = Window::line(params.lo - ext, params.hi + ext, line)?;
        let oracle = EdgeOracle::from_field(field, window, OracleLayout::banded_lines(reach), u64::MAX)?;
        let unthinned =
            detect_skeletons(&oracle, line, params.lo, params.hi, params.detect_window, buffer, params.flip_check)?;
        let thinned = thin_skeletons(&unthinned, Thinning::Coins(field))?;
        if thinned.straddle(params.lo as f64).is_err() || thinned.straddle(params.hi as f64).is_err() {
            buffer *= 2;
            continue;
        }
        let thinned_gaps = gap_lengths(&oracle, &thinned, Some(field))?;
        return Ok(LineAnalysis { unthinned, thinned, thinned_gaps });
    }
    bail!(BufferExhausted, "no straddling skeleton points on line {line} with buffer {buffer}")
}
