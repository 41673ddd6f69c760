//! The random graph on `Z x Z`: connectivity kernels, seed streams and edge oracles.
//!
//! Every coin of a realization is addressed by its pair. For a target vertex
//! `(x, j)` and a source line `j' <= j` the coins of the pairs
//! `(x - d, j') -> (x, j)` are drawn from one ChaCha8 substream, nearest source
//! first (`d = 0, 1, 2, ...`, with `d = 0` skipped on the target's own line).
//! Windows, bands and streamed evaluations therefore all read prefixes of the
//! same substreams and agree on every pair they share.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// Default cap on the number of coins a materialized oracle may hold.
pub const DEFAULT_COIN_BUDGET: u64 = 1_000_000_000;

/// Coordinates accepted by the pair-addressed coin streams.
pub const MAX_LINE: i64 = u16::MAX as i64;

/// A lattice vertex `(x, line)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub x: i64,
    pub line: i64,
}

impl Vertex {
    pub const fn new(x: i64, line: i64) -> Self {
        Self { x, line }
    }

    /// Strict componentwise order: `self <= other` in both coordinates and `self != other`.
    pub fn precedes(&self, other: &Vertex) -> bool {
        self.x <= other.x && self.line <= other.line && self != other
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.line)
    }
}

/// Edge-probability law of the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConnectivityKernel {
    /// Every comparable pair is joined with probability `p`.
    Constant { p: f64 },
    /// Probabilities depend on the displacement `(di, dj)`.
    DistanceDependent(DdKernel),
}

/// Distance-dependent kernel.
///
/// Lookup rule for a displacement `(di, dj)`:
/// 1. an explicit `table` entry wins;
/// 2. `dj = 0`: `horizontal[di - 1]`, with the last entry repeated past the end;
/// 3. `di = 0`: `vertical` when `dj = 1`, `vertical_far` otherwise;
/// 4. `di, dj > 0`: the horizontal value for `di`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdKernel {
    pub horizontal: Vec<f64>,
    pub vertical: f64,
    pub vertical_far: f64,
    pub table: BTreeMap<(u64, u64), f64>,
    /// User-asserted moment order `r > 2`.
    pub r_claim: Option<f64>,
}

impl DdKernel {
    fn horizontal_at(&self, di: u64) -> f64 {
        let k = di as usize;
        self.horizontal.get(k - 1).copied().unwrap_or_else(|| *self.horizontal.last().unwrap())
    }

    fn prob(&self, di: u64, dj: u64) -> f64 {
        if let Some(p) = self.table.get(&(di, dj)) {
            return *p;
        }
        match (di, dj) {
            (_, 0) => self.horizontal_at(di),
            (0, 1) => self.vertical,
            (0, _) => self.vertical_far,
            _ => self.horizontal_at(di),
        }
    }
}

impl ConnectivityKernel {
    pub fn constant(p: f64) -> Result<Self> {
        let k = Self::Constant { p };
        k.validate()?;
        Ok(k)
    }

    pub fn distance_dependent(kernel: DdKernel) -> Result<Self> {
        let k = Self::DistanceDependent(kernel);
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let open = |p: f64| p > 0.0 && p < 1.0;
        let closed = |p: f64| (0.0..=1.0).contains(&p);
        match self {
            Self::Constant { p } => {
                if !open(*p) {
                    bail!(Domain, "constant kernel needs 0 < p < 1, got {p}");
                }
            }
            Self::DistanceDependent(dd) => {
                let Some(first) = dd.horizontal.first() else {
                    bail!(Domain, "dd kernel needs at least one horizontal probability");
                };
                if !open(*first) {
                    bail!(Domain, "dd kernel needs 0 < p_(1,0) < 1, got {first}");
                }
                if !open(dd.vertical) {
                    bail!(Domain, "dd kernel needs 0 < p_(0,1) < 1, got {}", dd.vertical);
                }
                let all = dd
                    .horizontal
                    .iter()
                    .chain(dd.table.values())
                    .chain(std::iter::once(&dd.vertical_far));
                for p in all {
                    if !closed(*p) {
                        bail!(Domain, "probability {p} outside [0, 1]");
                    }
                }
                if dd.table.contains_key(&(0, 0)) {
                    bail!(Domain, "table entry for displacement (0, 0)");
                }
                if let Some(r) = dd.r_claim {
                    if r.is_nan() {
                        bail!(Domain, "moment order is NaN");
                    }
                }
            }
        }
        Ok(())
    }

    /// Probability of the edge across displacement `(di, dj)`.
    pub fn edge_prob(&self, di: u64, dj: u64) -> Result<f64> {
        if di == 0 && dj == 0 {
            bail!(Domain, "zero displacement: the graph has no self-loops");
        }
        Ok(self.prob_unchecked(di, dj))
    }

    #[inline]
    fn prob_unchecked(&self, di: u64, dj: u64) -> f64 {
        match self {
            Self::Constant { p } => *p,
            Self::DistanceDependent(dd) => dd.prob(di, dj),
        }
    }

    /// `Some(p)` for the constant kernel.
    pub fn constant_p(&self) -> Option<f64> {
        match self {
            Self::Constant { p } => Some(*p),
            Self::DistanceDependent(_) => None,
        }
    }

    /// Probability of the vertical edge `(x, j) -> (x, j + 1)`.
    pub fn vertical_prob(&self) -> f64 {
        self.prob_unchecked(0, 1)
    }

    /// Moment order: infinite for the constant kernel, the user claim otherwise.
    pub fn moment_order(&self) -> Option<f64> {
        match self {
            Self::Constant { .. } => Some(f64::INFINITY),
            Self::DistanceDependent(dd) => dd.r_claim,
        }
    }

    /// Parses `kernel=constant p=0.5` or `kernel=dd ph=0.5,0.25 pv=0.5`.
    ///
    /// Optional dd keys: `pvfar=<p>` (vertical displacements beyond one line),
    /// `r=<order>` and `table=di:dj:p;di:dj:p`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut fields = BTreeMap::new();
        for token in spec.split_whitespace() {
            let Some((k, v)) = token.split_once('=') else {
                bail!(Config, "kernel token `{token}` is not key=value");
            };
            if fields.insert(k.to_string(), v.to_string()).is_some() {
                bail!(Config, "duplicate kernel key `{k}`");
            }
        }
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| crate::Error::Config(format!("bad number `{s}`")))
        };
        let mode = fields.remove("kernel").unwrap_or_else(|| "constant".to_string());
        let kernel = match mode.as_str() {
            "constant" => {
                let Some(p) = fields.remove("p") else {
                    bail!(Config, "constant kernel needs p=");
                };
                Self::constant(num(&p)?)?
            }
            "dd" => {
                let Some(ph) = fields.remove("ph") else {
                    bail!(Config, "dd kernel needs ph=");
                };
                let Some(pv) = fields.remove("pv") else {
                    bail!(Config, "dd kernel needs pv=");
                };
                let horizontal = ph.split(',').map(num).collect::<Result<Vec<_>>>()?;
                let vertical_far = fields.remove("pvfar").map(|s| num(&s)).transpose()?.unwrap_or(0.0);
                let r_claim = fields.remove("r").map(|s| num(&s)).transpose()?;
                let mut table = BTreeMap::new();
                if let Some(t) = fields.remove("table") {
                    for entry in t.split(';').filter(|e| !e.is_empty()) {
                        let parts: Vec<&str> = entry.split(':').collect();
                        if parts.len() != 3 {
                            bail!(Config, "table entry `{entry}` is not di:dj:p");
                        }
                        let di = parts[0].parse::<u64>().map_err(|_| crate::Error::Config(format!("bad di in `{entry}`")))?;
                        let dj = parts[1].parse::<u64>().map_err(|_| crate::Error::Config(format!("bad dj in `{entry}`")))?;
                        table.insert((di, dj), num(parts[2])?);
                    }
                }
                Self::distance_dependent(DdKernel { horizontal, vertical: num(&pv)?, vertical_far, table, r_claim })?
            }
            other => bail!(Config, "unknown kernel mode `{other}`"),
        };
        if let Some(k) = fields.keys().next() {
            bail!(Config, "unknown kernel key `{k}`");
        }
        Ok(kernel)
    }
}

impl fmt::Display for ConnectivityKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { p } => write!(f, "kernel=constant p={p}"),
            Self::DistanceDependent(dd) => {
                let ph: Vec<String> = dd.horizontal.iter().map(|p| p.to_string()).collect();
                write!(f, "kernel=dd ph={} pv={} pvfar={}", ph.join(","), dd.vertical, dd.vertical_far)?;
                if let Some(r) = dd.r_claim {
                    write!(f, " r={r}")?;
                }
                if !dd.table.is_empty() {
                    let t: Vec<String> = dd.table.iter().map(|((a, b), p)| format!("{a}:{b}:{p}")).collect();
                    write!(f, " table={}", t.join(";"))?;
                }
                Ok(())
            }
        }
    }
}

/// Identifies one random stream: a master seed and a stream (replication) index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub const fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    /// The generator for this stream.
    ///
    /// The 256-bit ChaCha8 key is four consecutive SplitMix64 outputs started
    /// at `master_seed` (little-endian); `stream_id` selects the ChaCha stream.
    pub fn derive_stream(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(expand_key(self.master_seed));
        rng.set_stream(self.stream_id);
        rng
    }

    /// A child seed spec whose master seed is word `2 * tag` of this stream.
    pub fn child(&self, tag: u64) -> SeedSpec {
        let mut rng = self.derive_stream();
        rng.set_word_pos(2 * u128::from(tag));
        SeedSpec::new(rng.next_u64(), tag)
    }
}

/// Shorthand for [`SeedSpec::derive_stream`].
pub fn derive_stream(seed: SeedSpec) -> ChaCha8Rng {
    seed.derive_stream()
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn expand_key(master: u64) -> [u8; 32] {
    let mut state = master;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// The coins of one realization, readable pair by pair without storage.
#[derive(Debug, Clone)]
pub struct CoinField {
    kernel: ConnectivityKernel,
    seed: SeedSpec,
    key: [u8; 32],
    /// `1 / ln(1 - p)` for geometric skipping under a constant kernel.
    inv_log_q: Option<f64>,
}

impl CoinField {
    pub fn new(kernel: ConnectivityKernel, seed: SeedSpec) -> Self {
        let mut rng = seed.derive_stream();
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        let inv_log_q = kernel.constant_p().map(|p| 1.0 / (1.0 - p).ln());
        Self { kernel, seed, key, inv_log_q }
    }

    pub fn kernel(&self) -> &ConnectivityKernel {
        &self.kernel
    }

    pub fn seed(&self) -> SeedSpec {
        self.seed
    }

    /// Displacements `d <= max_disp` such that `(target.x - d, source_line) -> target`
    /// is an edge, in increasing order.
    pub fn predecessors(&self, target: Vertex, source_line: i64, max_disp: u64) -> Predecessors<'_> {
        debug_assert!(source_line <= target.line);
        debug_assert!(i32::try_from(target.x).is_ok(), "x coordinate outside i32");
        debug_assert!((0..=MAX_LINE).contains(&target.line) && (0..=MAX_LINE).contains(&source_line));
        let stream = ((target.x as i32 as u32 as u64) << 32)
            | (((target.line as u64) & 0xFFFF) << 16)
            | ((source_line as u64) & 0xFFFF);
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(stream);
        let start = u64::from(source_line == target.line);
        Predecessors {
            field: self,
            rng,
            next: start,
            max_disp,
            dj: (target.line - source_line) as u64,
        }
    }

    /// The vertical coin `(x, line) -> (x, line + 1)`.
    pub fn vertical_edge(&self, x: i64, line: i64) -> bool {
        self.predecessors(Vertex::new(x, line + 1), line, 0).next().is_some()
    }

    /// Coin for an arbitrary comparable pair, by replaying the target's substream.
    pub fn edge(&self, from: Vertex, to: Vertex) -> Result<bool> {
        if !from.precedes(&to) {
            bail!(Range, "{from} does not precede {to}");
        }
        let d = (to.x - from.x) as u64;
        Ok(self.predecessors(to, from.line, d).any(|e| e == d))
    }
}

/// Iterator over the predecessor displacements of one (target, source line) substream.
pub struct Predecessors<'a> {
    field: &'a CoinField,
    rng: ChaCha8Rng,
    next: u64,
    max_disp: u64,
    dj: u64,
}

impl Iterator for Predecessors<'_> {
    type Item = u64;

    #[inline]
    fn next(&mut self) -> Option<u64> {
        match self.field.inv_log_q {
            Some(inv) => {
                if self.next > self.max_disp {
                    return None;
                }
                // Geometric gap on {0, 1, ...} to the next success.
                let u: f64 = 1.0 - self.rng.random::<f64>();
                let skip = (u.ln() * inv).floor();
                if skip >= (self.max_disp - self.next) as f64 + 1.0 {
                    self.next = self.max_disp + 1;
                    return None;
                }
                let d = self.next + skip as u64;
                self.next = d + 1;
                Some(d)
            }
            None => {
                while self.next <= self.max_disp {
                    let d = self.next;
                    self.next += 1;
                    let p = self.field.kernel.prob_unchecked(d, self.dj);
                    if self.rng.random::<f64>() < p {
                        return Some(d);
                    }
                }
                None
            }
        }
    }
}

/// Rectangle of vertices `[x_lo, x_hi] x [y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub x_lo: i64,
    pub x_hi: i64,
    pub y_lo: i64,
    pub y_hi: i64,
}

impl Window {
    pub fn new(x_lo: i64, x_hi: i64, y_lo: i64, y_hi: i64) -> Result<Self> {
        if x_lo > x_hi || y_lo > y_hi {
            bail!(Range, "empty window [{x_lo}, {x_hi}] x [{y_lo}, {y_hi}]");
        }
        if i32::try_from(x_lo).is_err() || i32::try_from(x_hi).is_err() {
            bail!(Range, "x coordinates must fit in 32 bits");
        }
        if y_lo < 0 || y_hi >= MAX_LINE {
            bail!(Range, "lines must lie in [0, {})", MAX_LINE);
        }
        Ok(Self { x_lo, x_hi, y_lo, y_hi })
    }

    /// A single line `[lo, hi] x {line}`.
    pub fn line(lo: i64, hi: i64, line: i64) -> Result<Self> {
        Self::new(lo, hi, line, line)
    }

    pub fn width(&self) -> u64 {
        (self.x_hi - self.x_lo + 1) as u64
    }

    pub fn lines(&self) -> u64 {
        (self.y_hi - self.y_lo + 1) as u64
    }

    pub fn vertex_count(&self) -> u64 {
        self.width() * self.lines()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        (self.x_lo..=self.x_hi).contains(&v.x) && (self.y_lo..=self.y_hi).contains(&v.line)
    }
}

/// Which pairs of the window an oracle stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLayout {
    /// Store pairs between different lines.
    pub cross_lines: bool,
    /// Largest horizontal displacement stored (`None`: the whole window).
    pub band: Option<u64>,
}

impl OracleLayout {
    pub const FULL: OracleLayout = OracleLayout { cross_lines: true, band: None };

    /// Same-line pairs with displacement at most `band`.
    pub fn banded_lines(band: u64) -> Self {
        Self { cross_lines: false, band: Some(band) }
    }
}

/// Materialized coins of a window, one bit per stored comparable pair.
#[derive(Debug, Clone)]
pub struct EdgeOracle {
    window: Window,
    layout: OracleLayout,
    kernel: Option<ConnectivityKernel>,
    seed: Option<SeedSpec>,
    rows_per_target: usize,
    /// Bit offset of each (target, source line) row; one extra trailing entry.
    offsets: Vec<u64>,
    bits: Vec<u64>,
}

impl EdgeOracle {
    fn layout_offsets(window: Window, layout: OracleLayout) -> (usize, Vec<u64>) {
        let rows_per_target = if layout.cross_lines { window.lines() as usize } else { 1 };
        let mut offsets = Vec::with_capacity(window.vertex_count() as usize * rows_per_target + 1);
        let mut acc = 0u64;
        for y in window.y_lo..=window.y_hi {
            for x in window.x_lo..=window.x_hi {
                for r in 0..rows_per_target {
                    offsets.push(acc);
                    let src = if layout.cross_lines { window.y_lo + r as i64 } else { y };
                    acc += Self::row_len(window, layout, x, y, src);
                }
            }
        }
        offsets.push(acc);
        (rows_per_target, offsets)
    }

    fn layout_max_disp(window: Window, layout: OracleLayout, x: i64) -> u64 {
        let span = (x - window.x_lo) as u64;
        layout.band.map_or(span, |b| b.min(span))
    }

    fn row_len(window: Window, layout: OracleLayout, x: i64, y: i64, src: i64) -> u64 {
        if src > y {
            return 0;
        }
        let start = u64::from(src == y);
        let max = Self::layout_max_disp(window, layout, x);
        (max + 1).saturating_sub(start)
    }

    /// Number of comparable pairs a layout stores over a window.
    pub fn pair_count(window: Window, layout: OracleLayout) -> u64 {
        let w = window.width();
        let lines = window.lines();
        let same: u64 = (0..w).map(|i| layout.band.map_or(i, |b| b.min(i))).sum();
        if !layout.cross_lines {
            return same * lines;
        }
        let cross_per_target_line: u64 = (0..w).map(|i| layout.band.map_or(i, |b| b.min(i)) + 1).sum();
        same * lines + cross_per_target_line * lines * (lines - 1) / 2
    }

    /// Draws every stored coin of `window` under `layout`.
    pub fn materialize(
        kernel: &ConnectivityKernel,
        window: Window,
        seed: SeedSpec,
        layout: OracleLayout,
        budget: u64,
    ) -> Result<Self> {
        let field = CoinField::new(kernel.clone(), seed);
        Self::from_field(&field, window, layout, budget)
    }

    /// Full window with the default budget.
    pub fn materialize_window(kernel: &ConnectivityKernel, window: Window, seed: SeedSpec) -> Result<Self> {
        Self::materialize(kernel, window, seed, OracleLayout::FULL, DEFAULT_COIN_BUDGET)
    }

    pub fn from_field(field: &CoinField, window: Window, layout: OracleLayout, budget: u64) -> Result<Self> {
        let pairs = Self::pair_count(window, layout);
        if pairs > budget {
            bail!(
                Size,
                "window holds {pairs} coins, over the budget of {budget}; use a banded layout or a lazy sampler"
            );
        }
        let (rows_per_target, offsets) = Self::layout_offsets(window, layout);
        let mut bits = vec![0u64; (pairs as usize).div_ceil(64)];
        let mut row = 0usize;
        for y in window.y_lo..=window.y_hi {
            for x in window.x_lo..=window.x_hi {
                let max = Self::layout_max_disp(window, layout, x);
                for r in 0..rows_per_target {
                    let src = if layout.cross_lines { window.y_lo + r as i64 } else { y };
                    if src <= y {
                        let start = u64::from(src == y);
                        let base = offsets[row];
                        for d in field.predecessors(Vertex::new(x, y), src, max) {
                            let bit = base + d - start;
                            bits[(bit / 64) as usize] |= 1 << (bit % 64);
                        }
                    }
                    row += 1;
                }
            }
        }
        Ok(Self {
            window,
            layout,
            kernel: Some(field.kernel().clone()),
            seed: Some(field.seed()),
            rows_per_target,
            offsets,
            bits,
        })
    }

    /// Oracle holding exactly the listed edges over a full window.
    pub fn from_edges(window: Window, edges: &[(Vertex, Vertex)]) -> Result<Self> {
        let layout = OracleLayout::FULL;
        let pairs = Self::pair_count(window, layout);
        if pairs > DEFAULT_COIN_BUDGET {
            bail!(Size, "window holds {pairs} coins, over the budget");
        }
        let (rows_per_target, offsets) = Self::layout_offsets(window, layout);
        let mut oracle = Self {
            window,
            layout,
            kernel: None,
            seed: None,
            rows_per_target,
            offsets,
            bits: vec![0u64; (pairs as usize).div_ceil(64)],
        };
        for &(u, v) in edges {
            let bit = oracle.bit_index(u, v)?;
            oracle.bits[(bit / 64) as usize] |= 1 << (bit % 64);
        }
        Ok(oracle)
    }

    /// Complete order on a window: every stored pair is an edge.
    pub fn complete(window: Window, layout: OracleLayout) -> Result<Self> {
        let pairs = Self::pair_count(window, layout);
        let (rows_per_target, offsets) = Self::layout_offsets(window, layout);
        let mut bits = vec![u64::MAX; (pairs as usize).div_ceil(64)];
        if pairs % 64 != 0 {
            if let Some(last) = bits.last_mut() {
                *last = (1u64 << (pairs % 64)) - 1;
            }
        }
        Ok(Self { window, layout, kernel: None, seed: None, rows_per_target, offsets, bits })
    }

    /// Copy of the oracle with one more edge.
    pub fn with_edge(&self, u: Vertex, v: Vertex) -> Result<Self> {
        let bit = self.bit_index(u, v)?;
        let mut copy = self.clone();
        copy.bits[(bit / 64) as usize] |= 1 << (bit % 64);
        Ok(copy)
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn layout(&self) -> OracleLayout {
        self.layout
    }

    pub fn kernel(&self) -> Option<&ConnectivityKernel> {
        self.kernel.as_ref()
    }

    pub fn seed(&self) -> Option<SeedSpec> {
        self.seed
    }

    /// Number of stored pairs.
    pub fn stored_pairs(&self) -> u64 {
        *self.offsets.last().unwrap()
    }

    /// Number of edges present among the stored pairs.
    pub fn edge_count(&self) -> u64 {
        self.bits.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    #[inline]
    fn row(&self, target: Vertex, source_line: i64) -> usize {
        let t = (target.line - self.window.y_lo) as usize * self.window.width() as usize
            + (target.x - self.window.x_lo) as usize;
        let r = if self.layout.cross_lines { (source_line - self.window.y_lo) as usize } else { 0 };
        t * self.rows_per_target + r
    }

    fn bit_index(&self, u: Vertex, v: Vertex) -> Result<u64> {
        if !u.precedes(&v) {
            bail!(Range, "{u} does not precede {v}");
        }
        if !self.window.contains(u) || !self.window.contains(v) {
            bail!(Range, "pair {u} -> {v} outside window");
        }
        if u.line != v.line && !self.layout.cross_lines {
            bail!(Range, "oracle does not store cross-line pairs");
        }
        let d = (v.x - u.x) as u64;
        if self.layout.band.is_some_and(|b| d > b) {
            bail!(Range, "displacement {d} beyond the stored band");
        }
        let start = u64::from(u.line == v.line);
        Ok(self.offsets[self.row(v, u.line)] + d - start)
    }

    /// Whether `u -> v` is an edge; errors for pairs the oracle does not store.
    pub fn has_edge(&self, u: Vertex, v: Vertex) -> Result<bool> {
        let bit = self.bit_index(u, v)?;
        Ok(self.bits[(bit / 64) as usize] >> (bit % 64) & 1 == 1)
    }

    /// Unchecked same-line lookup for hot loops: `(x - d, line) -> (x, line)`.
    #[inline]
    pub fn has_line_edge(&self, x: i64, line: i64, d: u64) -> bool {
        let bit = self.offsets[self.row(Vertex::new(x, line), line)] + d - 1;
        self.bits[(bit / 64) as usize] >> (bit % 64) & 1 == 1
    }

    /// Largest displacement stored for sources below `target.x`.
    pub fn max_disp(&self, target: Vertex) -> u64 {
        Self::layout_max_disp(self.window, self.layout, target.x)
    }

    /// Predecessor x-coordinates of `target` on `source_line`, nearest first.
    pub fn predecessors(&self, target: Vertex, source_line: i64) -> impl Iterator<Item = i64> + '_ {
        let stored = source_line <= target.line && (self.layout.cross_lines || source_line == target.line);
        let (lo, hi, start) = if stored {
            let row = self.row(target, source_line);
            (self.offsets[row], self.offsets[row + 1], u64::from(source_line == target.line))
        } else {
            (0, 0, 0)
        };
        let x = target.x;
        SetBits::new(&self.bits, lo, hi).map(move |b| x - (b - lo + start) as i64)
    }
}

/// Iterates set bit positions in `[lo, hi)`.
struct SetBits<'a> {
    bits: &'a [u64],
    hi: u64,
    word_idx: u64,
    word: u64,
}

impl<'a> SetBits<'a> {
    fn new(bits: &'a [u64], lo: u64, hi: u64) -> Self {
        if lo >= hi {
            return Self { bits, hi: 0, word_idx: 0, word: 0 };
        }
        let word_idx = lo / 64;
        let word = bits[word_idx as usize] & (u64::MAX << (lo % 64));
        Self { bits, hi, word_idx, word }
    }
}

impl Iterator for SetBits<'_> {
    type Item = u64;

    #[inline]
    fn next(&mut self) -> Option<u64> {
        loop {
            if self.word != 0 {
                let b = self.word_idx * 64 + u64::from(self.word.trailing_zeros());
                if b >= self.hi {
                    self.word = 0;
                    self.hi = 0;
                    return None;
                }
                self.word &= self.word - 1;
                return Some(b);
            }
            self.word_idx += 1;
            if self.word_idx * 64 >= self.hi {
                return None;
            }
            self.word = self.bits[self.word_idx as usize];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> ConnectivityKernel {
        ConnectivityKernel::constant(0.5).unwrap()
    }

    #[test]
    fn edge_prob_lookups() {
        assert_eq!(half().edge_prob(3, 2).unwrap(), 0.5);
        let dd = ConnectivityKernel::parse("kernel=dd ph=0.5,0.25,0.125 pv=0.3").unwrap();
        assert_eq!(dd.edge_prob(2, 0).unwrap(), 0.25);
        assert_eq!(dd.edge_prob(0, 1).unwrap(), 0.3);
        assert_eq!(dd.edge_prob(9, 0).unwrap(), 0.125);
        assert_eq!(dd.edge_prob(0, 2).unwrap(), 0.0);
        assert_eq!(dd.edge_prob(2, 3).unwrap(), 0.25);
        assert!(matches!(half().edge_prob(0, 0), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn kernel_validation() {
        assert!(ConnectivityKernel::constant(0.0).is_err());
        assert!(ConnectivityKernel::constant(1.0).is_err());
        assert!(ConnectivityKernel::parse("kernel=dd ph=1.0 pv=0.5").is_err());
        assert!(ConnectivityKernel::parse("kernel=dd ph=0.5 pv=0").is_err());
        assert!(ConnectivityKernel::parse("kernel=dd ph=0.5,1.5 pv=0.5").is_err());
        assert!(ConnectivityKernel::parse("kernel=constant p=0.5 q=1").is_err());
        let k = ConnectivityKernel::parse("kernel=dd ph=0.5 pv=0.5 table=1:1:0.9;2:0:0.1 r=3").unwrap();
        assert_eq!(k.edge_prob(1, 1).unwrap(), 0.9);
        assert_eq!(k.edge_prob(2, 0).unwrap(), 0.1);
        assert_eq!(k.moment_order(), Some(3.0));
        assert_eq!(ConnectivityKernel::parse(&k.to_string()).unwrap(), k);
    }

    #[test]
    fn stream_determinism_and_distinctness() {
        let mut a = SeedSpec::new(1, 1).derive_stream();
        let mut b = SeedSpec::new(1, 1).derive_stream();
        let mut c = SeedSpec::new(1, 2).derive_stream();
        let xa: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..4).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn caching_invariant() {
        let w = Window::line(0, 100, 1).unwrap();
        let o = EdgeOracle::materialize_window(&half(), w, SeedSpec::new(7, 0)).unwrap();
        let u = Vertex::new(0, 1);
        let v = Vertex::new(1, 1);
        assert_eq!(o.has_edge(u, v).unwrap(), o.has_edge(u, v).unwrap());
        assert!(o.has_edge(v, u).is_err());
        assert!(o.has_edge(u, Vertex::new(101, 1)).is_err());
    }

    #[test]
    fn near_certain_edges() {
        let k = ConnectivityKernel::constant(0.999).unwrap();
        let w = Window::line(0, 3, 1).unwrap();
        let mut missing = 0;
        for s in 0..2000 {
            let o = EdgeOracle::materialize_window(&k, w, SeedSpec::new(3, s)).unwrap();
            assert_eq!(o.stored_pairs(), 6);
            missing += 6 - o.edge_count();
        }
        // expected 0.006 missing edges per realization
        let mean = missing as f64 / 2000.0;
        assert!(mean < 0.02, "mean missing {mean}");
    }

    #[test]
    fn budget_is_enforced() {
        let w = Window::line(0, 9999, 1).unwrap();
        let err = EdgeOracle::materialize(&half(), w, SeedSpec::new(1, 0), OracleLayout::FULL, 1000).unwrap_err();
        assert!(matches!(err, crate::Error::Size(_)));
    }

    #[test]
    fn pair_count_matches_layout() {
        let w = Window::new(0, 6, 1, 3).unwrap();
        for layout in [OracleLayout::FULL, OracleLayout::banded_lines(2), OracleLayout { cross_lines: true, band: Some(3) }] {
            let o = EdgeOracle::complete(w, layout).unwrap();
            let mut n = 0;
            let verts: Vec<Vertex> = (1..=3).flat_map(|y| (0..=6).map(move |x| Vertex::new(x, y))).collect();
            for u in &verts {
                for v in &verts {
                    if o.has_edge(*u, *v).unwrap_or(false) {
                        n += 1;
                    }
                }
            }
            assert_eq!(n, EdgeOracle::pair_count(w, layout));
            assert_eq!(o.edge_count(), o.stored_pairs());
        }
    }

    #[test]
    fn windows_and_bands_share_coins() {
        let k = half();
        let seed = SeedSpec::new(11, 4);
        let big = EdgeOracle::materialize_window(&k, Window::new(-5, 20, 1, 3).unwrap(), seed).unwrap();
        let small = EdgeOracle::materialize_window(&k, Window::new(0, 12, 2, 3).unwrap(), seed).unwrap();
        let band =
            EdgeOracle::materialize(&k, Window::new(-5, 20, 1, 3).unwrap(), seed, OracleLayout::banded_lines(4), u64::MAX)
                .unwrap();
        let field = CoinField::new(k, seed);
        for y in 2..=3 {
            for x in 0..=12 {
                let v = Vertex::new(x, y);
                for y2 in 2..=y {
                    for x2 in 0..=x {
                        let u = Vertex::new(x2, y2);
                        if !u.precedes(&v) {
                            continue;
                        }
                        let e = small.has_edge(u, v).unwrap();
                        assert_eq!(e, big.has_edge(u, v).unwrap());
                        assert_eq!(e, field.edge(u, v).unwrap());
                        if y2 == y && x - x2 <= 4 {
                            assert_eq!(e, band.has_edge(u, v).unwrap());
                        }
                    }
                }
            }
        }
        for x in 0..=12 {
            assert_eq!(field.vertical_edge(x, 2), big.has_edge(Vertex::new(x, 2), Vertex::new(x, 3)).unwrap());
        }
    }

    #[test]
    fn predecessor_iteration_matches_queries() {
        let o = EdgeOracle::materialize_window(&half(), Window::new(0, 40, 1, 2).unwrap(), SeedSpec::new(5, 5)).unwrap();
        for y in 1..=2 {
            for x in 0..=40 {
                let v = Vertex::new(x, y);
                for src in 1..=y {
                    let listed: Vec<i64> = o.predecessors(v, src).collect();
                    let expected: Vec<i64> = (0..=x)
                        .rev()
                        .filter(|&x2| {
                            let u = Vertex::new(x2, src);
                            u.precedes(&v) && o.has_edge(u, v).unwrap()
                        })
                        .collect();
                    assert_eq!(listed, expected);
                }
            }
        }
    }

    #[test]
    fn dd_kernel_streams_respect_probabilities() {
        let k = ConnectivityKernel::parse("kernel=dd ph=0.9,0.0 pv=0.5").unwrap();
        let o = EdgeOracle::materialize_window(&k, Window::line(0, 200, 1).unwrap(), SeedSpec::new(2, 0)).unwrap();
        for x in 2..=200 {
            for d in 2..=x as u64 {
                assert!(!o.has_line_edge(x, 1, d));
            }
        }
        let hits = (1..=200).filter(|&x| o.has_line_edge(x, 1, 1)).count();
        assert!(hits > 160, "{hits}");
    }
}
