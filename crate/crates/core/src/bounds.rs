//! Pathwise bounds on `L_{n,m}` built from the thinned skeleton of each line.
//!
//! For a dissection `0 = t_0 <= t_1 <= ... <= t_m = n` line `j` contributes a
//! longest path between straddling skeleton points of `t_{j-1}` and `t_j`:
//!
//! * upper bound: `L[X(t_{j-1}), Y(t_j)]`, plus `m`;
//! * lower bound: `L[Y(t_{j-1}), X(t_j)]`, minus `Σ Δ_n`;
//! * centered proxy `S`: `L[X(t_{j-1}), X(t_j)] - C (X(t_j) - X(t_{j-1}))`.
//!
//! Between skeleton points `L` is a difference of per-gap prefix sums, and
//! every term only changes when a breakpoint crosses a skeleton position, so
//! the supremum is an exact DP over the merged positions.

use serde::Serialize;

use crate::error::{bail, Result};
use crate::model::{CoinField, EdgeOracle, Vertex};
use crate::paths1d::{longest_path_1d, longest_path_between};
use crate::skeleton::{analyze_line, GapStats, LineAnalysis, LineParams, SkeletonSequence};

/// A monotone dissection of `[0, n]` into `m` possibly empty intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dissection {
    t: Vec<f64>,
}

impl Dissection {
    pub fn new(t: Vec<f64>, n: f64) -> Result<Self> {
        if t.len() < 2 {
            bail!(Input, "a dissection needs at least two breakpoints");
        }
        if t[0] != 0.0 || *t.last().unwrap() != n {
            bail!(Input, "a dissection must start at 0 and end at {n}");
        }
        if t.windows(2).any(|w| !(w[0] <= w[1])) {
            bail!(Input, "breakpoints must be nondecreasing");
        }
        Ok(Self { t })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.t
    }

    /// Number of intervals `m`.
    pub fn intervals(&self) -> usize {
        self.t.len() - 1
    }
}

/// Thinned skeleton of one line with its per-gap prefix lengths.
#[derive(Debug, Clone, Serialize)]
pub struct LineSkeleton {
    pub seq: SkeletonSequence,
    /// `prefix[k] = L[Γ_0, Γ_k]` over the stored positions.
    pub prefix: Vec<u64>,
    /// `Δ_n` of the line.
    pub delta: u64,
}

impl LineSkeleton {
    pub fn new(seq: SkeletonSequence, gaps: &GapStats) -> Result<Self> {
        if gaps.lengths.len() + 1 != seq.len().max(1) {
            bail!(Input, "{} gap lengths for {} positions", gaps.lengths.len(), seq.len());
        }
        let delta = seq.max_gap()?;
        Ok(Self { prefix: gaps.prefix_lengths(), seq, delta })
    }

    pub fn from_analysis(a: &LineAnalysis) -> Result<Self> {
        Self::new(a.thinned.clone(), &a.thinned_gaps)
    }

    /// `L[Γ_a, Γ_b]` by additivity, 0 when `a >= b`.
    pub fn between(&self, a: usize, b: usize) -> u64 {
        if a >= b {
            0
        } else {
            self.prefix[b] - self.prefix[a]
        }
    }
}

/// Detects and measures the thinned skeleton of lines `1..=m` over `[0, n]`.
pub fn analyze_realization(field: &CoinField, n: u64, m: u64, params: Option<LineParams>) -> Result<Vec<LineSkeleton>> {
    let params = params.unwrap_or_else(|| LineParams::new(field.kernel(), 0, n as i64));
    (1..=m as i64).map(|j| LineSkeleton::from_analysis(&analyze_line(field, j, params)?)).collect()
}

/// Which supremum to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundKind {
    Upper,
    Lower,
    /// `S` with the growth constant `c`.
    Centered { c: f64 },
}

/// A supremum over dissections and the lexicographically smallest maximizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Supremum {
    pub value: f64,
    pub dissection: Vec<i64>,
}

/// Per-line ingredients of `f_j(s, t) = max(floor, A_j(t) - B_j(s))`.
struct Term {
    a: Vec<f64>,
    b: Vec<f64>,
    floor: Option<f64>,
}

fn candidates(lines: &[&SkeletonSequence], n: i64) -> Vec<i64> {
    let mut t: Vec<i64> = lines.iter().flat_map(|s| s.positions().iter().copied().filter(|&g| g > 0 && g < n)).collect();
    t.push(0);
    t.push(n);
    t.sort_unstable();
    t.dedup();
    t
}

/// Exact supremum of `Σ_j f_j(t_{j-1}, t_j)` over dissections with breakpoints in `grid`.
fn dissection_dp(grid: &[i64], terms: &[Term]) -> Supremum {
    let k = grid.len();
    let m = terms.len();
    // next[t] = V_{j+1}(t); V_{m+1} is 0 at t = n only
    let mut next = vec![f64::NEG_INFINITY; k];
    next[k - 1] = 0.0;
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    values.push(next.clone());
    for term in terms.iter().rev() {
        let mut cur = vec![f64::NEG_INFINITY; k];
        let mut suf_v = f64::NEG_INFINITY;
        let mut suf_av = f64::NEG_INFINITY;
        for i in (0..k).rev() {
            suf_v = suf_v.max(next[i]);
            suf_av = suf_av.max(term.a[i] + next[i]);
            let mut v = -term.b[i] + suf_av;
            if let Some(f) = term.floor {
                v = v.max(f + suf_v);
            }
            cur[i] = v;
        }
        values.push(cur.clone());
        next = cur;
    }
    values.reverse();
    // values[j][i] = V_{j+1}(grid[i]) for j = 0..m; values[m] is the terminal
    let best = values[0][0];
    let mut dissection = vec![grid[0]];
    let mut s = 0usize;
    for (j, term) in terms.iter().enumerate() {
        let target = values[j][s];
        let after = &values[j + 1];
        let chosen = (s..k)
            .find(|&i| {
                let mut v = -term.b[s] + (term.a[i] + after[i]);
                if let Some(f) = term.floor {
                    v = v.max(f + after[i]);
                }
                v == target
            })
            .expect("maximizer exists");
        dissection.push(grid[chosen]);
        s = chosen;
    }
    Supremum { value: best, dissection }
}

fn index_fns(seq: &SkeletonSequence, grid: &[i64]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    for &t in grid {
        xs.push(seq.x_index(t as f64)?);
        ys.push(seq.y_index(t as f64)?);
    }
    Ok((xs, ys))
}

/// Supremum of one kind over all dissections of `[0, n]` with `m = lines.len()` intervals.
pub fn supremum(lines: &[LineSkeleton], n: u64, kind: BoundKind) -> Result<Supremum> {
    if lines.is_empty() {
        bail!(Input, "at least one line is needed");
    }
    let n = n as i64;
    let seqs: Vec<&SkeletonSequence> = lines.iter().map(|l| &l.seq).collect();
    let grid = candidates(&seqs, n);
    let mut terms = Vec::with_capacity(lines.len());
    for line in lines {
        if line.prefix.len() != line.seq.len() {
            bail!(Input, "prefix sums do not match positions on line {}", line.seq.line());
        }
        let (xs, ys) = index_fns(&line.seq, &grid)?;
        let pre = |i: usize| line.prefix[i] as f64;
        let pos = |i: usize| line.seq.positions()[i] as f64;
        let term = match kind {
            BoundKind::Upper => Term {
                a: ys.iter().map(|&i| pre(i)).collect(),
                b: xs.iter().map(|&i| pre(i)).collect(),
                floor: None,
            },
            BoundKind::Lower => Term {
                a: xs.iter().map(|&i| pre(i)).collect(),
                b: ys.iter().map(|&i| pre(i)).collect(),
                floor: Some(0.0),
            },
            BoundKind::Centered { c } => {
                let walk: Vec<f64> = xs.iter().map(|&i| pre(i) - c * pos(i)).collect();
                Term { a: walk.clone(), b: walk, floor: None }
            }
        };
        terms.push(term);
    }
    Ok(dissection_dp(&grid, &terms))
}

/// `L̄_{n,m}` and its maximizing dissection.
pub fn upper_bound(lines: &[LineSkeleton], n: u64) -> Result<(i64, Vec<i64>)> {
    let s = supremum(lines, n, BoundKind::Upper)?;
    Ok((s.value as i64 + lines.len() as i64, s.dissection))
}

/// `L̲_{n,m}` and its maximizing dissection.
pub fn lower_bound(lines: &[LineSkeleton], n: u64) -> Result<(i64, Vec<i64>)> {
    let s = supremum(lines, n, BoundKind::Lower)?;
    let delta: u64 = lines.iter().map(|l| l.delta).sum();
    Ok((s.value as i64 - delta as i64, s.dissection))
}

/// One line of the walk representation of `S / σ`.
#[derive(Debug, Clone)]
pub struct WalkLine<'a> {
    pub seq: &'a SkeletonSequence,
    /// `R_i` for `i = 0..=Φ(n)` at least, with `R_0 = 0` at `X(0)`.
    pub walk: &'a [f64],
}

/// `S_{n,m} = σ · sup Σ_j (R_{Φ(t_j)} - R_{Φ(t_{j-1})})`.
pub fn s_statistic(lines: &[WalkLine<'_>], n: u64, sigma: f64) -> Result<Supremum> {
    if lines.is_empty() {
        bail!(Input, "at least one line is needed");
    }
    let n_i = n as i64;
    let seqs: Vec<&SkeletonSequence> = lines.iter().map(|l| l.seq).collect();
    let grid = candidates(&seqs, n_i);
    let mut terms = Vec::with_capacity(lines.len());
    for line in lines {
        let phi_n = line.seq.phi(n as f64);
        if phi_n < 0 || line.walk.len() < phi_n as usize + 1 {
            bail!(Input, "walk of length {} cannot cover Φ(n) = {phi_n} on line {}", line.walk.len(), line.seq.line());
        }
        let r: Vec<f64> = grid.iter().map(|&t| line.walk[line.seq.phi(t as f64) as usize]).collect();
        terms.push(Term { a: r.clone(), b: r, floor: None });
    }
    let mut s = dissection_dp(&grid, &terms);
    s.value *= sigma;
    Ok(s)
}

/// `R_i` of a line from `X(0)` on, standardized by `(c, sigma)`.
pub fn centered_walk(line: &LineSkeleton, c: f64, sigma: f64) -> Result<Vec<f64>> {
    let o = line.seq.origin_index()?;
    let pos = line.seq.positions();
    Ok((o..pos.len())
        .map(|i| ((line.prefix[i] - line.prefix[o]) as f64 - c * (pos[i] - pos[o]) as f64) / sigma)
        .collect())
}

/// Everything the bounds module reports for one realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsResult {
    pub l_upper: i64,
    pub l_lower: i64,
    pub s: f64,
    pub upper_dissection: Vec<i64>,
    pub lower_dissection: Vec<i64>,
    pub s_dissection: Vec<i64>,
    pub delta_sum: u64,
}

/// `L̄`, `L̲` and `S` (with growth constant `c`) of one realization.
pub fn compute_bounds(lines: &[LineSkeleton], n: u64, c: f64) -> Result<BoundsResult> {
    let (l_upper, upper_dissection) = upper_bound(lines, n)?;
    let (l_lower, lower_dissection) = lower_bound(lines, n)?;
    let s = supremum(lines, n, BoundKind::Centered { c })?;
    Ok(BoundsResult {
        l_upper,
        l_lower,
        s: s.value,
        upper_dissection,
        lower_dissection,
        s_dissection: s.dissection,
        delta_sum: lines.iter().map(|l| l.delta).sum(),
    })
}

/// Exhaustive supremum over integer dissections (test oracle, small `n` and `m`).
///
/// `len(j, a, b)` must return `L^{(j)}[a, b]` for line index `j` (0-based).
pub fn brute_force_supremum<F>(lines: &[LineSkeleton], n: u64, kind: BoundKind, len: F) -> Result<f64>
where
    F: Fn(usize, i64, i64) -> Result<u64>,
{
    let m = lines.len();
    if m == 0 || m > 4 || n > 200 {
        bail!(Size, "brute force needs 1 <= m <= 4 and n <= 200");
    }
    let n = n as i64;
    let mut t = vec![0i64; m + 1];
    t[m] = n;
    let mut best = f64::NEG_INFINITY;
    loop {
        let mut total = 0.0;
        for j in 0..m {
            let seq = &lines[j].seq;
            let (xs, ys) = seq.straddle(t[j] as f64)?;
            let (xt, yt) = seq.straddle(t[j + 1] as f64)?;
            total += match kind {
                BoundKind::Upper => len(j, xs, yt)? as f64,
                BoundKind::Lower => len(j, ys, xt)? as f64,
                BoundKind::Centered { c } => len(j, xs, xt)? as f64 - c * (xt - xs) as f64,
            };
        }
        best = best.max(total);
        // next nondecreasing vector t_1 <= ... <= t_{m-1} in [0, n]
        let mut i = m - 1;
        loop {
            if i == 0 {
                return Ok(best);
            }
            if t[i] < n {
                t[i] += 1;
                let v = t[i];
                for tt in &mut t[i + 1..m] {
                    *tt = v;
                }
                break;
            }
            i -= 1;
        }
    }
}

/// The path built for one dissection, with both sides of the lower-bound inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaircasePath {
    pub vertices: Vec<Vertex>,
    /// Lines `ν_1 < ν_2 < ...` whose intervals the path serves.
    pub nu: Vec<i64>,
    /// `(line, c_j)`: first vertex of the path on each visited line.
    pub entries: Vec<(i64, i64)>,
    /// `I_j = [a_j, b_j]` for every line.
    pub intervals: Vec<(i64, i64)>,
    /// `Σ_j L^{(j)}(I_j)`.
    pub interval_sum: u64,
    /// `Σ_j Δ_n^{(j)}`.
    pub delta_sum: u64,
}

impl StaircasePath {
    /// `|π|`, counted in edges.
    pub fn length(&self) -> u64 {
        self.vertices.len().saturating_sub(1) as u64
    }

    /// `Σ L(I_j) <= |π| + Σ Δ`.
    pub fn inequality_holds(&self) -> bool {
        self.interval_sum <= self.length() + self.delta_sum
    }

    /// Every consecutive pair is an edge of `oracle`.
    pub fn is_valid(&self, oracle: &EdgeOracle) -> Result<bool> {
        for w in self.vertices.windows(2) {
            if !oracle.has_edge(w[0], w[1])? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn push_segment(path: &mut Vec<Vertex>, oracle: &EdgeOracle, line: i64, from: i64, to: i64) -> Result<()> {
    let Some(xs) = longest_path_between(oracle, line, from, to)? else {
        bail!(Input, "no path from {from} to {to} on line {line}; widen the detection window");
    };
    if path.last() == Some(&Vertex::new(from, line)) {
        path.extend(xs[1..].iter().map(|&x| Vertex::new(x, line)));
    } else {
        path.extend(xs.iter().map(|&x| Vertex::new(x, line)));
    }
    Ok(())
}

/// Builds the staircase path of the lower-bound argument for `dissection`.
///
/// `oracle` must store the window `[0, n] x [1, m]` (or larger) with cross-line
/// pairs; `lines[j]` is the thinned skeleton of line `j + 1` of the same realization.
pub fn construct_staircase(oracle: &EdgeOracle, lines: &[LineSkeleton], dissection: &Dissection) -> Result<StaircasePath> {
    let m = lines.len();
    if dissection.intervals() != m {
        bail!(Input, "dissection has {} intervals for {m} lines", dissection.intervals());
    }
    let t = dissection.breakpoints();
    let n = t[m];
    let mut intervals = Vec::with_capacity(m);
    let mut interval_sum = 0;
    for (j, line) in lines.iter().enumerate() {
        let (_, a) = line.seq.straddle(t[j])?;
        let (b, _) = line.seq.straddle(t[j + 1])?;
        intervals.push((a, b));
        if a < b {
            interval_sum += longest_path_1d(oracle, line.seq.line(), a, b)?;
        }
    }
    let delta_sum = lines.iter().map(|l| l.delta).sum();
    let mut path = StaircasePath {
        vertices: Vec::new(),
        nu: Vec::new(),
        entries: Vec::new(),
        intervals: intervals.clone(),
        interval_sum,
        delta_sum,
    };
    let Some(first) = intervals.iter().position(|&(a, b)| a < b) else {
        return Ok(path);
    };
    let line_of = |j: usize| lines[j].seq.line();
    let (a, b) = intervals[first];
    push_segment(&mut path.vertices, oracle, line_of(first), a, b)?;
    path.nu.push(line_of(first));
    path.entries.push((line_of(first), a));
    let mut nu = first;
    'outer: loop {
        // chain of entry points above ν: c_{ν+1} = b_ν, c_{k+1} = Y^{(k)}(c_k)
        let mut c = intervals[nu].1;
        let mut plan = Vec::new();
        let mut k = nu + 1;
        loop {
            if k >= m || c as f64 > n {
                break 'outer;
            }
            let b_k = intervals[k].1;
            if c <= b_k {
                plan.push((k, c, b_k));
                break;
            }
            let next = match lines[k].seq.straddle(c as f64) {
                Ok((_, y)) => y,
                Err(_) => break 'outer,
            };
            plan.push((k, c, next));
            c = next;
            k += 1;
        }
        for &(k, from, to) in &plan {
            path.entries.push((line_of(k), from));
            push_segment(&mut path.vertices, oracle, line_of(k), from, to)?;
        }
        nu = plan.last().unwrap().0;
        path.nu.push(line_of(nu));
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(positions: Vec<i64>, lengths: Vec<u64>, n: i64, j: i64) -> LineSkeleton {
        let seq = SkeletonSequence::from_positions(positions, j, 0, n, 0, true);
        let gaps = GapStats { gaps: seq.gaps(), lengths, max_gap: None, extended: 0 };
        LineSkeleton::new(seq, &gaps).unwrap()
    }

    #[test]
    fn dissection_validation() {
        assert!(Dissection::new(vec![0.0, 3.0, 2.0, 5.0], 5.0).is_err());
        assert!(Dissection::new(vec![1.0, 5.0], 5.0).is_err());
        assert_eq!(Dissection::new(vec![0.0, 2.0, 2.0, 5.0], 5.0).unwrap().intervals(), 3);
    }

    #[test]
    fn zero_lengths_give_m() {
        let lines = vec![line(vec![-3, 4, 9, 14], vec![0, 0, 0], 10, 1), line(vec![-1, 6, 12], vec![0, 0], 10, 2)];
        assert_eq!(upper_bound(&lines, 10).unwrap().0, 2);
        let delta: i64 = lines.iter().map(|l| l.delta as i64).sum();
        assert_eq!(lower_bound(&lines, 10).unwrap().0, -delta);
    }

    #[test]
    fn single_line_specializations() {
        let l = line(vec![-2, 3, 7, 12], vec![3, 2, 4], 10, 1);
        // X(0) = -2, Y(10) = 12: L = 9
        assert_eq!(upper_bound(std::slice::from_ref(&l), 10).unwrap().0, 10);
        // Y(0) = 3, X(10) = 7: L = 2, Δ = 5
        assert_eq!(lower_bound(std::slice::from_ref(&l), 10).unwrap().0, 2 - 5);
        // S = L[X(0), X(10)] - C (X(10) - X(0)) = 5 - 0.5 * 9
        let s = supremum(std::slice::from_ref(&l), 10, BoundKind::Centered { c: 0.5 }).unwrap();
        assert!((s.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_walk_gives_zero() {
        let l = line(vec![-2, 3, 7, 12], vec![3, 2, 4], 10, 1);
        let walk = vec![0.0; 4];
        let w = [WalkLine { seq: &l.seq, walk: &walk }, WalkLine { seq: &l.seq, walk: &walk }];
        assert_eq!(s_statistic(&w, 10, 2.0).unwrap().value, 0.0);
        let short = [WalkLine { seq: &l.seq, walk: &walk[..1] }];
        assert!(matches!(s_statistic(&short, 10, 1.0), Err(crate::Error::Input(_))));
    }

    #[test]
    fn walk_matches_centered_supremum() {
        let lines = vec![line(vec![-2, 3, 7, 12], vec![3, 2, 4], 10, 1), line(vec![-4, 1, 5, 8, 11], vec![4, 5, 1, 3], 10, 2)];
        let (c, sigma) = (0.55, 1.3);
        let walks: Vec<Vec<f64>> = lines.iter().map(|l| centered_walk(l, c, sigma).unwrap()).collect();
        let w: Vec<WalkLine> = lines.iter().zip(&walks).map(|(l, w)| WalkLine { seq: &l.seq, walk: w }).collect();
        let s = s_statistic(&w, 10, sigma).unwrap().value;
        let direct = supremum(&lines, 10, BoundKind::Centered { c }).unwrap().value;
        assert!((s - direct).abs() < 1e-9, "{s} vs {direct}");
    }

    #[test]
    fn dp_matches_brute_force_on_fixed_lines() {
        let lines = vec![
            line(vec![-2, 3, 7, 12], vec![3, 2, 4], 10, 1),
            line(vec![-4, 1, 5, 8, 11], vec![4, 5, 1, 3], 10, 2),
            line(vec![-1, 2, 9, 13], vec![1, 6, 2], 10, 3),
        ];
        let len = |j: usize, a: i64, b: i64| -> Result<u64> {
            let pos = lines[j].seq.positions();
            let ia = pos.iter().position(|&g| g == a).unwrap();
            let ib = pos.iter().position(|&g| g == b).unwrap();
            Ok(lines[j].between(ia, ib))
        };
        for kind in [BoundKind::Upper, BoundKind::Lower, BoundKind::Centered { c: 0.57 }] {
            let dp = supremum(&lines, 10, kind).unwrap().value;
            let bf = brute_force_supremum(&lines, 10, kind, len).unwrap();
            assert!((dp - bf).abs() < 1e-9, "{kind:?}: {dp} vs {bf}");
        }
    }

    #[test]
    fn maximizer_is_lexicographically_smallest() {
        // all-zero terms: every dissection ties, the smallest is all zeros
        let lines = vec![line(vec![-2, 3, 12], vec![0, 0], 10, 1), line(vec![-2, 5, 12], vec![0, 0], 10, 2)];
        let s = supremum(&lines, 10, BoundKind::Lower).unwrap();
        assert_eq!(s.dissection, vec![0, 0, 10]);
    }
}
