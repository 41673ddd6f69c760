//! Experiment orchestration.
//!
//! An experiment is a grid of sizes times `reps` replications. Replication
//! `rep` at grid value `g` draws from `SeedSpec::new(seed, rep).child(g)` and
//! nothing else, so records depend only on the config and the master seed.
//! Records are merged in `(g, rep)` order and rewritten after every batch;
//! rerunning into the same directory computes only the missing keys.
//!
//! Files in the output directory:
//!
//! | file | contents |
//! |------|----------|
//! | `config.txt` | canonical config; a rerun with a different one is refused |
//! | `records.csv` | one row per replication, sorted, floats with 17 digits |
//! | `summary.json` | per-grid ECDF statistics and KS results |
//! | `timings.csv` | wall time per replication (not deterministic) |
//! | `failures.csv` | replications that returned an error |
//! | `constants.json` | `constants` experiment only |
//! | `plot/*.dat` | two-column files, with `emit_plot_data` |

pub mod config;
pub mod records;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{ConstantsSource, ExperimentConfig, ExperimentKind, Tolerances};
pub use records::{Cell, RecordSet, ReplicationRecord};

use crate::bounds::{analyze_realization, compute_bounds, construct_staircase, Dissection};
use crate::constants::{estimate_constants, load_reference, reference_constants, ModelConstants};
use crate::error::{bail, Error, Result};
use crate::lattice::{longest_path_2d, longest_path_2d_field, longest_path_2d_lazy, LatticeMode};
use crate::model::{CoinField, EdgeOracle, OracleLayout, SeedSpec, Window, DEFAULT_COIN_BUDGET};
use crate::paths1d::{longest_path_1d, longest_path_1d_lazy};
use crate::rmt::{bdp_sample_with, gue_lmax, tw_rescale, TwTable};
use crate::stats::{clt_statistic, ks_one_sample, ks_two_sample, normal_cdf, tw_statistic, EcdfSummary, KsResult};
use crate::par;

/// Replications computed between two rewrites of `records.csv`.
const BATCH: usize = 256;

/// Growth constants fed to the transforms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsedConstants {
    pub c: f64,
    pub lam_sig: Option<f64>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_err: f64,
    /// `(q, quantile)` for q in 0.05, 0.25, 0.5, 0.75, 0.95.
    pub quantiles: Vec<(f64, f64)>,
}

impl StatSummary {
    fn of(samples: &[f64]) -> Option<Self> {
        let e = EcdfSummary::new(samples).ok()?;
        let quantiles = [0.05, 0.25, 0.5, 0.75, 0.95].iter().map(|&q| (q, e.quantile(q))).collect();
        Some(Self {
            count: e.count(),
            mean: e.mean,
            variance: e.variance,
            std_err: (e.variance / e.count() as f64).sqrt(),
            quantiles,
        })
    }
}

/// Statistics of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub grid: u64,
    pub m: u64,
    pub statistic: String,
    pub stats: Option<StatSummary>,
    pub ks: Option<KsResult>,
    /// Experiment-specific figures (violation counts, secondary means).
    pub extra: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub grid: u64,
    pub rep: u64,
    pub error: String,
}

/// Contents of `summary.json`; a pure function of the config.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub experiment: ExperimentKind,
    pub kernel: String,
    pub seed: u64,
    pub reps: u64,
    pub insufficient_data: bool,
    pub constants: Option<UsedConstants>,
    pub groups: Vec<GroupSummary>,
    pub failures: Vec<Failure>,
    pub model_constants: Option<ModelConstants>,
}

/// What a run did, beyond the summary.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    /// Replications computed by this call.
    pub computed: usize,
    /// Replications found on disk.
    pub reused: usize,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

struct Layout {
    header: Vec<&'static str>,
    grid_col: usize,
    stat_col: usize,
}

fn layout(cfg: &ExperimentConfig) -> Layout {
    match cfg.kind {
        ExperimentKind::Clt1d => Layout { header: vec!["rep", "n", "seed", "L", "z"], grid_col: 1, stat_col: 4 },
        ExperimentKind::TwLimit => {
            Layout { header: vec!["rep", "n", "m", "seed", "L", "tw"], grid_col: 1, stat_col: 5 }
        }
        ExperimentKind::Sandwich => {
            let mut header =
                vec!["rep", "n", "m", "seed", "L", "L_upper", "L_lower", "S", "delta_sum", "gap", "centered_gap"];
            if cfg.staircase {
                header.extend(["staircase_len", "staircase_ok"]);
            }
            Layout { header, grid_col: 1, stat_col: 9 }
        }
        ExperimentKind::GueTw => Layout { header: vec!["rep", "m", "seed", "lmax", "tw"], grid_col: 1, stat_col: 4 },
        ExperimentKind::BdpGue => Layout { header: vec!["rep", "m", "seed", "bdp", "gue"], grid_col: 1, stat_col: 3 },
        ExperimentKind::Constants => Layout { header: vec![], grid_col: 0, stat_col: 0 },
    }
}

fn grid(cfg: &ExperimentConfig) -> Vec<u64> {
    match cfg.kind {
        ExperimentKind::GueTw => vec![cfg.m.unwrap_or(200)],
        ExperimentKind::BdpGue => vec![cfg.m.unwrap_or(5)],
        _ => cfg.n_grid.clone(),
    }
}

/// The seed of replication `rep` at grid value `g`.
pub fn rep_seed(master: u64, grid: u64, rep: u64) -> SeedSpec {
    SeedSpec::new(master, rep).child(grid)
}

fn resolve_constants(cfg: &ExperimentConfig) -> Result<Option<UsedConstants>> {
    if !matches!(cfg.kind, ExperimentKind::Clt1d | ExperimentKind::TwLimit | ExperimentKind::Sandwich) {
        return Ok(None);
    }
    let from_ref = |r: crate::constants::ReferenceConstants, source: String| UsedConstants {
        c: r.c,
        lam_sig: Some(r.lam_sig()),
        source,
    };
    Ok(Some(match &cfg.constants {
        ConstantsSource::Explicit { c, lam_sig } => UsedConstants { c: *c, lam_sig: *lam_sig, source: "config".into() },
        ConstantsSource::File(path) => {
            let Some(p) = cfg.kernel.constant_p() else {
                bail!(Config, "reference files are indexed by p; give c and lam_sig for this kernel");
            };
            from_ref(load_reference(path, p)?, path.display().to_string())
        }
        ConstantsSource::Shipped => {
            let Some(p) = cfg.kernel.constant_p() else {
                bail!(Config, "no shipped constants for this kernel; give c and lam_sig");
            };
            let r = reference_constants(p).map_err(|e| Error::Config(e.to_string()))?;
            from_ref(r, "shipped reference table".into())
        }
    }))
}

fn tw_table(cfg: &ExperimentConfig) -> Result<TwTable> {
    match &cfg.tw_table {
        Some(p) => TwTable::load(p),
        None => Ok(TwTable::shipped()),
    }
}

fn line_length(cfg: &ExperimentConfig, n: u64, seed: SeedSpec) -> Result<u64> {
    match cfg.mode {
        LatticeMode::Lazy => longest_path_1d_lazy(&cfg.kernel, n, seed),
        _ => {
            let oracle = EdgeOracle::materialize_window(&cfg.kernel, Window::line(1, n as i64, 1)?, seed)?;
            longest_path_1d(&oracle, 1, 1, n as i64)
        }
    }
}

fn lattice_length(cfg: &ExperimentConfig, n: u64, m: u64, seed: SeedSpec) -> Result<u64> {
    Ok(match cfg.mode {
        LatticeMode::Lazy => longest_path_2d_lazy(&cfg.kernel, n, m, seed)?.l,
        LatticeMode::Streamed => longest_path_2d_field(&CoinField::new(cfg.kernel.clone(), seed), n, m)?.l,
        _ => {
            let oracle = EdgeOracle::materialize_window(&cfg.kernel, Window::new(0, n as i64, 1, m as i64)?, seed)?;
            longest_path_2d(&oracle)?.l
        }
    })
}

fn compute_rep(cfg: &ExperimentConfig, consts: Option<&UsedConstants>, g: u64, rep: u64) -> Result<Vec<Cell>> {
    let seed = rep_seed(cfg.seed, g, rep);
    let s = Cell::U(seed.master_seed);
    let need_lam_sig = || {
        consts.and_then(|c| c.lam_sig).ok_or_else(|| Error::Config("λ₀σ₀² is required for this experiment".into()))
    };
    Ok(match cfg.kind {
        ExperimentKind::Clt1d => {
            let l = line_length(cfg, g, seed)?;
            let z = clt_statistic(l as f64, g, consts.map_or(0.0, |c| c.c), need_lam_sig()?)?;
            vec![Cell::U(rep), Cell::U(g), s, Cell::U(l), Cell::F(z)]
        }
        ExperimentKind::TwLimit => {
            let m = cfg.lines_at(g);
            let l = lattice_length(cfg, g, m, seed)?;
            let a = cfg.a.unwrap_or(0.0);
            let tw = tw_statistic(l as f64, g, a, consts.map_or(0.0, |c| c.c), need_lam_sig()?, cfg.centering)?;
            vec![Cell::U(rep), Cell::U(g), Cell::U(m), s, Cell::U(l), Cell::F(tw.value)]
        }
        ExperimentKind::Sandwich => {
            let m = cfg.lines_at(g);
            let c = consts.map_or(0.0, |c| c.c);
            let field = CoinField::new(cfg.kernel.clone(), seed);
            let l = longest_path_2d_field(&field, g, m)?.l;
            let lines = analyze_realization(&field, g, m, None)?;
            let b = compute_bounds(&lines, g, c)?;
            let scale = (g as f64).powf(cfg.shrink_exponent());
            let gap = (b.l_upper - b.l_lower) as f64 / scale;
            let centered = (b.s - (l as f64 - c * g as f64)).abs() / scale;
            let mut cells = vec![
                Cell::U(rep),
                Cell::U(g),
                Cell::U(m),
                s,
                Cell::U(l),
                Cell::I(b.l_upper),
                Cell::I(b.l_lower),
                Cell::F(b.s),
                Cell::U(b.delta_sum),
                Cell::F(gap),
                Cell::F(centered),
            ];
            if cfg.staircase {
                let window = Window::new(0, g as i64, 1, m as i64)?;
                let oracle = EdgeOracle::from_field(&field, window, OracleLayout::FULL, DEFAULT_COIN_BUDGET)?;
                let t: Vec<f64> = b.lower_dissection.iter().map(|&x| x as f64).collect();
                let path = construct_staircase(&oracle, &lines, &Dissection::new(t, g as f64)?)?;
                let ok = path.is_valid(&oracle)? && path.inequality_holds() && path.length() <= l;
                cells.extend([Cell::U(path.length()), Cell::U(u64::from(ok))]);
            }
            cells
        }
        ExperimentKind::GueTw => {
            let lmax = gue_lmax(g, seed)?;
            vec![Cell::U(rep), Cell::U(g), s, Cell::F(lmax), Cell::F(tw_rescale(lmax, g))]
        }
        ExperimentKind::BdpGue => {
            let z = bdp_sample_with(cfg.t, g, cfg.step, seed.child(1), cfg.recursion)?.z;
            // Z_{t,m} has the law of √t λ_m
            let gue = cfg.t.sqrt() * gue_lmax(g, seed.child(2))?;
            vec![Cell::U(rep), Cell::U(g), s, Cell::F(z), Cell::F(gue)]
        }
        ExperimentKind::Constants => unreachable!("constants has no replications"),
    })
}

fn guard_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let path = dir.join("config.txt");
    if path.exists() {
        let old = fs::read_to_string(&path)?;
        if old != cfg.canonical {
            bail!(Config, "{} holds results of a different config; use a fresh output directory", dir.display());
        }
    } else {
        fs::write(&path, &cfg.canonical)?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Runs (or resumes) an experiment with the worker count from `workers`,
/// the environment, or the default pool.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<RunOutcome> {
    par::with_workers(workers, || run_inner(cfg))
}

fn run_inner(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let dir = cfg.output.clone();
    fs::create_dir_all(&dir)?;
    guard_config(&dir, cfg)?;
    if cfg.kind == ExperimentKind::Constants {
        return run_constants(cfg, &dir);
    }
    let consts = resolve_constants(cfg)?;
    let lay = layout(cfg);
    let records_path = dir.join("records.csv");
    let grid = grid(cfg);
    let mut records = read_records_for(cfg, &records_path, &lay, &grid)?;
    let reused = records.len();
    let missing: Vec<(u64, u64)> = grid
        .iter()
        .flat_map(|&g| (0..cfg.reps).map(move |rep| (g, rep)))
        .filter(|k| !records.contains_key(k))
        .collect();

    let timings_path = dir.join("timings.csv");
    let mut timings = read_timings(&timings_path)?;
    let mut failures = Vec::new();
    records::write_records(&records_path, &lay.header, &records)?;
    for batch in missing.chunks(BATCH) {
        let idx: Vec<u64> = (0..batch.len() as u64).collect();
        let results = par::map_indices(&idx, |i| {
            let (g, rep) = batch[i as usize];
            let start = Instant::now();
            let r = compute_rep(cfg, consts.as_ref(), g, rep);
            (g, rep, r, start.elapsed().as_secs_f64())
        });
        for (g, rep, r, secs) in results {
            timings.insert((g, rep), secs);
            match r {
                Ok(cells) => {
                    records.insert((g, rep), ReplicationRecord::new(g, rep, &cells));
                }
                Err(e) => failures.push(Failure { grid: g, rep, error: e.to_string() }),
            }
        }
        records::write_records(&records_path, &lay.header, &records)?;
        write_timings(&timings_path, &timings)?;
    }
    let fail_rows: Vec<Vec<String>> =
        failures.iter().map(|f| vec![f.rep.to_string(), f.grid.to_string(), f.error.clone()]).collect();
    records::write_rows(&dir.join("failures.csv"), &["rep", "grid", "error"], &fail_rows)?;

    let summary = summarize(cfg, consts, &records, failures)?;
    write_json(&dir.join("summary.json"), &summary)?;
    if cfg.emit_plot_data {
        emit_plot_data(cfg, &dir, &records, &summary)?;
    }
    Ok(RunOutcome { summary, computed: missing.len(), reused, output: dir })
}

fn read_records_for(cfg: &ExperimentConfig, path: &Path, lay: &Layout, grid: &[u64]) -> Result<RecordSet> {
    let mut records = records::read_records(path, &lay.header, lay.grid_col)?;
    // keys outside the current plan are dropped so the file matches a fresh run
    records.retain(|&(g, rep), _| grid.contains(&g) && rep < cfg.reps);
    Ok(records)
}

fn read_timings(path: &Path) -> Result<BTreeMap<(u64, u64), f64>> {
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let mut rdr = csv::Reader::from_path(path)?;
    for row in rdr.records() {
        let row = row?;
        let get = |i: usize| row.get(i).unwrap_or("");
        if let (Ok(rep), Ok(g), Ok(t)) = (get(0).parse(), get(1).parse(), get(2).parse()) {
            out.insert((g, rep), t);
        }
    }
    Ok(out)
}

fn write_timings(path: &Path, timings: &BTreeMap<(u64, u64), f64>) -> Result<()> {
    let rows: Vec<Vec<String>> =
        timings.iter().map(|(&(g, rep), t)| vec![rep.to_string(), g.to_string(), format!("{t:.6}")]).collect();
    records::write_rows(path, &["rep", "grid", "wall_time"], &rows)
}

fn run_constants(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let path = dir.join("constants.json");
    let (mc, computed, reused) = if path.exists() {
        let text = fs::read_to_string(&path)?;
        (serde_json::from_str::<ModelConstants>(&text)?, 0, 1)
    } else {
        let start = Instant::now();
        let mc = estimate_constants(&cfg.kernel, &cfg.constants_params)?;
        write_json(&path, &mc)?;
        let rows = vec![vec!["0".into(), cfg.constants_params.n.to_string(), format!("{:.6}", start.elapsed().as_secs_f64())]];
        records::write_rows(&dir.join("timings.csv"), &["rep", "grid", "wall_time"], &rows)?;
        (mc, 1, 0)
    };
    let summary = RunSummary {
        experiment: cfg.kind,
        kernel: cfg.kernel.to_string(),
        seed: cfg.seed,
        reps: cfg.reps,
        insufficient_data: mc.segments < 2,
        constants: None,
        groups: Vec::new(),
        failures: Vec::new(),
        model_constants: Some(mc),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(RunOutcome { summary, computed, reused, output: dir.to_path_buf() })
}

fn column(records: &RecordSet, g: u64, col: usize) -> Vec<f64> {
    records.range((g, 0)..=(g, u64::MAX)).map(|(_, r)| r.value(col)).collect()
}

fn summarize(
    cfg: &ExperimentConfig,
    consts: Option<UsedConstants>,
    records: &RecordSet,
    failures: Vec<Failure>,
) -> Result<RunSummary> {
    let lay = layout(cfg);
    let table = tw_table(cfg)?;
    let mut groups = Vec::new();
    let mut insufficient = false;
    for g in grid(cfg) {
        let samples = column(records, g, lay.stat_col);
        let mut extra = BTreeMap::new();
        let m = match cfg.kind {
            ExperimentKind::GueTw | ExperimentKind::BdpGue => g,
            _ => cfg.lines_at(g),
        };
        if samples.len() < 2 {
            insufficient = true;
        }
        let ks = if samples.is_empty() {
            None
        } else {
            match cfg.kind {
                ExperimentKind::Clt1d => Some(ks_one_sample(&samples, normal_cdf, cfg.alpha)?),
                ExperimentKind::TwLimit | ExperimentKind::GueTw => {
                    Some(ks_one_sample(&samples, |x| table.cdf(x).value, cfg.alpha)?)
                }
                ExperimentKind::BdpGue => {
                    let gue = column(records, g, 4);
                    if let Some(s) = StatSummary::of(&gue) {
                        extra.insert("gue_mean".into(), s.mean);
                        extra.insert("gue_variance".into(), s.variance);
                    }
                    Some(ks_two_sample(&samples, &gue, cfg.alpha)?)
                }
                _ => None,
            }
        };
        if cfg.kind == ExperimentKind::Sandwich {
            let l = column(records, g, 4);
            let up = column(records, g, 5);
            let lo = column(records, g, 6);
            let violations = (0..l.len()).filter(|&i| !(lo[i] <= l[i] && l[i] <= up[i])).count();
            extra.insert("violations".into(), violations as f64);
            if let Some(s) = StatSummary::of(&column(records, g, 10)) {
                extra.insert("centered_gap_mean".into(), s.mean);
                extra.insert("centered_gap_std_err".into(), s.std_err);
            }
            if cfg.staircase {
                let ok = column(records, g, 12);
                extra.insert("staircase_failures".into(), ok.iter().filter(|&&v| v != 1.0).count() as f64);
            }
        }
        if matches!(cfg.kind, ExperimentKind::TwLimit | ExperimentKind::GueTw) {
            extra.insert("table_mean".into(), table.mean());
            extra.insert("table_variance".into(), table.variance());
        }
        groups.push(GroupSummary {
            grid: g,
            m,
            statistic: lay.header[lay.stat_col].to_string(),
            stats: StatSummary::of(&samples),
            ks,
            extra,
        });
    }
    Ok(RunSummary {
        experiment: cfg.kind,
        kernel: cfg.kernel.to_string(),
        seed: cfg.seed,
        reps: cfg.reps,
        insufficient_data: insufficient,
        constants: consts,
        groups,
        failures,
        model_constants: None,
    })
}

fn ecdf_points(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().map(|(i, &x)| (x, (i + 1) as f64 / n)).collect()
}

fn emit_plot_data(cfg: &ExperimentConfig, dir: &Path, records: &RecordSet, summary: &RunSummary) -> Result<()> {
    let plot = dir.join("plot");
    fs::create_dir_all(&plot)?;
    let lay = layout(cfg);
    let stat = lay.header[lay.stat_col];
    for g in grid(cfg) {
        let pts = ecdf_points(&column(records, g, lay.stat_col));
        records::write_xy(&plot.join(format!("ecdf_{stat}_{g}.dat")), &format!("{stat} ecdf at {g}"), &pts)?;
        if cfg.kind == ExperimentKind::BdpGue {
            let pts = ecdf_points(&column(records, g, 4));
            records::write_xy(&plot.join(format!("ecdf_gue_{g}.dat")), &format!("gue ecdf at m={g}"), &pts)?;
        }
    }
    let grid_pts = |f: &dyn Fn(&GroupSummary) -> Option<f64>| -> Vec<(f64, f64)> {
        summary.groups.iter().filter_map(|gs| f(gs).map(|v| (gs.grid as f64, v))).collect()
    };
    match cfg.kind {
        ExperimentKind::Clt1d => {
            let pts: Vec<(f64, f64)> = (-400..=400).map(|i| i as f64 / 100.0).map(|x| (x, normal_cdf(x))).collect();
            records::write_xy(&plot.join("normal_cdf.dat"), "standard normal cdf", &pts)?;
        }
        ExperimentKind::TwLimit | ExperimentKind::GueTw => {
            let table = tw_table(cfg)?;
            let (x, f) = table.nodes();
            let pts: Vec<(f64, f64)> = x.iter().copied().zip(f.iter().copied()).collect();
            records::write_xy(&plot.join("tw_cdf.dat"), "Tracy-Widom GUE cdf", &pts)?;
            let ks = grid_pts(&|gs| gs.ks.map(|k| k.statistic));
            records::write_xy(&plot.join("ks_vs_grid.dat"), "KS distance against the table", &ks)?;
        }
        ExperimentKind::Sandwich => {
            let gap = grid_pts(&|gs| gs.stats.as_ref().map(|s| s.mean));
            records::write_xy(&plot.join("gap_vs_n.dat"), "mean (L_upper - L_lower) / n^b", &gap)?;
            let cg = grid_pts(&|gs| gs.extra.get("centered_gap_mean").copied());
            records::write_xy(&plot.join("centered_gap_vs_n.dat"), "mean |S - (L - C n)| / n^b", &cg)?;
        }
        _ => {}
    }
    Ok(())
}

/// Evaluates the tolerances of `cfg` against a finished run.
pub fn evaluate_checks(cfg: &ExperimentConfig, summary: &RunSummary) -> Vec<CheckOutcome> {
    let tol = &cfg.tolerances;
    let mut out = Vec::new();
    let mut push = |name: String, passed: bool, detail: String| out.push(CheckOutcome { name, passed, detail });
    if summary.insufficient_data {
        push("data".into(), false, "insufficient data".into());
        return out;
    }
    if !summary.failures.is_empty() {
        push("failures".into(), false, format!("{} replications failed", summary.failures.len()));
    }
    match cfg.kind {
        ExperimentKind::Clt1d => {
            for g in &summary.groups {
                let d = g.ks.map_or(f64::NAN, |k| k.statistic);
                push(format!("ks n={}", g.grid), d < tol.max_d, format!("D = {d:.4} (max {})", tol.max_d));
            }
        }
        ExperimentKind::TwLimit => {
            let ds: Vec<(u64, f64, f64)> = summary
                .groups
                .iter()
                .map(|g| {
                    let n = g.stats.as_ref().map_or(1, |s| s.count) as f64;
                    // largest binomial standard error of an ECDF value
                    (g.grid, g.ks.map_or(f64::NAN, |k| k.statistic), 0.5 / n.sqrt())
                })
                .collect();
            for w in ds.windows(2) {
                let band = tol.trend_sigmas * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt();
                push(
                    format!("trend n={}->{}", w[0].0, w[1].0),
                    w[1].1 <= w[0].1 + band,
                    format!("D {:.4} -> {:.4} (band {band:.4})", w[0].1, w[1].1),
                );
            }
            if let Some(last) = ds.last() {
                push(format!("ks n={}", last.0), last.1 < tol.max_d, format!("D = {:.4} (max {})", last.1, tol.max_d));
            }
        }
        ExperimentKind::Sandwich => {
            let v: f64 = summary.groups.iter().map(|g| g.extra.get("violations").copied().unwrap_or(0.0)).sum();
            push("sandwich".into(), v <= tol.max_violations as f64, format!("{v} violations"));
            if cfg.staircase {
                let s: f64 =
                    summary.groups.iter().map(|g| g.extra.get("staircase_failures").copied().unwrap_or(0.0)).sum();
                push("staircase".into(), s <= tol.max_violations as f64, format!("{s} invalid paths"));
            }
            let gap: Vec<f64> = summary.groups.iter().map(|g| g.stats.as_ref().map_or(f64::NAN, |s| s.mean)).collect();
            let cg: Vec<f64> =
                summary.groups.iter().map(|g| g.extra.get("centered_gap_mean").copied().unwrap_or(f64::NAN)).collect();
            if gap.len() > 1 {
                push("gap decreasing".into(), gap.windows(2).all(|w| w[1] < w[0]), format!("{gap:.4?}"));
                push("centered gap decreasing".into(), cg.windows(2).all(|w| w[1] < w[0]), format!("{cg:.4?}"));
            }
        }
        ExperimentKind::GueTw => {
            for g in &summary.groups {
                let d = g.ks.map_or(f64::NAN, |k| k.statistic);
                push(format!("ks m={}", g.grid), d < tol.max_d, format!("D = {d:.4} (max {})", tol.max_d));
                let mean = g.stats.as_ref().map_or(f64::NAN, |s| s.mean);
                let tm = g.extra.get("table_mean").copied().unwrap_or(f64::NAN);
                push(
                    format!("mean m={}", g.grid),
                    (mean - tm).abs() < tol.mean_tol,
                    format!("mean {mean:.4} vs table {tm:.4} (tol {})", tol.mean_tol),
                );
            }
        }
        ExperimentKind::BdpGue => {
            for g in &summary.groups {
                let p = g.ks.map_or(f64::NAN, |k| k.p_value);
                push(format!("ks m={}", g.grid), p > tol.min_p, format!("p = {p:.4} (min {})", tol.min_p));
            }
        }
        ExperimentKind::Constants => {
            if let Some(mc) = &summary.model_constants {
                if let Some(l0) = mc.lambda0 {
                    let d = (mc.lambda0_empirical.value - l0).abs();
                    push(
                        "lambda0".into(),
                        d < tol.lambda0_tol,
                        format!("empirical {:.5} vs product {l0:.5}", mc.lambda0_empirical.value),
                    );
                }
                if let (Some(lo), Some(hi)) = (tol.c_lo, tol.c_hi) {
                    let c = mc.c_ratio;
                    let ok = c.value >= lo - c.half_width && c.value <= hi + c.half_width;
                    push("C bracket".into(), ok, format!("C = {:.5} ± {:.5} vs [{lo}, {hi}]", c.value, c.half_width));
                }
            }
        }
    }
    out
}
