use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use drg_core::bounds::{analyze_realization, compute_bounds};
use drg_core::constants::{estimate_constants, reference_constants, ConstantsParams};
use drg_core::harness::records::{write_rows, write_xy, Cell};
use drg_core::harness::{evaluate_checks, rep_seed, run_experiment, ExperimentConfig};
use drg_core::lattice::{longest_path_2d, longest_path_2d_field, longest_path_2d_lazy, LatticeMode};
use drg_core::model::{CoinField, ConnectivityKernel, EdgeOracle, Window};
use drg_core::paths1d::{longest_path_1d, longest_path_1d_lazy};
use drg_core::rmt::{bdp_sample_with, gue_lmax, tw_rescale, BdpRecursion, TwTable};
use drg_core::stats::{clt_statistic, ks_one_sample, ks_two_sample, lines_for, normal_cdf, KsResult};
use drg_core::{par, Error};

/// Exit status for a failed `experiment check`.
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "drg", version, about = "Longest paths in directed random graphs on Z x Z")]
struct Cli {
    /// Worker threads (default: $DRG_WORKERS, else all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also write gnuplot-ready two-column files next to the output.
    #[arg(long, global = true)]
    emit_plot_data: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct KernelArgs {
    /// Constant connection probability.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Full kernel spec, e.g. "kernel=dd ph=0.5,0.25 pv=0.5" (overrides --p).
    #[arg(long)]
    kernel: Option<String>,
}

impl KernelArgs {
    fn kernel(&self) -> Result<ConnectivityKernel> {
        Ok(match &self.kernel {
            Some(spec) => ConnectivityKernel::parse(spec)?,
            None => ConnectivityKernel::constant(self.p)?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate λ₀, C and σ₀² by simulation.
    Constants {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        /// Skeleton detection window (default from the kernel).
        #[arg(long)]
        window: Option<u64>,
        #[arg(long, default_value_t = 10)]
        burnin: usize,
        #[arg(long, default_value_t = 10)]
        reps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        direct_n: u64,
        #[arg(long, default_value_t = 100)]
        direct_reps: u64,
        #[arg(long, default_value_t = 200)]
        bootstrap: usize,
        /// JSON output (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Append a `p lambda0 C C_hw sigma0_sq sigma0_sq_hw` row to this reference file.
        #[arg(long)]
        append_reference: Option<PathBuf>,
    },
    /// Sample L_{n,m}.
    SampleLnm {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        n: u64,
        /// m = floor(n^a).
        #[arg(long, conflicts_with = "m")]
        a: Option<f64>,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long, default_value_t = 100)]
        reps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// materialized, streamed, lazy.
        #[arg(long, default_value = "lazy")]
        mode: LatticeMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pathwise upper and lower bounds on shared realizations.
    Bounds {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        m: u64,
        #[arg(long, default_value_t = 100)]
        reps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Growth constant inside S (default: reference table).
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Standardized L[1, n] samples and their KS distance to the normal law.
    Clt1d {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1000)]
        reps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, requires = "lam_sig")]
        c: Option<f64>,
        #[arg(long, requires = "c")]
        lam_sig: Option<f64>,
        /// lazy or materialized.
        #[arg(long, default_value = "lazy")]
        mode: LatticeMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Largest GUE eigenvalues and their Tracy-Widom rescaling.
    Gue {
        #[arg(long)]
        m: u64,
        #[arg(long, default_value_t = 1000)]
        reps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brownian directed percolation Z_{t,m}.
    Bdp {
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long)]
        m: u64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value_t = 1000)]
        reps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// bridge, partition or lattice.
        #[arg(long, default_value = "bridge")]
        recursion: BdpRecursion,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kolmogorov-Smirnov test of a CSV column.
    Ks {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        column: String,
        /// tw, normal, or csv:<path> (same column name).
        #[arg(long)]
        against: String,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        /// Tracy-Widom table to use instead of the shipped one.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Configured experiments.
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
}

#[derive(Subcommand)]
enum ExperimentAction {
    /// Run (or resume) an experiment.
    Run { config: PathBuf },
    /// Run (or resume) an experiment and test its tolerances; exit 3 on failure.
    Check { config: PathBuf },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Size(_) | Error::BufferExhausted(_) | Error::Io(_)) => 4,
        Some(_) => 2,
        None if err.downcast_ref::<std::io::Error>().is_some() => 4,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.workers;
    let result = par::with_workers(workers, || run(cli));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Rows to CSV at `out`, or stdout.
fn emit_csv(out: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    match out {
        Some(path) => write_rows(path, header, rows)?,
        None => {
            println!("{}", header.join(","));
            for r in rows {
                println!("{}", r.join(","));
            }
        }
    }
    Ok(())
}

fn render(cells: &[Cell]) -> Vec<String> {
    cells.iter().map(Cell::render).collect()
}

/// `<out>.<tag>.dat` with the empirical CDF of `samples`.
fn plot_ecdf(out: Option<&Path>, tag: &str, samples: &[f64]) -> Result<()> {
    let Some(out) = out else {
        bail!("--emit-plot-data needs --out");
    };
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let pts: Vec<(f64, f64)> = s.iter().enumerate().map(|(i, &x)| (x, (i + 1) as f64 / n)).collect();
    let path = out.with_extension(format!("{tag}.dat"));
    write_xy(&path, &format!("{tag} ecdf"), &pts)?;
    Ok(())
}

fn print_ks(label: &str, ks: &KsResult) {
    eprintln!(
        "{label}: D = {:.5}, p = {:.4}, n = {}{}",
        ks.statistic,
        ks.p_value,
        ks.n1,
        if ks.reject { " (rejected)" } else { "" }
    );
}

fn collect<T>(results: Vec<drg_core::Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect::<drg_core::Result<Vec<T>>>().map_err(Into::into)
}

fn run(cli: Cli) -> Result<u8> {
    let plot = cli.emit_plot_data;
    match cli.command {
        Command::Constants {
            kernel,
            n,
            window,
            burnin,
            reps,
            seed,
            direct_n,
            direct_reps,
            bootstrap,
            out,
            append_reference,
        } => {
            let k = kernel.kernel()?;
            let params =
                ConstantsParams { n, detect_window: window, burnin, reps, seed, direct_n, direct_reps, bootstrap };
            let mc = estimate_constants(&k, &params)?;
            let json = serde_json::to_string_pretty(&mc)?;
            match &out {
                Some(p) => std::fs::write(p, json + "\n")?,
                None => println!("{json}"),
            }
            if let Some(path) = append_reference {
                let Some(p) = k.constant_p() else {
                    bail!("reference rows are indexed by p; use a constant kernel");
                };
                let row = format!(
                    "{p} {:.14} {:.8} {:.8} {:.6} {:.6}\n",
                    mc.lambda0.unwrap_or(mc.lambda0_empirical.value),
                    mc.c_hat.value,
                    mc.c_hat.half_width,
                    mc.sigma0_sq.value,
                    mc.sigma0_sq.half_width
                );
                use std::io::Write;
                let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&path)?;
                f.write_all(row.as_bytes())?;
            }
            Ok(0)
        }
        Command::SampleLnm { kernel, n, a, m, reps, seed, mode, out } => {
            let k = kernel.kernel()?;
            let m = match (m, a) {
                (Some(m), _) => m,
                (None, Some(a)) => lines_for(n, a),
                (None, None) => bail!("give --m or --a"),
            };
            let rows = collect(par::replicate(reps, |rep| -> drg_core::Result<Vec<Cell>> {
                let s = rep_seed(seed, n, rep);
                let l = match mode {
                    LatticeMode::Lazy => longest_path_2d_lazy(&k, n, m, s)?.l,
                    LatticeMode::Streamed => longest_path_2d_field(&CoinField::new(k.clone(), s), n, m)?.l,
                    LatticeMode::Materialized => {
                        let w = Window::new(0, n as i64, 1, m as i64)?;
                        longest_path_2d(&EdgeOracle::materialize_window(&k, w, s)?)?.l
                    }
                    LatticeMode::Brute => {
                        let w = Window::new(0, n as i64, 1, m as i64)?;
                        drg_core::lattice::brute_force_2d(&EdgeOracle::materialize_window(&k, w, s)?)?
                    }
                };
                Ok(vec![Cell::U(rep), Cell::U(n), Cell::U(m), Cell::U(l), Cell::U(s.master_seed)])
            }))?;
            let ls: Vec<f64> = rows.iter().map(|r| r[3].render().parse().unwrap_or(f64::NAN)).collect();
            emit_csv(out.as_deref(), &["rep", "n", "m", "L", "seed"], &rows.iter().map(|r| render(r)).collect::<Vec<_>>())?;
            if plot {
                plot_ecdf(out.as_deref(), "L", &ls)?;
            }
            Ok(0)
        }
        Command::Bounds { kernel, n, m, reps, seed, c, out } => {
            let k = kernel.kernel()?;
            let c = match (c, k.constant_p()) {
                (Some(c), _) => c,
                (None, Some(p)) => reference_constants(p)?.c,
                (None, None) => bail!("give --c for this kernel"),
            };
            let rows = collect(par::replicate(reps, |rep| -> drg_core::Result<Vec<Cell>> {
                let field = CoinField::new(k.clone(), rep_seed(seed, n, rep));
                let l = longest_path_2d_field(&field, n, m)?.l;
                let b = compute_bounds(&analyze_realization(&field, n, m, None)?, n, c)?;
                Ok(vec![Cell::U(rep), Cell::U(l), Cell::I(b.l_upper), Cell::I(b.l_lower), Cell::F(b.s), Cell::U(b.delta_sum)])
            }))?;
            let violations = rows
                .iter()
                .filter(|r| match (r[1], r[2], r[3]) {
                    (Cell::U(l), Cell::I(up), Cell::I(lo)) => !(lo <= l as i64 && l as i64 <= up),
                    _ => false,
                })
                .count();
            eprintln!("sandwich violations: {violations} of {reps}");
            let gaps: Vec<f64> = rows
                .iter()
                .map(|r| match (r[2], r[3]) {
                    (Cell::I(up), Cell::I(lo)) => (up - lo) as f64,
                    _ => f64::NAN,
                })
                .collect();
            let header = ["rep", "L", "L_upper", "L_lower", "S", "delta_sum"];
            emit_csv(out.as_deref(), &header, &rows.iter().map(|r| render(r)).collect::<Vec<_>>())?;
            if plot {
                plot_ecdf(out.as_deref(), "gap", &gaps)?;
            }
            Ok(0)
        }
        Command::Clt1d { kernel, n, reps, seed, c, lam_sig, mode, out } => {
            let k = kernel.kernel()?;
            let (c, lam_sig) = match (c, lam_sig, k.constant_p()) {
                (Some(c), Some(ls), _) => (c, ls),
                (_, _, Some(p)) => {
                    let r = reference_constants(p)?;
                    (r.c, r.lam_sig())
                }
                _ => bail!("give --c and --lam-sig for this kernel"),
            };
            let rows = collect(par::replicate(reps, |rep| -> drg_core::Result<(Vec<Cell>, f64)> {
                let s = rep_seed(seed, n, rep);
                let l = match mode {
                    LatticeMode::Lazy => longest_path_1d_lazy(&k, n, s)?,
                    _ => {
                        let o = EdgeOracle::materialize_window(&k, Window::line(1, n as i64, 1)?, s)?;
                        longest_path_1d(&o, 1, 1, n as i64)?
                    }
                };
                let z = clt_statistic(l as f64, n, c, lam_sig)?;
                Ok((vec![Cell::U(rep), Cell::U(n), Cell::U(l), Cell::F(z)], z))
            }))?;
            let z: Vec<f64> = rows.iter().map(|r| r.1).collect();
            if !z.is_empty() {
                print_ks("KS vs standard normal", &ks_one_sample(&z, normal_cdf, 0.01)?);
            }
            let body: Vec<Vec<String>> = rows.iter().map(|r| render(&r.0)).collect();
            emit_csv(out.as_deref(), &["rep", "n", "L", "z"], &body)?;
            if plot {
                plot_ecdf(out.as_deref(), "z", &z)?;
            }
            Ok(0)
        }
        Command::Gue { m, reps, seed, out } => {
            let rows = collect(par::replicate(reps, |rep| -> drg_core::Result<(f64, f64)> {
                let l = gue_lmax(m, rep_seed(seed, m, rep))?;
                Ok((l, tw_rescale(l, m)))
            }))?;
            let tw: Vec<f64> = rows.iter().map(|r| r.1).collect();
            if !tw.is_empty() {
                let table = TwTable::shipped();
                print_ks("KS vs Tracy-Widom", &ks_one_sample(&tw, |x| table.cdf(x).value, 0.01)?);
            }
            let body: Vec<Vec<String>> = rows
                .iter()
                .enumerate()
                .map(|(rep, r)| render(&[Cell::U(rep as u64), Cell::U(m), Cell::F(r.0), Cell::F(r.1)]))
                .collect();
            emit_csv(out.as_deref(), &["rep", "m", "lmax", "tw"], &body)?;
            if plot {
                plot_ecdf(out.as_deref(), "tw", &tw)?;
            }
            Ok(0)
        }
        Command::Bdp { t, m, step, reps, seed, recursion, out } => {
            let z = collect(par::replicate(reps, |rep| {
                bdp_sample_with(t, m, step, rep_seed(seed, m, rep).child(1), recursion).map(|r| r.z)
            }))?;
            let body: Vec<Vec<String>> = z
                .iter()
                .enumerate()
                .map(|(rep, &v)| render(&[Cell::U(rep as u64), Cell::F(t), Cell::U(m), Cell::F(v)]))
                .collect();
            emit_csv(out.as_deref(), &["rep", "t", "m", "z"], &body)?;
            if plot {
                plot_ecdf(out.as_deref(), "z", &z)?;
            }
            Ok(0)
        }
        Command::Ks { input, column, against, alpha, table } => {
            let xs = read_column(&input, &column)?;
            let ks = match against.as_str() {
                "normal" => ks_one_sample(&xs, normal_cdf, alpha)?,
                "tw" => {
                    let t = match table {
                        Some(p) => TwTable::load(&p)?,
                        None => TwTable::shipped(),
                    };
                    ks_one_sample(&xs, |x| t.cdf(x).value, alpha)?
                }
                other => match other.strip_prefix("csv:") {
                    Some(path) => ks_two_sample(&xs, &read_column(Path::new(path), &column)?, alpha)?,
                    None => return Err(Error::Config(format!("--against must be tw, normal or csv:<path>, got `{other}`")).into()),
                },
            };
            println!("{}", serde_json::to_string_pretty(&ks)?);
            Ok(0)
        }
        Command::Experiment { action } => {
            let (path, check) = match &action {
                ExperimentAction::Run { config } => (config, false),
                ExperimentAction::Check { config } => (config, true),
            };
            let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
            cfg.emit_plot_data |= plot;
            let outcome = run_experiment(&cfg, cli.workers)?;
            eprintln!(
                "{}: {} replications computed, {} reused, output in {}",
                cfg.kind,
                outcome.computed,
                outcome.reused,
                outcome.output.display()
            );
            if !check {
                return Ok(0);
            }
            let checks = evaluate_checks(&cfg, &outcome.summary);
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            Ok(if ok { 0 } else { EXIT_CHECK_FAILED })
        }
    }
}

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| anyhow!(Error::Input(format!("{} has no column `{column}`", path.display()))))?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let v = row.get(idx).unwrap_or("");
        out.push(v.parse().map_err(|_| Error::Input(format!("{}: `{v}` is not a number", path.display())))?);
    }
    Ok(out)
}
