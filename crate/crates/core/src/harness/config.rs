//! Flat `key = value` experiment configs.
//!
//! ```text
//! [experiment]
//! name = clt1d
//! seed = 7
//! reps = 2000
//! output = out/clt1d
//!
//! [kernel]
//! kernel = constant
//! p = 0.5
//!
//! [clt1d]
//! n = 1000, 100000
//!
//! [check]
//! max_d = 0.05
//! ```
//!
//! `[experiment]` and `[kernel]` are shared; the parameter section is named
//! after the experiment; `[check]` overrides acceptance tolerances.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::constants::{admissible_exponent, ConstantsParams};
use crate::error::{bail, Error, Result};
use crate::lattice::LatticeMode;
use crate::model::ConnectivityKernel;
use crate::rmt::BdpRecursion;
use crate::stats::Centering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Clt1d,
    TwLimit,
    Sandwich,
    GueTw,
    BdpGue,
    Constants,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] =
        [Self::Clt1d, Self::TwLimit, Self::Sandwich, Self::GueTw, Self::BdpGue, Self::Constants];

    pub fn name(self) -> &'static str {
        match self {
            Self::Clt1d => "clt1d",
            Self::TwLimit => "tw-limit",
            Self::Sandwich => "sandwich",
            Self::GueTw => "gue-tw",
            Self::BdpGue => "bdp-gue",
            Self::Constants => "constants",
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Self::Clt1d => &["n", "mode", "c", "lam_sig", "constants_file", "alpha"],
            Self::TwLimit => &["n", "a", "mode", "centering", "c", "lam_sig", "constants_file", "alpha"],
            Self::Sandwich => &["n", "a", "m", "c", "constants_file", "staircase"],
            Self::GueTw => &["m", "alpha", "table"],
            Self::BdpGue => &["t", "m", "step", "recursion", "alpha"],
            Self::Constants => &["n", "window", "burnin", "direct_n", "direct_reps", "bootstrap"],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match Self::ALL.iter().find(|k| k.name() == s) {
            Some(&k) => Ok(k),
            None => bail!(Config, "unknown experiment `{s}`"),
        }
    }
}

const EXPERIMENT_KEYS: &[&str] = &["name", "seed", "reps", "output", "force", "emit_plot_data"];
const KERNEL_KEYS: &[&str] = &["kernel", "p", "ph", "pv", "pvfar", "r", "table"];
const CHECK_KEYS: &[&str] =
    &["max_d", "min_p", "mean_tol", "max_violations", "lambda0_tol", "c_lo", "c_hi", "trend_sigmas"];

/// Acceptance thresholds used by `experiment check`.
#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    /// Largest KS distance accepted (last grid point for `tw-limit`).
    pub max_d: f64,
    /// Smallest KS p-value accepted (`bdp-gue`).
    pub min_p: f64,
    /// Largest `|sample mean - table mean|` (`gue-tw`).
    pub mean_tol: f64,
    pub max_violations: u64,
    pub lambda0_tol: f64,
    pub c_lo: Option<f64>,
    pub c_hi: Option<f64>,
    /// Width of the Monte Carlo band, in standard errors, for trend checks.
    pub trend_sigmas: f64,
}

impl Tolerances {
    fn defaults(kind: ExperimentKind) -> Self {
        Self {
            max_d: if kind == ExperimentKind::TwLimit { 0.2 } else { 0.05 },
            min_p: 0.01,
            mean_tol: 0.1,
            max_violations: 0,
            lambda0_tol: 0.002,
            c_lo: None,
            c_hi: None,
            trend_sigmas: 2.0,
        }
    }
}

/// Where the growth constants fed to the transforms come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConstantsSource {
    /// `c` and `lam_sig` given in the config.
    Explicit { c: f64, lam_sig: Option<f64> },
    /// A reference file in the shipped format.
    File(PathBuf),
    /// The reference table shipped with the crate.
    Shipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub kernel: ConnectivityKernel,
    pub seed: u64,
    pub reps: u64,
    pub output: PathBuf,
    /// Skip the admissible-exponent check.
    pub force: bool,
    pub emit_plot_data: bool,
    pub n_grid: Vec<u64>,
    pub a: Option<f64>,
    /// Explicit line count (overrides `a` where allowed).
    pub m: Option<u64>,
    pub mode: LatticeMode,
    pub centering: Centering,
    pub constants: ConstantsSource,
    pub alpha: f64,
    pub staircase: bool,
    pub t: f64,
    pub step: f64,
    pub recursion: BdpRecursion,
    pub tw_table: Option<PathBuf>,
    pub constants_params: ConstantsParams,
    pub tolerances: Tolerances,
    /// Canonical `section.key = value` listing, used to guard resumed runs.
    pub canonical: String,
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_sections(text: &str) -> Result<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                bail!(Config, "line {}: malformed section header `{line}`", no + 1);
            };
            let name = name.trim().to_string();
            if sections.contains_key(&name) {
                bail!(Config, "line {}: section [{name}] repeated", no + 1);
            }
            sections.insert(name.clone(), BTreeMap::new());
            current = Some(name);
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!(Config, "line {}: expected `key = value`, got `{line}`", no + 1);
        };
        let Some(section) = &current else {
            bail!(Config, "line {}: `{}` appears before any section", no + 1, k.trim());
        };
        let entries = sections.get_mut(section).expect("section inserted");
        if entries.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            bail!(Config, "line {}: key `{}` repeated in [{section}]", no + 1, k.trim());
        }
    }
    Ok(sections)
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!(Config, "`{key}`: expected true or false, got `{v}`"),
    }
}

/// `1000, 1e4, 100000` as integers.
fn parse_grid(v: &str) -> Result<Vec<u64>> {
    v.split(',')
        .map(|s| {
            let s = s.trim();
            let x: f64 = parse_num("n", s)?;
            if !(x >= 1.0) || x.fract() != 0.0 || x > 1e15 {
                bail!(Config, "`n`: `{s}` is not a positive integer");
            }
            Ok(x as u64)
        })
        .collect()
}

pub fn parse_centering(v: &str) -> Result<Centering> {
    match v {
        "lines" => Ok(Centering::Lines),
        "literal" => Ok(Centering::Literal),
        _ => bail!(Config, "`centering`: expected lines or literal, got `{v}`"),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses and validates a config; every unknown section or key is reported at once.
    pub fn parse(text: &str) -> Result<Self> {
        let sections = parse_sections(text)?;
        let Some(exp) = sections.get("experiment") else {
            bail!(Config, "missing [experiment] section");
        };
        let Some(name) = exp.get("name") else {
            bail!(Config, "[experiment] needs `name`");
        };
        let kind: ExperimentKind = name.parse()?;

        let mut unknown = Vec::new();
        for (section, entries) in &sections {
            let allowed: &[&str] = match section.as_str() {
                "experiment" => EXPERIMENT_KEYS,
                "kernel" => KERNEL_KEYS,
                "check" => CHECK_KEYS,
                s if s == kind.name() => kind.keys(),
                s => {
                    unknown.push(format!("[{s}]"));
                    continue;
                }
            };
            unknown.extend(entries.keys().filter(|k| !allowed.contains(&k.as_str())).map(|k| format!("{section}.{k}")));
        }
        if !unknown.is_empty() {
            bail!(Config, "unknown config keys: {}", unknown.join(", "));
        }

        let empty = BTreeMap::new();
        let params = sections.get(kind.name()).unwrap_or(&empty);
        let check = sections.get("check").unwrap_or(&empty);
        let kernel_sec = sections.get("kernel").unwrap_or(&empty);

        let kernel = if kernel_sec.is_empty() {
            ConnectivityKernel::constant(0.5)?
        } else {
            let spec: Vec<String> = kernel_sec.iter().map(|(k, v)| format!("{k}={}", v.replace(' ', ""))).collect();
            ConnectivityKernel::parse(&spec.join(" "))?
        };

        let get = |key: &str| params.get(key).map(String::as_str);
        let seed = exp.get("seed").map(|v| parse_num("seed", v)).transpose()?.unwrap_or(1);
        let reps = exp.get("reps").map(|v| parse_num("reps", v)).transpose()?.unwrap_or(100);
        let output = PathBuf::from(exp.get("output").cloned().unwrap_or_else(|| format!("out/{}", kind.name())));
        let force = exp.get("force").map(|v| parse_bool("force", v)).transpose()?.unwrap_or(false);
        let emit_plot_data =
            exp.get("emit_plot_data").map(|v| parse_bool("emit_plot_data", v)).transpose()?.unwrap_or(false);

        let default_n = match kind {
            ExperimentKind::Constants => vec![100_000],
            ExperimentKind::Sandwich => vec![300],
            _ => vec![1000],
        };
        let n_grid = get("n").map(parse_grid).transpose()?.unwrap_or(default_n);
        let a = get("a").map(|v| parse_num::<f64>("a", v)).transpose()?;
        let m = get("m").map(|v| parse_num::<u64>("m", v)).transpose()?;
        if m == Some(0) {
            bail!(Config, "`m` must be at least 1");
        }
        let default_mode = LatticeMode::Lazy;
        let mode = get("mode").map(str::parse).transpose()?.unwrap_or(default_mode);
        match (kind, mode) {
            (ExperimentKind::Clt1d, LatticeMode::Lazy | LatticeMode::Materialized) => {}
            (ExperimentKind::TwLimit, LatticeMode::Lazy | LatticeMode::Materialized | LatticeMode::Streamed) => {}
            (ExperimentKind::Clt1d | ExperimentKind::TwLimit, other) => {
                bail!(Config, "mode `{other}` is not available for {kind}")
            }
            _ => {}
        }
        let centering = get("centering").map(parse_centering).transpose()?.unwrap_or_default();
        let c = get("c").map(|v| parse_num::<f64>("c", v)).transpose()?;
        let lam_sig = get("lam_sig").map(|v| parse_num::<f64>("lam_sig", v)).transpose()?;
        let constants = match (c, get("constants_file")) {
            (Some(_), Some(_)) => bail!(Config, "give either `c` or `constants_file`, not both"),
            (Some(c), None) => {
                if kind != ExperimentKind::Sandwich && lam_sig.is_none() {
                    bail!(Config, "`c` needs `lam_sig`");
                }
                ConstantsSource::Explicit { c, lam_sig }
            }
            (None, Some(f)) => ConstantsSource::File(PathBuf::from(f)),
            (None, None) => {
                if lam_sig.is_some() {
                    bail!(Config, "`lam_sig` needs `c`");
                }
                ConstantsSource::Shipped
            }
        };
        let alpha = get("alpha").map(|v| parse_num::<f64>("alpha", v)).transpose()?.unwrap_or(0.01);
        if !(alpha > 0.0 && alpha < 1.0) {
            bail!(Config, "`alpha` must lie in (0, 1)");
        }
        let staircase = get("staircase").map(|v| parse_bool("staircase", v)).transpose()?.unwrap_or(false);
        let t = get("t").map(|v| parse_num::<f64>("t", v)).transpose()?.unwrap_or(1.0);
        let step = get("step").map(|v| parse_num::<f64>("step", v)).transpose()?.unwrap_or(1e-3);
        let recursion = get("recursion").map(str::parse).transpose()?.unwrap_or_default();
        let tw_table = get("table").map(PathBuf::from);

        let defaults = ConstantsParams::default();
        let constants_params = ConstantsParams {
            n: n_grid[0],
            detect_window: get("window").map(|v| parse_num("window", v)).transpose()?,
            burnin: get("burnin").map(|v| parse_num("burnin", v)).transpose()?.unwrap_or(defaults.burnin),
            reps: reps.max(1),
            seed,
            direct_n: get("direct_n").map(|v| parse_num("direct_n", v)).transpose()?.unwrap_or(defaults.direct_n),
            direct_reps: get("direct_reps")
                .map(|v| parse_num("direct_reps", v))
                .transpose()?
                .unwrap_or(defaults.direct_reps),
            bootstrap: get("bootstrap").map(|v| parse_num("bootstrap", v)).transpose()?.unwrap_or(defaults.bootstrap),
        };

        let mut tolerances = Tolerances::defaults(kind);
        for (k, v) in check {
            match k.as_str() {
                "max_d" => tolerances.max_d = parse_num(k, v)?,
                "min_p" => tolerances.min_p = parse_num(k, v)?,
                "mean_tol" => tolerances.mean_tol = parse_num(k, v)?,
                "max_violations" => tolerances.max_violations = parse_num(k, v)?,
                "lambda0_tol" => tolerances.lambda0_tol = parse_num(k, v)?,
                "c_lo" => tolerances.c_lo = Some(parse_num(k, v)?),
                "c_hi" => tolerances.c_hi = Some(parse_num(k, v)?),
                "trend_sigmas" => tolerances.trend_sigmas = parse_num(k, v)?,
                _ => unreachable!("keys validated above"),
            }
        }

        match kind {
            ExperimentKind::TwLimit if a.is_none() => bail!(Config, "tw-limit needs `a`"),
            ExperimentKind::Sandwich if a.is_none() && m.is_none() => bail!(Config, "sandwich needs `a` or `m`"),
            _ => {}
        }
        if let Some(a) = a {
            if !(a > 0.0 && a < 1.0) {
                bail!(Config, "`a` must lie in (0, 1), got {a}");
            }
            let r = kernel.moment_order().unwrap_or(f64::NAN);
            let adm = admissible_exponent(r);
            if !force && !(a < adm.a_max) {
                bail!(Config, "a = {a} is not below the admissible exponent {} for r = {r}; set force = true", adm.a_max);
            }
        }

        let mut canonical = String::new();
        for (section, entries) in &sections {
            for (k, v) in entries {
                // records do not depend on these, and reps may grow on a rerun
                if section == "experiment" && matches!(k.as_str(), "output" | "emit_plot_data" | "reps") {
                    continue;
                }
                canonical.push_str(&format!("{section}.{k} = {v}\n"));
            }
        }

        Ok(Self {
            kind,
            kernel,
            seed,
            reps,
            output,
            force,
            emit_plot_data,
            n_grid,
            a,
            m,
            mode,
            centering,
            constants,
            alpha,
            staircase,
            t,
            step,
            recursion,
            tw_table,
            constants_params,
            tolerances,
            canonical,
        })
    }

    /// Line count at grid point `n`.
    pub fn lines_at(&self, n: u64) -> u64 {
        match (self.m, self.a) {
            (Some(m), _) => m,
            (None, Some(a)) => crate::stats::lines_for(n, a),
            (None, None) => 1,
        }
    }

    /// Shrinkage exponent `b = 1/2 - a/6` (`1/2` when only `m` is given).
    pub fn shrink_exponent(&self) -> f64 {
        0.5 - self.a.unwrap_or(0.0) / 6.0
    }
}
