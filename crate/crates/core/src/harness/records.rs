//! Replication records and their CSV files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{bail, Result};

/// One CSV cell. Floats use 17 significant digits so they round-trip exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    U(u64),
    I(i64),
    F(f64),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::U(v) => v.to_string(),
            Cell::I(v) => v.to_string(),
            Cell::F(v) => format!("{v:.16e}"),
        }
    }
}

/// A stored replication: key `(grid value, rep)` plus its rendered row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicationRecord {
    pub grid: u64,
    pub rep: u64,
    pub row: Vec<String>,
}

impl ReplicationRecord {
    pub fn new(grid: u64, rep: u64, cells: &[Cell]) -> Self {
        Self { grid, rep, row: cells.iter().map(Cell::render).collect() }
    }

    pub fn value(&self, col: usize) -> f64 {
        self.row[col].parse().unwrap_or(f64::NAN)
    }
}

/// Records keyed and ordered by `(grid, rep)`.
pub type RecordSet = BTreeMap<(u64, u64), ReplicationRecord>;

/// Reads an existing records file; `grid_col` names the column holding the grid value.
pub fn read_records(path: &Path, header: &[&str], grid_col: usize) -> Result<RecordSet> {
    let mut out = RecordSet::new();
    if !path.exists() {
        return Ok(out);
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != header {
        bail!(Config, "{} has columns {:?}, expected {:?}", path.display(), found, header);
    }
    for row in rdr.records() {
        let row = row?;
        let parse = |i: usize| -> Result<u64> {
            row.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| {
                crate::Error::Input(format!("{}: bad key in row {:?}", path.display(), row))
            })
        };
        let rep = parse(0)?;
        let grid = parse(grid_col)?;
        out.insert((grid, rep), ReplicationRecord { grid, rep, row: row.iter().map(str::to_string).collect() });
    }
    Ok(out)
}

/// Writes `records` sorted by key, atomically (temp file then rename).
pub fn write_records(path: &Path, header: &[&str], records: &RecordSet) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        w.write_record(header)?;
        for r in records.values() {
            w.write_record(&r.row)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes a plain CSV with the given header and rows.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Gnuplot-ready two-column file.
pub fn write_xy(path: &Path, comment: &str, points: &[(f64, f64)]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "# {comment}")?;
    for (x, y) in points {
        writeln!(f, "{x:.10e} {y:.10e}")?;
    }
    f.flush()?;
    Ok(())
}
