//! CSV tables with a one-line JSON preamble.
//!
//! Layout:
//!
//! ```text
//! # {"schema_version":1,"command":"orbit","config":{...}}
//! t,x,y,h
//! 0.0000000000000000e0,...
//! ```
//!
//! The preamble carries the fully resolved configuration (seed included);
//! the next line is the only header row. Floats are written with 17
//! significant digits, so a value round-trips exactly.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::entropy::EntropyValue;
use crate::eos::EosCell;
use crate::hdiff::HDiffusionTable;
use crate::orbit::{TimedState, Trajectory};
use crate::model::{hamiltonian, ModelParams, PhaseState};
use crate::stochastic::{JumpPath, SdePath};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preamble {
    pub schema_version: u32,
    pub command: String,
    pub config: serde_json::Value,
}

impl Preamble {
    pub fn new(command: impl Into<String>, config: &impl Serialize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config: serde_json::to_value(config).expect("config serializes"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, preamble: &Preamble, mut out: W) -> std::io::Result<()> {
        let json = serde_json::to_string(preamble).map_err(std::io::Error::other)?;
        writeln!(out, "# {json}")?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self, preamble: &Preamble) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(preamble, &mut buf).expect("writing to memory");
        buf
    }
}

/// A table read back as strings.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTable {
    pub preamble: Preamble,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Column `name` parsed as floats.
    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column(name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error("missing '# {{json}}' preamble line")]
    MissingPreamble,
    #[error("bad preamble: {0}")]
    Preamble(#[from] serde_json::Error),
    #[error("schema version {found} is not {SCHEMA_VERSION}")]
    Schema { found: u32 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn read_table<R: BufRead>(mut input: R) -> Result<ParsedTable, ReadError> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    let json = first.trim_end().strip_prefix("# ").ok_or(ReadError::MissingPreamble)?;
    let preamble: Preamble = serde_json::from_str(json)?;
    if preamble.schema_version != SCHEMA_VERSION {
        return Err(ReadError::Schema { found: preamble.schema_version });
    }
    let mut r = csv::Reader::from_reader(input);
    let columns = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()?;
    Ok(ParsedTable { preamble, columns, rows })
}

pub fn trajectory_table(samples: &[TimedState], params: ModelParams) -> Table {
    let mut t = Table::new(&["t", "x", "y", "h"]);
    for s in samples {
        t.push(vec![s.t.into(), s.state.x().into(), s.state.y().into(), hamiltonian(s.state, params).into()]);
    }
    t
}

pub fn dense_trajectory_table(traj: &Trajectory, params: ModelParams) -> Table {
    trajectory_table(&traj.samples, params)
}

pub fn eos_table(cells: &[EosCell]) -> Table {
    let mut t = Table::new(&[
        "alpha", "h", "tau", "area_a", "ln_area", "theta", "f_alpha_abs", "area_lebesgue", "status",
    ]);
    for c in cells {
        let mut row: Vec<Cell> = vec![c.alpha.into(), c.h.into()];
        match &c.outcome {
            Ok(r) => {
                row.extend([r.tau, r.area_a, r.ln_area, r.theta, r.f_alpha_abs, r.area_lebesgue].map(Cell::from));
                row.push("ok".into());
            }
            Err(e) => {
                row.extend([f64::NAN; 6].map(Cell::from));
                row.push(e.name().into());
            }
        }
        t.push(row);
    }
    t
}

/// `curve` indexes the energy level; points run once around the orbit.
pub fn contour_table(curves: &[(f64, Vec<TimedState>)], params: ModelParams) -> Table {
    let mut t = Table::new(&["alpha", "h", "curve", "t", "x", "y"]);
    for (i, (h, pts)) in curves.iter().enumerate() {
        for s in pts {
            t.push(vec![params.alpha().into(), (*h).into(), i.into(), s.t.into(), s.state.x().into(), s.state.y().into()]);
        }
    }
    t
}

pub fn jump_table(paths: &[JumpPath]) -> Table {
    let mut t = Table::new(&["path", "t", "m", "n", "x", "y"]);
    for (i, p) in paths.iter().enumerate() {
        for e in &p.events {
            t.push(vec![
                i.into(),
                e.t.into(),
                e.m.into(),
                e.n.into(),
                (e.m as f64 / p.omega).into(),
                (e.n as f64 / p.omega).into(),
            ]);
        }
    }
    t
}

pub fn sde_table(paths: &[SdePath], params: ModelParams) -> Table {
    let mut t = Table::new(&["path", "t", "x", "y", "h"]);
    for (i, p) in paths.iter().enumerate() {
        for s in &p.samples {
            t.push(vec![
                i.into(),
                s.t.into(),
                s.state.x().into(),
                s.state.y().into(),
                hamiltonian(s.state, params).into(),
            ]);
        }
    }
    t
}

pub fn hdiff_table(table: &HDiffusionTable) -> Table {
    let mut t = Table::new(&["h", "b", "a", "pss"]);
    for (h, b, a, p) in table.rows() {
        t.push(vec![h.into(), b.into(), a.into(), p.into()]);
    }
    t
}

/// `rel_change` is relative to the first row.
pub fn entropy_table(series: &[(f64, EntropyValue)]) -> Table {
    let mut t = Table::new(&["t", "value", "rel_change", "leaked_nodes"]);
    let v0 = series.first().map_or(0.0, |s| s.1.value);
    for (time, v) in series {
        let rel = if v0 == 0.0 { v.value - v0 } else { (v.value - v0) / v0.abs() };
        t.push(vec![(*time).into(), v.value.into(), rel.into(), v.leaked_nodes.into()]);
    }
    t
}

/// Drift vectors `(fx, fy)` sampled at grid points.
pub fn field_table(points: &[(PhaseState, [f64; 2])], params: ModelParams, epsilon: f64) -> Table {
    let mut t = Table::new(&["alpha", "epsilon", "x", "y", "fx", "fy"]);
    for (s, f) in points {
        t.push(vec![params.alpha().into(), epsilon.into(), s.x().into(), s.y().into(), f[0].into(), f[1].into()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, 2.61, 1e-300, -7.25e12, f64::MIN_POSITIVE] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn write_then_read() {
        let mut t = Table::new(&["a", "b", "label"]);
        t.push(vec![1.5.into(), 7u64.into(), "ok".into()]);
        t.push(vec![f64::NAN.into(), 0u64.into(), "EnergyBelowMinimum".into()]);
        let pre = Preamble::new("test", &serde_json::json!({"seed": 42}));
        let bytes = t.to_bytes(&pre);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("# {\"schema_version\":1"));
        assert_eq!(text.lines().nth(1).unwrap(), "a,b,label");
        let back = read_table(&bytes[..]).unwrap();
        assert_eq!(back.preamble, pre);
        assert_eq!(back.floats("a").unwrap()[0], 1.5);
        assert!(back.floats("a").unwrap()[1].is_nan());
        assert_eq!(back.rows[1][2], "EnergyBelowMinimum");
    }

    #[test]
    fn rejects_missing_preamble_and_wrong_schema() {
        assert!(matches!(read_table(&b"a,b\n1,2\n"[..]), Err(ReadError::MissingPreamble)));
        let bad = b"# {\"schema_version\":99,\"command\":\"x\",\"config\":null}\na\n1\n";
        assert!(matches!(read_table(&bad[..]), Err(ReadError::Schema { found: 99 })));
    }
}
