//! Per-step simulation records and their CSV form.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{MfacError, Result};

/// Columns before the pseudo-gradient block.
pub const FIXED_COLUMNS: [&str; 5] = ["k", "y_star", "y", "u", "e"];

/// Scientific notation with 17 significant digits; parses back to the same value.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// The step whose output left the admissible range; that row is not recorded.
    Diverged {
        k: i64,
    },
}

/// Row `k` holds `y*(k+1)`, the resulting `y(k+1)`, the applied `u(k)`,
/// `e = y* - y` and the pseudo-gradient used to compute `u(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: i64,
    pub y_star: f64,
    pub y: f64,
    pub u: f64,
    pub e: f64,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pg_len: usize,
    rows: Vec<TraceRow>,
    pub status: Termination,
    /// Input box of a constrained run; not persisted.
    pub input_bounds: Option<(f64, f64)>,
}

impl SimTrace {
    pub fn new(pg_len: usize) -> Self {
        Self {
            pg_len,
            rows: Vec::new(),
            status: Termination::Completed,
            input_bounds: None,
        }
    }

    pub fn push(&mut self, row: TraceRow) -> Result<()> {
        if row.phi.len() != self.pg_len {
            return Err(MfacError::Invariant(format!(
                "trace row has {} pseudo-gradient entries, expected {}",
                row.phi.len(),
                self.pg_len
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn pg_len(&self) -> usize {
        self.pg_len
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn completed(&self) -> bool {
        self.status == Termination::Completed
    }

    pub fn row_at(&self, k: i64) -> Option<&TraceRow> {
        let first = self.rows.first()?.k;
        let idx = usize::try_from(k - first).ok()?;
        self.rows.get(idx).filter(|r| r.k == k)
    }

    pub fn k(&self) -> Vec<i64> {
        self.rows.iter().map(|r| r.k).collect()
    }

    pub fn y_star(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y_star).collect()
    }

    pub fn y(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y).collect()
    }

    pub fn u(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.u).collect()
    }

    pub fn e(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e).collect()
    }

    /// Column `i` (zero based) of the pseudo-gradient block.
    pub fn phi(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.phi[i]).collect()
    }

    pub fn header(&self) -> String {
        csv_header(self.pg_len)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "{}", self.header())?;
        for r in &self.rows {
            write!(
                out,
                "{},{},{},{},{}",
                r.k,
                format_float(r.y_star),
                format_float(r.y),
                format_float(r.u),
                format_float(r.e)
            )?;
            for p in &r.phi {
                write!(out, ",{}", format_float(*p))?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }

    /// Parses a trace written by [`SimTrace::write_csv`]. The status of the
    /// imported trace is `Completed`.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.split('\n').enumerate().peekable();
        let (_, header) = lines.next().ok_or(MfacError::Parse {
            line: 1,
            message: "empty file".into(),
        })?;
        let header = header.strip_suffix('\r').unwrap_or(header);
        let pg_len = parse_header(header)?;
        let mut trace = Self::new(pg_len);
        while let Some((idx, line)) = lines.next() {
            let line_no = idx + 1;
            if line.is_empty() && lines.peek().is_none() {
                break;
            }
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                if lines.peek().is_none_or(|(_, l)| l.trim().is_empty()) {
                    continue;
                }
                return Err(parse_error(line_no, "blank line inside the table"));
            }
            trace.rows.push(parse_row(line, line_no, pg_len)?);
        }
        Ok(trace)
    }
}

pub fn csv_header(pg_len: usize) -> String {
    let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend((1..=pg_len).map(|i| format!("phi_{i}")));
    cols.join(",")
}

fn parse_error(line: usize, message: impl Into<String>) -> MfacError {
    MfacError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(header: &str) -> Result<usize> {
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < FIXED_COLUMNS.len() + 1 || cols[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(parse_error(1, format!("unexpected header {header:?}")));
    }
    let pg_len = cols.len() - FIXED_COLUMNS.len();
    if header != csv_header(pg_len) {
        return Err(parse_error(1, format!("unexpected header {header:?}")));
    }
    Ok(pg_len)
}

fn parse_row(line: &str, line_no: usize, pg_len: usize) -> Result<TraceRow> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != FIXED_COLUMNS.len() + pg_len {
        return Err(parse_error(
            line_no,
            format!(
                "expected {} fields, found {}",
                FIXED_COLUMNS.len() + pg_len,
                fields.len()
            ),
        ));
    }
    let k = fields[0]
        .parse::<i64>()
        .map_err(|e| parse_error(line_no, format!("column k: {e}")))?;
    let mut nums = Vec::with_capacity(fields.len() - 1);
    for (col, field) in fields.iter().enumerate().skip(1) {
        let v: f64 = field
            .parse()
            .map_err(|e| parse_error(line_no, format!("column {}: {e}", col + 1)))?;
        if !v.is_finite() {
            return Err(parse_error(
                line_no,
                format!("column {}: non-finite value", col + 1),
            ));
        }
        nums.push(v);
    }
    let row = TraceRow {
        k,
        y_star: nums[0],
        y: nums[1],
        u: nums[2],
        e: nums[3],
        phi: nums[4..].to_vec(),
    };
    if row.e != row.y_star - row.y {
        return Err(parse_error(line_no, "e differs from y_star - y"));
    }
    Ok(row)
}

pub fn export_csv(trace: &SimTrace, path: &Path) -> Result<()> {
    trace.write_csv(fs::File::create(path)?)
}

pub fn import_csv(path: &Path) -> Result<SimTrace> {
    SimTrace::parse_csv(&fs::read_to_string(path)?)
}
