//! Trace, matrix and vector CSV files. Reals are written with 17
//! significant digits so every finite value round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::solvers::{Trace, TraceRow, TRACE_HEADER};

pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_real(field: &str, context: &'static str, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::ParseAtLine {
        context,
        line,
        msg: format!("'{field}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::ParseAtLine {
            context,
            line,
            msg: format!("non-finite value '{field}'"),
        });
    }
    Ok(v)
}

pub fn trace_to_csv(trace: &Trace) -> Result<String> {
    let mut s = String::with_capacity(64 * (trace.len() + 1));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for row in &trace.rows {
        let _ = write!(s, "{}", row.k);
        for v in row.values() {
            s.push(',');
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::Input(format!("non-finite value {v} in trace row {}", row.k)));
                }
                s.push_str(&format_real(v));
            }
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn trace_from_csv(text: &str) -> Result<Trace> {
    const CTX: &str = "trace csv";
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == TRACE_HEADER => {}
        Some((_, header)) => {
            return Err(Error::ParseAtLine {
                context: CTX,
                line: 1,
                msg: format!("unexpected header '{header}'"),
            })
        }
        None => {
            return Err(Error::ParseAtLine {
                context: CTX,
                line: 1,
                msg: "missing header".into(),
            })
        }
    }
    let mut trace = Trace::default();
    for (i, raw) in lines {
        let line = i + 1;
        let raw = raw.trim_end();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 13 {
            return Err(Error::ParseAtLine {
                context: CTX,
                line,
                msg: format!("expected 13 fields, found {}", fields.len()),
            });
        }
        let k: usize = fields[0].trim().parse().map_err(|_| Error::ParseAtLine {
            context: CTX,
            line,
            msg: format!("bad iteration index '{}'", fields[0]),
        })?;
        let mut values = [None; 12];
        for (slot, field) in values.iter_mut().zip(&fields[1..]) {
            if !field.trim().is_empty() {
                *slot = Some(parse_real(field, CTX, line)?);
            }
        }
        trace.rows.push(TraceRow::from_values(k, values));
    }
    Ok(trace)
}

pub fn write_trace_csv(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = trace_to_csv(trace)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    trace_from_csv(&text)
}

/// One row per line, comma separated, no header.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                s.push(',');
            }
            s.push_str(&format_real(m[(i, j)]));
        }
        s.push('\n');
    }
    s
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    const CTX: &str = "matrix csv";
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, raw) in text.lines().enumerate() {
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let before = data.len();
        for field in raw.split(',') {
            data.push(parse_real(field, CTX, i + 1)?);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::ParseAtLine {
                    context: CTX,
                    line: i + 1,
                    msg: format!("expected {c} fields, found {width}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &data))
}

/// One value per line.
pub fn vector_to_csv(v: &DVector<f64>) -> String {
    let mut s = String::new();
    for x in v.iter() {
        s.push_str(&format_real(*x));
        s.push('\n');
    }
    s
}

pub fn vector_from_csv(text: &str) -> Result<DVector<f64>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        out.push(parse_real(raw, "vector csv", i + 1)?);
    }
    Ok(DVector::from_vec(out))
}
