//! Plain-text elevation grids.
//!
//! ```text
//! # comments run to the end of the line
//! nrows 3
//! ncols 4
//! origin_north_m -100
//! origin_east_m -150
//! cellsize_m 100
//! 0 0 0 0
//! 0 5 5 0
//! 0 0 0 0
//! ```
//!
//! The five header keys may come in any order. Values follow row-major, the
//! first row at `origin_north_m`, rows running north and columns east.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use coopath_core::geo::{DemGrid, GeoError};

#[derive(Debug, thiserror::Error)]
pub enum DemError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Grid(#[from] GeoError),
}

fn parse_err(line: usize, message: impl Into<String>) -> DemError {
    DemError::Parse {
        line,
        message: message.into(),
    }
}

fn number(token: &str, line: usize) -> Result<f64, DemError> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("`{token}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("`{token}` is not finite")));
    }
    Ok(v)
}

fn count(token: &str, line: usize) -> Result<usize, DemError> {
    token
        .parse()
        .map_err(|_| parse_err(line, format!("`{token}` is not a non-negative integer")))
}

pub fn parse_dem(text: &str) -> Result<DemGrid, DemError> {
    let mut rows = None;
    let mut cols = None;
    let mut north = None;
    let mut east = None;
    let mut cell = None;
    let mut values = Vec::new();
    let mut last_line = 0;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace().peekable();
        let Some(first) = tokens.peek().copied() else {
            continue;
        };
        if first.starts_with(|c: char| c.is_ascii_alphabetic()) && values.is_empty() {
            let key = tokens.next().unwrap_or_default();
            let value = tokens
                .next()
                .ok_or_else(|| parse_err(line, format!("`{key}` needs a value")))?;
            if tokens.next().is_some() {
                return Err(parse_err(line, format!("`{key}` takes exactly one value")));
            }
            let slot_taken = match key {
                "nrows" => rows.replace(count(value, line)?).is_some(),
                "ncols" => cols.replace(count(value, line)?).is_some(),
                "origin_north_m" => north.replace(number(value, line)?).is_some(),
                "origin_east_m" => east.replace(number(value, line)?).is_some(),
                "cellsize_m" => cell.replace(number(value, line)?).is_some(),
                other => return Err(parse_err(line, format!("unknown header key `{other}`"))),
            };
            if slot_taken {
                return Err(parse_err(line, format!("`{key}` given twice")));
            }
            continue;
        }
        for token in tokens {
            values.push(number(token, line)?);
        }
    }

    let missing = |name: &str| parse_err(last_line, format!("header key `{name}` missing"));
    let rows = rows.ok_or_else(|| missing("nrows"))?;
    let cols = cols.ok_or_else(|| missing("ncols"))?;
    let north = north.ok_or_else(|| missing("origin_north_m"))?;
    let east = east.ok_or_else(|| missing("origin_east_m"))?;
    let cell = cell.ok_or_else(|| missing("cellsize_m"))?;
    let expected = rows
        .checked_mul(cols)
        .ok_or_else(|| parse_err(last_line, "grid size overflows"))?;
    if values.len() != expected {
        return Err(parse_err(
            last_line,
            format!(
                "expected {expected} elevations ({rows} x {cols}), found {}",
                values.len()
            ),
        ));
    }
    Ok(DemGrid::new(north, east, cell, rows, cols, values)?)
}

pub fn load_dem(path: &Path) -> Result<DemGrid, DemError> {
    let text = std::fs::read_to_string(path).map_err(|source| DemError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dem(&text)
}

/// Text form that parses back to an identical grid.
pub fn format_dem(grid: &DemGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "nrows {}", grid.n_rows());
    let _ = writeln!(out, "ncols {}", grid.n_cols());
    let _ = writeln!(out, "origin_north_m {:?}", grid.origin_north());
    let _ = writeln!(out, "origin_east_m {:?}", grid.origin_east());
    let _ = writeln!(out, "cellsize_m {:?}", grid.cell_size());
    for row in grid.elevations().chunks(grid.n_cols()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
