//! Reading data tables, trace files and key-value config files.
//!
//! A data file holds one record with the counts `x11`, `x10` and `x01`,
//! either as `key = value` lines or as a comma-delimited header row
//! followed by one value row. Lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use dualrec::{ChainTrace, DrsData};

use crate::error::{CliError, Result};

const FIELDS: [&str; 3] = ["x11", "x10", "x01"];

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_count(path: &Path, line: usize, name: &str, raw: &str) -> Result<u64> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<u64>() {
        return Ok(v);
    }
    let message = match raw.parse::<f64>() {
        Ok(v) if v < 0.0 => format!("count {name} = {raw} is negative"),
        Ok(_) => format!("count {name} = {raw} is not an integer"),
        Err(_) if raw.starts_with('-') => format!("count {name} = {raw} is negative"),
        Err(_) => format!("count {name} = '{raw}' is not a number"),
    };
    Err(CliError::parse(path, line, message))
}

fn split_key_value(line: &str) -> Option<(&str, &str)> {
    line.split_once('=')
        .or_else(|| line.split_once(':'))
        .map(|(k, v)| (k.trim(), v.trim()))
}

/// Parses a data table in either accepted layout.
pub fn parse_data(path: &Path, text: &str) -> Result<DrsData> {
    let lines: Vec<(usize, &str)> = content_lines(text).collect();
    let Some(&(first_no, first)) = lines.first() else {
        return Err(CliError::parse(
            path,
            1,
            "no data found (expected x11, x10 and x01)",
        ));
    };
    let mut values: BTreeMap<&str, u64> = BTreeMap::new();
    if first.contains(',') && split_key_value(first).is_none() {
        let header: Vec<&str> = first.split(',').map(str::trim).collect();
        for name in &header {
            if !FIELDS.contains(name) {
                return Err(CliError::parse(
                    path,
                    first_no,
                    format!("unknown column '{name}' (expected header x11,x10,x01)"),
                ));
            }
        }
        let Some(&(row_no, row)) = lines.get(1) else {
            return Err(CliError::parse(
                path,
                first_no,
                "header row has no data row after it",
            ));
        };
        if let Some(&(extra, _)) = lines.get(2) {
            return Err(CliError::parse(path, extra, "only one data row is allowed"));
        }
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != header.len() {
            return Err(CliError::parse(
                path,
                row_no,
                format!("expected {} values, found {}", header.len(), cells.len()),
            ));
        }
        for (name, cell) in header.iter().zip(cells) {
            if values
                .insert(name, parse_count(path, row_no, name, cell)?)
                .is_some()
            {
                return Err(CliError::parse(
                    path,
                    first_no,
                    format!("column {name} appears twice"),
                ));
            }
        }
    } else {
        for &(no, line) in &lines {
            let (key, value) = split_key_value(line).ok_or_else(|| {
                CliError::parse(path, no, format!("expected 'key = value', found '{line}'"))
            })?;
            let name = FIELDS.iter().copied().find(|f| *f == key).ok_or_else(|| {
                CliError::parse(
                    path,
                    no,
                    format!("unknown field '{key}' (expected x11, x10 or x01)"),
                )
            })?;
            if values
                .insert(name, parse_count(path, no, name, value)?)
                .is_some()
            {
                return Err(CliError::parse(
                    path,
                    no,
                    format!("field {name} given twice"),
                ));
            }
        }
    }
    let last = lines.last().map_or(1, |&(n, _)| n);
    let get = |name: &str| {
        values
            .get(name)
            .copied()
            .ok_or_else(|| CliError::parse(path, last, format!("missing field {name}")))
    };
    Ok(DrsData::new(get("x11")?, get("x10")?, get("x01")?)?)
}

pub fn read_data(path: &Path) -> Result<DrsData> {
    parse_data(path, &read(path)?)
}

/// Key-value configuration; keys are long flag names without dashes.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, (usize, String)>> {
    let text = read(path)?;
    let mut out = BTreeMap::new();
    for (no, line) in content_lines(&text) {
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::parse(path, no, format!("expected 'key = value', found '{line}'"))
        })?;
        let key = key.trim().trim_start_matches("--").to_string();
        if out
            .insert(key.clone(), (no, value.trim().to_string()))
            .is_some()
        {
            return Err(CliError::parse(
                path,
                no,
                format!("key '{key}' given twice"),
            ));
        }
    }
    Ok(out)
}

/// Parses a trace file with header `iter,N,phi,p,p1dot`.
///
/// The burn-in of a trace read back from disk is taken as half its length.
pub fn parse_trace(path: &Path, text: &str, chain: usize) -> Result<ChainTrace> {
    let mut lines = content_lines(text);
    let (hno, header) = lines
        .next()
        .ok_or_else(|| CliError::parse(path, 1, "empty trace file"))?;
    let header: Vec<&str> = header.split(',').map(str::trim).collect();
    if header != ["iter", "N", "phi", "p", "p1dot"] {
        return Err(CliError::parse(
            path,
            hno,
            "expected header iter,N,phi,p,p1dot",
        ));
    }
    let mut trace = ChainTrace {
        chain,
        burn_in: 0,
        n: Vec::new(),
        phi: Vec::new(),
        p: Vec::new(),
        p1dot: Vec::new(),
        phi_lower: f64::NAN,
        phi_upper: Vec::new(),
        redraws: 0,
    };
    for (no, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 5 {
            return Err(CliError::parse(
                path,
                no,
                format!("expected 5 columns, found {}", cells.len()),
            ));
        }
        let real = |i: usize| {
            cells[i]
                .parse::<f64>()
                .map_err(|_| CliError::parse(path, no, format!("'{}' is not a number", cells[i])))
        };
        trace.n.push(parse_count(path, no, "N", cells[1])?);
        trace.phi.push(real(2)?);
        trace.p.push(real(3)?);
        trace.p1dot.push(real(4)?);
        trace.phi_upper.push(f64::NAN);
    }
    trace.burn_in = trace.n.len() / 2;
    Ok(trace)
}

pub fn read_trace(path: &Path, chain: usize) -> Result<ChainTrace> {
    parse_trace(path, &read(path)?, chain)
}
