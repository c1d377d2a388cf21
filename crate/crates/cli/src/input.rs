//! Text formats: complex amplitudes, state lists and matrix lists.
//!
//! A state list holds one state per line as comma-separated amplitudes such as
//! `1`, `0.5-0.25i`, `-i` or `3e-2+1e-1i`. Blank lines and `#` comments are
//! skipped. A matrix list is the same grammar read as rows: the first row fixes
//! the dimension `n`, and every `n` rows form one matrix.

use std::path::Path;

use holonomy::{HermitianMatrix, StateVector, C64};

use crate::error::{CliError, CliResult};

fn parse_real(text: &str) -> Option<f64> {
    match text {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => text.parse::<f64>().ok().filter(|x| x.is_finite()),
    }
}

/// Parses `re`, `imi`, or `re±imi`.
pub fn parse_complex(token: &str) -> Option<C64> {
    let t = token.trim();
    if t.is_empty() {
        return None;
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().ok().filter(|x| x.is_finite()).map(|re| C64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().ok().filter(|x| x.is_finite())?;
            let im = parse_real(&body[k..])?;
            Some(C64::new(re, im))
        }
        None => parse_real(body).map(|im| C64::new(0.0, im)),
    }
}

/// Splits a line into amplitudes, reporting the 1-based column of a bad token.
pub fn parse_row(source: &str, line_no: usize, line: &str) -> CliResult<Vec<C64>> {
    let mut out = Vec::new();
    let mut column = 1;
    for token in line.split(',') {
        let lead = token.len() - token.trim_start().len();
        match parse_complex(token) {
            Some(z) => out.push(z),
            None => {
                let shown = token.trim();
                return Err(CliError::syntax(
                    source,
                    line_no,
                    column + lead,
                    if shown.is_empty() {
                        "empty amplitude".to_string()
                    } else {
                        format!("cannot parse amplitude {shown:?} (expected re, imi or re+imi)")
                    },
                ));
            }
        }
        column += token.chars().count() + 1;
    }
    Ok(out)
}

/// Content lines with their 1-based line numbers; comments are stripped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("");
        (!line.trim().is_empty()).then_some((i + 1, line))
    })
}

/// Parses states and normalizes them; all must share one dimension.
pub fn parse_states(source: &str, text: &str) -> CliResult<Vec<StateVector>> {
    let mut states: Vec<StateVector> = Vec::new();
    for (line_no, line) in content_lines(text) {
        let amps = parse_row(source, line_no, line)?;
        if let Some(first) = states.first() {
            if first.dim() != amps.len() {
                return Err(CliError::syntax(
                    source,
                    line_no,
                    1,
                    format!("state has {} amplitudes, expected {}", amps.len(), first.dim()),
                ));
            }
        }
        let state = StateVector::normalized(amps)
            .map_err(|e| CliError::syntax(source, line_no, 1, format!("invalid state: {e}")))?;
        states.push(state);
    }
    if states.is_empty() {
        return Err(CliError::syntax(source, 1, 1, "no states found"));
    }
    Ok(states)
}

/// Parses a list of Hermitian matrices.
pub fn parse_matrices(source: &str, text: &str) -> CliResult<Vec<HermitianMatrix>> {
    let rows: Vec<(usize, Vec<C64>)> = content_lines(text)
        .map(|(n, line)| parse_row(source, n, line).map(|r| (n, r)))
        .collect::<CliResult<_>>()?;
    let dim = rows
        .first()
        .map(|(_, r)| r.len())
        .ok_or_else(|| CliError::syntax(source, 1, 1, "no matrices found"))?;
    if let Some((n, r)) = rows.iter().find(|(_, r)| r.len() != dim) {
        return Err(CliError::syntax(
            source,
            *n,
            1,
            format!("row has {} entries, expected {dim}", r.len()),
        ));
    }
    if !rows.len().is_multiple_of(dim) {
        let (n, _) = rows.last().expect("non-empty");
        return Err(CliError::syntax(
            source,
            *n,
            1,
            format!("{} rows do not form whole {dim}x{dim} matrices", rows.len()),
        ));
    }
    rows.chunks(dim)
        .map(|chunk| {
            let entries: Vec<Vec<C64>> = chunk.iter().map(|(_, r)| r.clone()).collect();
            HermitianMatrix::from_rows(&entries)
                .map_err(|e| CliError::syntax(source, chunk[0].0, 1, format!("invalid matrix: {e}")))
        })
        .collect()
}

pub fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_states(path: &Path) -> CliResult<Vec<StateVector>> {
    parse_states(&path.display().to_string(), &read_file(path)?)
}

/// A single inline state given on the command line.
pub fn parse_inline_state(flag: &str, text: &str) -> CliResult<StateVector> {
    let amps = parse_row(flag, 1, text)?;
    StateVector::normalized(amps).map_err(|e| CliError::syntax(flag, 1, 1, format!("invalid state: {e}")))
}
