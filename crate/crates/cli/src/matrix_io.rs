//! Dense matrix files: comma-separated rows, or whitespace text whose first
//! line is `rows cols`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

/// Largest accepted row or column count.
pub const MAX_DIM: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    DenseText,
}

/// Picks the format from the extension, else from the first line: two
/// integer tokens and no comma means dense text.
pub fn detect(path: &Path, text: &str) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => return Format::Csv,
        Some(e) if e.eq_ignore_ascii_case("txt") || e.eq_ignore_ascii_case("mtx") => {
            return Format::DenseText
        }
        _ => {}
    }
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('%'));
    match first {
        Some(line) if !line.contains(',') => {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() == 2 && toks.iter().all(|t| t.parse::<usize>().is_ok()) {
                Format::DenseText
            } else {
                Format::Csv
            }
        }
        _ => Format::Csv,
    }
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_matrix(&text, detect(path, &text)).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn parse_matrix(text: &str, format: Format) -> Result<DMatrix<f64>, String> {
    match format {
        Format::Csv => parse_csv(text),
        Format::DenseText => parse_dense(text),
    }
}

fn number(tok: &str, row: usize, col: usize) -> Result<f64, String> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| format!("entry ({row}, {col}) is not a number: {tok:?}"))?;
    if !v.is_finite() {
        return Err(format!("entry ({row}, {col}) is not finite"));
    }
    Ok(v)
}

fn check_dims(rows: usize, cols: usize) -> Result<(), String> {
    if rows == 0 || cols == 0 {
        return Err("empty matrix".into());
    }
    if rows > MAX_DIM || cols > MAX_DIM {
        return Err(format!(
            "{rows}x{cols} exceeds the {MAX_DIM} limit on each dimension"
        ));
    }
    Ok(())
}

fn parse_csv(text: &str) -> Result<DMatrix<f64>, String> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for (j, tok) in line.split(',').enumerate() {
            data.push(number(tok, rows, j)?);
        }
        let width = data.len() - before;
        match cols {
            None => {
                check_dims(1, width)?;
                cols = Some(width);
            }
            Some(c) if c != width => {
                return Err(format!("row {rows} has {width} entries, expected {c}"));
            }
            _ => {}
        }
        rows += 1;
        check_dims(rows, width)?;
    }
    let cols = cols.ok_or("empty matrix")?;
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

fn parse_dense(text: &str) -> Result<DMatrix<f64>, String> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%'));
    let header = lines.next().ok_or("empty file")?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("header must be \"rows cols\", got {header:?}"))?;
    let [rows, cols] = dims[..] else {
        return Err(format!("header must be \"rows cols\", got {header:?}"));
    };
    check_dims(rows, cols)?;
    let mut data = Vec::with_capacity(rows * cols);
    for tok in lines.flat_map(str::split_whitespace) {
        if data.len() == rows * cols {
            return Err(format!("more than {} entries", rows * cols));
        }
        let k = data.len();
        data.push(number(tok, k / cols, k % cols)?);
    }
    if data.len() != rows * cols {
        return Err(format!(
            "expected {} entries, found {}",
            rows * cols,
            data.len()
        ));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Rows of `m`, for JSON output.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
