//! Plain-text matrix and vector files.
//!
//! CSV layout: an optional literal `rows,cols` line, then a line with the two
//! dimensions, then the entries in row-major order (commas, whitespace or
//! newlines all separate entries). MatrixMarket: the dense `array real
//! general` flavour, entries column-major as the format prescribes.
//!
//! Writers print every entry with Rust's shortest round-trip formatting, so
//! reading a file back yields the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Vector};

/// Input/output file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    MatrixMarket,
}

impl Format {
    /// `.mtx` means MatrixMarket, anything else CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("mtx") => Format::MatrixMarket,
            _ => Format::Csv,
        }
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(tok: &str) -> Result<f64> {
    let x: f64 = tok
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: '{tok}'")))?;
    if !x.is_finite() {
        return Err(Error::Parse(format!("non-finite entry '{tok}'")));
    }
    Ok(x)
}

fn parse_dim(tok: &str) -> Result<usize> {
    match tok.trim().parse::<usize>() {
        Ok(d) if d > 0 => Ok(d),
        _ => Err(Error::Parse(format!("bad dimension '{tok}'"))),
    }
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

pub fn parse_csv_matrix(text: &str) -> Result<DenseMatrix> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let mut head = lines.next().ok_or_else(|| Error::Parse("empty CSV input".into()))?;
    if head.replace(' ', "").eq_ignore_ascii_case("rows,cols") {
        head = lines
            .next()
            .ok_or_else(|| Error::Parse("missing dimension line".into()))?;
    }
    let dims: Vec<&str> = tokens(head).collect();
    if dims.len() != 2 {
        return Err(Error::Parse(format!(
            "expected 'rows,cols' dimension line, got '{head}'"
        )));
    }
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let mut data = Vec::with_capacity(rows * cols);
    for line in lines {
        for tok in tokens(line) {
            data.push(parse_f64(tok)?);
        }
    }
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} entries for a {rows}x{cols} matrix, found {}",
            rows * cols,
            data.len()
        )));
    }
    DenseMatrix::new(rows, cols, data).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_csv_matrix(a: &DenseMatrix) -> String {
    let mut out = format!("rows,cols\n{},{}\n", a.rows(), a.cols());
    for i in 0..a.rows() {
        let row: Vec<String> = a.row(i).iter().map(|&x| format_f64(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_matrix_market(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines();
    let banner = lines
        .next()
        .ok_or_else(|| Error::Parse("empty MatrixMarket input".into()))?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(Error::Parse(format!("bad MatrixMarket banner '{banner}'")));
    }
    if words[2] != "array" || words[3] != "real" || words[4] != "general" {
        return Err(Error::Parse(format!(
            "only 'array real general' is supported, got '{} {} {}'",
            words[2], words[3], words[4]
        )));
    }
    let mut body = lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size = body.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::Parse(format!("bad size line '{size}'")));
    }
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let mut col_major = Vec::with_capacity(rows * cols);
    for line in body {
        for tok in line.split_whitespace() {
            col_major.push(parse_f64(tok)?);
        }
    }
    if col_major.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} entries, found {}",
            rows * cols,
            col_major.len()
        )));
    }
    DenseMatrix::from_fn(rows, cols, |i, j| col_major[j * rows + i])
}

pub fn write_matrix_market(a: &DenseMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", a.rows(), a.cols());
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            out.push_str(&format_f64(a.get(i, j)));
            out.push('\n');
        }
    }
    out
}

pub fn parse_matrix(text: &str, format: Format) -> Result<DenseMatrix> {
    match format {
        Format::Csv => parse_csv_matrix(text),
        Format::MatrixMarket => parse_matrix_market(text),
    }
}

pub fn write_matrix(a: &DenseMatrix, format: Format) -> String {
    match format {
        Format::Csv => write_csv_matrix(a),
        Format::MatrixMarket => write_matrix_market(a),
    }
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text, Format::from_path(path))
        .map_err(|e| Error::Parse(format!("{}: {}", path.display(), strip_parse(e))))
}

/// Reads an `n x 1` or `1 x n` matrix file as a vector.
pub fn read_vector(path: &Path) -> Result<Vector> {
    let a = read_matrix(path)?;
    if a.rows() != 1 && a.cols() != 1 {
        return Err(Error::Parse(format!(
            "{}: expected a vector, got a {}x{} matrix",
            path.display(),
            a.rows(),
            a.cols()
        )));
    }
    Vector::new(a.data().to_vec())
}

pub fn write_matrix_file(path: &Path, a: &DenseMatrix) -> Result<()> {
    fs::write(path, write_matrix(a, Format::from_path(path))).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes a vector as an `n x 1` matrix.
pub fn write_vector_file(path: &Path, v: &Vector) -> Result<()> {
    let a = DenseMatrix::new(v.len(), 1, v.as_slice().to_vec())?;
    write_matrix_file(path, &a)
}

fn strip_parse(e: Error) -> String {
    match e {
        Error::Parse(msg) => msg,
        other => other.to_string(),
    }
}
