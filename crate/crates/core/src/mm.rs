//! Matrix Market I/O for dense matrices and vectors.
//!
//! Writing always produces `array real general` (column-major, as the format
//! requires). Reading accepts `array` and `coordinate` layouts with `real`,
//! `double` or `integer` fields and `general`, `symmetric` or
//! `skew-symmetric` symmetry.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Vector};

pub const ARRAY_HEADER: &str = "%%MatrixMarket matrix array real general";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line: &str) -> Result<(Layout, Symmetry)> {
    let toks: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(parse_err(1, format!("bad header `{line}`")));
    }
    let layout = match toks[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(parse_err(1, format!("unsupported layout `{other}`"))),
    };
    match toks[3].as_str() {
        "real" | "double" | "integer" => {}
        other => return Err(parse_err(1, format!("unsupported field `{other}`"))),
    }
    let sym = match toks[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(1, format!("unsupported symmetry `{other}`"))),
    };
    Ok((layout, sym))
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what}")))
}

/// Parses Matrix Market text into a dense matrix.
pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let (layout, sym) = parse_header(first)?;

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let mut st = size.split_whitespace();
    let rows: usize = parse_num(st.next(), size_line, "row count")?;
    let cols: usize = parse_num(st.next(), size_line, "column count")?;
    if rows == 0 || cols == 0 {
        return Err(parse_err(size_line, "dimensions must be positive"));
    }
    if sym != Symmetry::General && rows != cols {
        return Err(parse_err(size_line, "symmetric storage requires a square matrix"));
    }

    let mut data = vec![0.0; rows * cols];
    match layout {
        Layout::Array => {
            // Column-major; symmetric variants store the lower triangle only.
            let mut slots = Vec::with_capacity(rows * cols);
            for j in 0..cols {
                let start = match sym {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::SkewSymmetric => j + 1,
                };
                for i in start..rows {
                    slots.push((i, j));
                }
            }
            let mut values = body.flat_map(|(ln, l)| l.split_whitespace().map(move |t| (ln, t)));
            for &(i, j) in &slots {
                let (ln, tok) = values
                    .next()
                    .ok_or_else(|| parse_err(size_line, "too few array entries"))?;
                let v: f64 = parse_num(Some(tok), ln, "entry")?;
                data[i * cols + j] = v;
                match sym {
                    Symmetry::General => {}
                    Symmetry::Symmetric => data[j * cols + i] = v,
                    Symmetry::SkewSymmetric => data[j * cols + i] = -v,
                }
            }
            if let Some((ln, _)) = values.next() {
                return Err(parse_err(ln, "too many array entries"));
            }
        }
        Layout::Coordinate => {
            let nnz: usize = parse_num(st.next(), size_line, "entry count")?;
            let mut seen = 0;
            for (ln, l) in body {
                let mut t = l.split_whitespace();
                let i: usize = parse_num(t.next(), ln, "row index")?;
                let j: usize = parse_num(t.next(), ln, "column index")?;
                let v: f64 = parse_num(t.next(), ln, "value")?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(ln, format!("index ({i}, {j}) out of range")));
                }
                let (i, j) = (i - 1, j - 1);
                data[i * cols + j] += v;
                if i != j {
                    match sym {
                        Symmetry::General => {}
                        Symmetry::Symmetric => data[j * cols + i] += v,
                        Symmetry::SkewSymmetric => data[j * cols + i] -= v,
                    }
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(
                    size_line,
                    format!("header announces {nnz} entries, found {seen}"),
                ));
            }
        }
    }
    DenseMatrix::new(rows, cols, data)
}

/// Renders a matrix as `array real general` Matrix Market text.
pub fn format_matrix(a: &DenseMatrix) -> String {
    let mut out = String::with_capacity(a.rows() * a.cols() * 24 + 64);
    out.push_str(ARRAY_HEADER);
    out.push('\n');
    let _ = writeln!(out, "{} {}", a.rows(), a.cols());
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            let _ = writeln!(out, "{:e}", a.get(i, j));
        }
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text)
}

pub fn write_matrix(path: impl AsRef<Path>, a: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(a)).map_err(|e| Error::io(path, e))
}

/// Reads a vector stored as a one-column (or one-row) matrix.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vector(&text)
}

pub fn parse_vector(text: &str) -> Result<Vector> {
    let m = parse_matrix(text)?;
    if m.cols() != 1 && m.rows() != 1 {
        return Err(parse_err(
            2,
            format!("expected a vector, got a {}x{} matrix", m.rows(), m.cols()),
        ));
    }
    Vector::from_slice(m.data())
}

pub fn format_vector(v: &[f64]) -> String {
    format_matrix(&DenseMatrix::from_raw(v.len(), 1, v.to_vec()))
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_vector(v)).map_err(|e| Error::io(path, e))
}
