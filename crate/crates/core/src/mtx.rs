//! Matrix Market coordinate files and one-term-per-line vocabularies.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// A parsed coordinate file.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub matrix: CsrMatrix,
    /// Entries written explicitly as zero; they are not stored.
    pub dropped_zeros: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

pub fn read_matrix_market(path: &Path) -> Result<MatrixFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text, path)
}

/// Parses `%%MatrixMarket matrix coordinate {real|integer|pattern} general`.
/// `origin` is only used in error messages.
pub fn parse_matrix_market(text: &str, origin: &Path) -> Result<MatrixFile> {
    let err = |line: usize, message: String| Error::Parse {
        path: PathBuf::from(origin),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (line_no, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(err(
            line_no,
            format!("expected a '%%MatrixMarket matrix coordinate <field> general' header, got {header:?}"),
        ));
    }
    let field = match tokens[3].as_str() {
        "real" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(err(line_no, format!("unsupported field type {other:?}"))),
    };
    if tokens[4] != "general" {
        return Err(err(
            line_no,
            format!("unsupported symmetry {:?}; only general", tokens[4]),
        ));
    }

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_no, size_line) = body.next().ok_or_else(|| err(line_no, "missing size line".into()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| err(size_no, format!("bad size line {size_line:?}: {e}")))?;
    let [n_rows, n_cols, nnz] = dims[..] else {
        return Err(err(size_no, format!("size line needs 3 integers, got {size_line:?}")));
    };

    let mut triplets = Vec::with_capacity(nnz);
    let mut dropped_zeros = 0;
    let mut seen = 0;
    for (no, line) in body {
        seen += 1;
        if seen > nnz {
            return Err(err(no, format!("more entries than the declared {nnz}")));
        }
        let mut parts = line.split_whitespace();
        let mut index = |name: &str, bound: usize| -> Result<usize> {
            let tok = parts.next().ok_or_else(|| err(no, format!("missing {name} index")))?;
            let v: usize = tok.parse().map_err(|_| err(no, format!("bad {name} index {tok:?}")))?;
            if v == 0 || v > bound {
                return Err(err(no, format!("{name} index {v} outside 1..={bound}")));
            }
            Ok(v - 1)
        };
        let r = index("row", n_rows)?;
        let c = index("column", n_cols)?;
        let value = match field {
            Field::Pattern => 1.0,
            Field::Real | Field::Integer => {
                let tok = parts.next().ok_or_else(|| err(no, "missing value".into()))?;
                let v: f64 = tok.parse().map_err(|_| err(no, format!("bad value {tok:?}")))?;
                if !v.is_finite() {
                    return Err(err(no, format!("non-finite value {tok:?}")));
                }
                v
            }
        };
        if parts.next().is_some() {
            return Err(err(no, "trailing tokens".into()));
        }
        if value == 0.0 {
            log::warn!("{}:{no}: explicit zero entry dropped", origin.display());
            dropped_zeros += 1;
            continue;
        }
        triplets.push((r, c, value));
    }
    if seen < nnz {
        return Err(err(
            text.lines().count(),
            format!("declared {nnz} entries but found {seen}"),
        ));
    }
    let matrix = CsrMatrix::from_triplets(n_rows, n_cols, triplets)?;
    Ok(MatrixFile { matrix, dropped_zeros })
}

/// Coordinate `real general` text for `m`, 1-indexed, entries in row-major order.
pub fn to_matrix_market(m: &CsrMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    writeln!(out, "{} {} {}", m.n_rows(), m.n_cols(), m.nnz()).expect("writing to a String");
    for (i, j, v) in m.triplets() {
        writeln!(out, "{} {} {}", i + 1, j + 1, v).expect("writing to a String");
    }
    out
}

pub fn write_matrix_market(path: &Path, m: &CsrMatrix) -> Result<()> {
    fs::write(path, to_matrix_market(m)).map_err(|e| Error::io(path, e))
}

/// One UTF-8 term per line; line `k` (0-based) names term `k`.
pub fn read_vocabulary(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect())
}

pub fn write_vocabulary(path: &Path, terms: &[String]) -> Result<()> {
    let mut out = terms.join("\n");
    out.push('\n');
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
