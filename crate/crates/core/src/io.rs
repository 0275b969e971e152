//! Matrix Market coordinate files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses Matrix Market text (coordinate format; real, integer, or pattern;
/// general, symmetric, or skew-symmetric). Symmetric storage is expanded.
pub fn parse_matrix_market(text: &str) -> Result<CsrMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    if tokens[1] != "matrix" {
        return Err(Error::Unsupported(format!("Matrix Market object '{}'", tokens[1])));
    }
    match tokens[2].as_str() {
        "coordinate" => {}
        "array" => return Err(Error::Unsupported("dense array Matrix Market files".into())),
        other => return Err(parse_err(1, format!("unknown format '{other}'"))),
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        "complex" => return Err(Error::Unsupported("complex Matrix Market files".into())),
        other => return Err(parse_err(1, format!("unknown field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        "hermitian" => return Err(Error::Unsupported("hermitian Matrix Market files".into())),
        other => return Err(parse_err(1, format!("unknown symmetry '{other}'"))),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body.next().ok_or_else(|| parse_err(1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(size_line, format!("bad size entry '{t}'"))))
        .collect::<Result<_>>()?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(parse_err(size_line, "size line must hold rows, columns, and entries"));
    };
    if symmetry != Symmetry::General && rows != cols {
        return Err(parse_err(size_line, "symmetric storage needs a square matrix"));
    }

    let mut triplets = Vec::with_capacity(if symmetry == Symmetry::General { nnz } else { 2 * nnz });
    let mut last_line = size_line;
    for _ in 0..nnz {
        let (line_no, line) = body
            .next()
            .ok_or_else(|| parse_err(last_line + 1, format!("expected {nnz} entries, file ended early")))?;
        last_line = line_no;
        let mut it = line.split_whitespace();
        let mut index = |what: &str, bound: usize| -> Result<usize> {
            let tok = it.next().ok_or_else(|| parse_err(line_no, format!("missing {what} index")))?;
            let v: usize = tok
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad {what} index '{tok}'")))?;
            if v == 0 || v > bound {
                return Err(parse_err(line_no, format!("{what} index {v} outside 1..={bound}")));
            }
            Ok(v - 1)
        };
        let i = index("row", rows)?;
        let j = index("column", cols)?;
        let v = match field {
            Field::Pattern => 1.0,
            _ => {
                let tok = it.next().ok_or_else(|| parse_err(line_no, "missing value"))?;
                let v: f64 = tok.parse().map_err(|_| parse_err(line_no, format!("bad value '{tok}'")))?;
                if field == Field::Integer && v.fract() != 0.0 {
                    return Err(parse_err(line_no, format!("'{tok}' is not an integer")));
                }
                if !v.is_finite() {
                    return Err(parse_err(line_no, "non-finite value"));
                }
                v
            }
        };
        if it.next().is_some() {
            return Err(parse_err(line_no, "trailing tokens"));
        }
        triplets.push((i, j, v));
        match symmetry {
            Symmetry::Symmetric if i != j => triplets.push((j, i, v)),
            Symmetry::Skew if i == j => {
                return Err(parse_err(line_no, "skew-symmetric files store no diagonal"));
            }
            Symmetry::Skew => triplets.push((j, i, -v)),
            _ => {}
        }
    }
    if let Some((line_no, _)) = body.next() {
        return Err(parse_err(line_no, format!("more than the declared {nnz} entries")));
    }
    CsrMatrix::from_triplets(rows, cols, &triplets)
}

pub fn load_matrix_market(path: &Path) -> Result<CsrMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text)
}

/// Loads a file and picks dense or sparse storage by size.
pub fn load_matrix(path: &Path) -> Result<Matrix> {
    let csr = load_matrix_market(path)?;
    let triplets = Matrix::Sparse(csr.clone()).triplets();
    Matrix::from_triplets(csr.rows(), csr.cols(), &triplets)
}

/// Coordinate/real/general text holding the nonzeros of `a` in row-major order.
pub fn format_matrix_market(a: &Matrix) -> String {
    let triplets = a.triplets();
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.rows(), a.cols(), triplets.len());
    for (i, j, v) in triplets {
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    out
}

pub fn write_matrix_market(path: &Path, a: &Matrix) -> Result<()> {
    std::fs::write(path, format_matrix_market(a)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_round_trip() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let csr = parse_matrix_market(&format_matrix_market(&a)).unwrap();
        assert_eq!((csr.rows(), csr.cols(), csr.nnz()), (2, 2, 2));
        assert_eq!(Matrix::Sparse(csr).triplets(), a.triplets());
    }

    #[test]
    fn symmetric_pattern_and_comments() {
        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n% note\n3 3 2\n1 1\n3 1\n";
        let csr = parse_matrix_market(text).unwrap();
        assert_eq!(
            Matrix::Sparse(csr).triplets(),
            vec![(0, 0, 1.0), (0, 2, 1.0), (2, 0, 1.0)]
        );
    }

    #[test]
    fn skew_symmetric_expands_with_sign() {
        let text = "%%MatrixMarket matrix coordinate integer skew-symmetric\n2 2 1\n2 1 3\n";
        let csr = parse_matrix_market(text).unwrap();
        assert_eq!(Matrix::Sparse(csr).triplets(), vec![(0, 1, -3.0), (1, 0, 3.0)]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n3 1 2.0\n";
        assert!(matches!(parse_matrix_market(bad), Err(Error::Parse { line: 4, .. })));
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(matches!(parse_matrix_market(short), Err(Error::Parse { line: 4, .. })));
        let value = "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 x\n";
        assert!(matches!(parse_matrix_market(value), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_matrix_market("hello\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn array_format_unsupported() {
        let text = "%%MatrixMarket matrix array real general\n1 1\n1.0\n";
        assert!(matches!(parse_matrix_market(text), Err(Error::Unsupported(_))));
    }
}
