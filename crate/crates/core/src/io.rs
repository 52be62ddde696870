//! Matrix Market coordinate format.
//!
//! Reading accepts `real`, `integer` and `pattern` fields with `general` or
//! `symmetric` symmetry. Writing always produces `coordinate real general`
//! (or `pattern general` for symbolic matrices) with 1-based indices.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, Triplet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_banner(line: &str, lineno: usize) -> Result<(Field, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(parse_err(lineno, "missing %%MatrixMarket banner"));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(parse_err(lineno, "only 'matrix coordinate' is supported"));
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(parse_err(lineno, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(parse_err(lineno, format!("unsupported symmetry '{other}'"))),
    };
    Ok((field, symmetry))
}

fn parse_index(tok: Option<&str>, bound: usize, lineno: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| parse_err(lineno, format!("missing {what} index")))?;
    let i: usize = tok
        .parse()
        .map_err(|_| parse_err(lineno, format!("bad {what} index '{tok}'")))?;
    if i == 0 || i > bound {
        return Err(parse_err(lineno, format!("{what} index {i} outside 1..={bound}")));
    }
    Ok(i - 1)
}

/// Parses a Matrix Market stream into a CSR matrix.
pub fn read_matrix_market_from<T: Scalar, R: Read>(reader: R) -> Result<CsrMatrix<T>> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let (field, symmetry) = match lines.next() {
        Some((_, line)) => parse_banner(&line?, 1)?,
        None => return Err(parse_err(1, "empty input")),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<Triplet<T>> = Vec::new();
    let mut seen = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let Some((nrows, ncols, nnz)) = size else {
            let mut dims = [0usize; 3];
            for d in &mut dims {
                let tok = toks
                    .next()
                    .ok_or_else(|| parse_err(lineno, "size line needs 'rows cols entries'"))?;
                *d = tok
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad size field '{tok}'")))?;
            }
            size = Some((dims[0], dims[1], dims[2]));
            triplets.reserve(dims[2]);
            continue;
        };
        if seen == nnz {
            return Err(parse_err(
                lineno,
                format!("more entries than the {nnz} declared in the header"),
            ));
        }
        let i = parse_index(toks.next(), nrows, lineno, "row")?;
        let j = parse_index(toks.next(), ncols, lineno, "column")?;
        let v = match field {
            Field::Pattern => T::one(),
            Field::Real | Field::Integer => {
                let tok = toks
                    .next()
                    .ok_or_else(|| parse_err(lineno, "missing value"))?;
                T::parse_mm(tok).ok_or_else(|| parse_err(lineno, format!("bad value '{tok}'")))?
            }
        };
        if toks.next().is_some() {
            return Err(parse_err(lineno, "trailing fields on entry line"));
        }
        triplets.push(Triplet::new(i, j, v));
        if symmetry == Symmetry::Symmetric && i != j {
            triplets.push(Triplet::new(j, i, v));
        }
        seen += 1;
    }
    let Some((nrows, ncols, nnz)) = size else {
        return Err(parse_err(1, "missing size line"));
    };
    if seen != nnz {
        return Err(parse_err(
            0,
            format!("header declares {nnz} entries but {seen} were found"),
        ));
    }
    let m = CsrMatrix::from_triplets(nrows, ncols, &triplets)?;
    Ok(if field == Field::Pattern {
        m.into_symbolic()
    } else {
        m
    })
}

pub fn read_matrix_market<T: Scalar>(path: impl AsRef<Path>) -> Result<CsrMatrix<T>> {
    read_matrix_market_from(File::open(path)?)
}

pub fn write_matrix_market_to<T: Scalar, W: Write>(m: &CsrMatrix<T>, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let field = if m.is_symbolic() { "pattern" } else { "real" };
    writeln!(w, "%%MatrixMarket matrix coordinate {field} general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for i in 0..m.nrows() {
        let vals = m.row_values(i);
        for (k, &j) in m.row_cols(i).iter().enumerate() {
            match vals.get(k) {
                Some(v) => writeln!(w, "{} {} {}", i + 1, j + 1, v.format_mm())?,
                None => writeln!(w, "{} {}", i + 1, j + 1)?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_market<T: Scalar>(path: impl AsRef<Path>, m: &CsrMatrix<T>) -> Result<()> {
    write_matrix_market_to(m, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<CsrMatrix<f64>> {
        read_matrix_market_from(text.as_bytes())
    }

    #[test]
    fn reads_general_real() {
        let m = read(
            "%%MatrixMarket matrix coordinate real general\n% comment\n2 3 3\n1 1 1.5\n2 3 -2\n1 2 0.25\n",
        )
        .unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 1), Some(0.25));
        assert_eq!(m.get(1, 2), Some(-2.0));
    }

    #[test]
    fn round_trip_is_exact() {
        let m = CsrMatrix::from_triplets(
            3,
            2,
            &[
                Triplet::new(0, 1, 0.1),
                Triplet::new(2, 0, 1.0 / 3.0),
                Triplet::new(1, 1, -7e-310),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_matrix_market_to(&m, &mut buf).unwrap();
        let back: CsrMatrix<f64> = read_matrix_market_from(buf.as_slice()).unwrap();
        assert!(back.bit_eq(&m));
    }

    #[test]
    fn symmetric_is_expanded() {
        let m = read("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2\n2 1 -1\n")
            .unwrap();
        assert_eq!(m.get(0, 1), Some(-1.0));
        assert_eq!(m.get(1, 0), Some(-1.0));
    }

    #[test]
    fn pattern_reads_symbolic() {
        let m = read("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n2 1\n").unwrap();
        assert!(m.is_symbolic());
    }

    #[test]
    fn entry_count_mismatch() {
        let err = read("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err =
            read("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1\n2 2 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn bad_entry_reports_line() {
        let err = read("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read("%%MatrixMarket matrix array real general\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
