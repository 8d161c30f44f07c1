//! Matrix Market coordinate I/O for real matrices.
//!
//! Indices are 1-based on disk and 0-based in memory. `symmetric` and
//! `skew-symmetric` files store one triangle and are expanded on read;
//! duplicate coordinates are summed. Pattern and complex files are rejected.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::MatrixMarket { line, msg: msg.into() }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CscMatrix> {
    let file = File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_matrix_market(BufReader::new(file))
}

pub fn parse_matrix_market(reader: impl BufRead) -> Result<CscMatrix> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(1, format!("unsupported storage '{}'", tokens[2])));
    }
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        "pattern" => return Err(parse_err(1, "pattern-only matrices are not supported")),
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut seen = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "size line must have three integers"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>().map_err(|_| parse_err(lineno, format!("bad integer '{s}'")))
                };
                let dims = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                if symmetry != Symmetry::General && dims.0 != dims.1 {
                    return Err(parse_err(lineno, "symmetric storage requires a square matrix"));
                }
                triplets.reserve(if symmetry == Symmetry::General { dims.2 } else { 2 * dims.2 });
                size = Some(dims);
            }
            Some((nrows, ncols, nnz)) => {
                if fields.len() < 3 {
                    return Err(parse_err(lineno, "entry line needs row, column and value"));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad row index '{}'", fields[0])))?;
                let j: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad column index '{}'", fields[1])))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad value '{}'", fields[2])))?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(parse_err(lineno, format!("index ({i}, {j}) out of range")));
                }
                seen += 1;
                if seen > nnz {
                    return Err(parse_err(lineno, "more entries than declared"));
                }
                let (i, j) = (i - 1, j - 1);
                match symmetry {
                    Symmetry::General => triplets.push((i, j, v)),
                    Symmetry::Symmetric => {
                        triplets.push((i, j, v));
                        if i != j {
                            triplets.push((j, i, v));
                        }
                    }
                    Symmetry::SkewSymmetric => {
                        if i == j {
                            return Err(parse_err(lineno, "diagonal entry in skew-symmetric file"));
                        }
                        triplets.push((i, j, v));
                        triplets.push((j, i, -v));
                    }
                }
            }
        }
    }
    let (nrows, ncols, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if seen != nnz {
        return Err(parse_err(0, format!("declared {nnz} entries, found {seen}")));
    }
    CscMatrix::from_triplets(nrows, ncols, &triplets)
}

pub fn write_matrix_market(a: &CscMatrix, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    let mut w = BufWriter::new(file);
    emit_matrix_market(a, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn emit_matrix_market(a: &CscMatrix, w: &mut impl Write) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads a dense vector: either a Matrix Market `array` file with one
/// column, or plain whitespace-separated numbers.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    let mut out = Vec::new();
    let mut skip_size = false;
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if idx == 0 && t.to_ascii_lowercase().starts_with("%%matrixmarket") {
            if !t.to_ascii_lowercase().contains("array") {
                return Err(parse_err(1, "vector files must use array storage"));
            }
            skip_size = true;
            continue;
        }
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        if skip_size {
            skip_size = false;
            continue;
        }
        for tok in t.split_whitespace() {
            out.push(
                tok.parse::<f64>()
                    .map_err(|_| parse_err(idx + 1, format!("bad value '{tok}'")))?,
            );
        }
    }
    Ok(out)
}
