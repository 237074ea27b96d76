//! Reading and writing matrices and point sets.
//!
//! Supported inputs: MatrixMarket `coordinate` files (`real` or `integer`,
//! `symmetric` or `general`), dense comma-separated matrices and `x,y` point
//! lists. Parse errors carry 1-based line numbers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{PointCloud, SpdMatrix, Storage};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse {:?} as a number", tok.trim())))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value {v}")));
    }
    Ok(v)
}

fn parse_index(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| parse_err(line, format!("cannot parse {tok:?} as an index")))
}

/// Parses a MatrixMarket coordinate matrix.
pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<SpdMatrix> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?.to_ascii_lowercase();
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(1, "expected a '%%MatrixMarket matrix ...' header"));
    }
    if fields[2] != "coordinate" {
        return Err(parse_err(1, format!("unsupported format {:?}", fields[2])));
    }
    if !matches!(fields[3], "real" | "integer") {
        return Err(parse_err(1, format!("unsupported field {:?}", fields[3])));
    }
    if !matches!(fields[4], "symmetric" | "general") {
        return Err(parse_err(1, format!("unsupported symmetry {:?}", fields[4])));
    }

    let mut size: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut last = 1;
    for (no, line) in lines {
        last = no;
        let line = line?;
        let s = line.trim();
        if s.is_empty() || s.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = s.split_whitespace().collect();
        match size {
            None => {
                if toks.len() != 3 {
                    return Err(parse_err(no, "expected 'rows cols entries'"));
                }
                let (r, c) = (parse_index(toks[0], no)?, parse_index(toks[1], no)?);
                let nnz = parse_index(toks[2], no)?;
                if r != c || r == 0 {
                    return Err(parse_err(no, format!("matrix must be square, got {r}x{c}")));
                }
                size = Some((r, nnz));
                triplets.reserve(nnz);
            }
            Some((order, _)) => {
                if toks.len() != 3 {
                    return Err(parse_err(no, "expected 'row col value'"));
                }
                let (i, j) = (parse_index(toks[0], no)?, parse_index(toks[1], no)?);
                if i == 0 || j == 0 || i > order || j > order {
                    return Err(parse_err(
                        no,
                        format!("index ({i}, {j}) out of range 1..={order}"),
                    ));
                }
                triplets.push((i - 1, j - 1, parse_f64(toks[2], no)?));
            }
        }
    }
    let (order, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if triplets.len() != nnz {
        return Err(parse_err(
            last,
            format!("size line announces {nnz} entries, found {}", triplets.len()),
        ));
    }
    SpdMatrix::from_triplets(order, triplets)
}

/// Parses a dense symmetric matrix, one comma-separated row per line.
pub fn parse_dense_csv<R: BufRead>(reader: R) -> Result<SpdMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let no = i + 1;
        let line = line?;
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let row = s.split(',').map(|t| parse_f64(t, no)).collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    no,
                    format!("row has {} entries, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows[0].len() != n {
        return Err(Error::InvalidShape(format!(
            "dense matrix must be square, got {n} rows of {} entries",
            rows.first().map_or(0, Vec::len)
        )));
    }
    let full: Vec<f64> = rows.into_iter().flatten().collect();
    SpdMatrix::from_dense(n, &full)
}

/// Parses `x,y` points; an optional first line `x,y` is skipped.
pub fn parse_points_csv<R: BufRead>(reader: R) -> Result<PointCloud> {
    let mut pts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let no = i + 1;
        let line = line?;
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') || (no == 1 && s.eq_ignore_ascii_case("x,y")) {
            continue;
        }
        let toks: Vec<&str> = s.split(',').collect();
        if toks.len() != 2 {
            return Err(parse_err(no, format!("expected 'x,y', got {} fields", toks.len())));
        }
        pts.push([parse_f64(toks[0], no)?, parse_f64(toks[1], no)?]);
    }
    PointCloud::new(pts)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

/// Reads a matrix, choosing the format by extension (`.mtx` or dense CSV).
pub fn read_matrix(path: &Path) -> Result<SpdMatrix> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("mtx") => parse_matrix_market(open(path)?),
        _ => parse_dense_csv(open(path)?),
    }
}

pub fn read_points(path: &Path) -> Result<PointCloud> {
    parse_points_csv(open(path)?)
}

/// Writes the lower triangle as a symmetric MatrixMarket coordinate file.
pub fn write_matrix_market(path: &Path, m: &SpdMatrix) -> Result<()> {
    let mut entries: Vec<(usize, usize, f64)> = match m.storage() {
        Storage::Sparse(s) => s.entries().collect(),
        _ => {
            let n = m.order();
            (0..n)
                .flat_map(|i| (0..=i).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, m.get(i, j)))
                .filter(|e| e.2 != 0.0)
                .collect()
        }
    };
    entries.sort_by_key(|e| (e.1, e.0));
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", m.order(), m.order(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_market_symmetric() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 3\n1 1 2.0\n2 1 -1\n2 2 4\n";
        let m = parse_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(m.to_dense(), vec![2.0, -1.0, -1.0, 4.0]);
    }

    #[test]
    fn matrix_market_errors_have_lines() {
        let bad = "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 x 2.0\n";
        match parse_matrix_market(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let range = "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 2.0\n";
        assert!(matches!(parse_matrix_market(range.as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(
            parse_matrix_market("%%MatrixMarket matrix array real general\n".as_bytes()).is_err()
        );
        let short = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2.0\n";
        assert!(matches!(parse_matrix_market(short.as_bytes()), Err(Error::Parse { line: 3, .. })));
        let asym = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1.0\n2 1 2.0\n";
        assert!(matches!(parse_matrix_market(asym.as_bytes()), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn dense_csv() {
        let m = parse_dense_csv("2, 0\n0, 4\n".as_bytes()).unwrap();
        assert_eq!(m.to_dense(), vec![2.0, 0.0, 0.0, 4.0]);
        assert!(matches!(
            parse_dense_csv("1,2\n3\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_dense_csv("1,2\n3,1\n".as_bytes()).is_err());
    }

    #[test]
    fn points_csv() {
        let p = parse_points_csv("x,y\n0.1,0.2\n0.5,0.5\n".as_bytes()).unwrap();
        assert_eq!(p.len(), 2);
        assert!(matches!(
            parse_points_csv("0.1,0.2\n0.3\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_points_csv("2.0,0.1\n".as_bytes()).is_err());
    }
}
