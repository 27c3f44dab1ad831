//! Reading covariance matrices: dense text (whitespace- or comma-separated
//! rows) and Matrix Market coordinate/array files.

use std::path::Path;

use crate::error::{MespError, Result};
use crate::linalg::{Matrix, SymMatrix};

/// Largest tolerated relative asymmetry; anything below is averaged away.
pub const ASYMMETRY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Dense,
    MatrixMarket,
}

impl InputFormat {
    /// `.mtx`/`.mm` files are Matrix Market, everything else dense.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("mtx") | Some("mm") => Self::MatrixMarket,
            _ => Self::Dense,
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MespError {
    MespError::Parse {
        line,
        message: message.into(),
    }
}

fn number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("not a number: {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite entry {tok:?}")));
    }
    Ok(v)
}

pub fn parse(text: &str, format: InputFormat) -> Result<SymMatrix> {
    match format {
        InputFormat::Dense => parse_dense(text),
        InputFormat::MatrixMarket => parse_matrix_market(text),
    }
}

pub fn read_matrix(path: &Path, format: Option<InputFormat>) -> Result<SymMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MespError::InvalidArgument(format!("{}: {e}", path.display())))?;
    parse(&text, format.unwrap_or_else(|| InputFormat::from_path(path)))
}

/// Square matrix, one row per line. Blank lines and lines starting with `#`
/// or `%` are skipped.
pub fn parse_dense(text: &str) -> Result<SymMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| number(t, k + 1))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(k + 1, format!("expected {} entries, found {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(parse_err(0, "empty matrix"));
    }
    if rows[0].len() != n {
        return Err(parse_err(0, format!("matrix is {n}x{}, not square", rows[0].len())));
    }
    let m = Matrix::from_fn(n, n, |i, j| rows[i][j]);
    SymMatrix::try_new(m, ASYMMETRY_TOLERANCE)
}

/// Matrix Market `matrix coordinate|array real|integer general|symmetric`.
pub fn parse_matrix_market(text: &str) -> Result<SymMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix header"));
    }
    let coordinate = match fields[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(1, format!("unsupported layout {other:?}"))),
    };
    if !matches!(fields[3].as_str(), "real" | "integer" | "double") {
        return Err(parse_err(1, format!("unsupported field {:?}", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(parse_err(1, format!("unsupported symmetry {other:?}"))),
    };
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (k, size) = body.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(k + 1, format!("bad size {t:?}"))))
        .collect::<Result<_>>()?;
    let (rows, cols) = match dims.as_slice() {
        [r, c, _] if coordinate => (*r, *c),
        [r, c] if !coordinate => (*r, *c),
        _ => return Err(parse_err(k + 1, "malformed size line")),
    };
    if rows != cols || rows == 0 {
        return Err(parse_err(k + 1, format!("matrix is {rows}x{cols}, not square")));
    }
    let n = rows;
    let mut m = Matrix::zeros(n, n);
    if coordinate {
        let nnz = dims[2];
        let mut seen = 0;
        for (k, line) in body {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(parse_err(k + 1, "expected `row col value`"));
            }
            let idx = |t: &str| -> Result<usize> {
                let i: usize = t.parse().map_err(|_| parse_err(k + 1, format!("bad index {t:?}")))?;
                if i == 0 || i > n {
                    return Err(parse_err(k + 1, format!("index {i} out of range 1..={n}")));
                }
                Ok(i - 1)
            };
            let (i, j) = (idx(toks[0])?, idx(toks[1])?);
            let v = number(toks[2], k + 1)?;
            m[(i, j)] = v;
            if symmetric {
                m[(j, i)] = v;
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(parse_err(0, format!("expected {nnz} entries, found {seen}")));
        }
    } else {
        // Column-major; symmetric arrays list only the lower triangle.
        let mut values = Vec::new();
        for (k, line) in body {
            for t in line.split_whitespace() {
                values.push(number(t, k + 1)?);
            }
        }
        let expected = if symmetric { n * (n + 1) / 2 } else { n * n };
        if values.len() != expected {
            return Err(parse_err(0, format!("expected {expected} values, found {}", values.len())));
        }
        let mut it = values.into_iter();
        for j in 0..n {
            for i in if symmetric { j..n } else { 0..n } {
                let v = it.next().unwrap();
                m[(i, j)] = v;
                if symmetric {
                    m[(j, i)] = v;
                }
            }
        }
    }
    SymMatrix::try_new(m, ASYMMETRY_TOLERANCE)
}

/// Symmetric coordinate Matrix Market text (lower triangle, nonzeros only).
pub fn to_matrix_market(c: &SymMatrix) -> String {
    let n = c.order();
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j..n {
            let v = c.get(i, j);
            if v != 0.0 {
                entries.push(format!("{} {} {:e}", i + 1, j + 1, v));
            }
        }
    }
    format!(
        "%%MatrixMarket matrix coordinate real symmetric\n{n} {n} {}\n{}\n",
        entries.len(),
        entries.join("\n")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_csv() {
        let a = parse_dense("2 1\n1 3\n").unwrap();
        let b = parse_dense("# header\n2,1\n1,3\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get(1, 1), 3.0);
        assert!(matches!(parse_dense("1 2\n3 4\n"), Err(MespError::NotSymmetric { .. })));
        assert!(matches!(parse_dense("1 2\n3\n"), Err(MespError::Parse { line: 2, .. })));
        assert!(matches!(parse_dense("1 x\nx 1\n"), Err(MespError::Parse { .. })));
    }

    #[test]
    fn tiny_asymmetry_is_averaged() {
        let a = parse_dense("1 0.5\n0.500000000001 1\n").unwrap();
        assert_eq!(a.get(0, 1), a.get(1, 0));
    }

    #[test]
    fn matrix_market_round_trip() {
        let c = SymMatrix::new(Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, -0.5, 0.0, -0.5, 2.0]));
        let text = to_matrix_market(&c);
        assert_eq!(parse_matrix_market(&text).unwrap(), c);
        let arr = "%%MatrixMarket matrix array real symmetric\n% c\n2 2\n4\n1\n3\n";
        let m = parse_matrix_market(arr).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 1), 3.0);
        assert!(parse_matrix_market("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1\n").is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").is_err());
    }
}
