//! Matrix files.
//!
//! Text format: a `rows cols` line followed by one line per row, entries
//! separated by whitespace and/or commas. Blank lines and lines starting
//! with `#` are skipped. Values are written with 17 significant digits.
//!
//! Binary format: `rows` and `cols` as little-endian `u64`, then
//! `rows * cols` little-endian `f64` values in row-major order.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{NmfError, Result};
use crate::matrix::{DenseMatrix, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixFormat {
    #[default]
    DelimitedText,
    RawBinary,
}

impl FromStr for MatrixFormat {
    type Err = NmfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" | "csv" | "delimited" | "delimited_text" => Ok(MatrixFormat::DelimitedText),
            "bin" | "binary" | "raw" | "raw_binary" => Ok(MatrixFormat::RawBinary),
            other => Err(NmfError::Config(format!("unknown matrix format '{other}'"))),
        }
    }
}

/// Formats a value with 17 significant digits (lossless for `f64`).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix(path: &Path, m: &DenseMatrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::DelimitedText => {
            let mut out = format!("{} {}\n", m.rows(), m.cols());
            for i in 0..m.rows() {
                let row: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
            fs::write(path, out)?;
        }
        MatrixFormat::RawBinary => {
            let mut out = Vec::with_capacity(16 + 8 * m.as_slice().len());
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            fs::write(path, out)?;
        }
    }
    Ok(())
}

/// Reads a matrix and checks its entries against `role`.
pub fn load_matrix(path: &Path, format: MatrixFormat, role: Role) -> Result<DenseMatrix> {
    let m = match format {
        MatrixFormat::DelimitedText => parse_text(path, &fs::read_to_string(path)?)?,
        MatrixFormat::RawBinary => parse_binary(path, &fs::read(path)?)?,
    };
    m.validate(role)?;
    Ok(m)
}

fn parse_err(path: &Path, msg: impl Into<String>) -> NmfError {
    NmfError::Parse {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty())
}

fn parse_text(path: &Path, text: &str) -> Result<DenseMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, "empty file"))?;
    let dims: Vec<usize> = tokens(header)
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, format!("bad shape line '{header}': {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(path, format!("shape line must hold two integers, got '{header}'")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (lineno, line) in lines {
        if seen_rows == rows {
            return Err(parse_err(path, format!("extra data on line {}", lineno + 1)));
        }
        let before = data.len();
        for tok in tokens(line) {
            let v: f64 = tok.parse().map_err(|_| {
                parse_err(
                    path,
                    format!("bad value '{tok}' at row {seen_rows}, col {}", data.len() - before),
                )
            })?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(parse_err(
                path,
                format!("row {seen_rows} has {} values, expected {cols}", data.len() - before),
            ));
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(parse_err(path, format!("found {seen_rows} rows, expected {rows}")));
    }
    DenseMatrix::from_vec(rows, cols, data).map_err(|e| parse_err(path, e.to_string()))
}

fn parse_binary(path: &Path, bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < 16 {
        return Err(parse_err(path, "file shorter than its 16-byte header"));
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| parse_err(path, "shape overflows"))?;
    if bytes.len() - 16 != expected {
        return Err(parse_err(
            path,
            format!("payload is {} bytes, {rows}x{cols} needs {expected}", bytes.len() - 16),
        ));
    }
    let data = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).map_err(|e| parse_err(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let m = DenseMatrix::from_rows(&[vec![0.1, 1.0 / 3.0, 7e-300], vec![2.5e10, 0.0, std::f64::consts::PI]]).unwrap();
        write_matrix(&p, &m, MatrixFormat::DelimitedText).unwrap();
        assert_eq!(load_matrix(&p, MatrixFormat::DelimitedText, Role::Data).unwrap(), m);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let m = DenseMatrix::from_fn(3, 5, |i, j| (i as f64 + 0.1) / (j as f64 + 0.7));
        write_matrix(&p, &m, MatrixFormat::RawBinary).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 16 + 15 * 8);
        assert_eq!(&bytes[0..8], &3u64.to_le_bytes());
        assert_eq!(load_matrix(&p, MatrixFormat::RawBinary, Role::Data).unwrap(), m);
    }

    #[test]
    fn comma_delimited_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, "2,2\n1.0, 2.0\n3,4\n").unwrap();
        let m = load_matrix(&p, MatrixFormat::DelimitedText, Role::Data).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn negative_entry_names_cell() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        fs::write(&p, "2 2\n1 2\n3 -1\n").unwrap();
        match load_matrix(&p, MatrixFormat::DelimitedText, Role::Data) {
            Err(NmfError::InvalidEntry { row, col, value, .. }) => {
                assert_eq!((row, col, value), (1, 1, -1.0));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(load_matrix(&p, MatrixFormat::DelimitedText, Role::Dual).is_ok());
    }

    #[test]
    fn malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        for bad in ["", "2\n1 2\n", "2 2\n1 2\n3\n", "1 2\n1 x\n", "1 1\n1\n2\n", "1 1\nNaN\n", "1 1\ninf\n"] {
            fs::write(&p, bad).unwrap();
            assert!(load_matrix(&p, MatrixFormat::DelimitedText, Role::Data).is_err(), "{bad:?}");
        }
        let b = dir.path().join("m.bin");
        fs::write(&b, [0u8; 10]).unwrap();
        assert!(load_matrix(&b, MatrixFormat::RawBinary, Role::Data).is_err());
    }
}
