//! Convergence traces on disk.
//!
//! A block of `# key: value` header lines, then a CSV header and one row per
//! record. Missing values are empty fields. Floats use 17 significant digits
//! so reading a file back reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use crate::error::{NmfError, Result};
use crate::fpa::{ConvergenceTrace, TraceRecord};
use crate::harness::io::fmt_f64;

pub const TRACE_COLUMNS: &str = "data_access,primal,dual,gap,wall_seconds,res_x,res_y,res_z";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceFile {
    /// Ordered `(key, value)` pairs: method, dims, seed, config echo.
    pub header: Vec<(String, String)>,
    pub records: Vec<TraceRecord>,
}

impl TraceFile {
    pub fn new(header: Vec<(String, String)>, trace: &ConvergenceTrace) -> Self {
        Self {
            header,
            records: trace.records().to_vec(),
        }
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(TRACE_COLUMNS);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for r in &self.records {
            let res = r.residuals.map(|a| a.map(Some)).unwrap_or([None; 3]);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.data_access,
                fmt_f64(r.primal),
                opt(r.dual),
                opt(r.gap),
                fmt_f64(r.wall_seconds),
                opt(res[0]),
                opt(res[1]),
                opt(res[2]),
            ));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text).map_err(|msg| NmfError::Parse {
            path: path.display().to_string(),
            msg,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut header = Vec::new();
        let mut records = Vec::new();
        let mut seen_columns = false;
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .trim_start()
                    .split_once(": ")
                    .ok_or_else(|| format!("line {lineno}: header line without ': '"))?;
                header.push((k.to_string(), v.to_string()));
                continue;
            }
            if !seen_columns {
                if line != TRACE_COLUMNS {
                    return Err(format!("line {lineno}: expected column header '{TRACE_COLUMNS}'"));
                }
                seen_columns = true;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            records.push(parse_row(line).map_err(|e| format!("line {lineno}: {e}"))?);
        }
        if !seen_columns {
            return Err("missing column header".into());
        }
        Ok(Self { header, records })
    }
}

fn parse_row(line: &str) -> std::result::Result<TraceRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 8 {
        return Err(format!("expected 8 fields, found {}", fields.len()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number '{s}'"));
    let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
    let res = [opt(fields[5])?, opt(fields[6])?, opt(fields[7])?];
    let residuals = match res {
        [Some(a), Some(b), Some(c)] => Some([a, b, c]),
        [None, None, None] => None,
        _ => return Err("residual columns must be all present or all empty".into()),
    };
    Ok(TraceRecord {
        data_access: fields[0]
            .parse()
            .map_err(|_| format!("bad data_access '{}'", fields[0]))?,
        primal: num(fields[1])?,
        dual: opt(fields[2])?,
        gap: opt(fields[3])?,
        wall_seconds: num(fields[4])?,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TraceFile {
        TraceFile {
            header: vec![("method".into(), "fpa".into()), ("n".into(), "4".into())],
            records: vec![
                TraceRecord::primal(0, 12.345678901234567, 0.0),
                TraceRecord {
                    dual: Some(-0.1 / 3.0),
                    gap: Some(1e-300),
                    ..TraceRecord::primal(5, 1.0 / 7.0, 0.002)
                },
                TraceRecord {
                    residuals: Some([0.1, 0.2, 3e-17]),
                    ..TraceRecord::primal(10, 0.5, 0.004)
                },
            ],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let t = sample();
        let back = TraceFile::parse(&t.render()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.header_value("n"), Some("4"));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        sample().write(&p).unwrap();
        assert_eq!(TraceFile::read(&p).unwrap(), sample());
    }

    #[test]
    fn rejects_garbage() {
        assert!(TraceFile::parse("").is_err());
        assert!(TraceFile::parse(&format!("{TRACE_COLUMNS}\n1,2\n")).is_err());
        assert!(TraceFile::parse(&format!("{TRACE_COLUMNS}\n1,x,,,0,,,\n")).is_err());
        assert!(TraceFile::parse(&format!("{TRACE_COLUMNS}\n1,1,,,0,1,,\n")).is_err());
    }
}
