//! Headerless CSV matrices, one row per sample.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CliError, Result};

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::format(path, e))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(CliError::format(
                    path,
                    format!("row {} has {} fields, expected {c}", line + 1, record.len()),
                ))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::format(path, format!("row {}: `{field}` is not a number", line + 1))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CliError::format(path, "no data rows"))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// Writes with the shortest representation that parses back to the same
/// `f64`, so files round-trip exactly.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 20);
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| CliError::io(path, e))
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> std::result::Result<DMatrix<f64>, String> {
    let n = rows.len();
    let q = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != q) {
        return Err("rows have different lengths".into());
    }
    Ok(DMatrix::from_fn(n, q, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -1e-300, 1.0 / 3.0, 2.5e17, -0.0, 7.0]);
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(m, back);
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn ragged_and_bad_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1,2\n3\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(CliError::Format { .. })));
        std::fs::write(&path, "1,x\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(CliError::Format { .. })));
        assert!(matches!(
            read_matrix(&dir.path().join("missing.csv")),
            Err(CliError::Io { .. })
        ));
    }
}
