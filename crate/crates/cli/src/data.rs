//! Numeric CSV ingestion: comma separated, mandatory header row, `.` decimals.

use std::path::Path;

use anyhow::Result;
use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::failure::{fail, Classify, Kind};

#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Array2<f64>,
    pub sha256: String,
}

impl Table {
    pub fn column_index(&self, name: &str, path: &Path) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| {
            fail(Kind::Data, format!("{}: no column `{name}` (columns: {})", path.display(), self.headers.join(", ")))
        })
    }

    pub fn column(&self, name: &str, path: &Path) -> Result<Vec<f64>> {
        Ok(self.rows.column(self.column_index(name, path)?).to_vec())
    }

    pub fn select(&self, names: &[String], path: &Path) -> Result<Array2<f64>> {
        let idx = names.iter().map(|n| self.column_index(n, path)).collect::<Result<Vec<_>>>()?;
        Ok(self.rows.select(ndarray::Axis(1), &idx))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_table(path: &Path) -> Result<Table> {
    let bytes = std::fs::read(path).kind_with(Kind::Io, || format!("reading {}", path.display()))?;
    let sha256 = sha256_hex(&bytes);
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(bytes.as_slice());
    let headers: Vec<String> = reader
        .headers()
        .kind_with(Kind::Data, || format!("{}: unreadable header row", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().any(String::is_empty) {
        return Err(fail(Kind::Data, format!("{}: header row is missing or has empty names", path.display())));
    }
    let mut values = Vec::new();
    let mut n = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.kind_with(Kind::Data, || format!("{}: record {}", path.display(), i + 1))?;
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                fail(Kind::Data, format!("{}: row {}, column `{}`: `{field}` is not a number", path.display(), i + 2, headers[j]))
            })?;
            if !v.is_finite() {
                return Err(fail(Kind::Data, format!("{}: row {}, column `{}` is not finite", path.display(), i + 2, headers[j])));
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(fail(Kind::Data, format!("{}: no data rows", path.display())));
    }
    let rows = Array2::from_shape_vec((n, headers.len()), values).kind(Kind::Data)?;
    Ok(Table { headers, rows, sha256 })
}
