//! Plain comma-separated matrices.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub fn parse_matrix(text: &str) -> Result<DenseTensor> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {:?}: {e}", n + 1, c.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "line {} has {} columns, expected {}",
                    n + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("empty matrix".into()));
    }
    DenseTensor::from_rows(&rows)
}

pub fn format_matrix(m: &DenseTensor) -> Result<String> {
    let (r, c) = m.matrix_dims()?;
    let mut out = String::new();
    for i in 0..r {
        let row: Vec<String> = m.data()[i * c..(i + 1) * c].iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn read_matrix(path: &Path) -> Result<DenseTensor> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn write_matrix(path: &Path, m: &DenseTensor) -> Result<()> {
    std::fs::write(path, format_matrix(m)?)?;
    Ok(())
}
