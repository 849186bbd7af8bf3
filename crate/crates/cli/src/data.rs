//! Sample CSVs: one observation per row, one coordinate per column.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use xmmd_core::SampleMatrix;

use crate::error::{CliError, Result};

/// Parses a numeric CSV. Lines starting with `#` are skipped; with
/// `header` the first remaining line is skipped too.
pub fn read_sample<R: Read>(reader: R, header: bool, name: &str) -> Result<SampleMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(CliError::Data(format!(
                    "{name}: ragged row at line {line}: expected {w} columns, found {}",
                    record.len()
                )))
            }
            Some(_) => {}
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Data(format!(
                    "{name}: line {line}, column {}: `{field}` is not a number",
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!(
                    "{name}: line {line}, column {}: non-finite value",
                    col + 1
                )));
            }
            data.push(v);
        }
        rows += 1;
    }
    let d = width
        .filter(|_| rows > 0)
        .ok_or_else(|| CliError::Data(format!("{name}: no observations")))?;
    Ok(SampleMatrix::from_vec(data, rows, d)?)
}

pub fn read_sample_file(path: &Path, header: bool) -> Result<SampleMatrix> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| CliError::Data(format!("{name}: {e}")))?;
    read_sample(file, header, &name)
}
