//! CSV input for user-supplied datasets.

use std::path::Path;

use anyhow::{bail, Context, Result};
use unicv::linalg::Mat;

/// A numeric table read from CSV: header names plus column-major access to
/// the response (first column) and remaining columns.
pub struct NumericCsv {
    /// Header names, in file order.
    pub header: Vec<String>,
    /// First column.
    pub response: Vec<f64>,
    /// Remaining columns as a matrix (one row per record).
    pub regressors: Mat,
}

/// Reads a numeric CSV with a mandatory header; the first column is the
/// response and every remaining column a regressor. A one-column file
/// yields a zero-width regressor matrix (some models accept that and
/// reject it themselves when it is not meaningful).
pub fn read_numeric_csv(path: &Path) -> Result<NumericCsv> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;

    let header: Vec<String> = reader
        .headers()
        .with_context(|| format!("reading header of {}", path.display()))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header.is_empty() {
        bail!("{}: empty header line", path.display());
    }
    for (i, name) in header.iter().enumerate() {
        if name.is_empty() {
            bail!("{}: empty name for column {}", path.display(), i + 1);
        }
        if name.parse::<f64>().is_ok() {
            bail!(
                "{}: header cell `{name}` is numeric; the first line must hold column names",
                path.display()
            );
        }
    }

    let cols = header.len();
    let mut response = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("reading {} line {}", path.display(), line + 2))?;
        if record.len() != cols {
            bail!(
                "{} line {}: expected {} fields, found {}",
                path.display(),
                line + 2,
                cols,
                record.len()
            );
        }
        let mut row = Vec::with_capacity(cols - 1);
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.parse().with_context(|| {
                format!(
                    "{} line {}: column `{}` value `{field}` is not numeric",
                    path.display(),
                    line + 2,
                    header[j]
                )
            })?;
            if j == 0 {
                response.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    if response.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let regressors = Mat::from_rows(&rows).context("assembling regressor matrix")?;
    Ok(NumericCsv { header, response, regressors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_a_simple_table() {
        let f = write_temp("y,x1,x2\n1.0,2.0,3.0\n4.0,5.0,6.0\n");
        let table = read_numeric_csv(f.path()).unwrap();
        assert_eq!(table.header, vec!["y", "x1", "x2"]);
        assert_eq!(table.response, vec![1.0, 4.0]);
        assert_eq!(table.regressors.rows(), 2);
        assert_eq!(table.regressors[(1, 1)], 6.0);
    }

    #[test]
    fn numeric_header_is_rejected() {
        let f = write_temp("1.0,2.0\n3.0,4.0\n");
        assert!(read_numeric_csv(f.path()).is_err());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let f = write_temp("y,x\n1.0,2.0\n3.0\n");
        assert!(read_numeric_csv(f.path()).is_err());
    }

    #[test]
    fn non_numeric_cell_is_rejected() {
        let f = write_temp("y,x\n1.0,apple\n");
        assert!(read_numeric_csv(f.path()).is_err());
    }
}
