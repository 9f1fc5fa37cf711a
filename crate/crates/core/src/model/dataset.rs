use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `n × dim_w` iid observations with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    rows: Array2<T>,
    column_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(rows: Array2<T>, column_names: Vec<String>) -> Result<Self> {
        let (n, cols) = rows.dim();
        if n < 2 {
            return Err(Error::input(format!("dataset needs at least 2 rows, got {n}")));
        }
        if cols != column_names.len() {
            return Err(Error::input(format!("dataset has {cols} columns but {} names", column_names.len())));
        }
        if let Some(((r, c), _)) = rows.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::input(format!("non-finite entry at row {}, column {}", r + 1, c + 1)));
        }
        let rows = rows.as_standard_layout().into_owned();
        Ok(Self { rows, column_names })
    }

    /// Builds a dataset from row vectors.
    pub fn from_rows(rows: &[Vec<T>], column_names: Vec<String>) -> Result<Self> {
        let cols = column_names.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::input(format!("row {} has {} entries, expected {cols}", i + 1, r.len())));
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        let arr = Array2::from_shape_vec((rows.len(), cols), flat).map_err(|e| Error::input(e.to_string()))?;
        Self::new(arr, column_names)
    }

    /// Single-column dataset.
    pub fn from_column(name: &str, values: &[T]) -> Result<Self> {
        let arr =
            Array2::from_shape_vec((values.len(), 1), values.to_vec()).map_err(|e| Error::input(e.to_string()))?;
        Self::new(arr, vec![name.to_string()])
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim_w(&self) -> usize {
        self.rows.ncols()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn rows(&self) -> &Array2<T> {
        &self.rows
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let cols = self.rows.ncols();
        let flat = self.rows.as_slice().expect("standard layout");
        &flat[i * cols..(i + 1) * cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        let cols = self.rows.ncols();
        self.rows.as_slice().expect("standard layout").chunks_exact(cols)
    }

    /// Applies `f` to every entry, keeping names.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.rows.mapv(f), self.column_names.clone())
    }

    /// Parses CSV with a header row; every cell must be numeric.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if names.is_empty() || names.iter().any(String::is_empty) {
            return Err(Error::input("CSV header must name every column"));
        }
        let mut flat = Vec::new();
        let mut n = 0usize;
        for (r, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::input(format!("data row {}: {e}", r + 1)))?;
            if record.len() != names.len() {
                return Err(Error::input(format!(
                    "data row {}: {} cells, header has {}",
                    r + 1,
                    record.len(),
                    names.len()
                )));
            }
            for (c, cell) in record.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::input(format!(
                        "data row {}, column {} ('{}'): cannot parse '{cell}' as a number",
                        r + 1,
                        c + 1,
                        names[c]
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::input(format!(
                        "data row {}, column {} ('{}'): non-finite value",
                        r + 1,
                        c + 1,
                        names[c]
                    )));
                }
                flat.push(T::lit(v));
            }
            n += 1;
        }
        let arr = Array2::from_shape_vec((n, names.len()), flat).map_err(|e| Error::input(e.to_string()))?;
        Self::new(arr, names)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.column_names)?;
        for row in self.iter_rows() {
            wtr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_preserves_bits() {
        let d = Dataset::from_rows(&[vec![0.1, -2.5e-7], vec![1.0 / 3.0, 4.0]], vec!["a".into(), "b".into()]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn parse_failure_reports_location() {
        let text = "x,y\n1,2\n3,oops\n";
        let err = Dataset::<f64>::read_csv(text.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("column 2") && msg.contains("'y'"), "{msg}");
    }

    #[test]
    fn rejects_short_and_non_finite() {
        assert!(Dataset::from_column("w", &[1.0]).is_err());
        assert!(Dataset::from_column("w", &[1.0, f64::NAN]).is_err());
        assert!(Dataset::<f64>::read_csv("w\n1\ninf\n".as_bytes()).is_err());
    }

    #[test]
    fn row_access() {
        let d = Dataset::from_rows(&[vec![1.0f32, 2.0], vec![3.0, 4.0]], vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.iter_rows().count(), 2);
    }
}
