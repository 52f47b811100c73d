//! Serialization helpers: nested-row matrix encoding for the structured text
//! (JSON) documents and small CSV writers.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

/// Builds a matrix from row-major nested arrays, checking the expected shape.
pub fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(Error::Dimension(format!(
            "expected {nrows} rows, found {}",
            rows.len()
        )));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::Dimension(format!(
                "row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Serde adapter writing a matrix as row-major nested arrays.
pub mod matrix {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        Shape::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        Shape::deserialize(d)?
            .into_matrix()
            .map_err(serde::de::Error::custom)
    }

    #[derive(Serialize, Deserialize)]
    pub(super) struct Shape {
        rows: usize,
        cols: usize,
        data: Vec<Vec<f64>>,
    }

    impl From<&DMatrix<f64>> for Shape {
        fn from(m: &DMatrix<f64>) -> Self {
            Shape {
                rows: m.nrows(),
                cols: m.ncols(),
                data: super::to_rows(m),
            }
        }
    }

    impl Shape {
        pub(super) fn into_matrix(self) -> Result<DMatrix<f64>, String> {
            super::from_rows(&self.data, self.rows, self.cols).map_err(|e| e.to_string())
        }
    }
}

/// Serde adapter for a list of matrices.
pub mod matrix_list {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::matrix::Shape;

    pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(Shape::from).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        Vec::<Shape>::deserialize(d)?
            .into_iter()
            .map(|s| s.into_matrix().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Formats a float with the shortest representation that round-trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

/// Dense matrix as CSV, one matrix row per line, no header.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in m.row_iter() {
        let line: Vec<String> = r.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// CSV with a header line and preformatted cells.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.join(","));
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    struct Holder {
        #[serde(with = "matrix")]
        m: DMatrix<f64>,
    }

    #[test]
    fn matrix_adapter_round_trips() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.1, -2.5, 1e-17, 3.0, 4.0]);
        let text = serde_json::to_string(&Holder { m: m.clone() }).unwrap();
        let back: Holder = serde_json::from_str(&text).unwrap();
        assert_eq!(back.m, m);
    }

    #[test]
    fn from_rows_rejects_ragged() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(from_rows(&rows, 2, 2).is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e7] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
