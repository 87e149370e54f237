//! Plain-text matrix exchange shared by the exporters.
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! reading a file back reproduces the in-memory `f64` bit for bit.

use std::path::Path;

use ndarray::Array2;

use crate::{Error, Result};

pub fn write_matrix_csv(path: &Path, matrix: &Array2<f64>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for row in matrix.rows() {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if *cols.get_or_insert(record.len()) != record.len() {
            return Err(Error::format(path, format!("ragged row {rows}")));
        }
        for field in record.iter() {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::format(path, format!("row {rows}: {e}")))?,
            );
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), values)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Replaces anything but ASCII alphanumerics, `-` and `_` with `_`.
pub fn safe_name(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            rows in 1usize..5,
            cols in 1usize..5,
            values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, 25),
        ) {
            let m = Array2::from_shape_fn((rows, cols), |(i, j)| values[i * 5 + j]);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.csv");
            write_matrix_csv(&path, &m).unwrap();
            let back = read_matrix_csv(&path).unwrap();
            prop_assert_eq!(back.dim(), m.dim());
            for (a, b) in back.iter().zip(m.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn safe_names() {
        assert_eq!(safe_name("a/b c"), "a_b_c");
        assert_eq!(safe_name("AE-1_x"), "AE-1_x");
    }
}
