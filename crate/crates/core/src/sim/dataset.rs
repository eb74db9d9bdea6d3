use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::construction::{normalize_design, DesignMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    AllZero,
    /// Identical to the earlier column with this (0-based, original) index.
    DuplicateOf(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedColumn {
    /// 0-based position in the input file.
    pub index: usize,
    pub name: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub design: DesignMatrix,
    pub y: DVector<f64>,
    /// Names of the retained columns, in design order.
    pub names: Vec<String>,
    /// Original 0-based index of each retained column.
    pub kept: Vec<usize>,
    pub dropped: Vec<DroppedColumn>,
}

fn parse_cell(cell: &str, line: u64, column: usize) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::ParseError {
        line: line as usize,
        column,
        message: format!("'{cell}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::ParseError {
            line: line as usize,
            column,
            message: format!("'{cell}' is not finite"),
        });
    }
    Ok(v)
}

/// Parses a design CSV with a header row of feature names. Returns the names
/// and the raw `n × p` matrix. Line and column numbers in errors are 1-based.
pub fn parse_design_csv<R: Read>(input: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(&e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let p = names.len();
    let mut values = Vec::new();
    let mut n = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |pos| pos.line());
        if record.len() != p {
            return Err(Error::ShapeMismatch(format!(
                "line {line} has {} fields, header has {p}",
                record.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            values.push(parse_cell(cell, line, j + 1)?);
        }
        n += 1;
    }
    Ok((names, DMatrix::from_row_slice(n, p, &values)))
}

/// Parses a single-column response. A first line that is not a number is
/// taken as a header.
pub fn parse_response_csv<R: Read>(input: R) -> Result<DVector<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |pos| pos.line());
        if record.len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "response line {line} has {} fields, expected 1",
                record.len()
            )));
        }
        match parse_cell(&record[0], line, 1) {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => {}
            Err(e) => return Err(e),
        }
    }
    Ok(DVector::from_vec(values))
}

fn csv_error(e: &csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::ParseError {
            line: pos.line() as usize,
            column: 0,
            message: e.to_string(),
        },
        None => Error::Io(e.to_string()),
    }
}

/// Drops all-zero and exactly duplicated columns, then normalizes.
pub fn clean_design(names: Vec<String>, raw: DMatrix<f64>, y: DVector<f64>) -> Result<LoadedDataset> {
    if y.len() != raw.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "response has {} rows, design has {}",
            y.len(),
            raw.nrows()
        )));
    }
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..raw.ncols() {
        let col = raw.column(j);
        let reason = if col.iter().all(|&v| v == 0.0) {
            Some(DropReason::AllZero)
        } else {
            kept.iter()
                .find(|&&k| raw.column(k) == col)
                .map(|&k| DropReason::DuplicateOf(k))
        };
        match reason {
            Some(reason) => dropped.push(DroppedColumn {
                index: j,
                name: names[j].clone(),
                reason,
            }),
            None => kept.push(j),
        }
    }
    let (n, p) = (raw.nrows(), kept.len());
    if p > n {
        return Err(Error::TooManyFeatures { features: p, rows: n });
    }
    let design = normalize_design(&raw.select_columns(&kept))?;
    Ok(LoadedDataset {
        design,
        y,
        names: kept.iter().map(|&j| names[j].clone()).collect(),
        kept,
        dropped,
    })
}

/// Reads, cleans and normalizes a design/response pair from disk.
pub fn load_dataset(design_path: &Path, response_path: &Path) -> Result<LoadedDataset> {
    let (names, raw) = parse_design_csv(File::open(design_path)?)?;
    let y = parse_response_csv(File::open(response_path)?)?;
    clean_design(names, raw, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(design: &str, response: &str) -> Result<LoadedDataset> {
        let (names, raw) = parse_design_csv(design.as_bytes())?;
        clean_design(names, raw, parse_response_csv(response.as_bytes())?)
    }

    #[test]
    fn well_formed_three_by_two() {
        let d = load("a,b\n1,0\n0,1\n1,1\n", "1\n2\n3\n").unwrap();
        assert_eq!((d.design.nrows(), d.design.ncols()), (3, 2));
        assert_eq!(d.names, vec!["a", "b"]);
        assert!(d.dropped.is_empty());
        assert_eq!(d.y.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn response_header_is_optional() {
        let d = load("a,b\n1,0\n0,1\n1,1\n", "y\n1\n2\n3\n").unwrap();
        assert_eq!(d.y.len(), 3);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            load("a,b\n1,0\n0,1\n1,1\n", "1\n2\n"),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn ragged_rows() {
        assert!(matches!(load("a,b\n1,0\n0\n", "1\n2\n"), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn bad_cell_reports_position() {
        match load("a,b\n1,0\n0,x\n1,1\n", "1\n2\n3\n") {
            Err(Error::ParseError { line, column, .. }) => assert_eq!((line, column), (3, 2)),
            other => panic!("{other:?}"),
        }
        match load("a\n1\n0\n", "1\nz\n") {
            Err(Error::ParseError { line, column, .. }) => assert_eq!((line, column), (2, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_and_duplicate_columns_are_dropped() {
        let d = load("a,z,b,a2\n1,0,0,1\n0,0,1,0\n1,0,1,1\n", "1\n2\n3\n").unwrap();
        assert_eq!(d.kept, vec![0, 2]);
        assert_eq!(
            d.dropped,
            vec![
                DroppedColumn {
                    index: 1,
                    name: "z".into(),
                    reason: DropReason::AllZero
                },
                DroppedColumn {
                    index: 3,
                    name: "a2".into(),
                    reason: DropReason::DuplicateOf(0)
                },
            ]
        );
    }

    #[test]
    fn too_many_features() {
        assert!(matches!(
            load("a,b,c\n1,0,1\n0,1,2\n", "1\n2\n"),
            Err(Error::TooManyFeatures { features: 3, rows: 2 })
        ));
    }
}
