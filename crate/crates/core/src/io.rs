//! Problem and ground-truth persistence.
//!
//! Two layouts are supported:
//!
//! * JSON: `{"n": .., "p": .., "x": [[row 0], [row 1], ...], "y": [...]}`.
//!   Ground truth: `{"beta0": [...], "sigma": .., "noise": [...], "active_set": [...]}`
//!   with 0-based indices.
//! * CSV pair: `X` as an `n x p` headerless CSV, `Y` as a headerless single column.
//!
//! `read_problem` dispatches on the extension: `.json` reads JSON, anything
//! else is read as `X.csv` with the response in a sibling file given by
//! `read_problem_csv`. A path of the form `x.csv,y.csv` is also accepted.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{GroundTruth, RegressionProblem};

pub fn read_problem_json(path: impl AsRef<Path>) -> Result<RegressionProblem> {
    let reader = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(reader)?)
}

pub fn write_problem_json(problem: &RegressionProblem, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, problem)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|e| {
                    Error::InvalidConfig(format!("{}: cannot parse {field:?}: {e}", path.display()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_problem_csv(x_path: impl AsRef<Path>, y_path: impl AsRef<Path>) -> Result<RegressionProblem> {
    let rows = read_csv_rows(x_path.as_ref())?;
    let y_rows = read_csv_rows(y_path.as_ref())?;
    let mut y = Vec::with_capacity(y_rows.len());
    for row in y_rows {
        if row.len() != 1 {
            return Err(Error::DimensionMismatch {
                what: "response CSV columns",
                expected: 1,
                found: row.len(),
            });
        }
        y.push(row[0]);
    }
    RegressionProblem::from_rows(&rows, y)
}

pub fn write_problem_csv(
    problem: &RegressionProblem,
    x_path: impl AsRef<Path>,
    y_path: impl AsRef<Path>,
) -> Result<()> {
    let mut wx = csv::WriterBuilder::new().has_headers(false).from_path(x_path)?;
    for row in problem.x().row_iter() {
        wx.write_record(row.iter().map(|v| format_f64(*v)))?;
    }
    wx.flush()?;
    let mut wy = csv::WriterBuilder::new().has_headers(false).from_path(y_path)?;
    for v in problem.y().iter() {
        wy.write_record([format_f64(*v)])?;
    }
    wy.flush()?;
    Ok(())
}

/// Reads `file.json`, or a CSV pair written as `x.csv,y.csv`.
pub fn read_problem(spec: &str) -> Result<RegressionProblem> {
    if let Some((x, y)) = spec.split_once(',') {
        return read_problem_csv(x, y);
    }
    read_problem_json(spec)
}

pub fn read_truth_json(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let reader = BufReader::new(File::open(path)?);
    let raw: GroundTruth = serde_json::from_reader(reader)?;
    // Recompute the support rather than trusting the file.
    GroundTruth::new(raw.beta0, raw.sigma, raw.noise)
}

pub fn write_truth_json(truth: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, truth)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn sample() -> RegressionProblem {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.25, 2.0, 0.1, 1e-17]);
        RegressionProblem::new(x, DVector::from_row_slice(&[1.0, -2.0, 1.0 / 3.0])).unwrap()
    }

    #[test]
    fn csv_pair_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (xp, yp) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
        let p = sample();
        write_problem_csv(&p, &xp, &yp).unwrap();
        let back = read_problem_csv(&xp, &yp).unwrap();
        assert_eq!(back, p);
        let spec = format!("{},{}", xp.display(), yp.display());
        assert_eq!(read_problem(&spec).unwrap(), p);
    }

    #[test]
    fn json_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let p = sample();
        write_problem_json(&p, &path).unwrap();
        assert_eq!(read_problem(path.to_str().unwrap()).unwrap(), p);
    }

    #[test]
    fn ragged_csv_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (xp, yp) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
        std::fs::write(&xp, "1,2\n3\n").unwrap();
        std::fs::write(&yp, "1\n2\n").unwrap();
        assert!(read_problem_csv(&xp, &yp).is_err());
    }

    #[test]
    fn json_with_wrong_n_rejected() {
        let doc = r#"{"n": 3, "p": 1, "x": [[1.0], [2.0]], "y": [1.0, 2.0]}"#;
        assert!(serde_json::from_str::<RegressionProblem>(doc).is_err());
    }
}
