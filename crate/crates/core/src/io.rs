//! CSV and JSON file formats.
//!
//! Matrices and datasets are headerless dense CSV, one row per line. Floats
//! are written in Rust's shortest round-trip form so files are byte-stable.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{CsadError, Result};
use crate::estimator::ResidualPoint;
use crate::evaluation::SweepRecord;
use crate::monitor::WindowReport;
use crate::numerics::SymMatrix;

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|_| {
                    CsadError::Parse(format!(
                        "{}: row {}, column {}: not a number: {field:?}",
                        path.display(),
                        line + 1,
                        col + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CsadError::Parse(format!(
                    "{}: row {} has {} columns, expected {}",
                    path.display(),
                    line + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sym_matrix(path: &Path) -> Result<SymMatrix> {
    SymMatrix::new(read_matrix_csv(path)?)
}

pub fn write_sym_matrix(path: &Path, m: &SymMatrix) -> Result<()> {
    write_matrix_csv(path, m.as_matrix())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::new(read_matrix_csv(path)?)
}

pub fn write_dataset(path: &Path, d: &Dataset) -> Result<()> {
    write_matrix_csv(path, d.as_matrix())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub const SWEEP_HEADER: &str = "lambda,method,tp,fp,fn,precision,recall,iterations,converged";
pub const TRACE_HEADER: &str = "iteration,primal,eps_primal,dual,eps_dual";
pub const WINDOW_SUMMARY_HEADER: &str = "window_index,start,end,n_edges,flagged,converged,iterations";

pub fn write_sweep_csv<W: Write>(mut out: W, records: &[SweepRecord]) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.lambda, r.method, r.tp, r.fp, r.fn_, r.precision, r.recall, r.iterations, r.converged
        )?;
    }
    Ok(())
}

pub fn write_trace_csv<W: Write>(mut out: W, trace: &[ResidualPoint]) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for t in trace {
        writeln!(out, "{},{},{},{},{}", t.iteration, t.primal, t.eps_primal, t.dual, t.eps_dual)?;
    }
    Ok(())
}

/// One JSON object per line.
pub fn write_window_jsonl<W: Write>(mut out: W, reports: &[WindowReport]) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_window_summary_csv<W: Write>(mut out: W, reports: &[WindowReport]) -> Result<()> {
    writeln!(out, "{WINDOW_SUMMARY_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.window_index,
            r.start_row,
            r.end_row,
            r.detected_edges.len(),
            r.flagged,
            r.converged,
            r.iterations
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{EdgeSet, Method};
    use proptest::prelude::*;

    #[test]
    fn rejects_ragged_and_non_numeric() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "1,2\n3\n").unwrap();
        assert!(read_matrix_csv(&ragged).is_err());
        let text = dir.path().join("text.csv");
        std::fs::write(&text, "1,abc\n").unwrap();
        assert!(matches!(read_matrix_csv(&text), Err(CsadError::Parse(_))));
    }

    #[test]
    fn sweep_and_window_formats() {
        let rec = SweepRecord {
            lambda: 0.5,
            method: Method::Bsad,
            tp: 3,
            fp: 1,
            fn_: 2,
            precision: 0.75,
            recall: 0.6,
            iterations: 42,
            converged: true,
        };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &[rec]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "lambda,method,tp,fp,fn,precision,recall,iterations,converged\n0.5,BSAD,3,1,2,0.75,0.6,42,true\n"
        );

        let w = WindowReport {
            window_index: 1,
            start_row: 10,
            end_row: 20,
            detected_edges: EdgeSet::from_pairs([(4, 2)]),
            flagged: true,
            converged: false,
            iterations: 7,
        };
        let mut buf = Vec::new();
        write_window_jsonl(&mut buf, std::slice::from_ref(&w)).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"window_index\":1,\"start_row\":10,\"end_row\":20,\"detected_edges\":[[2,4]],\"flagged\":true,\"converged\":false,\"iterations\":7}\n"
        );
        let mut buf = Vec::new();
        write_window_summary_csv(&mut buf, &[w]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "window_index,start,end,n_edges,flagged,converged,iterations\n1,10,20,1,true,false,7\n"
        );
    }

    proptest! {
        #[test]
        fn matrix_csv_round_trips_bit_exact(
            (n, p, vals) in (1usize..6, 1usize..6).prop_flat_map(|(n, p)| {
                (Just(n), Just(p), proptest::collection::vec(proptest::num::f64::NORMAL, n * p))
            })
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.csv");
            let m = DMatrix::from_row_slice(n, p, &vals);
            write_matrix_csv(&path, &m).unwrap();
            prop_assert_eq!(read_matrix_csv(&path).unwrap(), m);
        }
    }
}
