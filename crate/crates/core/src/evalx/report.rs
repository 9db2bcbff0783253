//! CSV outputs: `studies.csv`, `comparisons.csv`, `curves.csv`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::studies::StudyReport;
use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    /// `study/condition`.
    pub condition: String,
    pub run: usize,
    pub accuracy: f64,
}

#[derive(Serialize)]
struct ComparisonRow {
    pair: String,
    diff: f64,
    ci_lo: f64,
    ci_hi: f64,
    consistency: usize,
}

#[derive(Serialize)]
struct CurveRow {
    view: &'static str,
    size: usize,
    mean: f64,
    sd: f64,
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), EvalError> {
    let csv_err = |source| EvalError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_studies_csv(reports: &[&StudyReport], path: &Path) -> Result<(), EvalError> {
    let rows = reports.iter().flat_map(|r| {
        r.conditions.iter().flat_map(move |c| {
            c.accuracies.iter().enumerate().map(move |(run, &accuracy)| StudyRow {
                condition: format!("{}/{}", r.study, c.name),
                run,
                accuracy,
            })
        })
    });
    write_rows(path, rows)
}

pub fn read_studies_csv(path: &Path) -> Result<Vec<StudyRow>, EvalError> {
    let csv_err = |source| EvalError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<Vec<StudyRow>, _>>().map_err(csv_err)
}

pub fn write_comparisons_csv(reports: &[&StudyReport], path: &Path) -> Result<(), EvalError> {
    let rows = reports.iter().flat_map(|r| {
        r.comparisons.iter().map(move |c| ComparisonRow {
            pair: format!("{}/{}", r.study, c.pair()),
            diff: c.diff,
            ci_lo: c.ci_lo,
            ci_hi: c.ci_hi,
            consistency: c.consistency,
        })
    });
    write_rows(path, rows)
}

pub fn write_curves_csv(report: &StudyReport, path: &Path) -> Result<(), EvalError> {
    write_rows(
        path,
        report.curves.iter().map(|c| CurveRow {
            view: c.view.name(),
            size: c.size,
            mean: c.mean,
            sd: c.sd,
        }),
    )
}
