use std::collections::HashMap;
use std::path::Path;

use crate::dataset::{write_csv, DatasetError, Label, LabeledDataset, RowError};
use crate::metrics::{evaluate, MetricsReport};

pub const PREDICTION_HEADER: [&str; 4] = ["id", "label", "probability", "prediction"];

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub id: String,
    pub label: Label,
    pub probability: f64,
    pub prediction: bool,
}

pub fn predictions_for(ds: &LabeledDataset, probs: &[f64], threshold: f64) -> Vec<PredictionRow> {
    ds.ids()
        .iter()
        .zip(ds.labels())
        .zip(probs)
        .map(|((id, &label), &p)| PredictionRow {
            id: id.clone(),
            label,
            probability: p,
            prediction: p >= threshold,
        })
        .collect()
}

pub fn write_predictions(
    path: impl AsRef<Path>,
    rows: &[PredictionRow],
) -> Result<(), DatasetError> {
    let rows = rows.iter().map(|r| {
        vec![
            r.id.clone(),
            r.label.to_string(),
            r.probability.to_string(),
            (r.prediction as u8).to_string(),
        ]
    });
    write_csv(path.as_ref(), &PREDICTION_HEADER, rows)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRow>, DatasetError> {
    let path = path.as_ref();
    let csv_err = |source| DatasetError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != PREDICTION_HEADER {
        return Err(DatasetError::Header {
            path: path.to_path_buf(),
            expected: PREDICTION_HEADER.join(","),
        });
    }
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let parsed = (|| {
            let label: Label = rec[1]
                .parse()
                .map_err(|_| format!("invalid label \"{}\"", &rec[1]))?;
            let probability: f64 = rec[2]
                .parse()
                .map_err(|_| format!("invalid probability \"{}\"", &rec[2]))?;
            let prediction = match &rec[3] {
                "1" => true,
                "0" => false,
                other => return Err(format!("invalid prediction \"{other}\"")),
            };
            Ok(PredictionRow {
                id: rec[0].to_string(),
                label,
                probability,
                prediction,
            })
        })();
        match parsed {
            Ok(r) => rows.push(r),
            Err(message) => errors.push(RowError { line, message }),
        }
    }
    if errors.is_empty() {
        Ok(rows)
    } else {
        Err(DatasetError::Rows {
            path: path.to_path_buf(),
            errors,
        })
    }
}

/// Metrics over rows that carry a label and, when given, whose id is in `keep`.
pub fn evaluate_rows(rows: &[PredictionRow], keep: Option<&dyn Fn(&str) -> bool>) -> MetricsReport {
    let (p, y): (Vec<bool>, Vec<bool>) = rows
        .iter()
        .filter(|r| keep.is_none_or(|k| k(&r.id)))
        .filter_map(|r| r.label.target().map(|y| (r.prediction, y)))
        .unzip();
    evaluate(&p, &y).expect("aligned by construction")
}

pub fn as_map(rows: &[PredictionRow]) -> HashMap<String, bool> {
    rows.iter().map(|r| (r.id.clone(), r.prediction)).collect()
}

pub fn write_importance(
    path: impl AsRef<Path>,
    ranked: &[(String, usize)],
    top: usize,
) -> Result<(), DatasetError> {
    let rows = ranked
        .iter()
        .take(top)
        .enumerate()
        .map(|(i, (name, n))| vec![(i + 1).to_string(), name.clone(), n.to_string()]);
    write_csv(path.as_ref(), &["rank", "feature", "splits"], rows)
}

pub fn write_metrics(
    path: impl AsRef<Path>,
    rows: &[(String, MetricsReport)],
) -> Result<(), DatasetError> {
    let mut header = vec!["task"];
    header.extend(MetricsReport::HEADER);
    let rows = rows.iter().map(|(task, m)| {
        let mut r = vec![task.clone()];
        r.extend(m.to_record());
        r
    });
    write_csv(path.as_ref(), &header, rows)
}
