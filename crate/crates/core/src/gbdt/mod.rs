//! Gradient boosted decision trees for binary classification: histogram
//! split finding, gradient-based one-side sampling and exclusive feature
//! bundling.

mod binning;
mod config;
mod efb;
mod ensemble;
mod goss;
mod loss;
mod model_io;
mod tree;

use std::path::PathBuf;

use thiserror::Error;

pub use binning::{BinMapper, BinnedData};
pub use config::TrainingConfig;
pub use efb::{conflict_rate, efb_bundle, efb_partition, Bundling};
pub use ensemble::{feature_importance, train, train_on_rows, BoostedEnsemble, Booster};
pub use goss::{goss_sample, Sample};
pub use loss::{compute_gradients, logistic_loss, mean_log_loss, sigmoid, GradientState};
pub use tree::{grow_tree, Node, Tree};

/// Dense row-major matrix of feature values.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl FeatureMatrix {
    pub fn new(values: Vec<f64>, n_rows: usize, n_cols: usize) -> Self {
        assert_eq!(values.len(), n_rows * n_cols, "matrix shape mismatch");
        FeatureMatrix {
            values,
            n_rows,
            n_cols,
        }
    }

    /// Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            values.extend_from_slice(r);
        }
        FeatureMatrix {
            values,
            n_rows: rows.len(),
            n_cols,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, r: usize, j: usize) -> f64 {
        self.values[r * self.n_cols + j]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |r| self.get(r, j))
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("no labeled rows to train on")]
    EmptyDataset,
    #[error("{rows} rows but {labels} labels")]
    Shape { rows: usize, labels: usize },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model expects {expected} features, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("feature schema differs from the one the model was trained on (model {model}, table {table})")]
    SchemaMismatch { model: String, table: String },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
