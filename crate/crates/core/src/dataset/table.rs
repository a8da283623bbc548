use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{read_to_string, DatasetError, Label};

const FORMAT_TAG: &str = "gamblescan-features/1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of an ordered feature-name list. Models record it so they can
/// refuse feature tables with a different column layout.
pub fn schema_digest<S: AsRef<str>>(names: &[S]) -> String {
    let joined: Vec<&str> = names.iter().map(|s| s.as_ref()).collect();
    sha256_hex(joined.join("\n").as_bytes())
}

/// `x.features.csv` -> `x.schema`; any other path gets `.schema` appended.
pub fn schema_path_for(features_path: &Path) -> PathBuf {
    let name = features_path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("");
    match name.strip_suffix(".features.csv") {
        Some(stem) => features_path.with_file_name(format!("{stem}.schema")),
        None => features_path.with_file_name(format!("{name}.schema")),
    }
}

/// Feature matrix with one row per entity.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    ids: Vec<String>,
    feature_names: Vec<String>,
    values: Vec<f64>,
    labels: Vec<Label>,
    units: String,
}

impl LabeledDataset {
    pub fn new(
        ids: Vec<String>,
        feature_names: Vec<String>,
        values: Vec<f64>,
        labels: Vec<Label>,
    ) -> Result<Self, DatasetError> {
        if ids.len() != labels.len() {
            return Err(DatasetError::Invariant(format!(
                "{} ids but {} labels",
                ids.len(),
                labels.len()
            )));
        }
        if values.len() != ids.len() * feature_names.len() {
            return Err(DatasetError::Invariant(format!(
                "{} values for {} rows x {} features",
                values.len(),
                ids.len(),
                feature_names.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(DatasetError::Invariant(format!(
                "duplicate entity id {dup}"
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(DatasetError::Invariant(format!(
                "duplicate feature name {dup}"
            )));
        }
        Ok(LabeledDataset {
            ids,
            feature_names,
            values,
            labels,
            units: String::new(),
        })
    }

    /// Free-text note on units, persisted in the schema sidecar.
    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = units.into().replace(['\n', '\r'], " ");
        self
    }

    pub fn units(&self) -> &str {
        &self.units
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.n_features();
        &self.values[i * k..(i + 1) * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn schema_digest(&self) -> String {
        schema_digest(&self.feature_names)
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| self.labels[i].is_labeled())
            .collect()
    }

    pub fn unlabeled_count(&self) -> usize {
        self.labels.iter().filter(|l| !l.is_labeled()).count()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let k = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * k);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        LabeledDataset {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            values,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            units: self.units.clone(),
        }
    }

    /// Replaces labels by id; ids not in `labels` keep their current label.
    pub fn relabel(&mut self, labels: &std::collections::HashMap<String, Label>) {
        for (id, label) in self.ids.iter().zip(self.labels.iter_mut()) {
            if let Some(l) = labels.get(id) {
                *label = *l;
            }
        }
    }

    fn to_csv_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string(), "label".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for i in 0..self.n_rows() {
            let mut rec = vec![self.ids[i].clone(), self.labels[i].to_string()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Writes `path` (CSV) plus the schema sidecar next to it.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let path = path.as_ref();
        let csv_bytes = self.to_csv_bytes();
        let sidecar = SchemaSidecar {
            rows: self.n_rows(),
            schema_digest: self.schema_digest(),
            content_digest: sha256_hex(&csv_bytes),
            units: self.units.clone(),
            feature_names: self.feature_names.clone(),
        };
        fs::write(path, &csv_bytes).map_err(|e| DatasetError::io(path, e))?;
        let side = schema_path_for(path);
        fs::write(&side, sidecar.to_text()).map_err(|e| DatasetError::io(&side, e))
    }

    /// Reads a table produced by [`LabeledDataset::write`], verifying the
    /// sidecar's feature list and content digest.
    pub fn read(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let side_path = schema_path_for(path);
        let sidecar = SchemaSidecar::parse(&read_to_string(&side_path)?, &side_path)?;
        let bytes = fs::read(path).map_err(|e| DatasetError::io(path, e))?;
        if sha256_hex(&bytes) != sidecar.content_digest {
            return Err(DatasetError::format(
                path,
                "content digest does not match schema sidecar",
            ));
        }

        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(bytes.as_slice());
        let mut records = rdr.records();
        let header = match records.next() {
            Some(r) => r.map_err(|source| DatasetError::Csv {
                path: path.to_path_buf(),
                source,
            })?,
            None => return Err(DatasetError::format(path, "missing header")),
        };
        if header.len() < 2 || &header[0] != "id" || &header[1] != "label" {
            return Err(DatasetError::format(
                path,
                "header must start with id,label",
            ));
        }
        let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        if names != sidecar.feature_names {
            return Err(DatasetError::format(
                path,
                "feature names differ from schema sidecar",
            ));
        }
        let width = header.len();
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut values = Vec::new();
        for rec in records {
            let rec = rec.map_err(|source| DatasetError::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != width {
                return Err(DatasetError::format(
                    path,
                    format!("line {line}: expected {width} columns, found {}", rec.len()),
                ));
            }
            ids.push(rec[0].to_string());
            labels.push(
                rec[1].parse::<Label>().map_err(|_| {
                    DatasetError::format(path, format!("line {line}: invalid label"))
                })?,
            );
            for cell in rec.iter().skip(2) {
                let v: f64 = cell.parse().map_err(|_| {
                    DatasetError::format(path, format!("line {line}: bad number {cell:?}"))
                })?;
                values.push(v);
            }
        }
        if ids.len() != sidecar.rows {
            return Err(DatasetError::format(
                path,
                format!(
                    "sidecar lists {} rows, file has {}",
                    sidecar.rows,
                    ids.len()
                ),
            ));
        }
        Ok(LabeledDataset::new(ids, names, values, labels)?.with_units(sidecar.units))
    }
}

/// Contents of `<name>.schema`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemaSidecar {
    pub rows: usize,
    pub schema_digest: String,
    pub content_digest: String,
    pub units: String,
    pub feature_names: Vec<String>,
}

impl SchemaSidecar {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "format={FORMAT_TAG}\nrows={}\nschema_digest={}\ncontent_digest={}\nunits={}\n",
            self.rows, self.schema_digest, self.content_digest, self.units
        );
        for name in &self.feature_names {
            s.push_str("feature=");
            s.push_str(name);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, DatasetError> {
        let mut format = None;
        let mut rows = None;
        let mut schema = None;
        let mut content = None;
        let mut units = String::new();
        let mut names = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| DatasetError::format(path, format!("bad sidecar line {line:?}")))?;
            match key {
                "format" => format = Some(value.to_string()),
                "rows" => {
                    rows = Some(
                        value
                            .parse()
                            .map_err(|_| DatasetError::format(path, "bad rows"))?,
                    )
                }
                "schema_digest" => schema = Some(value.to_string()),
                "content_digest" => content = Some(value.to_string()),
                "units" => units = value.to_string(),
                "feature" => names.push(value.to_string()),
                _ => {
                    return Err(DatasetError::format(
                        path,
                        format!("unknown sidecar key {key:?}"),
                    ))
                }
            }
        }
        if format.as_deref() != Some(FORMAT_TAG) {
            return Err(DatasetError::format(path, "unsupported sidecar format"));
        }
        let sidecar = SchemaSidecar {
            rows: rows.ok_or_else(|| DatasetError::format(path, "missing rows"))?,
            schema_digest: schema
                .ok_or_else(|| DatasetError::format(path, "missing schema_digest"))?,
            content_digest: content
                .ok_or_else(|| DatasetError::format(path, "missing content_digest"))?,
            units,
            feature_names: names,
        };
        if schema_digest(&sidecar.feature_names) != sidecar.schema_digest {
            return Err(DatasetError::format(
                path,
                "schema digest does not match feature list",
            ));
        }
        Ok(sidecar)
    }
}
