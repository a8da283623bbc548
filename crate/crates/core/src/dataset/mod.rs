//! Input records (`contracts.csv`, `addresses.csv`, `transactions.csv`) and
//! the labeled feature tables passed between stages.

mod fetch;
mod table;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigUint;
use thiserror::Error;

pub use fetch::{etherscan_url, ChainSource, FetchError, OfflineSource, TxPage, UnavailableSource};
pub use table::{schema_digest, schema_path_for, sha256_hex, LabeledDataset, SchemaSidecar};

/// Dataset label convention: 1 gamble, 0 non-gamble, -1 other/unlabeled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Gamble,
    NonGamble,
    Unlabeled,
}

impl Label {
    pub fn as_i8(self) -> i8 {
        match self {
            Label::Gamble => 1,
            Label::NonGamble => 0,
            Label::Unlabeled => -1,
        }
    }

    pub fn from_i64(v: i64) -> Option<Self> {
        match v {
            1 => Some(Label::Gamble),
            0 => Some(Label::NonGamble),
            -1 => Some(Label::Unlabeled),
            _ => None,
        }
    }

    pub fn is_labeled(self) -> bool {
        self != Label::Unlabeled
    }

    /// Binary target for supervised training; `None` for unlabeled rows.
    pub fn target(self) -> Option<bool> {
        match self {
            Label::Gamble => Some(true),
            Label::NonGamble => Some(false),
            Label::Unlabeled => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}

impl FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        s.trim()
            .parse::<i64>()
            .ok()
            .and_then(Label::from_i64)
            .ok_or(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractRecord {
    /// Lowercase, `0x`-prefixed, 20 bytes.
    pub account: String,
    pub bytecode: Vec<u8>,
    pub label: Label,
}

impl ContractRecord {
    pub fn is_unlabeled(&self) -> bool {
        self.label == Label::Unlabeled
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AddressRecord {
    pub account: String,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionRecord {
    pub tx_id: String,
    pub from: String,
    pub to: String,
    pub value_wei: BigUint,
}

/// A problem with one data row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at line {}", self.message, self.line)
    }
}

fn summarize(errors: &[RowError]) -> String {
    let shown: Vec<String> = errors.iter().take(5).map(|e| e.to_string()).collect();
    let more = errors.len().saturating_sub(shown.len());
    if more > 0 {
        format!("{} (and {more} more)", shown.join("; "))
    } else {
        shown.join("; ")
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: missing or wrong header, expected `{expected}`")]
    Header { path: PathBuf, expected: String },
    #[error("{path}: {}", summarize(.errors))]
    Rows {
        path: PathBuf,
        errors: Vec<RowError>,
    },
    #[error("{path}: duplicate ids: {}", .ids.join(", "))]
    DuplicateIds { path: PathBuf, ids: Vec<String> },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("dataset invariant violated: {0}")]
    Invariant(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, message: impl Into<String>) -> Self {
        DatasetError::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    /// Row diagnostics, when this is a row-level error.
    pub fn row_errors(&self) -> &[RowError] {
        match self {
            DatasetError::Rows { errors, .. } => errors,
            _ => &[],
        }
    }
}

/// Parses a `0x`-prefixed 20-byte account and lowercases it.
pub fn parse_account(text: &str) -> Result<String, String> {
    let t = text.trim();
    let body = t
        .strip_prefix("0x")
        .or_else(|| t.strip_prefix("0X"))
        .ok_or_else(|| format!("account {t:?} lacks 0x prefix"))?;
    if body.len() != 40 || !body.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(format!("malformed hex account {t:?}"));
    }
    Ok(format!("0x{}", body.to_ascii_lowercase()))
}

fn parse_bytecode(text: &str) -> Result<Vec<u8>, String> {
    let t = text.trim();
    let body = t
        .strip_prefix("0x")
        .or_else(|| t.strip_prefix("0X"))
        .ok_or_else(|| "bytecode lacks 0x prefix".to_string())?;
    hex::decode(body).map_err(|e| format!("malformed hex bytecode ({e})"))
}

/// Normalizes a transaction endpoint: trimmed and lowercased. Transaction
/// files may carry shortened or symbolic addresses, so no width check.
pub fn normalize_address(text: &str) -> String {
    text.trim().to_ascii_lowercase()
}

fn parse_label(text: &str) -> Result<Label, String> {
    text.parse()
        .map_err(|_| format!("invalid label {:?}", text.trim()))
}

/// Reads a headered CSV, checks the header and hands each data row (with
/// its 1-based line number) to `parse_row`. Every row yields either a value
/// or a diagnostic.
fn read_rows<T>(
    path: &Path,
    header: &[&str],
    mut parse_row: impl FnMut(&csv::StringRecord) -> Result<T, String>,
) -> Result<Vec<T>, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let expected = header.join(",");
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r.map_err(|source| DatasetError::Csv {
            path: path.to_path_buf(),
            source,
        })?,
        None => {
            return Err(DatasetError::Header {
                path: path.to_path_buf(),
                expected,
            })
        }
    };
    let first_text: Vec<&str> = first
        .iter()
        .map(|c| c.trim_start_matches('\u{feff}'))
        .collect();
    if first_text != header {
        return Err(DatasetError::Header {
            path: path.to_path_buf(),
            expected,
        });
    }

    let mut out = Vec::new();
    let mut errors = Vec::new();
    for rec in records {
        let rec = rec.map_err(|source| DatasetError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            errors.push(RowError {
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
            continue;
        }
        match parse_row(&rec) {
            Ok(v) => out.push(v),
            Err(message) => errors.push(RowError { line, message }),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(DatasetError::Rows {
            path: path.to_path_buf(),
            errors,
        })
    }
}

fn check_unique<'a>(path: &Path, ids: impl Iterator<Item = &'a str>) -> Result<(), DatasetError> {
    let mut seen = HashSet::new();
    let mut dups = BTreeMap::new();
    for id in ids {
        if !seen.insert(id) {
            dups.insert(id.to_string(), ());
        }
    }
    if dups.is_empty() {
        Ok(())
    } else {
        Err(DatasetError::DuplicateIds {
            path: path.to_path_buf(),
            ids: dups.into_keys().collect(),
        })
    }
}

/// Loads `account,bytecode,label`. Rows labeled -1 are kept.
pub fn load_contracts(path: impl AsRef<Path>) -> Result<Vec<ContractRecord>, DatasetError> {
    let path = path.as_ref();
    let rows = read_rows(path, &["account", "bytecode", "label"], |r| {
        Ok(ContractRecord {
            account: parse_account(&r[0])?,
            bytecode: parse_bytecode(&r[1])?,
            label: parse_label(&r[2])?,
        })
    })?;
    check_unique(path, rows.iter().map(|r| r.account.as_str()))?;
    Ok(rows)
}

/// Loads `account,label`.
pub fn load_addresses(path: impl AsRef<Path>) -> Result<Vec<AddressRecord>, DatasetError> {
    let path = path.as_ref();
    let rows = read_rows(path, &["account", "label"], |r| {
        Ok(AddressRecord {
            account: parse_account(&r[0])?,
            label: parse_label(&r[1])?,
        })
    })?;
    check_unique(path, rows.iter().map(|r| r.account.as_str()))?;
    Ok(rows)
}

/// Loads `tx_id,from,to,value_wei`; values are arbitrary-precision wei.
pub fn load_transactions(path: impl AsRef<Path>) -> Result<Vec<TransactionRecord>, DatasetError> {
    let path = path.as_ref();
    let rows = read_rows(path, &["tx_id", "from", "to", "value_wei"], |r| {
        let tx_id = r[0].to_string();
        if tx_id.is_empty() {
            return Err("empty tx_id".into());
        }
        let from = normalize_address(&r[1]);
        let to = normalize_address(&r[2]);
        if from.is_empty() || to.is_empty() {
            return Err("empty from/to address".into());
        }
        let text = r[3].trim();
        if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("invalid value_wei {text:?}"));
        }
        let value_wei = BigUint::parse_bytes(text.as_bytes(), 10)
            .ok_or_else(|| format!("invalid value_wei {text:?}"))?;
        Ok(TransactionRecord {
            tx_id,
            from,
            to,
            value_wei,
        })
    })?;
    check_unique(path, rows.iter().map(|r| r.tx_id.as_str()))?;
    Ok(rows)
}

pub fn write_contracts(
    path: impl AsRef<Path>,
    rows: &[ContractRecord],
) -> Result<(), DatasetError> {
    let path = path.as_ref();
    write_csv(
        path,
        &["account", "bytecode", "label"],
        rows.iter().map(|r| {
            vec![
                r.account.clone(),
                format!("0x{}", hex::encode(&r.bytecode)),
                r.label.to_string(),
            ]
        }),
    )
}

pub fn write_addresses(path: impl AsRef<Path>, rows: &[AddressRecord]) -> Result<(), DatasetError> {
    let path = path.as_ref();
    write_csv(
        path,
        &["account", "label"],
        rows.iter()
            .map(|r| vec![r.account.clone(), r.label.to_string()]),
    )
}

pub fn write_transactions(
    path: impl AsRef<Path>,
    rows: &[TransactionRecord],
) -> Result<(), DatasetError> {
    let path = path.as_ref();
    write_csv(
        path,
        &["tx_id", "from", "to", "value_wei"],
        rows.iter().map(|r| {
            vec![
                r.tx_id.clone(),
                r.from.clone(),
                r.to.clone(),
                r.value_wei.to_string(),
            ]
        }),
    )
}

/// Writes a headered CSV file.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_path(path).map_err(|source| DatasetError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let wrap = |source| DatasetError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, DatasetError> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| DatasetError::io(path, e))?;
    Ok(s)
}
