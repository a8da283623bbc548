//! Feedback correction of contract predictions using the predictions of
//! the addresses that transact with each contract.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use crate::dataset::{write_csv, DatasetError, TransactionRecord};
use crate::metrics::{evaluate, MetricsReport};

pub const DEFAULT_THRESHOLD: f64 = 0.8;

/// Contract account -> addresses with at least one transaction with it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssociationIndex {
    map: BTreeMap<String, BTreeSet<String>>,
}

impl AssociationIndex {
    pub fn associated(&self, contract: &str) -> Option<&BTreeSet<String>> {
        self.map.get(contract)
    }

    pub fn contracts(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Links `a` to `c` when a transaction runs between them in either
/// direction, `c` is a contract and `a` is a known address that is not
/// itself a contract.
pub fn build_association<'a>(
    txs: &[TransactionRecord],
    contracts: impl IntoIterator<Item = &'a str>,
    addresses: impl IntoIterator<Item = &'a str>,
) -> AssociationIndex {
    let contracts: HashSet<&str> = contracts.into_iter().collect();
    let addresses: HashSet<&str> = addresses
        .into_iter()
        .filter(|a| !contracts.contains(a))
        .collect();
    let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for tx in txs {
        for (c, a) in [(&tx.to, &tx.from), (&tx.from, &tx.to)] {
            if contracts.contains(c.as_str()) && addresses.contains(a.as_str()) {
                map.entry(c.clone()).or_default().insert(a.clone());
            }
        }
    }
    AssociationIndex { map }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionRow {
    pub contract: String,
    pub prior: bool,
    /// Associated addresses that have a prediction.
    pub associated: usize,
    pub gambling_associated: usize,
    /// Only computed for contracts predicted gambling with evidence.
    pub fraction: Option<f64>,
    pub posterior: bool,
}

impl CorrectionRow {
    pub fn flipped(&self) -> bool {
        self.prior != self.posterior
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorrectionReport {
    pub threshold: f64,
    pub rows: Vec<CorrectionRow>,
}

impl CorrectionReport {
    pub fn flipped_count(&self) -> usize {
        self.rows.iter().filter(|r| r.flipped()).count()
    }

    pub fn posterior(&self) -> Vec<(String, bool)> {
        self.rows
            .iter()
            .map(|r| (r.contract.clone(), r.posterior))
            .collect()
    }

    pub fn posterior_map(&self) -> HashMap<&str, bool> {
        self.rows
            .iter()
            .map(|r| (r.contract.as_str(), r.posterior))
            .collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let rows = self.rows.iter().map(|r| {
            vec![
                r.contract.clone(),
                (r.prior as u8).to_string(),
                r.associated.to_string(),
                r.gambling_associated.to_string(),
                r.fraction.map(|f| f.to_string()).unwrap_or_default(),
                (r.posterior as u8).to_string(),
                (r.flipped() as u8).to_string(),
            ]
        });
        write_csv(
            path.as_ref(),
            &[
                "contract",
                "prior",
                "associated",
                "gambling_associated",
                "fraction",
                "posterior",
                "flipped",
            ],
            rows,
        )
    }
}

/// Turns a gambling prediction into non-gambling when fewer than
/// `threshold` of the contract's predicted associated addresses are
/// predicted gambling. Contracts without such evidence keep their label,
/// and non-gambling predictions are never changed.
pub fn apply_correction(
    contract_preds: &[(String, bool)],
    address_preds: &HashMap<String, bool>,
    index: &AssociationIndex,
    threshold: f64,
) -> CorrectionReport {
    let rows = contract_preds
        .iter()
        .map(|(contract, prior)| {
            let (mut associated, mut gambling) = (0, 0);
            for a in index.associated(contract).into_iter().flatten() {
                if let Some(&p) = address_preds.get(a) {
                    associated += 1;
                    gambling += p as usize;
                }
            }
            let fraction = (*prior && associated > 0).then(|| gambling as f64 / associated as f64);
            let posterior = match fraction {
                Some(f) if f < threshold => false,
                _ => *prior,
            };
            CorrectionRow {
                contract: contract.clone(),
                prior: *prior,
                associated,
                gambling_associated: gambling,
                fraction,
                posterior,
            }
        })
        .collect();
    CorrectionReport { threshold, rows }
}

/// Metrics of the corrected contract predictions at each threshold, over
/// contracts present in `labels`.
pub fn threshold_sweep(
    contract_preds: &[(String, bool)],
    address_preds: &HashMap<String, bool>,
    index: &AssociationIndex,
    labels: &HashMap<String, bool>,
    thresholds: &[f64],
) -> Vec<(f64, MetricsReport)> {
    thresholds
        .iter()
        .map(|&t| {
            let report = apply_correction(contract_preds, address_preds, index, t);
            let (p, y): (Vec<bool>, Vec<bool>) = report
                .rows
                .iter()
                .filter_map(|r| labels.get(&r.contract).map(|&y| (r.posterior, y)))
                .unzip();
            (t, evaluate(&p, &y).expect("aligned by construction"))
        })
        .collect()
}
