//! Opcode occurrence counts over a fixed mnemonic schema.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{schema_digest, ContractRecord, DatasetError, LabeledDataset};
use crate::disasm::{disassemble_with, InstructionStream, OpcodeTable};

pub const CONTRACT_FEATURE_UNITS: &str = "opcode occurrence counts (linear disassembly)";

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema line {line}: mnemonic {name} is not in the opcode table")]
    UnknownMnemonic { line: usize, name: String },
    #[error("schema lists {0} more than once")]
    Duplicate(String),
    #[error("schema is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] DatasetError),
}

/// Ordered list of retained mnemonics; the order is the column order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSchema {
    mnemonics: Vec<String>,
    digest: String,
    index: HashMap<String, usize>,
}

impl FeatureSchema {
    pub fn new(mnemonics: Vec<String>, table: &OpcodeTable) -> Result<Self, SchemaError> {
        if mnemonics.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut seen = HashSet::new();
        for (i, m) in mnemonics.iter().enumerate() {
            if !table.contains(m) {
                return Err(SchemaError::UnknownMnemonic {
                    line: i + 1,
                    name: m.clone(),
                });
            }
            if !seen.insert(m.as_str()) {
                return Err(SchemaError::Duplicate(m.clone()));
            }
        }
        let index = mnemonics
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Ok(FeatureSchema {
            digest: schema_digest(&mnemonics),
            mnemonics,
            index,
        })
    }

    /// One mnemonic per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, table: &OpcodeTable) -> Result<Self, SchemaError> {
        let names = text
            .lines()
            .map(|l| {
                l.split('#')
                    .next()
                    .unwrap_or("")
                    .trim()
                    .to_ascii_uppercase()
            })
            .filter(|l| !l.is_empty())
            .collect();
        Self::new(names, table)
    }

    pub fn load(path: impl AsRef<Path>, table: &OpcodeTable) -> Result<Self, SchemaError> {
        let text = crate::dataset::read_to_string(path.as_ref())?;
        Self::parse(&text, table)
    }

    pub fn to_text(&self) -> String {
        self.mnemonics.iter().map(|m| format!("{m}\n")).collect()
    }

    pub fn mnemonics(&self) -> &[String] {
        &self.mnemonics
    }

    pub fn len(&self) -> usize {
        self.mnemonics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mnemonics.is_empty()
    }

    pub fn contains(&self, mnemonic: &str) -> bool {
        self.index.contains_key(mnemonic)
    }

    pub fn position(&self, mnemonic: &str) -> Option<usize> {
        self.index.get(mnemonic).copied()
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }
}

fn numbered_suffix(name: &str, prefix: &str) -> Option<u32> {
    name.strip_prefix(prefix)?.parse().ok()
}

/// Rarely used wide stack operations that are dropped from the default schema.
fn is_discarded(name: &str) -> bool {
    matches!(numbered_suffix(name, "PUSH"), Some(5..=32))
        || matches!(numbered_suffix(name, "DUP"), Some(5..=16))
        || matches!(numbered_suffix(name, "SWAP"), Some(5..=16))
}

/// Every table mnemonic except PUSH5-PUSH32, DUP5-DUP16 and SWAP5-SWAP16,
/// sorted alphabetically.
pub fn default_schema(table: &OpcodeTable) -> FeatureSchema {
    let mut names: Vec<String> = table
        .mnemonics()
        .filter(|m| !is_discarded(m))
        .map(str::to_string)
        .collect();
    names.sort();
    FeatureSchema::new(names, table).expect("derived from the table")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpcodeFeatureVector {
    pub counts: Vec<u64>,
}

pub fn featurize_contract(
    stream: &InstructionStream,
    schema: &FeatureSchema,
) -> OpcodeFeatureVector {
    let mut counts = vec![0u64; schema.len()];
    for m in stream.mnemonics() {
        if let Some(i) = schema.position(m) {
            counts[i] += 1;
        }
    }
    OpcodeFeatureVector { counts }
}

/// Disassembles and counts every contract; row order follows `records`.
pub fn featurize_contracts(
    records: &[ContractRecord],
    schema: &FeatureSchema,
    table: &OpcodeTable,
) -> Result<LabeledDataset, DatasetError> {
    let rows: Vec<Vec<f64>> = records
        .par_iter()
        .map(|r| {
            let stream = disassemble_with(table, &r.bytecode);
            featurize_contract(&stream, schema)
                .counts
                .into_iter()
                .map(|c| c as f64)
                .collect()
        })
        .collect();
    LabeledDataset::new(
        records.iter().map(|r| r.account.clone()).collect(),
        schema.mnemonics().to_vec(),
        rows.concat(),
        records.iter().map(|r| r.label).collect(),
    )
    .map(|ds| ds.with_units(CONTRACT_FEATURE_UNITS))
}
