//! Seeded synthetic data for examples, benchmarks and end-to-end tests.
//!
//! Nothing here imitates a real chain faithfully. The generators only aim to
//! produce inputs with the statistical shape the detectors rely on, so the
//! whole toolchain can run without the published dataset.

use std::path::Path;

use num_bigint::BigUint;
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};

use crate::dataset::{
    write_addresses, write_contracts, write_transactions, AddressRecord, ContractRecord,
    DatasetError, Label, LabeledDataset, TransactionRecord,
};

/// Two overlapping Gaussian classes with a minority positive class. The
/// first four features carry a mean shift, features 4 and 5 an interaction,
/// the rest are noise; 5% of labels are flipped.
pub fn imbalanced_benchmark(
    n: usize,
    positive_rate: f64,
    n_features: usize,
    seed: u64,
) -> LabeledDataset {
    assert!(n_features >= 6, "benchmark needs at least six features");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut values = Vec::with_capacity(n * n_features);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let positive = rng.gen_bool(positive_rate);
        let mut row: Vec<f64> = (0..n_features).map(|_| normal.sample(&mut rng)).collect();
        if positive {
            for v in &mut row[..4] {
                *v += 0.9;
            }
            if row[4] * row[5] < 0.0 {
                row[4] = -row[4];
            }
        }
        let noisy = rng.gen_bool(0.05);
        labels.push(if positive != noisy {
            Label::Gamble
        } else {
            Label::NonGamble
        });
        values.extend(row);
    }
    let ids = (0..n).map(|i| format!("r{i:05}")).collect();
    let names = (0..n_features).map(|j| format!("x{j}")).collect();
    LabeledDataset::new(ids, names, values, labels).expect("consistent shapes")
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub gambling_contracts: usize,
    pub other_contracts: usize,
    pub unlabeled_contracts: usize,
    /// Share of non-gambling contracts whose code resembles gambling code.
    pub decoy_share: f64,
    pub gambling_addresses: usize,
    pub other_addresses: usize,
    pub unlabeled_addresses: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            gambling_contracts: 80,
            other_contracts: 320,
            unlabeled_contracts: 20,
            decoy_share: 0.15,
            gambling_addresses: 300,
            other_addresses: 900,
            unlabeled_addresses: 30,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub contracts: Vec<ContractRecord>,
    pub addresses: Vec<AddressRecord>,
    pub transactions: Vec<TransactionRecord>,
}

impl SyntheticCorpus {
    /// Writes `contracts.csv`, `addresses.csv` and `transactions.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), DatasetError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
        write_contracts(dir.join("contracts.csv"), &self.contracts)?;
        write_addresses(dir.join("addresses.csv"), &self.addresses)?;
        write_transactions(dir.join("transactions.csv"), &self.transactions)
    }
}

// (opcode, weight in ordinary code, extra weight in gambling code)
const PROFILE: &[(u8, f64, f64)] = &[
    (0x60, 30.0, 0.0), // PUSH1
    (0x61, 6.0, 0.0),
    (0x63, 3.0, 0.0),
    (0x73, 1.0, 0.0),
    (0x7f, 1.0, 0.0),
    (0x80, 8.0, 0.0), // DUP1
    (0x81, 6.0, 0.0),
    (0x90, 6.0, 0.0), // SWAP1
    (0x91, 3.0, 0.0),
    (0x50, 6.0, 0.0), // POP
    (0x51, 3.0, 0.0),
    (0x52, 4.0, 0.0),
    (0x54, 4.0, 0.0), // SLOAD
    (0x55, 2.0, 0.0),
    (0x56, 4.0, 0.0), // JUMP
    (0x57, 4.0, 0.0),
    (0x5b, 5.0, 0.0),
    (0x01, 5.0, 0.0), // ADD
    (0x02, 2.0, 0.0),
    (0x03, 3.0, 0.0),
    (0x04, 2.0, 0.0),
    (0x10, 2.0, 0.0),
    (0x11, 2.0, 0.0),
    (0x14, 3.0, 0.0),
    (0x15, 4.0, 0.0),
    (0x16, 4.0, 0.0),
    (0x17, 1.0, 0.0),
    (0x19, 1.0, 0.0),
    (0x20, 2.0, 0.0), // SHA3
    (0x33, 2.0, 0.0),
    (0x34, 2.0, 0.3),
    (0x35, 3.0, 0.0),
    (0x36, 1.0, 0.0),
    (0x37, 0.3, 2.0), // CALLDATACOPY
    (0x0a, 0.3, 2.5), // EXP
    (0x31, 0.3, 2.0), // BALANCE
    (0x06, 0.4, 2.0), // MOD
    (0x42, 0.3, 1.5), // TIMESTAMP
    (0x40, 0.1, 1.0), // BLOCKHASH
    (0x43, 0.3, 1.0), // NUMBER
    (0x44, 0.1, 0.8), // DIFFICULTY
    (0xf1, 1.0, 1.0), // CALL
    (0xf3, 1.0, 0.0),
    (0xfd, 1.0, 0.0),
    (0xa1, 1.0, 0.0),
    (0xa3, 1.0, 0.0),
];

fn bytecode(rng: &mut ChaCha8Rng, gamble_mix: f64) -> Vec<u8> {
    let weights: Vec<f64> = PROFILE
        .iter()
        .map(|&(_, base, extra)| base + gamble_mix * extra)
        .collect();
    let pick = WeightedIndex::new(&weights).expect("positive weights");
    let len = rng.gen_range(150..900);
    let mut code = Vec::with_capacity(len * 2);
    for _ in 0..len {
        let op = PROFILE[pick.sample(rng)].0;
        code.push(op);
        if (0x60..=0x7f).contains(&op) {
            for _ in 0..(op - 0x5f) {
                code.push(rng.gen());
            }
        }
    }
    code.push(0x00);
    // trailing metadata-like bytes
    for _ in 0..rng.gen_range(0..43) {
        code.push(rng.gen());
    }
    code
}

fn account(rng: &mut ChaCha8Rng) -> String {
    let bytes: [u8; 20] = rng.gen();
    format!("0x{}", hex::encode(bytes))
}

fn wei(ether: f64) -> BigUint {
    // micro-ether resolution
    BigUint::from((ether * 1e6).round().max(0.0) as u64) * BigUint::from(1_000_000_000_000u64)
}

struct TxLog {
    txs: Vec<TransactionRecord>,
}

impl TxLog {
    fn push(&mut self, from: &str, to: &str, ether: f64) {
        let tx_id = format!("0x{:016x}", self.txs.len());
        self.txs.push(TransactionRecord {
            tx_id,
            from: from.into(),
            to: to.into(),
            value_wei: wei(ether),
        });
    }
}

/// Contracts, addresses and transactions where gambling contracts lean on
/// randomness and balance opcodes and attract players who repeatedly bet
/// the same stake, while decoy contracts have gambling-like code but
/// ordinary users.
pub fn synthetic_corpus(spec: &CorpusSpec) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut contracts = Vec::new();
    let mut gambling_c = Vec::new();
    let mut other_c = Vec::new();
    for _ in 0..spec.gambling_contracts {
        let mix = rng.gen_range(0.45..1.0);
        let acc = account(&mut rng);
        contracts.push(ContractRecord {
            account: acc.clone(),
            bytecode: bytecode(&mut rng, mix),
            label: Label::Gamble,
        });
        gambling_c.push(acc);
    }
    for _ in 0..spec.other_contracts {
        let decoy = rng.gen_bool(spec.decoy_share);
        let mix = if decoy {
            rng.gen_range(0.35..0.9)
        } else {
            rng.gen_range(0.0..0.3)
        };
        let acc = account(&mut rng);
        contracts.push(ContractRecord {
            account: acc.clone(),
            bytecode: bytecode(&mut rng, mix),
            label: Label::NonGamble,
        });
        other_c.push(acc);
    }
    for _ in 0..spec.unlabeled_contracts {
        let mix = rng.gen_range(0.0..1.0);
        let acc = account(&mut rng);
        contracts.push(ContractRecord {
            account: acc.clone(),
            bytecode: bytecode(&mut rng, mix),
            label: Label::Unlabeled,
        });
        other_c.push(acc);
    }
    contracts.shuffle(&mut rng);

    let gamblers: Vec<String> = (0..spec.gambling_addresses)
        .map(|_| account(&mut rng))
        .collect();
    let others: Vec<String> = (0..spec.other_addresses + spec.unlabeled_addresses)
        .map(|_| account(&mut rng))
        .collect();
    let mut log = TxLog { txs: Vec::new() };
    let amount = LogNormal::new(-0.7, 1.5).expect("valid lognormal");
    let stakes = [0.01, 0.05, 0.1, 0.25, 0.5, 1.0];

    for (i, g) in gamblers.iter().enumerate() {
        let mut games = Vec::new();
        if !gambling_c.is_empty() {
            // round-robin first pick so every gambling contract has players
            games.push(gambling_c[i % gambling_c.len()].clone());
            for _ in 0..rng.gen_range(0..3) {
                games.push(gambling_c.choose(&mut rng).expect("nonempty").clone());
            }
        }
        let stake = *stakes.choose(&mut rng).expect("nonempty");
        for game in &games {
            for _ in 0..rng.gen_range(3..16) {
                let bet = if rng.gen_bool(0.85) {
                    stake
                } else {
                    stake * 2.0
                };
                log.push(g, game, bet);
                if rng.gen_bool(0.3) {
                    log.push(game, g, bet * 1.9);
                }
            }
        }
        for _ in 0..rng.gen_range(0..3) {
            let to = others.choose(&mut rng).expect("nonempty");
            log.push(g, to, amount.sample(&mut rng));
        }
    }

    for o in &others {
        for _ in 0..rng.gen_range(1..12) {
            let roll: f64 = rng.gen();
            if roll < 0.5 {
                let to = others.choose(&mut rng).expect("nonempty");
                if to != o {
                    log.push(o, to, amount.sample(&mut rng));
                }
            } else if roll < 0.995 || gambling_c.is_empty() {
                if let Some(c) = other_c.choose(&mut rng) {
                    log.push(o, c, amount.sample(&mut rng));
                }
            } else {
                let c = gambling_c.choose(&mut rng).expect("nonempty");
                log.push(o, c, amount.sample(&mut rng));
            }
        }
    }
    // every ordinary contract sees a few ordinary users
    for c in &other_c {
        for _ in 0..rng.gen_range(2..7) {
            let from = others.choose(&mut rng).expect("nonempty");
            log.push(from, c, amount.sample(&mut rng));
        }
    }

    let mut addresses: Vec<AddressRecord> = gamblers
        .iter()
        .map(|a| AddressRecord {
            account: a.clone(),
            label: Label::Gamble,
        })
        .chain(others.iter().enumerate().map(|(i, a)| AddressRecord {
            account: a.clone(),
            label: if i < spec.other_addresses {
                Label::NonGamble
            } else {
                Label::Unlabeled
            },
        }))
        .collect();
    addresses.shuffle(&mut rng);

    SyntheticCorpus {
        contracts,
        addresses,
        transactions: log.txs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disasm::disassemble;

    #[test]
    fn benchmark_shape() {
        let ds = imbalanced_benchmark(1000, 0.2, 10, 3);
        assert_eq!(ds.n_rows(), 1000);
        let pos = ds.labels().iter().filter(|l| **l == Label::Gamble).count();
        assert!((150..260).contains(&pos), "{pos}");
        assert_eq!(ds, imbalanced_benchmark(1000, 0.2, 10, 3));
    }

    #[test]
    fn corpus_is_seeded_and_consistent() {
        let spec = CorpusSpec {
            other_contracts: 30,
            other_addresses: 60,
            gambling_addresses: 20,
            ..Default::default()
        };
        let a = synthetic_corpus(&spec);
        assert_eq!(a, synthetic_corpus(&spec));
        assert_eq!(
            a.contracts.len(),
            spec.gambling_contracts + spec.other_contracts + spec.unlabeled_contracts
        );
        for c in &a.contracts {
            let s = disassemble(&c.bytecode);
            assert_eq!(s.consumed_bytes(), c.bytecode.len());
        }
        let ids: std::collections::HashSet<&str> =
            a.transactions.iter().map(|t| t.tx_id.as_str()).collect();
        assert_eq!(ids.len(), a.transactions.len());
    }
}
