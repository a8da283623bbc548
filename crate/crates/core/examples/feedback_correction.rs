//! Revises contract predictions with the predicted labels of the addresses
//! that transact with each contract, and sweeps the threshold.

use std::collections::HashMap;

use gamblescan::correction::{
    apply_correction, build_association, threshold_sweep, DEFAULT_THRESHOLD,
};
use gamblescan::dataset::TransactionRecord;
use num_bigint::BigUint;

fn main() {
    let tx = |id: usize, from: &str, to: &str| TransactionRecord {
        tx_id: format!("t{id}"),
        from: from.into(),
        to: to.into(),
        value_wei: BigUint::from(10u32),
    };
    // dice: 9 of 10 players look like gamblers; token: 3 of 10 do
    let players: Vec<String> = (0..20).map(|i| format!("0x{:040x}", i + 1)).collect();
    let mut txs = Vec::new();
    for (i, p) in players.iter().enumerate() {
        let contract = if i < 10 { "dice" } else { "token" };
        txs.push(tx(i, p, contract));
    }
    let address_preds: HashMap<String, bool> = players
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), if i < 10 { i != 0 } else { i < 13 }))
        .collect();
    let contracts = ["dice", "token"];
    let index = build_association(&txs, contracts, players.iter().map(String::as_str));
    let prior = vec![("dice".to_string(), true), ("token".to_string(), true)];

    let report = apply_correction(&prior, &address_preds, &index, DEFAULT_THRESHOLD);
    for r in &report.rows {
        println!(
            "{:<6} prior {} fraction {:?} posterior {}",
            r.contract, r.prior, r.fraction, r.posterior
        );
    }

    let truth: HashMap<String, bool> =
        [("dice".to_string(), true), ("token".to_string(), false)].into();
    for (t, m) in threshold_sweep(
        &prior,
        &address_preds,
        &index,
        &truth,
        &[0.2, 0.5, 0.8, 0.95],
    ) {
        println!(
            "threshold {t:.2}: precision {:.2} recall {:.2}",
            m.precision, m.recall
        );
    }
}
