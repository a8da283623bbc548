//! Generates a synthetic corpus, runs every pipeline stage on it and prints
//! the metrics table.
//!
//!     cargo run --release --example end_to_end -- [out_dir]

use gamblescan::pipeline::{run_pipeline, PipelineConfig};
use gamblescan::synthetic::{synthetic_corpus, CorpusSpec};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("gamblescan-e2e"));
    let data = out.join("data");
    synthetic_corpus(&CorpusSpec::default()).write(&data)?;

    let cfg = PipelineConfig {
        contracts: data.join("contracts.csv"),
        addresses: data.join("addresses.csv"),
        transactions: data.join("transactions.csv"),
        out_dir: out.join("run"),
        ..Default::default()
    };
    let summary = run_pipeline(&cfg)?;
    println!(
        "{:<20} {:>8} {:>9} {:>7} {:>6}",
        "task", "accuracy", "precision", "recall", "f1"
    );
    for (task, m) in &summary.metrics {
        println!(
            "{task:<20} {:>8.3} {:>9.3} {:>7.3} {:>6.3}",
            m.accuracy, m.precision, m.recall, m.f1
        );
    }
    println!(
        "correction flipped {} contract predictions",
        summary.flipped
    );
    println!(
        "top contract opcodes: {:?}",
        summary
            .contract_importance
            .iter()
            .take(5)
            .map(|p| &p.0)
            .collect::<Vec<_>>()
    );
    println!(
        "top address metrics: {:?}",
        summary
            .address_importance
            .iter()
            .take(5)
            .map(|p| &p.0)
            .collect::<Vec<_>>()
    );
    println!("artifacts in {}", cfg.out_dir.display());
    Ok(())
}
