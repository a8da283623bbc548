//! Memory-replay training next to plain boosting on noisy imbalanced data,
//! with the per-iteration history and the replay log.

use gamblescan::gbdt::{train, TrainingConfig};
use gamblescan::memory::{train_with_memory, MemoryConfig};
use gamblescan::metrics::evaluate;
use gamblescan::pipeline::{Part, Split, SplitSpec};
use gamblescan::synthetic::imbalanced_benchmark;

fn main() -> anyhow::Result<()> {
    let ds = imbalanced_benchmark(2000, 0.2, 10, 5);
    let split = Split::new(ds.ids(), ds.labels(), SplitSpec::default());
    let train_ds = ds.subset(&split.indices(ds.ids(), Part::Train));
    let test_ds = ds.subset(&split.indices(ds.ids(), Part::Test));
    let truth: Vec<bool> = test_ds
        .labels()
        .iter()
        .map(|l| l.target() == Some(true))
        .collect();

    let tc = TrainingConfig {
        rounds: 60,
        max_leaves: 8,
        min_samples_leaf: 20,
        ..Default::default()
    };
    let mc = MemoryConfig {
        max_iterations: 4,
        ..Default::default()
    };
    let (model, memory, history) = train_with_memory(&train_ds, &tc, &mc)?;
    for it in &history.iterations {
        println!(
            "iteration {}: {} trees, training loss {:.5}, memory {}",
            it.iteration, it.rounds, it.loss, it.memory_size
        );
    }
    if let Some(r) = history.replays.first() {
        println!(
            "first replay after round {}: {} memory rows + {} drawn rows",
            r.after_round,
            r.memory_ids.len(),
            r.drawn_ids.len()
        );
    }
    println!(
        "selected iteration {}, memory holds {} rows",
        history.selected,
        memory.len()
    );

    let f1 = |m: &gamblescan::gbdt::BoostedEnsemble| -> anyhow::Result<f64> {
        let p: Vec<bool> = m
            .predict_dataset(&test_ds)?
            .iter()
            .map(|&p| p >= 0.5)
            .collect();
        Ok(evaluate(&p, &truth)?.f1)
    };
    let plain = train(&train_ds, &tc)?;
    println!(
        "hold-out F1: memory {:.4}, plain {:.4}",
        f1(&model)?,
        f1(&plain)?
    );
    Ok(())
}
