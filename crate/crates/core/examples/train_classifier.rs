//! Trains the boosted-tree classifier on an imbalanced benchmark, evaluates
//! it on a stratified hold-out and round-trips the model file.

use gamblescan::gbdt::{feature_importance, train, BoostedEnsemble, TrainingConfig};
use gamblescan::metrics::evaluate;
use gamblescan::pipeline::{Part, Split, SplitSpec};
use gamblescan::synthetic::imbalanced_benchmark;

fn main() -> anyhow::Result<()> {
    let ds = imbalanced_benchmark(3000, 0.2, 12, 1);
    let split = Split::new(ds.ids(), ds.labels(), SplitSpec::default());
    let train_ds = ds.subset(&split.indices(ds.ids(), Part::Train));
    let test_ds = ds.subset(&split.indices(ds.ids(), Part::Test));

    let cfg = TrainingConfig {
        rounds: 150,
        ..Default::default()
    };
    let model = train(&train_ds, &cfg)?;
    let probs = model.predict_dataset(&test_ds)?;
    let preds: Vec<bool> = probs
        .iter()
        .map(|&p| p >= cfg.classification_threshold)
        .collect();
    let truth: Vec<bool> = test_ds
        .labels()
        .iter()
        .map(|l| l.target() == Some(true))
        .collect();
    println!("hold-out: {}", evaluate(&preds, &truth)?);

    let path = std::env::temp_dir().join("gamblescan-example.model.txt");
    model.save(&path)?;
    let reloaded = BoostedEnsemble::load(&path)?;
    assert_eq!(reloaded.predict_dataset(&test_ds)?, probs);
    println!(
        "model with {} trees saved to {}",
        model.trees.len(),
        path.display()
    );
    for (name, splits) in feature_importance(&model).iter().take(5) {
        println!("  {name:<4} {splits} splits");
    }
    Ok(())
}
