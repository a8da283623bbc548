//! Gradient-based one-side sampling and exclusive feature bundling on a
//! sparse one-hot design: how many rows each round sees, how many histogram
//! columns remain, and what that costs in accuracy and time.

use std::time::Instant;

use gamblescan::gbdt::{
    efb_partition, goss_sample, train_on_rows, Booster, FeatureMatrix, TrainingConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    // 20 categorical attributes with 10 levels each, one-hot encoded
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (n, attrs, levels) = (20_000, 20, 10);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut r = vec![0.0; attrs * levels];
        let mut score = 0.0;
        for a in 0..attrs {
            let k = rng.gen_range(0..levels);
            r[a * levels + k] = 1.0;
            score += if (a + k) % 3 == 0 { 0.4 } else { -0.15 };
        }
        y.push(if score + rng.gen_range(-1.0..1.0) > 0.0 {
            1.0
        } else {
            0.0
        });
        rows.push(r);
    }
    let x = FeatureMatrix::from_rows(&rows);
    let names: Vec<String> = (0..x.n_cols())
        .map(|j| format!("a{}_{}", j / levels, j % levels))
        .collect();

    let bundles = efb_partition(&x, 0.0);
    println!(
        "{} one-hot columns bundle into {} histogram columns",
        x.n_cols(),
        bundles.len()
    );

    let base = TrainingConfig {
        rounds: 60,
        ..Default::default()
    };
    let booster = Booster::new(x.clone(), y.clone(), &base)?;
    let grads = gamblescan::gbdt::compute_gradients(&y, booster.raw_scores());
    let sample = goss_sample(&grads, base.goss_top_rate, base.goss_other_rate, 0);
    println!("GOSS keeps {} of {} rows per round", sample.len(), n);

    for (label, cfg) in [
        (
            "plain",
            TrainingConfig {
                exclusive_bundling: false,
                ..base.clone()
            }
            .without_goss(),
        ),
        (
            "GOSS",
            TrainingConfig {
                exclusive_bundling: false,
                ..base.clone()
            },
        ),
        ("EFB", base.clone().without_goss()),
        ("GOSS + EFB", base.clone()),
    ] {
        let start = Instant::now();
        let model = train_on_rows(x.clone(), y.clone(), names.clone(), &cfg)?;
        let correct = (0..n)
            .filter(|&i| (model.predict_proba(x.row(i)) >= 0.5) == (y[i] == 1.0))
            .count();
        println!(
            "{label:<11} {:>7.2?}  training accuracy {:.4}",
            start.elapsed(),
            correct as f64 / n as f64
        );
    }
    Ok(())
}
