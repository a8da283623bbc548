use rayon::prelude::*;

use super::binning::BinnedData;
use super::efb::efb_partition;
use super::goss::{goss_sample, Sample};
use super::loss::{compute_gradients, mean_log_loss, sigmoid};
use super::tree::{grow_tree, Tree};
use super::{FeatureMatrix, ModelError, TrainError, TrainingConfig};
use crate::dataset::{schema_digest, LabeledDataset};

/// A trained additive tree model: `raw(x) = base_score + lr * sum(tree(x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoostedEnsemble {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub feature_names: Vec<String>,
    pub schema_digest: String,
}

impl BoostedEnsemble {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict_raw(&self, row: &[f64]) -> f64 {
        let mut f = self.base_score;
        for t in &self.trees {
            f += self.learning_rate * t.predict(row);
        }
        f
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.predict_raw(row))
    }

    /// Refuses tables whose columns differ from the training schema.
    pub fn check_schema(&self, ds: &LabeledDataset) -> Result<(), ModelError> {
        if ds.n_features() != self.n_features() {
            return Err(ModelError::WidthMismatch {
                expected: self.n_features(),
                actual: ds.n_features(),
            });
        }
        let table = ds.schema_digest();
        if table != self.schema_digest {
            return Err(ModelError::SchemaMismatch {
                model: self.schema_digest.clone(),
                table,
            });
        }
        Ok(())
    }

    /// Gambling probability for every row of `ds`.
    pub fn predict_dataset(&self, ds: &LabeledDataset) -> Result<Vec<f64>, ModelError> {
        self.check_schema(ds)?;
        Ok((0..ds.n_rows())
            .into_par_iter()
            .map(|i| self.predict_proba(ds.row(i)))
            .collect())
    }
}

fn round_seed(seed: u64, round: u64) -> u64 {
    // splitmix64 finalizer so neighbouring rounds get unrelated streams
    let mut z = seed ^ round.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Incremental trainer. Each round fits one tree to the current gradients,
/// either on a GOSS sample of all rows or on an explicit row set.
pub struct Booster {
    x: FeatureMatrix,
    labels: Vec<f64>,
    data: BinnedData,
    config: TrainingConfig,
    raw: Vec<f64>,
    trees: Vec<Tree>,
}

impl Booster {
    /// `labels` are 0/1 targets aligned with the rows of `x`.
    pub fn new(
        x: FeatureMatrix,
        labels: Vec<f64>,
        config: &TrainingConfig,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        if x.n_rows() != labels.len() {
            return Err(TrainError::Shape {
                rows: x.n_rows(),
                labels: labels.len(),
            });
        }
        if x.n_rows() == 0 {
            return Err(TrainError::EmptyDataset);
        }
        let bundles = if config.exclusive_bundling {
            efb_partition(&x, config.efb_conflict_threshold)
        } else {
            (0..x.n_cols()).map(|j| vec![j]).collect()
        };
        let data = BinnedData::with_bundles(&x, config.max_bins, &bundles);
        log::debug!(
            "binned {} features into {} histogram groups",
            x.n_cols(),
            data.n_groups()
        );
        let raw = vec![config.base_score; x.n_rows()];
        Ok(Booster {
            x,
            labels,
            data,
            config: config.clone(),
            raw,
            trees: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn histogram_groups(&self) -> usize {
        self.data.n_groups()
    }

    pub fn raw_scores(&self) -> &[f64] {
        &self.raw
    }

    /// Mean logistic loss over all training rows.
    pub fn loss(&self) -> f64 {
        mean_log_loss(&self.labels, &self.raw)
    }

    /// One boosting round on a GOSS sample of every row.
    pub fn boost_round(&mut self) -> &Tree {
        let grads = compute_gradients(&self.labels, &self.raw);
        let seed = round_seed(self.config.seed, self.trees.len() as u64);
        let sample = goss_sample(
            &grads,
            self.config.goss_top_rate,
            self.config.goss_other_rate,
            seed,
        );
        let tree = grow_tree(&self.data, &grads, &sample, &self.config);
        self.push(tree)
    }

    /// One round fitted on `rows` only, each at unit weight. Raw scores of
    /// every row are still updated.
    pub fn replay_round(&mut self, rows: &[usize]) -> &Tree {
        let grads = compute_gradients(&self.labels, &self.raw);
        let tree = grow_tree(
            &self.data,
            &grads,
            &Sample::uniform(rows.to_vec()),
            &self.config,
        );
        self.push(tree)
    }

    fn push(&mut self, tree: Tree) -> &Tree {
        let lr = self.config.learning_rate;
        let x = &self.x;
        self.raw
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, f)| *f += lr * tree.predict(x.row(i)));
        self.trees.push(tree);
        self.trees.last().expect("just pushed")
    }

    pub fn into_ensemble(self, feature_names: Vec<String>) -> BoostedEnsemble {
        assert_eq!(feature_names.len(), self.x.n_cols(), "one name per feature");
        BoostedEnsemble {
            trees: self.trees,
            learning_rate: self.config.learning_rate,
            base_score: self.config.base_score,
            schema_digest: schema_digest(&feature_names),
            feature_names,
        }
    }
}

/// Trains on the labeled rows of `ds`; unlabeled rows are ignored.
pub fn train(ds: &LabeledDataset, config: &TrainingConfig) -> Result<BoostedEnsemble, TrainError> {
    let rows = ds.labeled_indices();
    if rows.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let sub = ds.subset(&rows);
    let x = FeatureMatrix::new(sub.values().to_vec(), sub.n_rows(), sub.n_features());
    let labels: Vec<f64> = sub
        .labels()
        .iter()
        .map(|l| if l.target() == Some(true) { 1.0 } else { 0.0 })
        .collect();
    train_on_rows(x, labels, ds.feature_names().to_vec(), config)
}

/// Trains on a bare matrix with 0/1 targets.
pub fn train_on_rows(
    x: FeatureMatrix,
    labels: Vec<f64>,
    feature_names: Vec<String>,
    config: &TrainingConfig,
) -> Result<BoostedEnsemble, TrainError> {
    let positives = labels.iter().filter(|&&y| y == 1.0).count();
    if positives == 0 || positives == labels.len() {
        log::warn!(
            "training data contains a single class ({positives} of {} positive)",
            labels.len()
        );
    }
    let mut booster = Booster::new(x, labels, config)?;
    for _ in 0..config.rounds {
        booster.boost_round();
    }
    log::debug!(
        "trained {} rounds, training loss {:.6}",
        booster.n_trees(),
        booster.loss()
    );
    Ok(booster.into_ensemble(feature_names))
}

/// Number of splits on each feature across all trees, most used first;
/// ties keep schema order.
pub fn feature_importance(model: &BoostedEnsemble) -> Vec<(String, usize)> {
    let mut counts = vec![0usize; model.n_features()];
    for t in &model.trees {
        for f in t.split_features() {
            counts[f] += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> =
        model.feature_names.iter().cloned().zip(counts).collect();
    ranked.sort_by_key(|p| std::cmp::Reverse(p.1));
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label;

    fn toy(n: usize) -> (FeatureMatrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![(i % 10) as f64, ((i * 7) % 13) as f64, 0.0])
            .collect();
        let labels = rows
            .iter()
            .map(|r| if r[0] >= 5.0 { 1.0 } else { 0.0 })
            .collect();
        (FeatureMatrix::from_rows(&rows), labels)
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| format!("f{j}")).collect()
    }

    #[test]
    fn separable_data_is_learned() {
        let (x, y) = toy(200);
        let cfg = TrainingConfig {
            rounds: 50,
            ..Default::default()
        };
        let m = train_on_rows(x.clone(), y.clone(), names(3), &cfg).unwrap();
        let correct = (0..x.n_rows())
            .filter(|&i| (m.predict_proba(x.row(i)) >= 0.5) == (y[i] == 1.0))
            .count();
        assert_eq!(correct, x.n_rows());
        assert_eq!(feature_importance(&m)[0].0, "f0");
        assert_eq!(feature_importance(&m)[2], ("f2".to_string(), 0));
    }

    #[test]
    fn ensemble_matches_booster_scores() {
        let (x, y) = toy(120);
        let cfg = TrainingConfig {
            rounds: 10,
            ..Default::default()
        };
        let mut b = Booster::new(x.clone(), y, &cfg).unwrap();
        for _ in 0..10 {
            b.boost_round();
        }
        let raw = b.raw_scores().to_vec();
        let m = b.into_ensemble(names(3));
        for (i, r) in raw.iter().enumerate() {
            assert_eq!(m.predict_raw(x.row(i)).to_bits(), r.to_bits());
        }
    }

    #[test]
    fn loss_decreases_without_sampling() {
        let (x, y) = toy(150);
        let cfg = TrainingConfig {
            rounds: 30,
            ..Default::default()
        }
        .without_goss();
        let mut b = Booster::new(x, y, &cfg).unwrap();
        let mut prev = b.loss();
        for _ in 0..30 {
            b.boost_round();
            assert!(b.loss() <= prev + 1e-12);
            prev = b.loss();
        }
    }

    #[test]
    fn empty_and_unlabeled_rejected() {
        let ds = LabeledDataset::new(
            vec!["a".into()],
            names(1),
            vec![1.0],
            vec![Label::Unlabeled],
        )
        .unwrap();
        assert!(matches!(
            train(&ds, &TrainingConfig::default()),
            Err(TrainError::EmptyDataset)
        ));
    }

    #[test]
    fn schema_is_checked() {
        let (x, y) = toy(40);
        let m = train_on_rows(
            x,
            y,
            names(3),
            &TrainingConfig {
                rounds: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let ds = LabeledDataset::new(
            vec!["a".into()],
            names(2),
            vec![0.0, 0.0],
            vec![Label::Gamble],
        )
        .unwrap();
        assert!(matches!(
            m.predict_dataset(&ds),
            Err(ModelError::WidthMismatch { .. })
        ));
        let renamed = vec!["f0".to_string(), "f1".into(), "g2".into()];
        let ds = LabeledDataset::new(vec!["a".into()], renamed, vec![0.0; 3], vec![Label::Gamble])
            .unwrap();
        assert!(matches!(
            m.predict_dataset(&ds),
            Err(ModelError::SchemaMismatch { .. })
        ));
    }
}
