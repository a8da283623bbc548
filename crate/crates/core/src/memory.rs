//! Training with a replay memory of misclassified samples.
//!
//! The first outer iteration is ordinary boosting. Every later iteration
//! retrains from scratch and, after each `replay_period` boosting rounds,
//! adds one round fitted only on the remembered samples plus an equally
//! sized uniform draw from the rest of the training set. Rows the current
//! model gets wrong are added to the memory after each iteration.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_csv, DatasetError, Label, LabeledDataset};
use crate::gbdt::{
    BoostedEnsemble, Booster, FeatureMatrix, ModelError, TrainError, TrainingConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    /// Boosting rounds between consecutive replay rounds.
    pub replay_period: usize,
    pub max_iterations: usize,
    /// Stop once training log-loss improves by less than this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            replay_period: 5,
            max_iterations: 5,
            tolerance: 1e-4,
            seed: 7,
        }
    }
}

impl MemoryConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.replay_period < 1 || self.max_iterations < 1 {
            return Err(TrainError::Config(
                "replay_period and max_iterations must be at least 1".into(),
            ));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(TrainError::Config("tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryEntry {
    pub id: String,
    pub label: Label,
    pub features: Vec<f64>,
}

/// Misclassified samples in first-seen order, unique by id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReplayMemory {
    entries: Vec<MemoryEntry>,
    ids: HashSet<String>,
}

impl ReplayMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when the id is already remembered.
    pub fn insert(&mut self, entry: MemoryEntry) -> bool {
        if !self.ids.insert(entry.id.clone()) {
            return false;
        }
        self.entries.push(entry);
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn to_dataset(&self, feature_names: &[String]) -> Result<LabeledDataset, DatasetError> {
        let values = self
            .entries
            .iter()
            .flat_map(|e| e.features.iter().copied())
            .collect();
        LabeledDataset::new(
            self.entries.iter().map(|e| e.id.clone()).collect(),
            feature_names.to_vec(),
            values,
            self.entries.iter().map(|e| e.label).collect(),
        )
    }

    /// Writes the remembered rows as a feature table (with sidecar).
    pub fn write(
        &self,
        path: impl AsRef<Path>,
        feature_names: &[String],
    ) -> Result<(), DatasetError> {
        self.to_dataset(feature_names)?.write(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let ds = LabeledDataset::read(path)?;
        let mut memory = ReplayMemory::new();
        for i in 0..ds.n_rows() {
            memory.insert(MemoryEntry {
                id: ds.ids()[i].clone(),
                label: ds.labels()[i],
                features: ds.row(i).to_vec(),
            });
        }
        Ok(memory)
    }
}

/// Labeled rows of `ds` whose thresholded prediction disagrees with the label.
pub fn collect_misclassified(
    model: &BoostedEnsemble,
    ds: &LabeledDataset,
    threshold: f64,
) -> Result<Vec<MemoryEntry>, ModelError> {
    let probs = model.predict_dataset(ds)?;
    Ok((0..ds.n_rows())
        .filter_map(|i| {
            let truth = ds.labels()[i].target()?;
            ((probs[i] >= threshold) != truth).then(|| MemoryEntry {
                id: ds.ids()[i].clone(),
                label: ds.labels()[i],
                features: ds.row(i).to_vec(),
            })
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Trees in the model, replay rounds included.
    pub rounds: usize,
    pub loss: f64,
    /// Memory size the iteration trained with.
    pub memory_size: usize,
}

/// Rows one replay round was fitted on.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayRecord {
    pub iteration: usize,
    /// Number of boosting rounds preceding this replay round.
    pub after_round: usize,
    pub memory_ids: Vec<String>,
    pub drawn_ids: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingHistory {
    pub iterations: Vec<IterationRecord>,
    pub replays: Vec<ReplayRecord>,
    /// Iteration whose model was returned.
    pub selected: usize,
}

impl TrainingHistory {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let rows = self.iterations.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                r.rounds.to_string(),
                r.loss.to_string(),
                r.memory_size.to_string(),
            ]
        });
        write_csv(
            path.as_ref(),
            &["iteration", "rounds", "loss", "memory_size"],
            rows,
        )
    }

    pub fn write_replays(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let rows = self.replays.iter().flat_map(|r| {
            let mem = r.memory_ids.iter().map(move |id| (r, id, "memory"));
            let drawn = r.drawn_ids.iter().map(move |id| (r, id, "drawn"));
            mem.chain(drawn).map(|(r, id, src)| {
                vec![
                    r.iteration.to_string(),
                    r.after_round.to_string(),
                    id.clone(),
                    src.to_string(),
                ]
            })
        });
        write_csv(
            path.as_ref(),
            &["iteration", "after_round", "id", "source"],
            rows,
        )
    }
}

fn draw_seed(seed: u64, iteration: usize, replay: usize) -> u64 {
    seed ^ ((iteration as u64) << 32) ^ (replay as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Fit {
    model: BoostedEnsemble,
    loss: f64,
    replays: Vec<ReplayRecord>,
}

fn fit(
    data: &LabeledDataset,
    targets: &[f64],
    tc: &TrainingConfig,
    mc: &MemoryConfig,
    memory_rows: &[usize],
    iteration: usize,
) -> Result<Fit, TrainError> {
    let x = FeatureMatrix::new(data.values().to_vec(), data.n_rows(), data.n_features());
    let mut booster = Booster::new(x, targets.to_vec(), tc)?;
    let in_memory: HashSet<usize> = memory_rows.iter().copied().collect();
    let others: Vec<usize> = (0..data.n_rows())
        .filter(|i| !in_memory.contains(i))
        .collect();
    let mut replays = Vec::new();
    for round in 1..=tc.rounds {
        booster.boost_round();
        if memory_rows.is_empty() || round % mc.replay_period != 0 {
            continue;
        }
        let k = memory_rows.len().min(others.len());
        let mut rng = ChaCha8Rng::seed_from_u64(draw_seed(mc.seed, iteration, replays.len()));
        let drawn: Vec<usize> = index::sample(&mut rng, others.len(), k)
            .into_iter()
            .map(|j| others[j])
            .collect();
        let mut rows = memory_rows.to_vec();
        rows.extend_from_slice(&drawn);
        booster.replay_round(&rows);
        replays.push(ReplayRecord {
            iteration,
            after_round: round,
            memory_ids: memory_rows.iter().map(|&i| data.ids()[i].clone()).collect(),
            drawn_ids: drawn.iter().map(|&i| data.ids()[i].clone()).collect(),
        });
    }
    let loss = booster.loss();
    Ok(Fit {
        model: booster.into_ensemble(data.feature_names().to_vec()),
        loss,
        replays,
    })
}

/// Returns the model with the lowest training loss over all outer
/// iterations (earliest on ties), the final memory and the history.
pub fn train_with_memory(
    ds: &LabeledDataset,
    tc: &TrainingConfig,
    mc: &MemoryConfig,
) -> Result<(BoostedEnsemble, ReplayMemory, TrainingHistory), TrainError> {
    mc.validate()?;
    let labeled = ds.labeled_indices();
    if labeled.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let data = ds.subset(&labeled);
    let targets: Vec<f64> = data
        .labels()
        .iter()
        .map(|l| if l.target() == Some(true) { 1.0 } else { 0.0 })
        .collect();
    let row_of: std::collections::HashMap<&str, usize> = data
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let mut memory = ReplayMemory::new();
    let mut history = TrainingHistory::default();
    let mut best: Option<(BoostedEnsemble, f64)> = None;
    let mut prev_loss = f64::INFINITY;

    for iteration in 1..=mc.max_iterations {
        let memory_rows: Vec<usize> = memory
            .entries()
            .iter()
            .map(|e| row_of[e.id.as_str()])
            .collect();
        let fit = fit(&data, &targets, tc, mc, &memory_rows, iteration)?;
        log::info!(
            "memory iteration {iteration}: {} trees, loss {:.6}, memory {}",
            fit.model.trees.len(),
            fit.loss,
            memory.len()
        );
        history.iterations.push(IterationRecord {
            iteration,
            rounds: fit.model.trees.len(),
            loss: fit.loss,
            memory_size: memory.len(),
        });
        history.replays.extend(fit.replays);

        let wrong = collect_misclassified(&fit.model, &data, tc.classification_threshold)
            .expect("model was trained on this schema");
        let added = wrong
            .into_iter()
            .filter(|e| memory.insert(e.clone()))
            .count();

        let improvement = prev_loss - fit.loss;
        prev_loss = fit.loss;
        if best.as_ref().is_none_or(|(_, l)| fit.loss < *l) {
            best = Some((fit.model, fit.loss));
            history.selected = iteration;
        }
        if iteration > 1 && improvement < mc.tolerance {
            break;
        }
        if iteration == 1 && added == 0 {
            // nothing to replay: another iteration would repeat this one
            break;
        }
    }
    let (model, _) = best.expect("at least one iteration ran");
    Ok((model, memory, history))
}
