//! End-to-end batch run: contract features and classifier, address graphs
//! and classifier, feedback correction, evaluation and reports.

mod predictions;
mod split;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use predictions::{
    as_map, evaluate_rows, predictions_for, read_predictions, write_importance, write_metrics,
    write_predictions, PredictionRow, PREDICTION_HEADER,
};
pub use split::{Part, Split, SplitSpec};

use crate::correction::{apply_correction, build_association, CorrectionReport};
use crate::dataset::{load_addresses, load_contracts, load_transactions, LabeledDataset};
use crate::disasm::OpcodeTable;
use crate::features::{default_schema, featurize_contracts, FeatureSchema, CONTRACT_FEATURE_UNITS};
use crate::gbdt::{feature_importance, train, BoostedEnsemble, TrainingConfig};
use crate::graph::{build_graphs, featurize_addresses, write_graphs};
use crate::memory::{train_with_memory, MemoryConfig, ReplayMemory, TrainingHistory};
use crate::metrics::MetricsReport;

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: BoxError,
    },
}

/// Run settings. Relative paths are resolved against the config file's
/// directory when loaded with [`PipelineConfig::load`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub contracts: PathBuf,
    pub addresses: PathBuf,
    pub transactions: PathBuf,
    pub out_dir: PathBuf,
    /// Opcode schema file; the built-in 84-opcode schema when absent.
    pub schema: Option<PathBuf>,
    pub train_fraction: f64,
    pub stratified: bool,
    pub split_seed: u64,
    pub correction: bool,
    pub correction_threshold: f64,
    pub use_memory: bool,
    pub top_features: usize,
    #[serde(skip)]
    pub training: TrainingConfig,
    #[serde(skip)]
    pub memory: MemoryConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            contracts: "contracts.csv".into(),
            addresses: "addresses.csv".into(),
            transactions: "transactions.csv".into(),
            out_dir: "out".into(),
            schema: None,
            train_fraction: 0.8,
            stratified: true,
            split_seed: 42,
            correction: true,
            correction_threshold: crate::correction::DEFAULT_THRESHOLD,
            use_memory: true,
            top_features: 10,
            training: TrainingConfig::default(),
            memory: MemoryConfig::default(),
        }
    }
}

const MEMORY_KEYS: [(&str, &str); 4] = [
    ("replay_period", "replay_period"),
    ("max_iterations", "max_iterations"),
    ("tolerance", "tolerance"),
    ("memory_seed", "seed"),
];

fn table_keys<T: Serialize>(value: &T) -> Vec<String> {
    match toml::Value::try_from(value) {
        Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

impl PipelineConfig {
    /// Parses a flat `key = value` file mixing run, training and memory
    /// settings. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| PipelineError::Config(e.message().to_string()))?;
        let training_keys = table_keys(&TrainingConfig::default());
        let (mut run, mut training, mut memory) =
            (toml::Table::new(), toml::Table::new(), toml::Table::new());
        for (k, v) in table {
            if let Some((_, field)) = MEMORY_KEYS.iter().find(|(key, _)| *key == k) {
                memory.insert(field.to_string(), v);
            } else if training_keys.contains(&k) {
                training.insert(k, v);
            } else {
                run.insert(k, v);
            }
        }
        let err = |e: toml::de::Error| PipelineError::Config(e.message().to_string());
        let mut cfg: PipelineConfig = run.try_into().map_err(err)?;
        cfg.training = training.try_into().map_err(err)?;
        cfg.memory = memory.try_into().map_err(err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.contracts,
            &mut cfg.addresses,
            &mut cfg.transactions,
            &mut cfg.out_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(s) = cfg.schema.as_mut().filter(|s| s.is_relative()) {
            *s = base.join(&*s);
        }
        Ok(cfg)
    }

    /// Same seed for the split, boosting and replay draws.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split_seed = seed;
        self.training.seed = seed;
        self.memory.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(PipelineError::Config(
                "train_fraction must lie in (0, 1)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.correction_threshold) {
            return Err(PipelineError::Config(
                "correction_threshold must lie in [0, 1]".into(),
            ));
        }
        self.training
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.memory
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    /// Flat text accepted by [`PipelineConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut all = match toml::Value::try_from(self) {
            Ok(toml::Value::Table(t)) => t,
            _ => toml::Table::new(),
        };
        if let Ok(toml::Value::Table(t)) = toml::Value::try_from(&self.training) {
            all.extend(t);
        }
        if let Ok(toml::Value::Table(t)) = toml::Value::try_from(&self.memory) {
            for (key, field) in MEMORY_KEYS {
                if let Some(v) = t.get(field) {
                    all.insert(key.to_string(), v.clone());
                }
            }
        }
        toml::to_string(&all).unwrap_or_default()
    }
}

/// A trained classifier with its memory and history.
pub struct TrainedModel {
    pub model: BoostedEnsemble,
    pub memory: ReplayMemory,
    pub history: TrainingHistory,
}

/// Trains with or without the replay memory.
pub fn fit_classifier(
    ds: &LabeledDataset,
    training: &TrainingConfig,
    memory: Option<&MemoryConfig>,
) -> Result<TrainedModel, crate::gbdt::TrainError> {
    match memory {
        Some(mc) => {
            let (model, memory, history) = train_with_memory(ds, training, mc)?;
            Ok(TrainedModel {
                model,
                memory,
                history,
            })
        }
        None => Ok(TrainedModel {
            model: train(ds, training)?,
            memory: ReplayMemory::new(),
            history: TrainingHistory::default(),
        }),
    }
}

impl TrainedModel {
    /// Writes `<prefix>.model.txt`, `.memory.csv`, `.history.csv` and `.replays.csv`.
    pub fn save(&self, dir: &Path, prefix: &str) -> Result<(), BoxError> {
        self.model.save(dir.join(format!("{prefix}.model.txt")))?;
        self.memory.write(
            dir.join(format!("{prefix}.memory.csv")),
            &self.model.feature_names,
        )?;
        self.history
            .write(dir.join(format!("{prefix}.history.csv")))?;
        self.history
            .write_replays(dir.join(format!("{prefix}.replays.csv")))?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct PipelineSummary {
    /// (task, metrics on the test split)
    pub metrics: Vec<(String, MetricsReport)>,
    pub flipped: usize,
    pub contract_importance: Vec<(String, usize)>,
    pub address_importance: Vec<(String, usize)>,
}

impl PipelineSummary {
    pub fn metric(&self, task: &str) -> Option<&MetricsReport> {
        self.metrics.iter().find(|(t, _)| t == task).map(|(_, m)| m)
    }
}

fn stage<T, E: Into<BoxError>>(name: &'static str, r: Result<T, E>) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::Stage {
        stage: name,
        source: e.into(),
    })
}

/// Runs every stage, writing artifacts to `cfg.out_dir`. A `.partial`
/// marker exists while the run is incomplete and stays behind, naming the
/// failed stage, if a stage fails.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary, PipelineError> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    stage("prepare", fs::create_dir_all(out))?;
    let marker = out.join(".partial");
    stage("prepare", fs::write(&marker, "running\n"))?;
    match run_stages(cfg) {
        Ok(summary) => {
            stage("finish", fs::remove_file(&marker))?;
            Ok(summary)
        }
        Err(e) => {
            let _ = fs::write(&marker, format!("{e}\n"));
            Err(e)
        }
    }
}

fn run_stages(cfg: &PipelineConfig) -> Result<PipelineSummary, PipelineError> {
    let out = cfg.out_dir.as_path();
    let memory_cfg = cfg.use_memory.then_some(&cfg.memory);
    let split_spec = |seed| SplitSpec {
        train_fraction: cfg.train_fraction,
        stratified: cfg.stratified,
        seed,
    };
    let mut summary = PipelineSummary::default();

    let contracts = stage("load", load_contracts(&cfg.contracts))?;
    let transactions = stage("load", load_transactions(&cfg.transactions))?;
    let addresses = stage("load", load_addresses(&cfg.addresses))?;
    log::info!(
        "loaded {} contracts, {} addresses, {} transactions",
        contracts.len(),
        addresses.len(),
        transactions.len()
    );

    let table = OpcodeTable::standard();
    let schema = match &cfg.schema {
        Some(p) => stage("featurize-contracts", FeatureSchema::load(p, table))?,
        None => default_schema(table),
    };
    let contract_ds = stage(
        "featurize-contracts",
        featurize_contracts(&contracts, &schema, table),
    )?
    .with_units(CONTRACT_FEATURE_UNITS);
    stage(
        "featurize-contracts",
        contract_ds.write(out.join("contracts.features.csv")),
    )?;

    let contract_split = Split::new(
        contract_ds.ids(),
        contract_ds.labels(),
        split_spec(cfg.split_seed),
    );
    stage(
        "split",
        contract_split.write(out.join("contracts.split.csv")),
    )?;
    let contract_train =
        contract_ds.subset(&contract_split.indices(contract_ds.ids(), Part::Train));
    let contract_model = stage(
        "train-contracts",
        fit_classifier(&contract_train, &cfg.training, memory_cfg),
    )?;
    stage("train-contracts", contract_model.save(out, "contract"))?;
    let probs = stage(
        "predict-contracts",
        contract_model.model.predict_dataset(&contract_ds),
    )?;
    let contract_preds =
        predictions_for(&contract_ds, &probs, cfg.training.classification_threshold);
    stage(
        "predict-contracts",
        write_predictions(out.join("contract.predictions.csv"), &contract_preds),
    )?;

    let contract_lookup = contract_split.lookup();
    let contract_test = |id: &str| contract_lookup.get(id) == Some(&Part::Test);
    summary.metrics.push((
        "contract".into(),
        evaluate_rows(&contract_preds, Some(&contract_test)),
    ));
    summary.contract_importance = feature_importance(&contract_model.model);
    stage(
        "importance",
        write_importance(
            out.join("contract.importance.csv"),
            &summary.contract_importance,
            cfg.top_features,
        ),
    )?;

    if addresses.is_empty() {
        log::warn!("address file is empty; skipping address classification and correction");
    } else {
        let graphs = build_graphs(&addresses, &transactions);
        stage(
            "build-graphs",
            write_graphs(out.join("graphs"), &addresses, &graphs),
        )?;
        let address_ds = stage(
            "featurize-addresses",
            featurize_addresses(&addresses, &graphs),
        )?;
        stage(
            "featurize-addresses",
            address_ds.write(out.join("addresses.features.csv")),
        )?;

        let address_split = Split::new(
            address_ds.ids(),
            address_ds.labels(),
            split_spec(cfg.split_seed ^ 0xA5A5),
        );
        stage(
            "split",
            address_split.write(out.join("addresses.split.csv")),
        )?;
        let address_train =
            address_ds.subset(&address_split.indices(address_ds.ids(), Part::Train));
        let address_model = stage(
            "train-addresses",
            fit_classifier(&address_train, &cfg.training, memory_cfg),
        )?;
        stage("train-addresses", address_model.save(out, "address"))?;
        let probs = stage(
            "predict-addresses",
            address_model.model.predict_dataset(&address_ds),
        )?;
        let address_preds =
            predictions_for(&address_ds, &probs, cfg.training.classification_threshold);
        stage(
            "predict-addresses",
            write_predictions(out.join("address.predictions.csv"), &address_preds),
        )?;

        let address_lookup = address_split.lookup();
        let address_test = |id: &str| address_lookup.get(id) == Some(&Part::Test);
        summary.metrics.insert(
            0,
            (
                "address".into(),
                evaluate_rows(&address_preds, Some(&address_test)),
            ),
        );
        summary.address_importance = feature_importance(&address_model.model);
        stage(
            "importance",
            write_importance(
                out.join("address.importance.csv"),
                &summary.address_importance,
                cfg.top_features,
            ),
        )?;

        if cfg.correction {
            let report = correct(
                &contract_preds,
                &address_preds,
                &transactions,
                cfg.correction_threshold,
            );
            stage("correct", report.write(out.join("correction.csv")))?;
            let corrected = corrected_predictions(&contract_preds, &report);
            stage(
                "correct",
                write_predictions(out.join("contract.corrected.csv"), &corrected),
            )?;
            summary.flipped = report.flipped_count();
            summary.metrics.push((
                "contract_corrected".into(),
                evaluate_rows(&corrected, Some(&contract_test)),
            ));
        }
    }

    stage(
        "evaluate",
        write_metrics(out.join("metrics.csv"), &summary.metrics),
    )?;
    for (task, m) in &summary.metrics {
        log::info!("{task}: {m}");
    }
    Ok(summary)
}

/// Correction of contract predictions against address predictions, with
/// associations taken from `transactions`.
pub fn correct(
    contract_preds: &[PredictionRow],
    address_preds: &[PredictionRow],
    transactions: &[crate::dataset::TransactionRecord],
    threshold: f64,
) -> CorrectionReport {
    let index = build_association(
        transactions,
        contract_preds.iter().map(|r| r.id.as_str()),
        address_preds.iter().map(|r| r.id.as_str()),
    );
    let priors: Vec<(String, bool)> = contract_preds
        .iter()
        .map(|r| (r.id.clone(), r.prediction))
        .collect();
    apply_correction(&priors, &as_map(address_preds), &index, threshold)
}

/// `preds` with predictions replaced by the report's posteriors.
pub fn corrected_predictions(
    preds: &[PredictionRow],
    report: &CorrectionReport,
) -> Vec<PredictionRow> {
    let posterior = report.posterior_map();
    preds
        .iter()
        .map(|r| PredictionRow {
            prediction: posterior
                .get(r.id.as_str())
                .copied()
                .unwrap_or(r.prediction),
            ..r.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_config_splits_sections() {
        let cfg = PipelineConfig::parse("rounds = 12\nreplay_period = 3\nmemory_seed = 9\ntrain_fraction = 0.7\ncorrection = false\n").unwrap();
        assert_eq!(cfg.training.rounds, 12);
        assert_eq!(cfg.memory.replay_period, 3);
        assert_eq!(cfg.memory.seed, 9);
        assert_eq!(cfg.train_fraction, 0.7);
        assert!(!cfg.correction);
        assert!(PipelineConfig::parse("nonsense = 1").is_err());
        assert!(PipelineConfig::parse("train_fraction = 1.0").is_err());
    }

    #[test]
    fn config_text_round_trips() {
        let mut cfg = PipelineConfig::default().with_seed(5);
        cfg.training.rounds = 33;
        cfg.memory.replay_period = 2;
        cfg.schema = Some("s.txt".into());
        assert_eq!(PipelineConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
