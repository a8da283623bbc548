use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gamblescan::correction::{build_association, threshold_sweep, DEFAULT_THRESHOLD};
use gamblescan::dataset::{
    load_addresses, load_contracts, load_transactions, write_csv, Label, LabeledDataset,
};
use gamblescan::disasm::{decode_hex, disassemble_with, OpcodeTable};
use gamblescan::features::{
    default_schema, featurize_contracts, FeatureSchema, CONTRACT_FEATURE_UNITS,
};
use gamblescan::gbdt::{feature_importance, BoostedEnsemble};
use gamblescan::graph::{build_graphs, featurize_addresses, read_graphs, write_graphs};
use gamblescan::pipeline::{
    as_map, correct, corrected_predictions, evaluate_rows, fit_classifier, predictions_for,
    read_predictions, run_pipeline, write_importance, write_metrics, write_predictions, Part,
    PipelineConfig, Split,
};

/// Gambling contract and address detection for Ethereum.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Disassemble bytecode given inline or taken from a contracts file.
    Disasm(DisasmArgs),
    /// Opcode count features for every contract.
    FeaturizeContracts {
        #[arg(long)]
        contracts: PathBuf,
        /// Mnemonic list, one per line (default: the built-in 84-opcode schema).
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Output feature table; a `.schema` sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-address transaction graphs as edge-list files.
    BuildGraphs {
        #[arg(long)]
        addresses: PathBuf,
        #[arg(long)]
        transactions: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Graph metrics for every address, from a graph directory or raw records.
    FeaturizeAddresses {
        #[arg(long, conflicts_with_all = ["addresses", "transactions"])]
        graphs: Option<PathBuf>,
        #[arg(long, requires = "transactions")]
        addresses: Option<PathBuf>,
        #[arg(long)]
        transactions: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier on a feature table.
    Train(TrainArgs),
    /// Score a feature table with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Probability at or above which a row is predicted gambling.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Output CSV: id,label,probability,prediction.
        #[arg(long)]
        out: PathBuf,
    },
    /// Revise gambling contract predictions using address predictions.
    Correct(CorrectArgs),
    /// Accuracy, precision, recall and F1 of a prediction file.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// Only rows assigned to the test part of this split file.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Append the metrics as one CSV row to this file (created if missing).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Task name written in the `task` column.
        #[arg(long, default_value = "predictions")]
        task: String,
    },
    /// Features ranked by how many splits use them.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage end to end.
    Pipeline {
        /// Flat key = value file with run, training and memory settings.
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        no_correction: bool,
        #[arg(long)]
        no_memory: bool,
        /// Seed for the split, boosting and replay draws.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct DisasmSource {
    /// Hex bytecode, with or without 0x.
    #[arg(long)]
    hex: Option<String>,
    /// contracts.csv to disassemble in bulk.
    #[arg(long)]
    contracts: Option<PathBuf>,
}

#[derive(Args)]
struct DisasmArgs {
    #[command(flatten)]
    source: DisasmSource,
    /// With --contracts, only this account.
    #[arg(long, requires = "contracts")]
    account: Option<String>,
    /// Write account,offset,mnemonic,operand,status rows here instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    /// account,label file overriding table labels; rows it omits are not trained on.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Split file; only its train part is used.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Flat key = value file with training and memory settings (defaults otherwise).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model_out: PathBuf,
    #[arg(long)]
    memory_out: Option<PathBuf>,
    /// CSV with iteration,rounds,loss,memory_size.
    #[arg(long)]
    history_out: Option<PathBuf>,
    /// Plain boosting without the replay memory.
    #[arg(long)]
    no_memory: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CorrectArgs {
    #[arg(long)]
    contract_preds: PathBuf,
    #[arg(long)]
    address_preds: PathBuf,
    #[arg(long)]
    transactions: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Per-contract report: prior, associated counts, fraction, posterior.
    #[arg(long)]
    report: PathBuf,
    /// Corrected predictions in the prediction-file format.
    #[arg(long)]
    out_predictions: Option<PathBuf>,
    /// Comma-separated thresholds; prints labeled-contract metrics for each.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<f64>,
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Disasm(args) => disasm(args),
        Command::FeaturizeContracts {
            contracts,
            schema,
            out,
        } => {
            let table = OpcodeTable::standard();
            let schema = match schema {
                Some(p) => FeatureSchema::load(&p, table).context("featurize-contracts")?,
                None => default_schema(table),
            };
            let records = load_contracts(&contracts).context("featurize-contracts")?;
            let ds =
                featurize_contracts(&records, &schema, table)?.with_units(CONTRACT_FEATURE_UNITS);
            ds.write(&out).context("featurize-contracts")?;
            log::info!(
                "{} contracts x {} opcodes -> {}",
                ds.n_rows(),
                ds.n_features(),
                out.display()
            );
            Ok(())
        }
        Command::BuildGraphs {
            addresses,
            transactions,
            out,
        } => {
            let addresses = load_addresses(&addresses).context("build-graphs")?;
            let txs = load_transactions(&transactions).context("build-graphs")?;
            let graphs = build_graphs(&addresses, &txs);
            write_graphs(&out, &addresses, &graphs).context("build-graphs")?;
            log::info!("{} graphs -> {}", graphs.len(), out.display());
            Ok(())
        }
        Command::FeaturizeAddresses {
            graphs,
            addresses,
            transactions,
            out,
        } => {
            let (addresses, graphs) = match (graphs, addresses, transactions) {
                (Some(dir), _, _) => read_graphs(&dir).context("featurize-addresses")?,
                (None, Some(a), Some(t)) => {
                    let addresses = load_addresses(&a).context("featurize-addresses")?;
                    let txs = load_transactions(&t).context("featurize-addresses")?;
                    let graphs = build_graphs(&addresses, &txs);
                    (addresses, graphs)
                }
                _ => bail!("featurize-addresses needs --graphs or --addresses with --transactions"),
            };
            let ds = featurize_addresses(&addresses, &graphs)?;
            ds.write(&out).context("featurize-addresses")?;
            log::info!("{} addresses -> {}", ds.n_rows(), out.display());
            Ok(())
        }
        Command::Train(args) => train_cmd(args),
        Command::Predict {
            model,
            features,
            threshold,
            out,
        } => {
            let model = BoostedEnsemble::load(&model).context("predict")?;
            let ds = LabeledDataset::read(&features).context("predict")?;
            let probs = model.predict_dataset(&ds).context("predict")?;
            let rows = predictions_for(&ds, &probs, threshold);
            write_predictions(&out, &rows).context("predict")?;
            log::info!(
                "{} predictions ({} gambling) -> {}",
                rows.len(),
                rows.iter().filter(|r| r.prediction).count(),
                out.display()
            );
            Ok(())
        }
        Command::Correct(args) => correct_cmd(args),
        Command::Evaluate {
            predictions,
            split,
            out,
            task,
        } => {
            let rows = read_predictions(&predictions).context("evaluate")?;
            let split = split
                .map(|p| Split::read(&p))
                .transpose()
                .context("evaluate")?;
            let lookup = split.as_ref().map(Split::lookup);
            let keep = |id: &str| {
                lookup
                    .as_ref()
                    .is_none_or(|l| l.get(id) == Some(&Part::Test))
            };
            let m = evaluate_rows(&rows, Some(&keep));
            println!("{task}: {m}");
            if let Some(out) = out {
                append_metrics(&out, &task, &m)?;
            }
            Ok(())
        }
        Command::Importance { model, top, out } => {
            let model = BoostedEnsemble::load(&model).context("importance")?;
            let ranked = feature_importance(&model);
            for (i, (name, n)) in ranked.iter().take(top).enumerate() {
                println!("{:>3}  {name:<24} {n}", i + 1);
            }
            if let Some(out) = out {
                write_importance(&out, &ranked, top).context("importance")?;
            }
            Ok(())
        }
        Command::Pipeline {
            config,
            out_dir,
            no_correction,
            no_memory,
            seed,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(dir) = out_dir {
                cfg.out_dir = dir;
            }
            if let Some(seed) = seed {
                cfg = cfg.with_seed(seed);
            }
            cfg.correction &= !no_correction;
            cfg.use_memory &= !no_memory;
            let summary = run_pipeline(&cfg)?;
            for (task, m) in &summary.metrics {
                println!("{task}: {m}");
            }
            if cfg.correction {
                println!(
                    "correction flipped {} contract predictions",
                    summary.flipped
                );
            }
            println!("outputs in {}", cfg.out_dir.display());
            Ok(())
        }
    }
}

fn disasm(args: DisasmArgs) -> Result<()> {
    let table = OpcodeTable::standard();
    let targets: Vec<(String, Vec<u8>)> = match (args.source.hex, args.source.contracts) {
        (Some(hex), _) => vec![(
            "-".into(),
            decode_hex(&hex)
                .map_err(anyhow::Error::msg)
                .context("disasm")?,
        )],
        (None, Some(path)) => load_contracts(&path)
            .context("disasm")?
            .into_iter()
            .filter(|c| {
                args.account
                    .as_deref()
                    .is_none_or(|a| a.eq_ignore_ascii_case(&c.account))
            })
            .map(|c| (c.account, c.bytecode))
            .collect(),
        (None, None) => unreachable!("clap requires one source"),
    };
    if targets.is_empty() {
        bail!("disasm: no matching contract");
    }
    match args.out {
        None => {
            for (account, code) in &targets {
                if targets.len() > 1 {
                    println!("# {account}");
                }
                print!("{}", disassemble_with(table, code));
            }
        }
        Some(out) => {
            let rows = targets.iter().flat_map(|(account, code)| {
                disassemble_with(table, code)
                    .instructions
                    .into_iter()
                    .map(|ins| {
                        vec![
                            account.clone(),
                            ins.offset.to_string(),
                            ins.mnemonic.to_string(),
                            if ins.operand.is_empty() {
                                String::new()
                            } else {
                                format!("0x{}", hex::encode(&ins.operand))
                            },
                            format!("{:?}", ins.status),
                        ]
                    })
                    .collect::<Vec<_>>()
            });
            write_csv(
                &out,
                &["account", "offset", "mnemonic", "operand", "status"],
                rows,
            )
            .context("disasm")?;
        }
    }
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    let mut ds = LabeledDataset::read(&args.features).context("train")?;
    if let Some(labels) = &args.labels {
        let given: HashMap<String, Label> = load_addresses(labels)
            .context("train")?
            .into_iter()
            .map(|r| (r.account, r.label))
            .collect();
        let all: HashMap<String, Label> = ds
            .ids()
            .iter()
            .map(|id| {
                (
                    id.clone(),
                    given.get(id).copied().unwrap_or(Label::Unlabeled),
                )
            })
            .collect();
        ds.relabel(&all);
    }
    if let Some(split) = &args.split {
        let split = Split::read(split).context("train")?;
        ds = ds.subset(&split.indices(ds.ids(), Part::Train));
    }
    let memory = (!args.no_memory && cfg.use_memory).then_some(&cfg.memory);
    let trained = fit_classifier(&ds, &cfg.training, memory).context("train")?;
    trained.model.save(&args.model_out).context("train")?;
    if let Some(p) = &args.memory_out {
        trained
            .memory
            .write(p, &trained.model.feature_names)
            .context("train")?;
    }
    if let Some(p) = &args.history_out {
        trained.history.write(p).context("train")?;
    }
    log::info!(
        "{} trees, memory {} -> {}",
        trained.model.trees.len(),
        trained.memory.len(),
        args.model_out.display()
    );
    Ok(())
}

fn correct_cmd(args: CorrectArgs) -> Result<()> {
    let contract_preds = read_predictions(&args.contract_preds).context("correct")?;
    let address_preds = read_predictions(&args.address_preds).context("correct")?;
    let txs = load_transactions(&args.transactions).context("correct")?;
    let report = correct(&contract_preds, &address_preds, &txs, args.threshold);
    report.write(&args.report).context("correct")?;
    println!(
        "flipped {} of {} contract predictions",
        report.flipped_count(),
        report.rows.len()
    );
    if let Some(p) = &args.out_predictions {
        write_predictions(p, &corrected_predictions(&contract_preds, &report))
            .context("correct")?;
    }
    if !args.sweep.is_empty() {
        let index = build_association(
            &txs,
            contract_preds.iter().map(|r| r.id.as_str()),
            address_preds.iter().map(|r| r.id.as_str()),
        );
        let priors: Vec<(String, bool)> = contract_preds
            .iter()
            .map(|r| (r.id.clone(), r.prediction))
            .collect();
        let labels: HashMap<String, bool> = contract_preds
            .iter()
            .filter_map(|r| r.label.target().map(|y| (r.id.clone(), y)))
            .collect();
        for (t, m) in threshold_sweep(
            &priors,
            &as_map(&address_preds),
            &index,
            &labels,
            &args.sweep,
        ) {
            println!("threshold {t:.2}: {m}");
        }
    }
    Ok(())
}

fn append_metrics(path: &Path, task: &str, m: &gamblescan::metrics::MetricsReport) -> Result<()> {
    let mut rows = Vec::new();
    if path.exists() {
        let mut reader =
            csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        for rec in reader.records() {
            let rec = rec?;
            let task = rec.get(0).unwrap_or_default().to_string();
            let vals: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|v| v.parse().unwrap_or(0.0))
                .collect();
            if vals.len() == 8 {
                let r = gamblescan::metrics::MetricsReport::from_counts(
                    vals[0] as u64,
                    vals[1] as u64,
                    vals[2] as u64,
                    vals[3] as u64,
                );
                rows.push((task, r));
            }
        }
    }
    rows.retain(|(t, _)| t != task);
    rows.push((task.to_string(), *m));
    write_metrics(path, &rows).context("evaluate")?;
    Ok(())
}
