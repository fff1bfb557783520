//! Batch command-line frontend: `prepare`, `train`, `eval`, `predict`.
//!
//! Commands hand off through files in the output directory:
//!
//! ```text
//! out/
//!   dataset.nbio        binary row cache           (prepare)
//!   split.json          split manifest             (prepare)
//!   class_counts.csv    per-class summary          (prepare)
//!   model.bsnt          trained model              (train)
//!   history.csv         per-epoch records          (train)
//!   epochs.jsonl        same records, JSON lines   (train)
//!   eval-<split>/       report bundle              (eval)
//! ```
//!
//! Every command is idempotent given identical inputs, flags, and seed;
//! in deterministic mode the produced model files and reports are
//! byte-identical across runs. Exit codes: 0 success, 2 usage error,
//! 3 data error, 4 numeric failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::cache::{read_cache, write_cache, SplitManifest};
use crate::data::{class_counts, load_dataset, split_indices, ClassMap, Sample};
use crate::error::{Error, Result};
use crate::metrics::report::{full_report, EvalTiming, MetricsReport};
use crate::metrics::svg;
use crate::nn::io::{load_model, save_model};
use crate::nn::model::{hyperparam_estimate, init_model, param_count, predict_proba, ModelConfig};
use crate::preprocess::{fit_scaler, to_input_tensor, transform};
use crate::trainer::{evaluate, fit, EpochRecord, PreparedSet, TrainConfig};

pub const CACHE_FILE: &str = "dataset.nbio";
pub const MANIFEST_FILE: &str = "split.json";
pub const CLASS_COUNTS_FILE: &str = "class_counts.csv";
pub const MODEL_FILE: &str = "model.bsnt";
pub const HISTORY_FILE: &str = "history.csv";
pub const EPOCH_LOG_FILE: &str = "epochs.jsonl";

#[derive(Parser, Debug)]
#[command(name = "nbids", version, about = "IoT botnet traffic classifier: dataset preparation, training, evaluation, prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Print machine-readable JSON summaries instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load the raw dataset, write the binary cache and split manifest.
    Prepare(PrepareArgs),
    /// Train a model on a prepared split.
    Train(TrainArgs),
    /// Evaluate a trained model on one split and emit the report bundle.
    Eval(EvalArgs),
    /// Classify feature rows from a CSV file.
    Predict(PredictArgs),
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone)]
pub struct PrepareArgs {
    /// Dataset root directory (per-device subdirectories).
    #[arg(long)]
    pub data_root: PathBuf,
    /// JSON class map (array of {name, pattern}); defaults to the
    /// standard eight classes.
    #[arg(long)]
    pub class_map: Option<PathBuf>,
    /// Output directory for the cache and manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val_frac: f64,
    /// Uniformly subsample each class to at most this many rows.
    #[arg(long)]
    pub per_class_cap: Option<usize>,
}

#[derive(Serialize, Debug)]
pub struct PrepareSummary {
    pub class_names: Vec<String>,
    pub class_counts: Vec<u64>,
    pub total_samples: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub cache_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest_sha256: String,
}

pub fn cmd_prepare(args: &PrepareArgs) -> Result<PrepareSummary> {
    if !(0.0..1.0).contains(&args.test_frac)
        || !(0.0..1.0).contains(&args.val_frac)
        || args.test_frac + args.val_frac >= 1.0
    {
        return Err(Error::Config(format!(
            "fractions out of range: test {}, validation {}",
            args.test_frac, args.val_frac
        )));
    }
    let class_map = match &args.class_map {
        Some(path) => ClassMap::from_json_file(path)?,
        None => ClassMap::nbaiot_default(),
    };
    let samples = load_dataset(&args.data_root, &class_map, args.per_class_cap, args.seed)?;
    if samples.is_empty() {
        return Err(Error::Data("dataset is empty after loading".into()));
    }
    let names = class_map.names();
    let counts = class_counts(&samples, names.len());
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let indices = split_indices(&labels, names.len(), args.test_frac, args.val_frac, args.seed)?;

    std::fs::create_dir_all(&args.out)?;
    let cache_path = args.out.join(CACHE_FILE);
    write_cache(&cache_path, &samples, &names)?;

    let manifest = SplitManifest {
        seed: args.seed,
        test_frac: args.test_frac,
        val_frac: args.val_frac,
        class_names: names.clone(),
        class_counts: counts.clone(),
        indices,
    };
    let manifest_path = args.out.join(MANIFEST_FILE);
    manifest.save(&manifest_path)?;

    let mut counts_csv = String::from("class,instances\n");
    for (name, n) in names.iter().zip(&counts) {
        counts_csv.push_str(&format!("{name},{n}\n"));
    }
    std::fs::write(args.out.join(CLASS_COUNTS_FILE), counts_csv)?;

    Ok(PrepareSummary {
        total_samples: samples.len(),
        train_size: manifest.indices.train.len(),
        validation_size: manifest.indices.validation.len(),
        test_size: manifest.indices.test.len(),
        class_names: names,
        class_counts: counts,
        manifest_sha256: sha256_file(&manifest_path)?,
        cache_path,
        manifest_path,
    })
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Directory holding the prepared cache and manifest; the model and
    /// history land here too.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    #[arg(long, default_value_t = 64)]
    pub filters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop when validation loss has not improved for this many epochs.
    #[arg(long)]
    pub early_stop_patience: Option<usize>,
    /// Bitwise-reproducible gradient reduction (the default).
    #[arg(long, conflicts_with = "fast")]
    pub deterministic: bool,
    /// Unordered gradient reduction; runs are no longer bit-identical.
    #[arg(long)]
    pub fast: bool,
}

#[derive(Serialize, Debug)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub final_train_accuracy: f64,
    pub final_train_loss: f64,
    pub final_val_accuracy: Option<f64>,
    pub final_val_loss: Option<f64>,
    pub param_count: u64,
    pub param_breakdown: Vec<(String, u64)>,
    pub param_estimate: u128,
    pub model_path: PathBuf,
    pub model_sha256: String,
    pub history_path: PathBuf,
    pub seconds_total: f64,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let manifest = SplitManifest::load(&args.out.join(MANIFEST_FILE))?;

    let model_config = ModelConfig {
        conv_filters: args.filters,
        convnext_dim: args.filters,
        convnext_blocks: args.blocks,
        dropout_rate: args.dropout,
        num_classes: manifest.class_names.len(),
        ..ModelConfig::default()
    };
    model_config.validate()?;
    let train_config = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch_size,
        epochs: args.epochs,
        early_stop_patience: args.early_stop_patience,
        seed: args.seed,
        fast: args.fast,
        ..TrainConfig::default()
    };
    train_config.validate()?;

    let (samples, _) = read_cache(&args.out.join(CACHE_FILE))?;
    let take = |ids: &[u32]| -> Vec<Sample> {
        ids.iter().map(|&i| samples[i as usize].clone()).collect()
    };
    let train_samples = take(&manifest.indices.train);
    let val_samples = take(&manifest.indices.validation);

    let scaler = fit_scaler(&train_samples)?;
    let train_set = PreparedSet::<f32>::from_samples(&train_samples, &scaler)?;
    let val_set = PreparedSet::<f32>::from_samples(&val_samples, &scaler)?;

    let mut model = init_model::<f32>(&model_config, args.seed)?;
    model.scaler = scaler;
    model.class_names = manifest.class_names.clone();

    let records = fit(&mut model, &train_set, &val_set, &train_config)?;

    let model_path = args.out.join(MODEL_FILE);
    save_model(&model, &model_path)?;
    let history_path = args.out.join(HISTORY_FILE);
    write_history(&history_path, &records)?;
    write_epoch_log(&args.out.join(EPOCH_LOG_FILE), &records)?;

    let last = records.last().expect("at least one epoch");
    let (total, breakdown) = param_count(&model_config);
    Ok(TrainSummary {
        epochs_run: records.len(),
        final_train_accuracy: last.train_acc,
        final_train_loss: last.train_loss,
        final_val_accuracy: last.val_acc,
        final_val_loss: last.val_loss,
        param_count: total,
        param_breakdown: breakdown,
        param_estimate: hyperparam_estimate(&model_config),
        model_sha256: sha256_file(&model_path)?,
        model_path,
        history_path,
        seconds_total: records.iter().map(|r| r.seconds).sum(),
    })
}

fn write_history(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let mut out = String::from(EpochRecord::CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_epoch_log(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// Directory with the prepared cache/manifest (and default model).
    #[arg(long)]
    pub out: PathBuf,
    /// Model file; defaults to `<out>/model.bsnt`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Which split to score: train, val, or test.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    /// Also render SVG figures (metric bars, confusion heatmap, ROC).
    #[arg(long)]
    pub emit_svg: bool,
}

#[derive(Serialize, Debug)]
pub struct EvalSummary {
    pub split: String,
    pub samples: usize,
    pub accuracy: f64,
    pub loss: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub macro_f1: f64,
    pub macro_mcc: f64,
    pub mean_auc: Option<f64>,
    pub seconds: f64,
    pub ms_per_step: f64,
    pub timing_line: String,
    pub report_dir: PathBuf,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalSummary> {
    let split = args.split.as_str();
    if !matches!(split, "train" | "val" | "validation" | "test") {
        return Err(Error::Config(format!(
            "unknown split '{split}' (expected train, val, or test)"
        )));
    }
    let model_path = args
        .model
        .clone()
        .unwrap_or_else(|| args.out.join(MODEL_FILE));
    let model = load_model(&model_path)?;
    let manifest = SplitManifest::load(&args.out.join(MANIFEST_FILE))?;
    let (samples, _) = read_cache(&args.out.join(CACHE_FILE))?;

    let ids = match split {
        "train" => &manifest.indices.train,
        "val" | "validation" => &manifest.indices.validation,
        _ => &manifest.indices.test,
    };
    let subset: Vec<Sample> = ids.iter().map(|&i| samples[i as usize].clone()).collect();
    // standardize with the scaler embedded in the model; never re-fit
    let set = PreparedSet::<f32>::from_samples(&subset, &model.scaler)?;

    let evaluation = evaluate(&model, &set, args.batch_size)?;
    let timing = EvalTiming {
        seconds: evaluation.seconds,
        ms_per_step: evaluation.ms_per_step,
        steps: evaluation.steps,
    };
    let report = full_report(
        &evaluation.labels,
        &evaluation.predictions,
        &evaluation.probabilities,
        model.class_names.clone(),
        Some(timing),
    )?;

    let split_tag = if split == "validation" { "val" } else { split };
    let report_dir = args.out.join(format!("eval-{split_tag}"));
    write_report_bundle(&report_dir, &report, args.emit_svg)?;

    let defined: Vec<f64> = report.per_class_auc.iter().flatten().copied().collect();
    let mean_auc = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };

    Ok(EvalSummary {
        split: split_tag.to_string(),
        samples: set.len(),
        accuracy: report.accuracy,
        loss: evaluation.loss,
        weighted_precision: report.weighted_avg.precision,
        weighted_recall: report.weighted_avg.recall,
        macro_f1: report.macro_avg.f1,
        macro_mcc: report.macro_mcc,
        mean_auc,
        seconds: evaluation.seconds,
        ms_per_step: evaluation.ms_per_step,
        timing_line: timing.display_line(),
        report_dir,
    })
}

fn write_report_bundle(dir: &Path, report: &MetricsReport, emit_svg: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json_string()?)?;
    std::fs::write(dir.join("metrics.csv"), report.to_csv_string())?;
    std::fs::write(
        dir.join("confusion.csv"),
        report.confusion_matrix()?.to_csv(),
    )?;
    for (c, name) in report.class_names.iter().enumerate() {
        if let Some(csv) = report.roc_csv(c) {
            std::fs::write(dir.join(format!("roc_{name}.csv")), csv)?;
        }
    }
    if let Some(t) = &report.timing {
        let mut timing_json = serde_json::to_string_pretty(t)?;
        timing_json.push('\n');
        std::fs::write(dir.join("timing.json"), timing_json)?;
    }
    if emit_svg {
        std::fs::write(dir.join("metrics.svg"), svg::per_class_bars_svg(report))?;
        std::fs::write(dir.join("confusion.svg"), svg::confusion_heatmap_svg(report))?;
        std::fs::write(dir.join("roc.svg"), svg::roc_svg(report))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone)]
pub struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of feature rows to classify.
    #[arg(long)]
    pub input: PathBuf,
    /// Treat the first input line as a header row and skip it.
    #[arg(long)]
    pub headered: bool,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Serialize, Debug)]
pub struct PredictSummary {
    pub rows: usize,
    pub output_path: Option<PathBuf>,
    /// Written to stdout instead when no output path is given.
    #[serde(skip)]
    pub csv: String,
}

pub fn cmd_predict(args: &PredictArgs) -> Result<PredictSummary> {
    let model = load_model(&args.model)?;
    let expected = model.scaler.num_features();

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(args.headered)
        .flexible(true)
        .from_path(&args.input)
        .map_err(|e| Error::Data(format!("{}: {e}", args.input.display())))?;

    let mut out = String::from("row,predicted_class");
    for name in &model.class_names {
        out.push_str(&format!(",p_{name}"));
    }
    out.push('\n');

    let mut rows = 0usize;
    for (row_index, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", args.input.display())))?;
        if record.len() != expected {
            return Err(Error::CsvField {
                file: args.input.clone(),
                line: record.position().map_or(row_index as u64 + 1, |p| p.line()),
                message: format!("row has {} columns, expected {expected}", record.len()),
            });
        }
        let mut features = Vec::with_capacity(expected);
        for (col, field) in record.iter().enumerate() {
            let v: f32 = field.trim().parse().map_err(|_| Error::CsvField {
                file: args.input.clone(),
                line: record.position().map_or(row_index as u64 + 1, |p| p.line()),
                message: format!("column {} is not numeric: '{field}'", col + 1),
            })?;
            features.push(v);
        }
        let input = to_input_tensor::<f32>(&transform(&model.scaler, &features)?);
        let probs = predict_proba(&model, &input);
        let best = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        out.push_str(&format!("{row_index},{}", model.class_names[best]));
        for p in &probs {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
        rows += 1;
    }

    if let Some(path) = &args.output {
        std::fs::write(path, &out)?;
    }
    Ok(PredictSummary {
        rows,
        output_path: args.output.clone(),
        csv: out,
    })
}

// ---------------------------------------------------------------------------
// dispatch and printing
// ---------------------------------------------------------------------------

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Prepare(args) => {
            let summary = cmd_prepare(args)?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                println!("{:<18} {:>10}", "class", "instances");
                for (name, n) in summary.class_names.iter().zip(&summary.class_counts) {
                    println!("{name:<18} {n:>10}");
                }
                println!("{:<18} {:>10}", "total", summary.total_samples);
                println!(
                    "split sizes: train {} / validation {} / test {}",
                    summary.train_size, summary.validation_size, summary.test_size
                );
                println!("cache:    {}", summary.cache_path.display());
                println!("manifest: {} (sha256 {})", summary.manifest_path.display(), summary.manifest_sha256);
            }
        }
        Command::Train(args) => {
            let summary = cmd_train(args)?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                println!("{:<14} {:>12} {:>10}", "dataset", "accuracy(%)", "loss");
                println!(
                    "{:<14} {:>12.2} {:>10.4}",
                    "train",
                    summary.final_train_accuracy * 100.0,
                    summary.final_train_loss
                );
                if let (Some(acc), Some(loss)) = (summary.final_val_accuracy, summary.final_val_loss) {
                    println!("{:<14} {:>12.2} {:>10.4}", "validation", acc * 100.0, loss);
                }
                println!(
                    "parameters: {} exact ({} hyperparameter estimate)",
                    summary.param_count, summary.param_estimate
                );
                println!(
                    "model: {} (sha256 {})",
                    summary.model_path.display(),
                    summary.model_sha256
                );
                println!("history: {}", summary.history_path.display());
            }
        }
        Command::Eval(args) => {
            let summary = cmd_eval(args)?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                println!(
                    "{:<10} {:>12} {:>10} {:>13} {:>10} {:>8}",
                    "dataset", "accuracy(%)", "loss", "precision(%)", "recall(%)", "auc(%)"
                );
                println!(
                    "{:<10} {:>12.2} {:>10.4} {:>13.2} {:>10.2} {:>8.2}",
                    summary.split,
                    summary.accuracy * 100.0,
                    summary.loss,
                    summary.weighted_precision * 100.0,
                    summary.weighted_recall * 100.0,
                    summary.mean_auc.map_or(f64::NAN, |a| a * 100.0)
                );
                println!("macro f1 {:.4}, macro mcc {:.4}", summary.macro_f1, summary.macro_mcc);
                println!("computational time: {}", summary.timing_line);
                println!("report bundle: {}", summary.report_dir.display());
            }
        }
        Command::Predict(args) => {
            let summary = cmd_predict(args)?;
            if let Some(path) = &summary.output_path {
                if cli.json {
                    println!("{}", serde_json::to_string_pretty(&summary)?);
                } else {
                    println!("wrote {} predictions to {}", summary.rows, path.display());
                }
            } else {
                print!("{}", summary.csv);
            }
        }
    }
    Ok(())
}
