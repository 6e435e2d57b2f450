//! Experiment runner: dataset -> partition -> FedAvg -> optional local
//! debiasing, over seed sweeps, with per-client and weighted-average
//! reporting.
//!
//! Per-client test metrics are weighted by test-set size into the per-seed
//! average row; the summary reports mean and population standard deviation
//! across seeds. Clients whose local data cannot support a fairness
//! measurement (an empty (attribute, label) cell or an undefined rate) are
//! reported as such instead of contaminating the averages.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{load_adult, load_compas, synth_generate, Dataset, SynthSpec};
use crate::error::{Error, Result};
use crate::federation::{count_communication, fedavg_train, FedConfig, RoundLog};
use crate::finetune::{finetune_last_layer, FtConfig};
use crate::metrics::{accuracy, balanced_accuracy, confusion_by_group, eod, weighted_average};
use crate::model::{init_model, predict_labels, ModelWeights, TrainConfig};
use crate::partition::{
    dirichlet_partition, has_degenerate_train_cell, train_test_split, ClientPartition,
};
use crate::postprocess::{apply_derived, estimate_joint, evaluate_derived_exact, fit_derived_predictor};
use crate::seeds::derive_seed;

/// Which dataset the experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Adult,
    Compas,
    Synthetic,
}

/// Debiasing method applied after FedAvg training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// No debiasing: evaluate the global model as-is.
    Fedavg,
    /// Equalized-odds output post-processing per client.
    Pp,
    /// Final-layer fairness fine-tuning per client.
    Ft,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Fedavg => write!(f, "fedavg"),
            Method::Pp => write!(f, "pp"),
            Method::Ft => write!(f, "ft"),
        }
    }
}

/// What to do when a drawn partition leaves some client with an empty
/// (attribute, label) train cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DegeneratePolicy {
    /// Redraw with a fresh derived seed, up to a bounded number of attempts.
    #[default]
    RejectAndRedraw,
    /// Keep the partition; affected clients report fairness as unmeasurable.
    Keep,
}

/// FedAvg hyperparameters as configured (seeds are derived per run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedParams {
    /// Global rounds T.
    pub rounds: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(default = "default_local_epochs")]
    pub local_epochs: usize,
}

fn default_local_epochs() -> usize {
    1
}

/// Fine-tuning hyperparameters as configured (seed derived per run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtParams {
    pub alpha_ft: f64,
    pub eta: f64,
    pub rounds: usize,
    #[serde(default = "default_ft_batch")]
    pub batch_size: usize,
}

fn default_ft_batch() -> usize {
    usize::MAX
}

fn default_train_fraction() -> f64 {
    0.8
}

fn default_model_dims() -> Vec<usize> {
    vec![1]
}

/// Full experiment configuration; the JSON config file maps 1:1 onto this
/// struct and CLI flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    /// Dirichlet concentration for the client split.
    pub alpha: f64,
    /// Number of clients K.
    pub clients: usize,
    pub seeds: Vec<u64>,
    pub method: Method,
    pub fed: FedParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ft: Option<FtParams>,
    /// Layer widths after the input layer, e.g. `[1]` for logistic
    /// regression or `[8, 1]` for a one-hidden-layer network; the input
    /// width comes from the dataset.
    #[serde(default = "default_model_dims")]
    pub model_dims: Vec<usize>,
    #[serde(default)]
    pub degenerate_partition_policy: DegeneratePolicy,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Evaluate post-processing by sampling flips instead of expected rates.
    #[serde(default)]
    pub pp_sampled: bool,
}

impl ExperimentConfig {
    /// Published hyperparameters for Adult runs: lr 0.01, batch 32, T=20.
    pub fn adult_defaults(csv_path: impl Into<PathBuf>) -> Self {
        Self {
            dataset: DatasetKind::Adult,
            csv_path: Some(csv_path.into()),
            synth: None,
            alpha: 0.5,
            clients: 4,
            seeds: (0..10).collect(),
            method: Method::Pp,
            fed: FedParams {
                rounds: 20,
                learning_rate: 0.01,
                batch_size: 32,
                local_epochs: 1,
            },
            ft: Some(FtParams {
                alpha_ft: 1.0,
                eta: 5e-3,
                rounds: 100,
                batch_size: 256,
            }),
            model_dims: vec![1],
            degenerate_partition_policy: DegeneratePolicy::default(),
            train_fraction: 0.8,
            pp_sampled: false,
        }
    }

    /// Published hyperparameters for COMPAS runs: lr 0.01, batch 32, T=40.
    pub fn compas_defaults(csv_path: impl Into<PathBuf>) -> Self {
        Self {
            dataset: DatasetKind::Compas,
            csv_path: Some(csv_path.into()),
            alpha: 500.0,
            fed: FedParams {
                rounds: 40,
                learning_rate: 0.01,
                batch_size: 32,
                local_epochs: 1,
            },
            ft: Some(FtParams {
                alpha_ft: 2.0,
                eta: 5e-3,
                rounds: 100,
                batch_size: 256,
            }),
            ..Self::adult_defaults("")
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must be nonempty".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.clients == 0 {
            return Err(Error::InvalidConfig("clients must be >= 1".into()));
        }
        if self.model_dims.is_empty() || *self.model_dims.last().unwrap() != 1 {
            return Err(Error::InvalidConfig(format!(
                "model_dims must end in 1, got {:?}",
                self.model_dims
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidTrainFraction(self.train_fraction));
        }
        if self.fed.learning_rate <= 0.0 || self.fed.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "fed.learning_rate must be positive and fed.batch_size >= 1".into(),
            ));
        }
        match self.dataset {
            DatasetKind::Adult | DatasetKind::Compas => {
                if self.csv_path.is_none() {
                    return Err(Error::InvalidConfig(format!(
                        "dataset {:?} requires csv_path",
                        self.dataset
                    )));
                }
            }
            DatasetKind::Synthetic => {
                if self.synth.is_none() {
                    return Err(Error::InvalidConfig(
                        "dataset synthetic requires a synth spec".into(),
                    ));
                }
            }
        }
        if self.method == Method::Ft {
            if self.model_dims.len() < 2 {
                return Err(Error::InvalidConfig(
                    "method ft needs a model with at least 2 layers".into(),
                ));
            }
            if self.ft.is_none() {
                return Err(Error::InvalidConfig("method ft requires ft parameters".into()));
            }
        }
        Ok(())
    }
}

/// One client's evaluated test metrics for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRow {
    pub client: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    /// None when the test labels are single-class.
    pub balanced_accuracy: Option<f64>,
    /// None when fairness is unmeasurable on this client.
    pub eod: Option<f64>,
    /// Why a metric is missing or the debiasing stage was skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Test-size-weighted averages over the measurable clients of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRow {
    pub accuracy: f64,
    pub balanced_accuracy: Option<f64>,
    pub eod: Option<f64>,
}

/// All results for a single seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub clients: Vec<ClientRow>,
    pub weighted: WeightedRow,
    pub comm_rounds: usize,
    pub train_elapsed_s: f64,
    pub debias_elapsed_s: f64,
}

/// Mean and population standard deviation of a metric across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Cross-seed summary of the weighted-average rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seeds: usize,
    pub accuracy: MeanStd,
    pub balanced_accuracy: Option<MeanStd>,
    pub eod: Option<MeanStd>,
}

/// Full experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: DatasetKind,
    pub method: Method,
    pub alpha: f64,
    pub clients: usize,
    pub rounds: usize,
    pub seed_reports: Vec<SeedReport>,
    pub summary: Summary,
    pub total_elapsed_s: f64,
}

impl ExperimentReport {
    /// Copy with all wallclock fields zeroed, for determinism comparisons.
    pub fn with_zeroed_timing(&self) -> Self {
        let mut report = self.clone();
        report.total_elapsed_s = 0.0;
        for seed in &mut report.seed_reports {
            seed.train_elapsed_s = 0.0;
            seed.debias_elapsed_s = 0.0;
        }
        report
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

// Stream tags for per-seed randomness.
const STREAM_SYNTH: u64 = 1;
const STREAM_PARTITION: u64 = 2;
const STREAM_SPLIT: u64 = 3;
const STREAM_INIT: u64 = 4;
const STREAM_TRAIN: u64 = 5;
const STREAM_FT: u64 = 6;
const STREAM_PP: u64 = 7;

const MAX_PARTITION_ATTEMPTS: usize = 100;

/// Loads (or generates) the dataset a config names. For synthetic data the
/// generator is seeded per experiment seed; file-backed datasets ignore the
/// seed.
pub fn load_dataset(config: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    match config.dataset {
        DatasetKind::Adult => load_adult(config.csv_path.as_ref().expect("validated")),
        DatasetKind::Compas => load_compas(config.csv_path.as_ref().expect("validated")),
        DatasetKind::Synthetic => synth_generate(
            config.synth.as_ref().expect("validated"),
            derive_seed(seed, STREAM_SYNTH, 0),
        ),
    }
}

/// Partitions the dataset into per-client train/test splits for one seed,
/// honoring the degenerate-partition policy.
pub fn prepare_partitions(
    data: &Dataset,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<ClientPartition>> {
    let attempts = match config.degenerate_partition_policy {
        DegeneratePolicy::RejectAndRedraw => MAX_PARTITION_ATTEMPTS,
        DegeneratePolicy::Keep => 1,
    };
    for attempt in 0..attempts {
        let shards = dirichlet_partition(
            data,
            config.alpha,
            config.clients,
            derive_seed(seed, STREAM_PARTITION, attempt as u64),
        )?;
        let split_base = derive_seed(seed, STREAM_SPLIT, attempt as u64);
        let partitions: Vec<ClientPartition> = shards
            .iter()
            .enumerate()
            .map(|(i, shard)| {
                train_test_split(
                    shard,
                    i + 1,
                    config.train_fraction,
                    derive_seed(split_base, i as u64 + 1, 0),
                )
            })
            .collect::<Result<_>>()?;
        if config.degenerate_partition_policy == DegeneratePolicy::Keep
            || !has_degenerate_train_cell(&partitions)
        {
            return Ok(partitions);
        }
    }
    Err(Error::DegeneratePartition {
        attempts,
        alpha: config.alpha,
        k: config.clients,
        seed,
    })
}

/// Runs the FedAvg stage for one seed: model init plus T rounds.
pub fn train_global(
    partitions: &[ClientPartition],
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(ModelWeights, Vec<RoundLog>)> {
    let input_dim = partitions
        .first()
        .map(|p| p.train.dim())
        .ok_or(Error::EmptyInput)?;
    let mut dims = vec![input_dim];
    dims.extend_from_slice(&config.model_dims);
    let initial = init_model(&dims, derive_seed(seed, STREAM_INIT, 0))?;
    let fed = FedConfig {
        rounds: config.fed.rounds,
        clients: config.clients,
        train: TrainConfig {
            learning_rate: config.fed.learning_rate,
            batch_size: config.fed.batch_size,
            local_epochs: config.fed.local_epochs,
            rng_seed: derive_seed(seed, STREAM_TRAIN, 0),
        },
    };
    fedavg_train(&initial, partitions, &fed)
}

struct ClientEvaluation {
    accuracy: f64,
    balanced_accuracy: Option<f64>,
    eod: Option<f64>,
    note: Option<String>,
}

fn eval_hard_predictions(predictions: &[bool], test: &Dataset) -> ClientEvaluation {
    let labels: Vec<bool> = test.samples.iter().map(|s| s.label).collect();
    let attrs: Vec<bool> = test.samples.iter().map(|s| s.sensitive).collect();
    let accuracy = accuracy(predictions, &labels).expect("nonempty test set");
    let (balanced, mut note) = match balanced_accuracy(predictions, &labels) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let eod_value = match confusion_by_group(predictions, &labels, &attrs) {
        Ok(rates) => Some(eod(&rates)),
        Err(e) => {
            note = Some(match note {
                Some(prev) => format!("{prev}; {e}"),
                None => e.to_string(),
            });
            None
        }
    };
    ClientEvaluation {
        accuracy,
        balanced_accuracy: balanced,
        eod: eod_value,
        note,
    }
}

/// Applies the configured debiasing to one client and evaluates on its test
/// set. Debiasing that cannot be fit on the local train data (empty cells)
/// falls back to the base model with an explanatory note, mirroring a client
/// that skips the debiasing stage.
fn debias_and_eval_client(
    global: &ModelWeights,
    part: &ClientPartition,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<ClientEvaluation> {
    let test_preds = predict_labels(global, &part.test, 0.5)?;
    match config.method {
        Method::Fedavg => Ok(eval_hard_predictions(&test_preds, &part.test)),
        Method::Pp => {
            let train_preds = predict_labels(global, &part.train, 0.5)?;
            let train_labels: Vec<bool> = part.train.samples.iter().map(|s| s.label).collect();
            let train_attrs: Vec<bool> = part.train.samples.iter().map(|s| s.sensitive).collect();
            let predictor = match estimate_joint(&train_preds, &train_labels, &train_attrs)
                .and_then(|stats| fit_derived_predictor(&stats, 1e-9))
            {
                Ok(p) => p,
                Err(e @ (Error::EmptyCell { .. } | Error::RateUndefined { .. })) => {
                    let mut eval = eval_hard_predictions(&test_preds, &part.test);
                    eval.note = Some(format!("post-processing skipped: {e}"));
                    return Ok(eval);
                }
                Err(e) => return Err(e),
            };

            let test_labels: Vec<bool> = part.test.samples.iter().map(|s| s.label).collect();
            let test_attrs: Vec<bool> = part.test.samples.iter().map(|s| s.sensitive).collect();
            if config.pp_sampled {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(
                    seed,
                    STREAM_PP,
                    part.client_id as u64,
                ));
                let sampled: Vec<bool> = test_preds
                    .iter()
                    .zip(&test_attrs)
                    .map(|(&y_hat, &a)| apply_derived(&predictor, y_hat, a, &mut rng))
                    .collect();
                Ok(eval_hard_predictions(&sampled, &part.test))
            } else {
                match evaluate_derived_exact(&predictor, &test_preds, &test_labels, &test_attrs) {
                    Ok((rates, expected_acc)) => {
                        let g = &rates.groups;
                        let pos = g[0].true_pos + g[0].false_neg + g[1].true_pos + g[1].false_neg;
                        let neg = g[0].false_pos + g[0].true_neg + g[1].false_pos + g[1].true_neg;
                        let balanced = if pos > 0.0 && neg > 0.0 {
                            let tpr = (g[0].true_pos + g[1].true_pos) / pos;
                            let tnr = (g[0].true_neg + g[1].true_neg) / neg;
                            Some((tpr + tnr) / 2.0)
                        } else {
                            None
                        };
                        Ok(ClientEvaluation {
                            accuracy: expected_acc,
                            balanced_accuracy: balanced,
                            eod: Some(eod(&rates)),
                            note: None,
                        })
                    }
                    Err(e @ (Error::EmptyCell { .. } | Error::RateUndefined { .. })) => {
                        let mut eval = eval_hard_predictions(&test_preds, &part.test);
                        eval.note = Some(format!("exact evaluation unavailable: {e}"));
                        Ok(eval)
                    }
                    Err(e) => Err(e),
                }
            }
        }
        Method::Ft => {
            let params = config.ft.as_ref().expect("validated");
            let ft_config = FtConfig {
                alpha_ft: params.alpha_ft,
                eta: params.eta,
                rounds: params.rounds,
                batch_size: params.batch_size,
                rng_seed: derive_seed(seed, STREAM_FT, part.client_id as u64),
            };
            match finetune_last_layer(global, &part.train, &ft_config) {
                Ok(tuned) => {
                    let tuned_preds = predict_labels(&tuned, &part.test, 0.5)?;
                    Ok(eval_hard_predictions(&tuned_preds, &part.test))
                }
                Err(e @ Error::EmptyCell { .. }) => {
                    let mut eval = eval_hard_predictions(&test_preds, &part.test);
                    eval.note = Some(format!("fine-tuning skipped: {e}"));
                    Ok(eval)
                }
                Err(e) => Err(e),
            }
        }
    }
}

fn weighted_over_defined(
    rows: &[ClientRow],
    metric: impl Fn(&ClientRow) -> Option<f64>,
) -> Option<f64> {
    let defined: Vec<(f64, usize)> = rows
        .iter()
        .filter_map(|r| metric(r).map(|v| (v, r.n_test)))
        .collect();
    if defined.is_empty() {
        return None;
    }
    let values: Vec<f64> = defined.iter().map(|d| d.0).collect();
    let sizes: Vec<usize> = defined.iter().map(|d| d.1).collect();
    Some(weighted_average(&values, &sizes).expect("aligned nonempty"))
}

/// Runs one seed of the pipeline and assembles its report.
pub fn run_seed(data: &Dataset, config: &ExperimentConfig, seed: u64) -> Result<SeedReport> {
    let partitions = prepare_partitions(data, config, seed)?;

    let train_start = Instant::now();
    let (global, _logs) = train_global(&partitions, config, seed)?;
    let train_elapsed_s = train_start.elapsed().as_secs_f64();

    // Debiasing is fully local; the recorded time is the sum across clients,
    // a generous upper bound on the parallel wallclock.
    let mut debias_elapsed_s = 0.0;
    let mut rows = Vec::with_capacity(partitions.len());
    for part in &partitions {
        let start = Instant::now();
        let eval = debias_and_eval_client(&global, part, config, seed)?;
        debias_elapsed_s += start.elapsed().as_secs_f64();
        rows.push(ClientRow {
            client: part.client_id,
            n_train: part.train.len(),
            n_test: part.test.len(),
            accuracy: eval.accuracy,
            balanced_accuracy: eval.balanced_accuracy,
            eod: eval.eod,
            note: eval.note,
        });
    }

    let weighted = WeightedRow {
        accuracy: weighted_over_defined(&rows, |r| Some(r.accuracy)).expect("clients >= 1"),
        balanced_accuracy: weighted_over_defined(&rows, |r| r.balanced_accuracy),
        eod: weighted_over_defined(&rows, |r| r.eod),
    };
    Ok(SeedReport {
        seed,
        clients: rows,
        weighted,
        comm_rounds: count_communication(config.fed.rounds, config.clients),
        train_elapsed_s,
        debias_elapsed_s,
    })
}

/// Mean and population standard deviation across the per-seed weighted rows.
pub fn summarize(reports: &[SeedReport]) -> Result<Summary> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mean_std = |values: &[f64]| {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    };
    let accuracies: Vec<f64> = reports.iter().map(|r| r.weighted.accuracy).collect();
    let balanced: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.weighted.balanced_accuracy)
        .collect();
    let eods: Vec<f64> = reports.iter().filter_map(|r| r.weighted.eod).collect();
    Ok(Summary {
        seeds: reports.len(),
        accuracy: mean_std(&accuracies),
        balanced_accuracy: (!balanced.is_empty()).then(|| mean_std(&balanced)),
        eod: (!eods.is_empty()).then(|| mean_std(&eods)),
    })
}

/// Runs the configured experiment across all seeds.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let total_start = Instant::now();

    // File-backed datasets load once; synthetic data regenerates per seed.
    let shared_data = match config.dataset {
        DatasetKind::Synthetic => None,
        _ => Some(load_dataset(config, 0)?),
    };

    let mut seed_reports = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let report = match &shared_data {
            Some(data) => run_seed(data, config, seed)?,
            None => {
                let data = load_dataset(config, seed)?;
                run_seed(&data, config, seed)?
            }
        };
        seed_reports.push(report);
    }

    let summary = summarize(&seed_reports)?;
    Ok(ExperimentReport {
        dataset: config.dataset,
        method: config.method,
        alpha: config.alpha,
        clients: config.clients,
        rounds: config.fed.rounds,
        seed_reports,
        summary,
        total_elapsed_s: total_start.elapsed().as_secs_f64(),
    })
}

/// Report output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

fn format_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the report: CSV rows
/// `seed,client,n_train,n_test,accuracy,balanced_accuracy,eod,method,alpha,comm_rounds,elapsed_s`
/// (one row per client plus an `avg` row per seed), or the full nested JSON.
pub fn write_report<W: Write>(
    report: &ExperimentReport,
    writer: &mut W,
    format: ReportFormat,
) -> Result<()> {
    match format {
        ReportFormat::Json => {
            writer
                .write_all(report.to_json().as_bytes())
                .and_then(|()| writer.write_all(b"\n"))
                .map_err(|source| Error::Io {
                    path: "<writer>".into(),
                    source,
                })?;
        }
        ReportFormat::Csv => {
            let mut csv = csv::Writer::from_writer(writer);
            csv.write_record([
                "seed",
                "client",
                "n_train",
                "n_test",
                "accuracy",
                "balanced_accuracy",
                "eod",
                "method",
                "alpha",
                "comm_rounds",
                "elapsed_s",
            ])?;
            for seed_report in &report.seed_reports {
                let elapsed = seed_report.train_elapsed_s + seed_report.debias_elapsed_s;
                for row in &seed_report.clients {
                    csv.write_record([
                        seed_report.seed.to_string(),
                        row.client.to_string(),
                        row.n_train.to_string(),
                        row.n_test.to_string(),
                        row.accuracy.to_string(),
                        format_opt(row.balanced_accuracy),
                        format_opt(row.eod),
                        report.method.to_string(),
                        report.alpha.to_string(),
                        seed_report.comm_rounds.to_string(),
                        elapsed.to_string(),
                    ])?;
                }
                let n_train: usize = seed_report.clients.iter().map(|r| r.n_train).sum();
                let n_test: usize = seed_report.clients.iter().map(|r| r.n_test).sum();
                csv.write_record([
                    seed_report.seed.to_string(),
                    "avg".to_string(),
                    n_train.to_string(),
                    n_test.to_string(),
                    seed_report.weighted.accuracy.to_string(),
                    format_opt(seed_report.weighted.balanced_accuracy),
                    format_opt(seed_report.weighted.eod),
                    report.method.to_string(),
                    report.alpha.to_string(),
                    seed_report.comm_rounds.to_string(),
                    elapsed.to_string(),
                ])?;
            }
            csv.flush().map_err(|source| Error::Io {
                path: "<writer>".into(),
                source,
            })?;
        }
    }
    Ok(())
}

/// Writes the report to a file path.
pub fn write_report_file(
    report: &ExperimentReport,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_report(report, &mut file, format)
}
