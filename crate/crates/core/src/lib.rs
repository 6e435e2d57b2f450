//! Federated learning simulator with fully-local fairness debiasing.
//!
//! Two stages: fairness-unaware FedAvg training across simulated clients,
//! then per-client debiasing of the received global model, either by an
//! equalized-odds derived predictor (a small linear program over the
//! model's outputs) or by fine-tuning the final layer under a composite
//! accuracy + fairness loss. Both debiasing paths run on local data only
//! and add no communication.

pub mod data;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod finetune;
pub mod metrics;
pub mod model;
pub mod partition;
pub mod postprocess;
pub mod seeds;

pub use data::{load_adult, load_compas, synth_generate, Dataset, DatasetSource, Sample, SynthSpec};
pub use error::{Error, Result};
pub use experiment::{
    run_experiment, summarize, write_report, write_report_file, ExperimentConfig,
    ExperimentReport, Method, ReportFormat,
};
pub use federation::{
    aggregate, client_local_update, count_communication, fedavg_train, FedConfig, RoundLog,
};
pub use metrics::{
    accuracy, balanced_accuracy, confusion_by_group, eod, weighted_average, GroupCell, GroupRates,
};
pub use model::{
    forward, init_model, predict_labels, sgd_epoch, Layer, ModelWeights, TrainConfig,
};
pub use partition::{
    dirichlet_partition, heterogeneity_stat, train_test_split, ClientPartition, PartitionManifest,
};
pub use postprocess::{
    apply_derived, derived_rates, estimate_joint, evaluate_derived_exact, expected_loss,
    fit_derived_predictor, DerivedPredictor, JointStats,
};
