//! FedAvg round loop: local updates, sample-count-weighted aggregation and
//! communication accounting.
//!
//! Per-client randomness is derived purely from (experiment seed, client id,
//! round), so parallel and serial execution of a round produce identical
//! results. Aggregation sorts per-coefficient contributions before summing,
//! which makes it exactly invariant to client order.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{sgd_epoch, ModelWeights, TrainConfig};
use crate::partition::ClientPartition;
use crate::seeds::derive_seed;

/// Global training configuration: T rounds across K clients, each running
/// the same local update recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedConfig {
    /// Global rounds T.
    pub rounds: usize,
    /// Number of clients K.
    pub clients: usize,
    /// Local update recipe; its `rng_seed` is the federation-level seed from
    /// which per-client, per-round seeds are derived.
    pub train: TrainConfig,
}

/// Accounting record for one completed global round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    /// Always 2K: one upload and one download per client.
    pub messages_sent: usize,
    pub elapsed_s: f64,
}

const STREAM_EPOCH: u64 = 0x45504f43;

/// Seed for a client's local update in a given round; pure in its inputs.
pub fn local_update_seed(fed_seed: u64, client_id: usize, round: usize) -> u64 {
    derive_seed(fed_seed, client_id as u64, round as u64)
}

/// Seed for one epoch within a local update; pure in its inputs.
pub fn epoch_seed(update_seed: u64, epoch: usize) -> u64 {
    derive_seed(update_seed, STREAM_EPOCH, epoch as u64)
}

/// Runs `local_epochs` SGD passes starting from a copy of the global
/// weights. The global weights are not modified; epoch e shuffles with
/// [`epoch_seed`]`(config.rng_seed, e)`.
pub fn client_local_update(
    global_weights: &ModelWeights,
    train: &Dataset,
    config: &TrainConfig,
) -> Result<ModelWeights> {
    if train.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut weights = global_weights.clone();
    for epoch in 0..config.local_epochs {
        let epoch_config = TrainConfig {
            rng_seed: epoch_seed(config.rng_seed, epoch),
            ..config.clone()
        };
        weights = sgd_epoch(&weights, train, &epoch_config)?;
    }
    Ok(weights)
}

/// Coefficient-wise weighted mean of client updates with weights
/// `n_k / sum(n_j)`.
///
/// Contributions are sorted before summation, so the result is exactly
/// invariant under permutation of the update list, and scaling all counts by
/// a common factor leaves it bit-unchanged.
pub fn aggregate(updates: &[(ModelWeights, usize)]) -> Result<ModelWeights> {
    let first = match updates.first() {
        Some((w, _)) => w,
        None => return Err(Error::EmptyInput),
    };
    if updates.iter().any(|(_, n)| *n == 0) {
        return Err(Error::InvalidConfig("aggregate sample counts must be >= 1".into()));
    }
    let dims = first.dims();
    if updates.iter().any(|(w, _)| w.dims() != dims) {
        return Err(Error::ShapeMismatch);
    }

    let total: usize = updates.iter().map(|(_, n)| n).sum();
    let weights: Vec<f64> = updates
        .iter()
        .map(|(_, n)| *n as f64 / total as f64)
        .collect();

    let mut result = first.clone();
    let mut contributions = vec![0.0f64; updates.len()];
    let mut combine = |read: &dyn Fn(&ModelWeights) -> f64| {
        for (slot, ((w, _), &weight)) in contributions.iter_mut().zip(updates.iter().zip(&weights))
        {
            *slot = weight * read(w);
        }
        contributions.sort_unstable_by(f64::total_cmp);
        contributions.iter().sum::<f64>()
    };

    for l in 0..result.layers.len() {
        for r in 0..result.layers[l].weights.len() {
            for c in 0..result.layers[l].weights[r].len() {
                result.layers[l].weights[r][c] = combine(&|m| m.layers[l].weights[r][c]);
            }
            result.layers[l].bias[r] = combine(&|m| m.layers[l].bias[r]);
        }
    }
    Ok(result)
}

/// Runs T FedAvg rounds from `initial` weights: every round, all clients
/// update locally in parallel, the server aggregates by training-set size
/// and broadcasts. Returns the final global weights and per-round logs.
pub fn fedavg_train(
    initial: &ModelWeights,
    partitions: &[ClientPartition],
    config: &FedConfig,
) -> Result<(ModelWeights, Vec<RoundLog>)> {
    if partitions.len() != config.clients || config.clients == 0 {
        return Err(Error::InvalidConfig(format!(
            "expected {} client partitions, got {}",
            config.clients,
            partitions.len()
        )));
    }
    for p in partitions {
        if p.train.is_empty() {
            return Err(Error::EmptyTrainSet {
                client_id: p.client_id,
            });
        }
    }

    let mut global = initial.clone();
    let mut logs = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds {
        let start = Instant::now();
        let updates: Vec<(ModelWeights, usize)> = partitions
            .par_iter()
            .map(|p| {
                let client_config = TrainConfig {
                    rng_seed: local_update_seed(config.train.rng_seed, p.client_id, round),
                    ..config.train.clone()
                };
                client_local_update(&global, &p.train, &client_config)
                    .map(|w| (w, p.train.len()))
            })
            .collect::<Result<_>>()?;
        global = aggregate(&updates)?;
        logs.push(RoundLog {
            round,
            messages_sent: 2 * config.clients,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok((global, logs))
}

/// Total message count for T rounds with K clients: one initial broadcast to
/// each client plus an upload and a download per client per round, i.e.
/// `K * (2T + 1)`.
pub fn count_communication(rounds: usize, clients: usize) -> usize {
    clients * (2 * rounds + 1)
}

/// Writes round logs as CSV with columns `round,messages,elapsed_seconds`.
pub fn write_round_logs_csv<W: Write>(logs: &[RoundLog], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["round", "messages", "elapsed_seconds"])?;
    for log in logs {
        csv.write_record([
            log.round.to_string(),
            log.messages_sent.to_string(),
            log.elapsed_s.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::Io {
        path: "<writer>".into(),
        source: e,
    })?;
    Ok(())
}
