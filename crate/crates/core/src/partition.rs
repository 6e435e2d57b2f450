//! Heterogeneous client partitioning and per-client train/test splits.
//!
//! Client shards are drawn with a Dirichlet scheme: for each of the four
//! (label, sensitive) cells, a proportion vector over the K clients is
//! sampled from Dir(alpha) and the cell's samples are distributed
//! multinomially according to it. Small alpha concentrates cells on few
//! clients; large alpha approaches a uniform random split.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::{cell_index, Dataset};
use crate::error::{Error, Result};

/// Dirichlet concentration controlling client heterogeneity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityLevel {
    pub alpha: f64,
}

impl HeterogeneityLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(Self { alpha })
        } else {
            Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")))
        }
    }
}

/// One client's local data: disjoint train and test sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientPartition {
    /// 1-based client id.
    pub client_id: usize,
    pub train: Dataset,
    pub test: Dataset,
}

/// Reproducibility record of a partition: which sample indices each client
/// received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionManifest {
    pub alpha: f64,
    pub k: usize,
    pub rng_seed: u64,
    /// `clients[c]` lists the dataset indices assigned to client c+1.
    pub clients: Vec<Vec<usize>>,
}

impl PartitionManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Samples one Dir(alpha) proportion vector over `k` clients via normalized
/// Gamma draws.
fn dirichlet_proportions(alpha: f64, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 {
        draws.into_iter().map(|g| g / sum).collect()
    } else {
        vec![1.0 / k as f64; k]
    }
}

/// Assigns every dataset index to a client, returning the manifest.
///
/// One Dir(alpha) proportion vector is drawn per (label, sensitive) cell;
/// each sample then picks its client from its cell's proportions.
/// Deterministic given `rng_seed`.
pub fn dirichlet_assign(
    dataset: &Dataset,
    alpha: f64,
    k: usize,
    rng_seed: u64,
) -> Result<PartitionManifest> {
    HeterogeneityLevel::new(alpha)?;
    if k == 0 || k > dataset.len() {
        return Err(Error::TooManyClients {
            k,
            n: dataset.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let cell_proportions: Vec<Vec<f64>> = (0..4)
        .map(|_| dirichlet_proportions(alpha, k, &mut rng))
        .collect();
    let cumulative: Vec<Vec<f64>> = cell_proportions
        .iter()
        .map(|p| {
            p.iter()
                .scan(0.0, |acc, &x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect()
        })
        .collect();

    let mut clients: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, sample) in dataset.samples.iter().enumerate() {
        let cum = &cumulative[cell_index(sample.label, sample.sensitive)];
        let u: f64 = rng.random();
        let client = cum.iter().position(|&c| u < c).unwrap_or(k - 1);
        clients[client].push(i);
    }
    Ok(PartitionManifest {
        alpha,
        k,
        rng_seed,
        clients,
    })
}

/// Splits a dataset into K client shards per [`dirichlet_assign`].
pub fn dirichlet_partition(
    dataset: &Dataset,
    alpha: f64,
    k: usize,
    rng_seed: u64,
) -> Result<Vec<Dataset>> {
    let manifest = dirichlet_assign(dataset, alpha, k, rng_seed)?;
    Ok(manifest
        .clients
        .iter()
        .map(|indices| dataset.subset(indices))
        .collect())
}

/// Uniform random train/test split without replacement: `floor(fraction * n)`
/// samples train, the rest test. Deterministic given `rng_seed`.
pub fn train_test_split(
    shard: &Dataset,
    client_id: usize,
    train_fraction: f64,
    rng_seed: u64,
) -> Result<ClientPartition> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidTrainFraction(train_fraction));
    }
    let n = shard.len();
    if n < 2 {
        return Err(Error::ShardTooSmall { n });
    }
    let n_train = (train_fraction * n as f64).floor() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
    let (train_idx, test_idx) = order.split_at(n_train);
    Ok(ClientPartition {
        client_id,
        train: shard.subset(train_idx),
        test: shard.subset(test_idx),
    })
}

/// Maximum over client pairs of the total-variation distance between
/// per-client (label, sensitive) cell distributions; 0 means identical
/// distributions, 1 means disjoint support.
pub fn heterogeneity_stat(shards: &[Dataset]) -> Result<f64> {
    if shards.len() < 2 {
        return Err(Error::TooFewShards(shards.len()));
    }
    let dists: Vec<[f64; 4]> = shards
        .iter()
        .enumerate()
        .map(|(i, shard)| {
            if shard.is_empty() {
                return Err(Error::EmptyShard { index: i });
            }
            let counts = shard.cell_counts();
            let n = shard.len() as f64;
            Ok(counts.map(|c| c as f64 / n))
        })
        .collect::<Result<_>>()?;

    let mut max_tv = 0.0f64;
    for i in 0..dists.len() {
        for j in i + 1..dists.len() {
            let tv = 0.5
                * dists[i]
                    .iter()
                    .zip(&dists[j])
                    .map(|(p, q)| (p - q).abs())
                    .sum::<f64>();
            max_tv = max_tv.max(tv);
        }
    }
    Ok(max_tv)
}

/// True if any client's train split has an empty (label, sensitive) cell,
/// making local fairness unmeasurable there.
pub fn has_degenerate_train_cell(partitions: &[ClientPartition]) -> bool {
    partitions
        .iter()
        .any(|p| p.train.cell_counts().contains(&0))
}
