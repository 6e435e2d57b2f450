//! Final-layer fairness fine-tuning.
//!
//! Freezes all layers except the last, then runs gradient descent on the
//! composite loss `alpha_ft * BCE + surrogate`, where the surrogate is a
//! differentiable stand-in for the equalized-odds difference: soft TPR/FPR
//! computed from predicted probabilities instead of hard labels, since hard
//! rates are piecewise constant and give no gradient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{sigmoid, Layer, ModelWeights};
use crate::seeds::derive_seed;

/// Fine-tuning hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtConfig {
    /// Weight of the accuracy (BCE) term; the fairness term has weight 1.
    pub alpha_ft: f64,
    /// Fine-tuning learning rate.
    pub eta: f64,
    /// Number of fine-tuning rounds R.
    pub rounds: usize,
    /// Mini-batch size; a value >= the training-set size selects the
    /// full-batch descent the algorithm is defined with.
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl FtConfig {
    /// Published hyperparameters for COMPAS-style runs.
    pub fn compas_defaults(rng_seed: u64) -> Self {
        Self {
            alpha_ft: 2.0,
            eta: 5e-3,
            rounds: 100,
            batch_size: 256,
            rng_seed,
        }
    }

    /// Published hyperparameters for Adult-style runs.
    pub fn adult_defaults(rng_seed: u64) -> Self {
        Self {
            alpha_ft: 1.0,
            eta: 5e-3,
            rounds: 100,
            batch_size: 256,
            rng_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(Error::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        if self.alpha_ft < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha_ft must be nonnegative, got {}",
                self.alpha_ft
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Splits a model into frozen layers 1..L-1 and an independent copy of the
/// trainable last layer. Single-layer models cannot be fine-tuned.
pub fn split_frozen(weights: &ModelWeights) -> Result<(ModelWeights, Layer)> {
    let depth = weights.num_layers();
    if depth < 2 {
        return Err(Error::SingleLayerModel(depth));
    }
    let frozen = ModelWeights {
        layers: weights.layers[..depth - 1].to_vec(),
    };
    let trainable = weights.layers[depth - 1].clone();
    Ok((frozen, trainable))
}

fn cell_of(label: bool, sensitive: bool) -> (usize, usize) {
    (sensitive as usize, label as usize)
}

/// Soft equalized-odds surrogate: probability-weighted TPR/FPR per group,
/// returning `|softTPR_1 - softTPR_0| + |softFPR_1 - softFPR_0|`.
///
/// Differentiable in the probabilities except where a gap is exactly zero.
/// Errors if any (attribute, label) cell is empty.
pub fn fairness_surrogate(probabilities: &[f64], labels: &[bool], attrs: &[bool]) -> Result<f64> {
    Ok(surrogate_with_grad(probabilities, labels, attrs, false)?.0)
}

/// Surrogate value, and (when `with_grad`) its gradient with respect to each
/// probability, using subgradient 0 at a zero gap.
fn surrogate_with_grad(
    probabilities: &[f64],
    labels: &[bool],
    attrs: &[bool],
    with_grad: bool,
) -> Result<(f64, Vec<f64>)> {
    if probabilities.len() != labels.len() || labels.len() != attrs.len() {
        return Err(Error::LengthMismatch(vec![
            probabilities.len(),
            labels.len(),
            attrs.len(),
        ]));
    }
    let mut sums = [[0.0f64; 2]; 2]; // [a][y] sum of probabilities
    let mut counts = [[0.0f64; 2]; 2];
    for ((&p, &y), &a) in probabilities.iter().zip(labels).zip(attrs) {
        let (ai, yi) = cell_of(y, a);
        sums[ai][yi] += p;
        counts[ai][yi] += 1.0;
    }
    for a in 0..2 {
        for y in 0..2 {
            if counts[a][y] == 0.0 {
                return Err(Error::EmptyCell {
                    group: a as u8,
                    label: y as u8,
                });
            }
        }
    }

    let soft_tpr = [sums[0][1] / counts[0][1], sums[1][1] / counts[1][1]];
    let soft_fpr = [sums[0][0] / counts[0][0], sums[1][0] / counts[1][0]];
    let tpr_gap = soft_tpr[1] - soft_tpr[0];
    let fpr_gap = soft_fpr[1] - soft_fpr[0];
    let value = tpr_gap.abs() + fpr_gap.abs();

    let grad = if with_grad {
        let sign = |gap: f64| {
            if gap > 0.0 {
                1.0
            } else if gap < 0.0 {
                -1.0
            } else {
                0.0
            }
        };
        let tpr_sign = sign(tpr_gap);
        let fpr_sign = sign(fpr_gap);
        labels
            .iter()
            .zip(attrs)
            .map(|(&y, &a)| {
                let (ai, yi) = cell_of(y, a);
                let group_sign = if a { 1.0 } else { -1.0 };
                let gap_sign = if y { tpr_sign } else { fpr_sign };
                group_sign * gap_sign / counts[ai][yi]
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok((value, grad))
}

/// Activations of the frozen stack for every sample; the last layer sees
/// these as its inputs.
fn frozen_activations(frozen: &ModelWeights, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    data.samples
        .iter()
        .map(|s| {
            if s.features.len() != frozen.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: frozen.input_dim(),
                    got: s.features.len(),
                });
            }
            let mut activation = s.features.clone();
            for layer in &frozen.layers {
                activation = layer
                    .weights
                    .iter()
                    .zip(&layer.bias)
                    .map(|(row, b)| {
                        let z: f64 =
                            row.iter().zip(&activation).map(|(w, x)| w * x).sum::<f64>() + b;
                        z.max(0.0)
                    })
                    .collect();
            }
            Ok(activation)
        })
        .collect()
}

fn last_layer_probs(head: &Layer, hidden: &[Vec<f64>], indices: &[usize]) -> Vec<f64> {
    indices
        .iter()
        .map(|&i| {
            let z: f64 = head.weights[0]
                .iter()
                .zip(&hidden[i])
                .map(|(w, x)| w * x)
                .sum::<f64>()
                + head.bias[0];
            sigmoid(z)
        })
        .collect()
}

/// Composite fine-tuning loss on the full dataset:
/// `alpha_ft * mean BCE + fairness_surrogate`.
pub fn composite_loss(weights: &ModelWeights, data: &Dataset, alpha_ft: f64) -> Result<f64> {
    let (frozen, head) = split_frozen(weights)?;
    let hidden = frozen_activations(&frozen, data)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let probs = last_layer_probs(&head, &hidden, &all);
    let labels: Vec<bool> = data.samples.iter().map(|s| s.label).collect();
    let attrs: Vec<bool> = data.samples.iter().map(|s| s.sensitive).collect();
    let bce = crate::model::bce_loss(&probs, &labels);
    let surrogate = fairness_surrogate(&probs, &labels, &attrs)?;
    Ok(alpha_ft * bce + surrogate)
}

/// Runs R rounds of gradient descent on the composite loss, updating only
/// the last layer; the frozen layers of the result are byte-identical to the
/// input. Batches of `batch_size < n` use per-batch soft rates and require
/// every (attribute, label) cell present in each batch, so full batch is the
/// reliable default.
pub fn finetune_last_layer(
    weights: &ModelWeights,
    train: &Dataset,
    config: &FtConfig,
) -> Result<ModelWeights> {
    config.validate()?;
    let (frozen, mut head) = split_frozen(weights)?;
    if train.is_empty() {
        return Err(Error::EmptyInput);
    }
    let labels: Vec<bool> = train.samples.iter().map(|s| s.label).collect();
    let attrs: Vec<bool> = train.samples.iter().map(|s| s.sensitive).collect();
    // fail fast on unmeasurable cells before any work
    for a in 0..2 {
        for y in 0..2 {
            if !labels
                .iter()
                .zip(&attrs)
                .any(|(&yy, &aa)| yy as usize == y && aa as usize == a)
            {
                return Err(Error::EmptyCell {
                    group: a as u8,
                    label: y as u8,
                });
            }
        }
    }

    let hidden = frozen_activations(&frozen, train)?;
    let n = train.len();
    let full_batch = config.batch_size >= n;

    for round in 0..config.rounds {
        let order: Vec<usize> = if full_batch {
            (0..n).collect()
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            use rand::seq::SliceRandom;
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, 0x4654, round as u64));
            order.shuffle(&mut rng);
            order
        };

        for batch in order.chunks(config.batch_size.min(n)) {
            let probs = last_layer_probs(&head, &hidden, batch);
            let batch_labels: Vec<bool> = batch.iter().map(|&i| labels[i]).collect();
            let batch_attrs: Vec<bool> = batch.iter().map(|&i| attrs[i]).collect();
            let (_, surrogate_grad) =
                surrogate_with_grad(&probs, &batch_labels, &batch_attrs, true)?;

            let b = batch.len() as f64;
            let mut grad_w = vec![0.0f64; head.weights[0].len()];
            let mut grad_b = 0.0f64;
            for (pos, (&i, &p)) in batch.iter().zip(&probs).enumerate() {
                let y = if labels[i] { 1.0 } else { 0.0 };
                // d(alpha * BCE)/dz + d(surrogate)/dp * dp/dz
                let dz = config.alpha_ft * (p - y) / b + surrogate_grad[pos] * p * (1.0 - p);
                for (gw, x) in grad_w.iter_mut().zip(&hidden[i]) {
                    *gw += dz * x;
                }
                grad_b += dz;
            }
            for (w, g) in head.weights[0].iter_mut().zip(&grad_w) {
                *w -= config.eta * g;
            }
            head.bias[0] -= config.eta * grad_b;
        }
    }

    let mut layers = frozen.layers;
    layers.push(head);
    Ok(ModelWeights { layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, DatasetSource, Sample, SynthSpec};
    use crate::model::init_model;

    fn skewed_dataset(n: usize, seed: u64) -> Dataset {
        synth_generate(
            &SynthSpec {
                n,
                dim: 4,
                group_rates: [0.15, 0.35, 0.35, 0.15],
                separation: 2.0,
            },
            seed,
        )
        .unwrap()
    }

    fn ft_config(rounds: usize) -> FtConfig {
        FtConfig {
            alpha_ft: 1.0,
            eta: 5e-3,
            rounds,
            batch_size: usize::MAX,
            rng_seed: 0,
        }
    }

    #[test]
    fn split_frozen_shapes() {
        let two = init_model(&[4, 3, 1], 0).unwrap();
        let (frozen, trainable) = split_frozen(&two).unwrap();
        assert_eq!(frozen.layers.len(), 1);
        assert_eq!(frozen.layers[0], two.layers[0]);
        assert_eq!(trainable, two.layers[1]);

        let one = init_model(&[4, 1], 0).unwrap();
        assert!(matches!(split_frozen(&one), Err(Error::SingleLayerModel(1))));
    }

    // group1 positives predicted 1.0, group0 positives predicted 0.0,
    // negatives equal: soft TPR gap 1, soft FPR gap 0.
    #[test]
    fn surrogate_hand_computed() {
        let probs = vec![1.0, 1.0, 0.0, 0.3, 0.3];
        let labels = vec![true, true, true, false, false];
        let attrs = vec![true, true, false, true, false];
        let value = fairness_surrogate(&probs, &labels, &attrs).unwrap();
        assert!((value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn surrogate_zero_when_groups_match() {
        let probs = vec![0.8, 0.8, 0.2, 0.2];
        let labels = vec![true, true, false, false];
        let attrs = vec![true, false, true, false];
        assert_eq!(fairness_surrogate(&probs, &labels, &attrs).unwrap(), 0.0);
    }

    #[test]
    fn surrogate_empty_cell_is_an_error() {
        let probs = vec![0.5, 0.5];
        let labels = vec![true, false];
        let attrs = vec![true, true];
        assert!(matches!(
            fairness_surrogate(&probs, &labels, &attrs),
            Err(Error::EmptyCell { group: 0, .. })
        ));
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        let data = skewed_dataset(24, 5);
        let labels: Vec<bool> = data.samples.iter().map(|s| s.label).collect();
        let attrs: Vec<bool> = data.samples.iter().map(|s| s.sensitive).collect();
        let mut probs: Vec<f64> = (0..data.len())
            .map(|i| 0.1 + 0.8 * ((i * 7919 % 97) as f64 / 97.0))
            .collect();

        let (_, grad) = surrogate_with_grad(&probs, &labels, &attrs, true).unwrap();
        let h = 1e-5;
        for i in 0..probs.len() {
            let orig = probs[i];
            probs[i] = orig + h;
            let up = fairness_surrogate(&probs, &labels, &attrs).unwrap();
            probs[i] = orig - h;
            let down = fairness_surrogate(&probs, &labels, &attrs).unwrap();
            probs[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let tol = 1e-6 * grad[i].abs().max(fd.abs()).max(1.0);
            assert!(
                (grad[i] - fd).abs() <= tol,
                "coordinate {i}: analytic {} vs fd {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn zero_rounds_is_identity() {
        let data = skewed_dataset(32, 1);
        let m = init_model(&[4, 6, 1], 2).unwrap();
        assert_eq!(finetune_last_layer(&m, &data, &ft_config(0)).unwrap(), m);
    }

    #[test]
    fn frozen_layers_are_bit_identical() {
        let data = skewed_dataset(64, 3);
        let m = init_model(&[4, 6, 1], 4).unwrap();
        let tuned = finetune_last_layer(&m, &data, &ft_config(25)).unwrap();
        assert_eq!(tuned.layers[0], m.layers[0]);
        assert_ne!(tuned.layers[1], m.layers[1]);
    }

    #[test]
    fn pure_fairness_descent_reduces_surrogate() {
        let data = skewed_dataset(64, 7);
        let m = init_model(&[4, 6, 1], 8).unwrap();
        let config = FtConfig {
            alpha_ft: 0.0,
            eta: 1e-3,
            rounds: 1,
            batch_size: usize::MAX,
            rng_seed: 0,
        };
        let before = composite_loss(&m, &data, 0.0).unwrap();
        assert!(before > 0.0, "fixture should start unfair, got {before}");
        let tuned = finetune_last_layer(&m, &data, &config).unwrap();
        let after = composite_loss(&tuned, &data, 0.0).unwrap();
        assert!(after < before, "surrogate did not decrease: {before} -> {after}");
    }

    // With alpha_ft scaled to 1e9 and eta scaled down by 1e9, the step
    // reduces to a plain BCE step on the last layer to within 1e-6.
    #[test]
    fn huge_alpha_reduces_to_bce_descent() {
        let data = skewed_dataset(48, 9);
        let m = init_model(&[4, 5, 1], 10).unwrap();
        let eta = 0.05;
        let config = FtConfig {
            alpha_ft: 1e9,
            eta: eta / 1e9,
            rounds: 1,
            batch_size: usize::MAX,
            rng_seed: 0,
        };
        let tuned = finetune_last_layer(&m, &data, &config).unwrap();

        // hand-written full-batch BCE step on the last layer
        let (frozen, mut head) = split_frozen(&m).unwrap();
        let hidden = frozen_activations(&frozen, &data).unwrap();
        let all: Vec<usize> = (0..data.len()).collect();
        let probs = last_layer_probs(&head, &hidden, &all);
        let n = data.len() as f64;
        let mut grad_w = vec![0.0f64; head.weights[0].len()];
        let mut grad_b = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            let y = if data.samples[i].label { 1.0 } else { 0.0 };
            let dz = (p - y) / n;
            for (gw, x) in grad_w.iter_mut().zip(&hidden[i]) {
                *gw += dz * x;
            }
            grad_b += dz;
        }
        for (w, g) in head.weights[0].iter_mut().zip(&grad_w) {
            *w -= eta * g;
        }
        head.bias[0] -= eta * grad_b;

        let tuned_head = tuned.layers.last().unwrap();
        for (a, b) in tuned_head.weights[0].iter().zip(&head.weights[0]) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!((tuned_head.bias[0] - head.bias[0]).abs() < 1e-6);
    }

    #[test]
    fn composite_gradient_matches_finite_differences() {
        let data = skewed_dataset(20, 11);
        let m = init_model(&[4, 5, 1], 12).unwrap();
        let alpha_ft = 1.7;

        // analytic gradient of the composite loss wrt last-layer parameters:
        // reproduce one descent step with tiny eta and recover the gradient.
        let eta = 1e-9;
        let config = FtConfig {
            alpha_ft,
            eta,
            rounds: 1,
            batch_size: usize::MAX,
            rng_seed: 0,
        };
        let stepped = finetune_last_layer(&m, &data, &config).unwrap();
        let head = m.layers.last().unwrap();
        let stepped_head = stepped.layers.last().unwrap();
        let dim = head.weights[0].len();

        let h = 1e-5;
        let mut probe = m.clone();
        for c in 0..=dim {
            let read_grad = if c < dim {
                (head.weights[0][c] - stepped_head.weights[0][c]) / eta
            } else {
                (head.bias[0] - stepped_head.bias[0]) / eta
            };
            let write = |m: &mut ModelWeights, v: f64| {
                let l = m.layers.len() - 1;
                if c < dim {
                    m.layers[l].weights[0][c] = v;
                } else {
                    m.layers[l].bias[0] = v;
                }
            };
            let orig = if c < dim { head.weights[0][c] } else { head.bias[0] };
            write(&mut probe, orig + h);
            let up = composite_loss(&probe, &data, alpha_ft).unwrap();
            write(&mut probe, orig - h);
            let down = composite_loss(&probe, &data, alpha_ft).unwrap();
            write(&mut probe, orig);
            let fd = (up - down) / (2.0 * h);
            let tol = 1e-6 * read_grad.abs().max(fd.abs()).max(1.0);
            assert!(
                (read_grad - fd).abs() <= tol,
                "coordinate {c}: analytic {read_grad} vs fd {fd}"
            );
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let data = synth_generate(
            &SynthSpec {
                n: 80,
                dim: 4,
                group_rates: [0.25; 4],
                separation: 2.0,
            },
            13,
        )
        .unwrap();
        let m = init_model(&[4, 6, 1], 14).unwrap();
        let config = FtConfig {
            batch_size: 40,
            rounds: 5,
            ..ft_config(5)
        };
        let a = finetune_last_layer(&m, &data, &config).unwrap();
        let b = finetune_last_layer(&m, &data, &config).unwrap();
        assert_eq!(a, b);
        let c = finetune_last_layer(
            &m,
            &data,
            &FtConfig {
                rng_seed: 99,
                ..config
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn published_defaults() {
        let compas = FtConfig::compas_defaults(0);
        assert_eq!(compas.eta, 5e-3);
        assert_eq!(compas.batch_size, 256);
        assert_eq!(compas.alpha_ft, 2.0);
        let adult = FtConfig::adult_defaults(0);
        assert_eq!(adult.eta, 5e-3);
        assert_eq!(adult.batch_size, 256);
        assert_eq!(adult.alpha_ft, 1.0);
    }

    #[test]
    fn rejects_unmeasurable_training_sets() {
        let samples: Vec<Sample> = (0..8)
            .map(|i| Sample {
                features: vec![i as f64, 1.0],
                label: i % 2 == 0,
                sensitive: true,
            })
            .collect();
        let data = Dataset::new(
            samples,
            vec!["f0".into(), "f1".into()],
            DatasetSource::Synthetic,
        )
        .unwrap();
        let m = init_model(&[2, 3, 1], 0).unwrap();
        assert!(matches!(
            finetune_last_layer(&m, &data, &ft_config(1)),
            Err(Error::EmptyCell { group: 0, .. })
        ));
    }
}
