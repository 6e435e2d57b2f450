//! Feed-forward binary classifier with manual backpropagation.
//!
//! The model is a stack of dense layers with ReLU on hidden layers and a
//! sigmoid output, trained by mini-batch SGD on mean binary cross-entropy.
//! One layer gives the logistic regression used for tabular runs; deeper
//! stacks feed the fine-tuning path.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// One dense layer: `weights[out][in]` plus a bias per output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn output_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

/// An immutable snapshot of model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub layers: Vec<Layer>,
}

impl ModelWeights {
    /// Layer dimensions as `[input, hidden.., 1]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].input_dim()];
        dims.extend(self.layers.iter().map(Layer::output_dim));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Serializes to the flat checkpoint document: layer dims plus row-major
    /// coefficient arrays.
    pub fn to_json(&self) -> String {
        let wire = WireModel {
            dims: self.dims(),
            layers: self
                .layers
                .iter()
                .map(|l| WireLayer {
                    weights: l.weights.iter().flatten().copied().collect(),
                    bias: l.bias.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&wire).expect("model serializes")
    }

    /// Parses a checkpoint produced by [`ModelWeights::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        let wire: WireModel = serde_json::from_str(text)?;
        if wire.dims.len() < 2 || wire.dims.len() != wire.layers.len() + 1 {
            return Err(Error::InvalidLayerDims(wire.dims));
        }
        let mut layers = Vec::with_capacity(wire.layers.len());
        for (l, wl) in wire.layers.into_iter().enumerate() {
            let (input, output) = (wire.dims[l], wire.dims[l + 1]);
            if wl.weights.len() != input * output || wl.bias.len() != output {
                return Err(Error::DimensionMismatch {
                    expected: input * output,
                    got: wl.weights.len(),
                });
            }
            let weights = wl.weights.chunks(input).map(<[f64]>::to_vec).collect();
            layers.push(Layer {
                weights,
                bias: wl.bias,
            });
        }
        Ok(ModelWeights { layers })
    }
}

#[derive(Serialize, Deserialize)]
struct WireModel {
    dims: Vec<usize>,
    layers: Vec<WireLayer>,
}

#[derive(Serialize, Deserialize)]
struct WireLayer {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Per-client local training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub local_epochs: usize,
    pub rng_seed: u64,
}

/// Initializes weights and biases uniformly in `±1/sqrt(fan_in)`.
///
/// `layer_dims` is `[input, hidden.., output]` with output 1. Deterministic
/// given `rng_seed`.
pub fn init_model(layer_dims: &[usize], rng_seed: u64) -> Result<ModelWeights> {
    if layer_dims.len() < 2 || *layer_dims.last().unwrap() != 1 || layer_dims.contains(&0) {
        return Err(Error::InvalidLayerDims(layer_dims.to_vec()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let layers = layer_dims
        .windows(2)
        .map(|pair| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..fan_out)
                .map(|_| (0..fan_in).map(|_| rng.random_range(-bound..bound)).collect())
                .collect();
            let bias = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            Layer { weights, bias }
        })
        .collect();
    Ok(ModelWeights { layers })
}

/// Numerically stable sigmoid, clamped strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// Mean binary cross-entropy of predicted probabilities against labels.
pub fn bce_loss(probabilities: &[f64], labels: &[bool]) -> f64 {
    let n = probabilities.len() as f64;
    probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| if y { -p.ln() } else { -(1.0 - p).ln() })
        .sum::<f64>()
        / n
}

struct ForwardTrace {
    /// Activations per layer, `activations[0]` is the input.
    activations: Vec<Vec<f64>>,
    /// Pre-activations per layer.
    pre_activations: Vec<Vec<f64>>,
}

fn forward_trace(weights: &ModelWeights, features: &[f64]) -> Result<ForwardTrace> {
    if features.len() != weights.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: weights.input_dim(),
            got: features.len(),
        });
    }
    let depth = weights.num_layers();
    let mut activations = Vec::with_capacity(depth + 1);
    let mut pre_activations = Vec::with_capacity(depth);
    activations.push(features.to_vec());
    for (l, layer) in weights.layers.iter().enumerate() {
        let input = &activations[l];
        let z: Vec<f64> = layer
            .weights
            .iter()
            .zip(&layer.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect();
        let a = if l + 1 == depth {
            vec![sigmoid(z[0])]
        } else {
            z.iter().map(|&v| v.max(0.0)).collect()
        };
        pre_activations.push(z);
        activations.push(a);
    }
    Ok(ForwardTrace {
        activations,
        pre_activations,
    })
}

/// Predicted probability of the positive class; strictly inside (0, 1).
pub fn forward(weights: &ModelWeights, features: &[f64]) -> Result<f64> {
    Ok(forward_trace(weights, features)?.activations.last().unwrap()[0])
}

/// Gradient of model parameters, shaped like the model.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    fn zeros_like(weights: &ModelWeights) -> Self {
        let layers = weights
            .layers
            .iter()
            .map(|l| Layer {
                weights: vec![vec![0.0; l.input_dim()]; l.output_dim()],
                bias: vec![0.0; l.output_dim()],
            })
            .collect();
        Gradient { layers }
    }
}

/// Mean BCE loss and its gradient over the samples at `indices`, computed by
/// backpropagation through ReLU and the sigmoid output.
pub fn loss_and_gradient(
    weights: &ModelWeights,
    data: &Dataset,
    indices: &[usize],
) -> Result<(f64, Gradient)> {
    let batch = indices.len() as f64;
    let mut grad = Gradient::zeros_like(weights);
    let mut loss = 0.0;
    let depth = weights.num_layers();

    for &i in indices {
        let sample = &data.samples[i];
        let trace = forward_trace(weights, &sample.features)?;
        let p = trace.activations[depth][0];
        let y = if sample.label { 1.0 } else { 0.0 };
        loss += if sample.label { -p.ln() } else { -(1.0 - p).ln() };

        // dL/dz for the sigmoid output under BCE is (p - y).
        let mut delta = vec![(p - y) / batch];
        for l in (0..depth).rev() {
            let layer = &weights.layers[l];
            let input = &trace.activations[l];
            {
                let g = &mut grad.layers[l];
                for (out, &d) in delta.iter().enumerate() {
                    g.bias[out] += d;
                    for (inp, &x) in input.iter().enumerate() {
                        g.weights[out][inp] += d * x;
                    }
                }
            }
            if l > 0 {
                let prev_z = &trace.pre_activations[l - 1];
                delta = (0..layer.input_dim())
                    .map(|inp| {
                        if prev_z[inp] > 0.0 {
                            delta
                                .iter()
                                .enumerate()
                                .map(|(out, &d)| d * layer.weights[out][inp])
                                .sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }

    Ok((loss / batch, grad))
}

/// One pass of mini-batch SGD on mean BCE. Batches come from a seeded
/// shuffle of the training set; the trailing partial batch is kept.
pub fn sgd_epoch(weights: &ModelWeights, train: &Dataset, config: &TrainConfig) -> Result<ModelWeights> {
    if train.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut updated = weights.clone();
    if config.learning_rate == 0.0 || config.batch_size == 0 {
        if config.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        return Ok(updated);
    }

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);

    for batch in order.chunks(config.batch_size) {
        let (_, grad) = loss_and_gradient(&updated, train, batch)?;
        for (layer, g) in updated.layers.iter_mut().zip(&grad.layers) {
            for (row, grow) in layer.weights.iter_mut().zip(&g.weights) {
                for (w, gw) in row.iter_mut().zip(grow) {
                    *w -= config.learning_rate * gw;
                }
            }
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= config.learning_rate * gb;
            }
        }
    }
    Ok(updated)
}

/// Hard labels: 1 iff the predicted probability is >= `threshold`.
pub fn predict_labels(weights: &ModelWeights, data: &Dataset, threshold: f64) -> Result<Vec<bool>> {
    data.samples
        .iter()
        .map(|s| Ok(forward(weights, &s.features)? >= threshold))
        .collect()
}
