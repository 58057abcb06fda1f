//! The feedforward network `mu -> lambda`: Leaky ReLU hidden layers and a
//! sigmoid output, reverse-mode gradients, and the JSON model file.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Slope of the Leaky ReLU for negative pre-activations.
pub const DEFAULT_NEGATIVE_SLOPE: f64 = 0.01;
/// Version tag written into model files.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// One affine layer `y = W x + b`, `W` stored row-major (`n_out x n_in`).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, weights: vec![0.0; n_in * n_out], biases: vec![0.0; n_out] }
    }

    fn parameter_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn apply(&self, input: &[f64], output: &mut Vec<f64>) {
        output.clear();
        for (row, &b) in self.weights.chunks_exact(self.n_in).zip(&self.biases) {
            output.push(row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b);
        }
    }
}

/// Fully connected network `[1, n_H, ..., n_H, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub negative_slope: f64,
}

/// Pre-activations and activations of one forward pass, kept for [`Network::backprop`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `activations[0]` is the input; `activations[l]` is the output of layer `l`.
    activations: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// The network output `lambda`.
    pub fn output(&self) -> f64 {
        self.activations.last().map_or(f64::NAN, |a| a[0])
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Network {
    /// All-zero network with the given layer sizes (first and last must be 1).
    pub fn zeros(layer_sizes: &[usize], negative_slope: f64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let layers = layer_sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Ok(Self { layers, negative_slope })
    }

    /// `hidden_layers` Leaky ReLU layers of `width` neurons each.
    pub fn with_shape(hidden_layers: usize, width: usize) -> Result<Self> {
        let mut sizes = vec![1];
        sizes.extend(std::iter::repeat(width).take(hidden_layers));
        sizes.push(1);
        Self::zeros(&sizes, DEFAULT_NEGATIVE_SLOPE)
    }

    /// Weights and biases uniform in `+-sqrt(1 / fan_in)` per layer.
    pub fn random<R: Rng>(layer_sizes: &[usize], negative_slope: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, negative_slope)?;
        for layer in &mut net.layers {
            let bound = (1.0 / layer.n_in as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers.first().map_or(0, |l| l.n_in)];
        sizes.extend(self.layers.iter().map(|l| l.n_out));
        sizes
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    /// Flat parameter vector: per layer, the row-major weights then the biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Structural(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    fn check_shapes(&self) -> Result<()> {
        check_sizes(&self.layer_sizes())?;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.weights.len() != layer.n_in * layer.n_out || layer.biases.len() != layer.n_out {
                return Err(Error::Structural(format!("layer {i} has inconsistent weight or bias lengths")));
            }
            if i > 0 && self.layers[i - 1].n_out != layer.n_in {
                return Err(Error::Structural(format!("layer {i} input size does not match layer {}", i - 1)));
            }
        }
        Ok(())
    }

    fn leaky(&self, z: f64) -> f64 {
        if z > 0.0 {
            z
        } else {
            self.negative_slope * z
        }
    }

    /// Forward pass keeping every intermediate value.
    pub fn forward_trace(&self, mu: f64) -> Result<ForwardTrace> {
        self.check_shapes()?;
        let last = self.layers.len() - 1;
        let mut activations = vec![vec![mu]];
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut z = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply(&activations[l], &mut z);
            let y = if l == last {
                z.iter().map(|&v| sigmoid(v)).collect()
            } else {
                z.iter().map(|&v| self.leaky(v)).collect()
            };
            pre_activations.push(z.clone());
            activations.push(y);
        }
        Ok(ForwardTrace { activations, pre_activations })
    }

    /// `lambda = sigmoid(W_{L+1} f(... f(W_1 mu + b_1) ...) + b_{L+1})`.
    pub fn forward(&self, mu: f64) -> Result<f64> {
        Ok(self.forward_trace(mu)?.output())
    }

    /// Gradient of `upstream * lambda` with respect to the flat parameter
    /// vector of [`Network::parameters`].
    pub fn backprop(&self, trace: &ForwardTrace, upstream: f64) -> Vec<f64> {
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        let out = trace.output();
        // delta = dLoss / d(pre-activation) of the current layer.
        let mut delta = vec![upstream * out * (1.0 - out)];
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let input = &trace.activations[l];
            let mut g = Vec::with_capacity(layer.parameter_count());
            for &d in &delta {
                g.extend(input.iter().map(|x| d * x));
            }
            g.extend_from_slice(&delta);
            grads.push(g);
            if l > 0 {
                let z = &trace.pre_activations[l - 1];
                delta = (0..layer.n_in)
                    .map(|i| {
                        let back: f64 =
                            delta.iter().enumerate().map(|(o, d)| d * layer.weights[o * layer.n_in + i]).sum();
                        let slope = if z[i] > 0.0 { 1.0 } else { self.negative_slope };
                        back * slope
                    })
                    .collect();
            }
        }
        grads.reverse();
        grads.concat()
    }

    /// Write the network and its training metadata as a JSON model file.
    pub fn save(&self, path: &Path, metadata: &ModelMetadata) -> Result<()> {
        let file = ModelFile::from_network(self, metadata.clone());
        let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Read a model file written by [`Network::save`].
    pub fn load(path: &Path) -> Result<(Self, ModelMetadata)> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        file.into_network()
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes[0] != 1 || sizes[sizes.len() - 1] != 1 || sizes.contains(&0) {
        return Err(Error::Structural(format!(
            "layer sizes must start and end with 1 and contain no zeros, got {sizes:?}"
        )));
    }
    Ok(())
}

/// Training provenance stored alongside the weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub restarts: usize,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
}

/// On-disk layout of a model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub layer_sizes: Vec<usize>,
    pub negative_slope: f64,
    /// Per layer, `n_out` rows of `n_in` weights.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub metadata: ModelMetadata,
}

impl ModelFile {
    pub fn from_network(net: &Network, metadata: ModelMetadata) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            layer_sizes: net.layer_sizes(),
            negative_slope: net.negative_slope,
            weights: net.layers.iter().map(|l| l.weights.chunks(l.n_in).map(<[f64]>::to_vec).collect()).collect(),
            biases: net.layers.iter().map(|l| l.biases.clone()).collect(),
            metadata,
        }
    }

    pub fn into_network(self) -> Result<(Network, ModelMetadata)> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported model schema version {} (expected {MODEL_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut net = Network::zeros(&self.layer_sizes, self.negative_slope)?;
        if self.weights.len() != net.layers.len() || self.biases.len() != net.layers.len() {
            return Err(Error::Structural(format!(
                "model declares {} layers but stores {} weight and {} bias blocks",
                net.layers.len(),
                self.weights.len(),
                self.biases.len()
            )));
        }
        for (i, (layer, (w, b))) in net.layers.iter_mut().zip(self.weights.iter().zip(&self.biases)).enumerate() {
            if w.len() != layer.n_out || w.iter().any(|row| row.len() != layer.n_in) || b.len() != layer.n_out {
                return Err(Error::Structural(format!(
                    "layer {i} should be {}x{} with {} biases",
                    layer.n_out, layer.n_in, layer.n_out
                )));
            }
            layer.weights = w.concat();
            layer.biases = b.clone();
        }
        if net.parameters().iter().any(|p| !p.is_finite()) || !net.negative_slope.is_finite() {
            return Err(Error::Format("model contains non-finite parameters".into()));
        }
        Ok((net, self.metadata))
    }
}
