//! The frame-level countermeasure: a small 1-D SE-ResNet.
//!
//! Architecture, in order: a front 1-D convolution with ReLU whose output
//! is the explanation target layer; one residual block (conv, ReLU, conv,
//! squeeze-excitation channel scaling, skip add, ReLU); global average
//! pooling over time; and a dense head producing two logits, class 0 for
//! bona fide and class 1 for spoofed.
//!
//! Time resolution is preserved through every layer until the pooling at
//! the end: all convolutions are stride 1 with length-preserving padding,
//! so the target layer keeps one activation column per 20 ms input frame.
//! That is what lets explanation maps be read at native frame resolution
//! with no interpolation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Graph, TensorId};
use crate::features::FeatureMap;
use crate::seeds;
use rand::Rng;

/// Output index of the bona fide logit.
pub const BONAFIDE_CLASS: usize = 0;

/// Output index of the spoof logit.
pub const SPOOF_CLASS: usize = 1;

/// Checkpoint format version this build reads and writes.
pub const CHECKPOINT_VERSION: u32 = 1;

/// Errors from model construction, inference, and checkpointing.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("kernel size {0} must be odd and at least 1")]
    BadKernel(usize),
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: usize },
    #[error("hidden_channels {hidden} must be divisible by se_reduction {reduction}")]
    BadReduction { hidden: usize, reduction: usize },
    #[error("model expects {expected} input channels, features have {actual}")]
    InputChannels { expected: usize, actual: usize },
    #[error("input length {values} does not match {channels} channels x {frames} frames")]
    InputLength {
        values: usize,
        channels: usize,
        frames: usize,
    },
    #[error("checkpoint i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint is not valid json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint format version {found} is not supported (expected {CHECKPOINT_VERSION})")]
    FormatVersion { found: u32 },
    #[error("checkpoint is missing parameter {0:?}")]
    MissingParam(String),
    #[error("checkpoint parameter {name:?} has {actual} values, expected {expected}")]
    ParamLength {
        name: String,
        expected: usize,
        actual: usize,
    },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Model hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Input channels; must equal the feature band count at inference.
    pub in_channels: usize,
    /// Channel width of the front convolution and the residual block.
    pub hidden_channels: usize,
    /// Convolution kernel size, odd.
    pub kernel_size: usize,
    /// Squeeze-excitation bottleneck divisor.
    pub se_reduction: usize,
    /// Output classes; 0 is bona fide, 1 is spoofed.
    pub classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: crate::features::NUM_FILTERS,
            hidden_channels: 32,
            kernel_size: 3,
            se_reduction: 4,
            classes: 2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, value) in [
            ("in_channels", self.in_channels),
            ("hidden_channels", self.hidden_channels),
            ("se_reduction", self.se_reduction),
            ("classes", self.classes),
        ] {
            if value == 0 {
                return Err(ModelError::NonPositive { field, value });
            }
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(ModelError::BadKernel(self.kernel_size));
        }
        if self.hidden_channels % self.se_reduction != 0 {
            return Err(ModelError::BadReduction {
                hidden: self.hidden_channels,
                reduction: self.se_reduction,
            });
        }
        Ok(())
    }

    /// Parameter names and shapes in canonical order.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let h = self.hidden_channels;
        let r = h / self.se_reduction;
        vec![
            ("front_w", vec![h, self.in_channels, self.kernel_size]),
            ("front_b", vec![h]),
            ("conv1_w", vec![h, h, self.kernel_size]),
            ("conv1_b", vec![h]),
            ("conv2_w", vec![h, h, self.kernel_size]),
            ("conv2_b", vec![h]),
            ("se_w1", vec![r, h]),
            ("se_w2", vec![h, r]),
            ("head_w", vec![self.classes, h]),
            ("head_b", vec![self.classes]),
        ]
    }
}

/// Handles returned by a forward pass.
pub struct ForwardPass {
    /// Raw class logits, shape `[classes]`.
    pub logits: TensorId,
    /// Output of the front convolution's ReLU, shape
    /// `[hidden_channels, frames]`: the explanation target layer.
    pub target_activations: TensorId,
    /// Parameter tensors in [`ModelConfig::param_shapes`] order; useful for
    /// reading gradients after a backward pass.
    pub params: Vec<(&'static str, TensorId)>,
}

/// Model parameters plus the config that shapes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub config: ModelConfig,
    /// Optimizer steps applied so far; informational.
    pub step: u64,
    params: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    config: ModelConfig,
    step: u64,
    params: BTreeMap<String, Vec<f64>>,
}

impl ModelState {
    /// Fresh parameters: weights uniform in `+-sqrt(1 / fan_in)`, biases
    /// zero.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = seeds::stream(seed, "model-init");
        let mut params = BTreeMap::new();
        for (name, shape) in config.param_shapes() {
            let n: usize = shape.iter().product();
            let values = if name.ends_with("_b") {
                vec![0.0; n]
            } else {
                // fan_in is everything but the leading output dimension.
                let fan_in: usize = shape[1..].iter().product();
                let limit = (1.0 / fan_in as f64).sqrt();
                (0..n).map(|_| rng.random_range(-limit..limit)).collect()
            };
            params.insert(name.to_string(), values);
        }
        Ok(Self {
            config,
            step: 0,
            params,
        })
    }

    pub fn param(&self, name: &str) -> &[f64] {
        &self.params[name]
    }

    pub fn param_mut(&mut self, name: &str) -> &mut Vec<f64> {
        self.params.get_mut(name).expect("known parameter name")
    }

    /// Builds the network on `graph` over a channels-major input of
    /// `frames` columns. With `trainable` the parameters are inserted as
    /// gradient-requiring leaves.
    pub fn forward_values(
        &self,
        graph: &mut Graph,
        input: &[f64],
        frames: usize,
        trainable: bool,
    ) -> Result<ForwardPass, ModelError> {
        let c_in = self.config.in_channels;
        if input.len() != c_in * frames || frames == 0 {
            return Err(ModelError::InputLength {
                values: input.len(),
                channels: c_in,
                frames,
            });
        }
        let x = graph.constant(&[c_in, frames], input.to_vec())?;
        let mut params = Vec::new();
        for (name, shape) in self.config.param_shapes() {
            let id = graph.leaf(&shape, self.params[name].clone(), trainable)?;
            params.push((name, id));
        }
        let by_name = |name: &str| -> TensorId {
            params
                .iter()
                .find(|(n, _)| *n == name)
                .expect("declared parameter")
                .1
        };

        let front = graph.conv1d(x, by_name("front_w"), Some(by_name("front_b")))?;
        let target_activations = graph.relu(front)?;

        let c1 = graph.conv1d(target_activations, by_name("conv1_w"), Some(by_name("conv1_b")))?;
        let a1 = graph.relu(c1)?;
        let c2 = graph.conv1d(a1, by_name("conv2_w"), Some(by_name("conv2_b")))?;
        let scaled = se_block(graph, c2, by_name("se_w1"), by_name("se_w2"))?;
        let skip = graph.add(scaled, target_activations)?;
        let post = graph.relu(skip)?;

        let pooled = graph.global_avg_pool_time(post)?;
        let projected = graph.matmul(by_name("head_w"), pooled)?;
        let logits = graph.add(projected, by_name("head_b"))?;
        Ok(ForwardPass {
            logits,
            target_activations,
            params,
        })
    }

    /// [`ModelState::forward_values`] over an extracted feature map.
    pub fn forward(
        &self,
        graph: &mut Graph,
        features: &FeatureMap,
        trainable: bool,
    ) -> Result<ForwardPass, ModelError> {
        if features.num_filters() != self.config.in_channels {
            return Err(ModelError::InputChannels {
                expected: self.config.in_channels,
                actual: features.num_filters(),
            });
        }
        self.forward_values(
            graph,
            &features.to_channels_major(),
            features.num_frames(),
            trainable,
        )
    }

    /// Class probabilities for one utterance.
    pub fn predict(&self, features: &FeatureMap) -> Result<Vec<f64>, ModelError> {
        let mut graph = Graph::new();
        let pass = self.forward(&mut graph, features, false)?;
        Ok(predict_scores(graph.values(pass.logits)))
    }

    /// Writes a versioned JSON checkpoint. Values roundtrip exactly.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let file = CheckpointFile {
            format_version: CHECKPOINT_VERSION,
            config: self.config,
            step: self.step,
            params: self.params.clone(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Reads a checkpoint, validating version and parameter shapes.
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let file: CheckpointFile = serde_json::from_str(&text)?;
        if file.format_version != CHECKPOINT_VERSION {
            return Err(ModelError::FormatVersion {
                found: file.format_version,
            });
        }
        file.config.validate()?;
        for (name, shape) in file.config.param_shapes() {
            let expected: usize = shape.iter().product();
            let actual = file
                .params
                .get(name)
                .ok_or_else(|| ModelError::MissingParam(name.to_string()))?
                .len();
            if actual != expected {
                return Err(ModelError::ParamLength {
                    name: name.to_string(),
                    expected,
                    actual,
                });
            }
        }
        Ok(Self {
            config: file.config,
            step: file.step,
            params: file.params,
        })
    }
}

/// Squeeze-excitation gate: per-channel scales from the time-pooled input
/// through a bottleneck, `sigmoid(w2 . relu(w1 . mean_t(x)))`, applied back
/// onto every channel. Neither projection has a bias.
pub fn se_block(
    graph: &mut Graph,
    x: TensorId,
    w1: TensorId,
    w2: TensorId,
) -> Result<TensorId, AutodiffError> {
    let pooled = graph.mean_over_time(x)?;
    let squeezed = graph.matmul(w1, pooled)?;
    let hidden = graph.relu(squeezed)?;
    let expanded = graph.matmul(w2, hidden)?;
    let gates = graph.sigmoid(expanded)?;
    graph.channel_scale(x, gates)
}

/// Stable softmax over raw logits.
pub fn predict_scores(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}
