//! Frame-resolution Grad-CAM for the countermeasure model.
//!
//! The explanation target is the front convolution's ReLU output, which
//! keeps one activation column per 20 ms frame. For a chosen output class
//! the map is built from the raw logit, never the softmax or a loss:
//!
//! 1. forward pass, keeping the target activations `R[c, t]`;
//! 2. backward pass from the selected logit, giving `g[c, t]`, the
//!    gradient of that logit with respect to `R`;
//! 3. per-frame score `S[t] = relu(sum_c R[c, t] * g[c, t])`.
//!
//! Scores stay at native frame resolution: no smoothing, no interpolation,
//! one non-negative value per frame.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Graph};
use crate::features::FeatureMap;
use crate::model::{ModelError, ModelState, BONAFIDE_CLASS, SPOOF_CLASS};

/// Errors from map computation.
#[derive(Debug, Error)]
pub enum GradCamError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("activations and gradients disagree: {activations} vs {gradients} values")]
    PartsMismatch { activations: usize, gradients: usize },
    #[error("{values} values do not factor into {channels} channels of equal length")]
    BadPartsShape { values: usize, channels: usize },
}

/// Output class a map explains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TargetClass {
    #[serde(rename = "bonafide")]
    Bonafide,
    #[serde(rename = "spoof")]
    Spoof,
}

impl TargetClass {
    pub fn logit_index(self) -> usize {
        match self {
            TargetClass::Bonafide => BONAFIDE_CLASS,
            TargetClass::Spoof => SPOOF_CLASS,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TargetClass::Bonafide => "bonafide",
            TargetClass::Spoof => "spoof",
        }
    }
}

impl std::fmt::Display for TargetClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One utterance's frame scores for one target class.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCamMap {
    pub utterance_id: String,
    pub target_class: TargetClass,
    /// One non-negative score per 20 ms frame.
    pub scores: Vec<f64>,
}

impl GradCamMap {
    pub fn num_frames(&self) -> usize {
        self.scores.len()
    }
}

/// Combines captured activations and gradients into frame scores:
/// `relu` of the channel-wise weighted sum at each frame. Both slices are
/// channels-major `[channels, frames]`.
pub fn cam_from_parts(
    activations: &[f64],
    gradients: &[f64],
    channels: usize,
) -> Result<Vec<f64>, GradCamError> {
    if activations.len() != gradients.len() {
        return Err(GradCamError::PartsMismatch {
            activations: activations.len(),
            gradients: gradients.len(),
        });
    }
    if channels == 0 || activations.len() % channels != 0 {
        return Err(GradCamError::BadPartsShape {
            values: activations.len(),
            channels,
        });
    }
    let frames = activations.len() / channels;
    let mut scores = vec![0.0; frames];
    for c in 0..channels {
        let arow = &activations[c * frames..(c + 1) * frames];
        let grow = &gradients[c * frames..(c + 1) * frames];
        for t in 0..frames {
            scores[t] += arow[t] * grow[t];
        }
    }
    for s in &mut scores {
        *s = s.max(0.0);
    }
    Ok(scores)
}

/// Computes the map for one utterance and one target class.
pub fn gradcam(
    model: &ModelState,
    features: &FeatureMap,
    utterance_id: &str,
    target_class: TargetClass,
) -> Result<GradCamMap, GradCamError> {
    let mut graph = Graph::new();
    let pass = model.forward(&mut graph, features, false)?;
    let root = graph.pick(pass.logits, target_class.logit_index())?;
    graph.backward(root)?;
    let channels = model.config.hidden_channels;
    let scores = cam_from_parts(
        graph.values(pass.target_activations),
        graph.grad(pass.target_activations),
        channels,
    )?;
    Ok(GradCamMap {
        utterance_id: utterance_id.to_string(),
        target_class,
        scores,
    })
}

/// Computes maps for both classes from a single forward pass, one backward
/// pass per class with gradients cleared in between.
pub fn gradcam_both(
    model: &ModelState,
    features: &FeatureMap,
    utterance_id: &str,
) -> Result<[GradCamMap; 2], GradCamError> {
    let mut graph = Graph::new();
    let pass = model.forward(&mut graph, features, false)?;
    let channels = model.config.hidden_channels;
    let activations = graph.values(pass.target_activations).to_vec();

    let mut maps = Vec::with_capacity(2);
    for target_class in [TargetClass::Bonafide, TargetClass::Spoof] {
        let root = graph.pick(pass.logits, target_class.logit_index())?;
        graph.zero_grads();
        graph.backward(root)?;
        let scores = cam_from_parts(
            &activations,
            graph.grad(pass.target_activations),
            channels,
        )?;
        maps.push(GradCamMap {
            utterance_id: utterance_id.to_string(),
            target_class,
            scores,
        });
    }
    let spoof = maps.pop().expect("two maps");
    let bona = maps.pop().expect("two maps");
    Ok([bona, spoof])
}
