//! Utterance-level equal error rate and threshold classification.
//!
//! Scores are spoof probabilities: higher means more likely spoofed. A
//! trial is accused at threshold `t` when its score is at least `t`, so
//! the false positive rate is the fraction of bona fide trials with
//! `score >= t` and the false negative rate the fraction of spoofed trials
//! with `score < t`.
//!
//! [`eer`] sweeps candidate thresholds (every midpoint between consecutive
//! distinct scores, plus sentinels below the minimum and above the
//! maximum), finds where the difference `fnr - fpr` changes sign, and
//! linearly interpolates both the rate and the threshold inside that
//! interval. The difference is nondecreasing in the threshold, so the
//! crossing is unique up to plateaus; ties resolve toward the lower
//! threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from scoring.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need both classes: {bonafide} bona fide and {spoofed} spoofed trials")]
    MissingClass { bonafide: usize, spoofed: usize },
    #[error("trial {index} ({utterance_id:?}) has non-finite score")]
    BadScore { index: usize, utterance_id: String },
}

/// Utterance-level ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruth {
    Bonafide,
    Spoofed,
}

/// One scored trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrial {
    pub utterance_id: String,
    pub score: f64,
    pub ground_truth: GroundTruth,
}

/// Equal error rate and the threshold achieving it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult {
    /// Rate at the crossing, in percent.
    pub eer_percent: f64,
    /// Interpolated decision threshold at the crossing.
    pub threshold: f64,
}

/// Computes the equal error rate over a set of trials.
///
/// Requires at least one trial of each class and finite scores. When all
/// scores are identical the rates never cross strictly and the result is
/// 50% by the interpolation convention; perfectly separated classes give
/// 0%.
pub fn eer(trials: &[ScoredTrial]) -> Result<EerResult, EvalError> {
    let bonafide = trials
        .iter()
        .filter(|t| t.ground_truth == GroundTruth::Bonafide)
        .count();
    let spoofed = trials.len() - bonafide;
    if bonafide == 0 || spoofed == 0 {
        return Err(EvalError::MissingClass { bonafide, spoofed });
    }
    for (index, t) in trials.iter().enumerate() {
        if !t.score.is_finite() {
            return Err(EvalError::BadScore {
                index,
                utterance_id: t.utterance_id.clone(),
            });
        }
    }

    // Candidate thresholds in ascending order: the minimum score (accuse
    // everything), midpoints between consecutive distinct scores, and one
    // past the maximum (accuse nothing).
    let mut scores: Vec<f64> = trials.iter().map(|t| t.score).collect();
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    scores.dedup();
    let mut candidates = Vec::with_capacity(scores.len() + 1);
    candidates.push(scores[0]);
    for pair in scores.windows(2) {
        candidates.push(pair[0] + (pair[1] - pair[0]) / 2.0);
    }
    candidates.push(scores[scores.len() - 1] + 1.0);

    let operating_points: Vec<(f64, f64, f64)> = candidates
        .iter()
        .map(|&threshold| {
            let (fpr, fnr) = rates_at(trials, threshold, bonafide, spoofed);
            (threshold, fpr, fnr)
        })
        .collect();

    // First interval where fnr - fpr reaches zero. The difference starts
    // at -1 (threshold at the minimum) and ends at +1 (past the maximum).
    for window in operating_points.windows(2) {
        let (t0, fpr0, fnr0) = window[0];
        let (t1, fpr1, fnr1) = window[1];
        let d0 = fnr0 - fpr0;
        let d1 = fnr1 - fpr1;
        if d0 <= 0.0 && d1 >= 0.0 {
            let fraction = if d1 == d0 { 0.0 } else { -d0 / (d1 - d0) };
            let eer_percent = (fpr0 + fraction * (fpr1 - fpr0)) * 100.0;
            let threshold = t0 + fraction * (t1 - t0);
            return Ok(EerResult {
                eer_percent,
                threshold,
            });
        }
    }
    unreachable!("fnr - fpr spans -1 to +1 over the candidate sweep");
}

fn rates_at(trials: &[ScoredTrial], threshold: f64, bonafide: usize, spoofed: usize) -> (f64, f64) {
    let mut false_positives = 0usize;
    let mut false_negatives = 0usize;
    for t in trials {
        match t.ground_truth {
            GroundTruth::Bonafide => {
                if t.score >= threshold {
                    false_positives += 1;
                }
            }
            GroundTruth::Spoofed => {
                if t.score < threshold {
                    false_negatives += 1;
                }
            }
        }
    }
    (
        false_positives as f64 / bonafide as f64,
        false_negatives as f64 / spoofed as f64,
    )
}

/// Classifies each trial at a threshold: `true` when the decision matches
/// the ground truth. A spoofed trial is correct when its score is at least
/// the threshold; a bona fide trial when its score is below it.
pub fn classify(trials: &[ScoredTrial], threshold: f64) -> Vec<bool> {
    trials
        .iter()
        .map(|t| match t.ground_truth {
            GroundTruth::Spoofed => t.score >= threshold,
            GroundTruth::Bonafide => t.score < threshold,
        })
        .collect()
}
