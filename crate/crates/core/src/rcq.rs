//! Relative contribution quantification over frame categories.
//!
//! Frame scores from many partially spoofed utterances are pooled
//! globally: the mean score of category `c` sums every frame of that
//! category across the whole sample set and divides by the total count of
//! such frames, so long utterances weigh more than short ones. With
//! `s_all` the mean over all frames regardless of category,
//!
//! ```text
//! rcq_c = (s_c - s_all) / s_all * 100%
//! ```
//!
//! positive when the model leans on category `c` more than on an average
//! frame. Two identities pin the arithmetic down: the frame-weighted sum
//! of rcq values over all categories is zero, and rescaling every score by
//! one positive factor leaves every rcq unchanged. A category mean can
//! never drop below zero (scores are non-negative), so rcq is never below
//! -100%. When `s_all` is zero the quotient is undefined and reported as
//! absent rather than invented.
//!
//! [`bin_analysis`] repeats the report over score bins: the correctly
//! classified spoofed samples are split into ten equal-width bins of their
//! spoof probability, and an eleventh group collects the misclassified
//! samples.

use serde::Serialize;
use thiserror::Error;

use crate::annotate::{FrameAnnotation, FrameLabel};
use crate::gradcam::{GradCamMap, TargetClass};

/// Errors from aggregation.
#[derive(Debug, Error)]
pub enum RcqError {
    #[error("{maps} maps but {annotations} annotations")]
    CountMismatch { maps: usize, annotations: usize },
    #[error("sample {index}: map has {map_frames} frames, annotation {annotation_frames}")]
    FrameMismatch {
        index: usize,
        map_frames: usize,
        annotation_frames: usize,
    },
    #[error("sample {index}: frame {frame} score {score} is negative or not finite")]
    BadScore {
        index: usize,
        frame: usize,
        score: f64,
    },
}

/// Pooled per-category totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CategoryStats {
    /// Frames of this category across the sample set.
    pub frames: usize,
    /// Sum of their scores.
    pub score_sum: f64,
}

impl CategoryStats {
    /// Mean score, absent when the category has no frames.
    pub fn mean(&self) -> Option<f64> {
        (self.frames > 0).then(|| self.score_sum / self.frames as f64)
    }
}

/// Global pooled means per category plus the all-frame mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMeans {
    /// Indexed by [`FrameLabel::index`].
    pub per_category: [CategoryStats; 5],
    pub total_frames: usize,
}

impl CategoryMeans {
    /// Mean over every frame of every category; absent when there are no
    /// frames at all.
    pub fn overall_mean(&self) -> Option<f64> {
        if self.total_frames == 0 {
            return None;
        }
        let sum: f64 = self.per_category.iter().map(|s| s.score_sum).sum();
        Some(sum / self.total_frames as f64)
    }
}

/// Pools frame scores by category across a sample set.
///
/// Maps and annotations are matched by position and must agree on frame
/// counts; scores must be non-negative and finite. An empty sample set is
/// valid and yields zero frames everywhere.
pub fn category_means(
    maps: &[&GradCamMap],
    annotations: &[&FrameAnnotation],
) -> Result<CategoryMeans, RcqError> {
    if maps.len() != annotations.len() {
        return Err(RcqError::CountMismatch {
            maps: maps.len(),
            annotations: annotations.len(),
        });
    }
    let mut per_category = [CategoryStats {
        frames: 0,
        score_sum: 0.0,
    }; 5];
    let mut total_frames = 0usize;
    for (index, (map, annotation)) in maps.iter().zip(annotations).enumerate() {
        if map.scores.len() != annotation.num_frames() {
            return Err(RcqError::FrameMismatch {
                index,
                map_frames: map.scores.len(),
                annotation_frames: annotation.num_frames(),
            });
        }
        for (frame, (&score, &label)) in map.scores.iter().zip(annotation.labels()).enumerate() {
            if !score.is_finite() || score < 0.0 {
                return Err(RcqError::BadScore { index, frame, score });
            }
            let slot = &mut per_category[label.index()];
            slot.frames += 1;
            slot.score_sum += score;
            total_frames += 1;
        }
    }
    Ok(CategoryMeans {
        per_category,
        total_frames,
    })
}

/// The quotient itself: percent deviation of a category mean from the
/// all-frame mean. Absent when the all-frame mean is zero.
pub fn rcq(category_mean: f64, overall_mean: f64) -> Option<f64> {
    (overall_mean != 0.0).then(|| (category_mean - overall_mean) / overall_mean * 100.0)
}

/// Which samples of the spoofed set a report covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFilter {
    All,
    Correct,
    Incorrect,
}

impl std::fmt::Display for SampleFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SampleFilter::All => "all",
            SampleFilter::Correct => "correct",
            SampleFilter::Incorrect => "incorrect",
        })
    }
}

/// One category row of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcqRow {
    pub category: FrameLabel,
    pub frames: usize,
    pub mean_score: Option<f64>,
    pub rcq_percent: Option<f64>,
}

/// A full five-row report for one target class over one sample subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcqReport {
    pub target_class: TargetClass,
    pub filter: SampleFilter,
    pub num_samples: usize,
    pub total_frames: usize,
    pub overall_mean: Option<f64>,
    pub categories: Vec<RcqRow>,
}

/// Builds a report from pooled means. Every category appears, present or
/// not, in canonical order.
pub fn build_report(
    means: &CategoryMeans,
    target_class: TargetClass,
    filter: SampleFilter,
    num_samples: usize,
) -> RcqReport {
    let overall = means.overall_mean();
    let categories = FrameLabel::ALL
        .iter()
        .map(|&label| {
            let stats = means.per_category[label.index()];
            let mean_score = stats.mean();
            let rcq_percent = match (mean_score, overall) {
                (Some(mean), Some(all)) => rcq(mean, all),
                _ => None,
            };
            RcqRow {
                category: label,
                frames: stats.frames,
                mean_score,
                rcq_percent,
            }
        })
        .collect();
    RcqReport {
        target_class,
        filter,
        num_samples,
        total_frames: means.total_frames,
        overall_mean: overall,
        categories,
    }
}

/// One spoofed sample ready for aggregation: its spoof probability, its
/// correctness at the evaluation threshold, and its map and labels for one
/// target class.
#[derive(Debug, Clone)]
pub struct AnalyzedSample {
    pub utterance_id: String,
    pub p_spoof: f64,
    pub correct: bool,
    pub map: GradCamMap,
    pub annotation: FrameAnnotation,
}

/// One group of the eleven-group score-bin analysis.
#[derive(Debug, Clone, Serialize)]
pub struct BinGroup {
    /// 1 through 10 are score bins; 11 is the misclassified group.
    pub group: usize,
    /// Score range covered, absent for group 11 and when no correct
    /// samples exist.
    pub score_lo: Option<f64>,
    pub score_hi: Option<f64>,
    pub num_samples: usize,
    pub report: RcqReport,
}

/// The full eleven-group analysis.
#[derive(Debug, Clone, Serialize)]
pub struct BinAnalysis {
    pub target_class: TargetClass,
    /// Decision threshold the correctness flags were computed at.
    pub threshold: f64,
    pub groups: Vec<BinGroup>,
}

/// Splits spoofed samples into ten equal-width spoof-probability bins over
/// the correctly classified ones (the last bin closed on the right) plus
/// group 11 for the misclassified, and builds one report per group.
///
/// Groups may be empty; their reports are valid and show zero frames. When
/// every sample is misclassified the ten bins are empty with absent
/// ranges. When all correct samples share one score the width is zero and
/// they all land in bin 1.
pub fn bin_analysis(
    samples: &[AnalyzedSample],
    target_class: TargetClass,
    threshold: f64,
) -> Result<BinAnalysis, RcqError> {
    let correct: Vec<&AnalyzedSample> = samples.iter().filter(|s| s.correct).collect();
    let range = if correct.is_empty() {
        None
    } else {
        let lo = correct.iter().map(|s| s.p_spoof).fold(f64::INFINITY, f64::min);
        let hi = correct.iter().map(|s| s.p_spoof).fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    };

    let mut grouped: Vec<Vec<&AnalyzedSample>> = vec![Vec::new(); 11];
    for sample in samples {
        let slot = if !sample.correct {
            10
        } else {
            let (lo, hi) = range.expect("correct sample implies a range");
            let width = (hi - lo) / 10.0;
            if width == 0.0 {
                0
            } else {
                (((sample.p_spoof - lo) / width).floor() as usize).min(9)
            }
        };
        grouped[slot].push(sample);
    }

    let groups = grouped
        .iter()
        .enumerate()
        .map(|(i, members)| {
            let maps: Vec<&GradCamMap> = members.iter().map(|s| &s.map).collect();
            let annotations: Vec<&FrameAnnotation> =
                members.iter().map(|s| &s.annotation).collect();
            let means = category_means(&maps, &annotations)?;
            let filter = if i == 10 {
                SampleFilter::Incorrect
            } else {
                SampleFilter::Correct
            };
            let (score_lo, score_hi) = match (i, range) {
                (10, _) | (_, None) => (None, None),
                (_, Some((lo, hi))) => {
                    let width = (hi - lo) / 10.0;
                    (Some(lo + width * i as f64), Some(lo + width * (i + 1) as f64))
                }
            };
            Ok(BinGroup {
                group: i + 1,
                score_lo,
                score_hi,
                num_samples: members.len(),
                report: build_report(&means, target_class, filter, members.len()),
            })
        })
        .collect::<Result<Vec<_>, RcqError>>()?;

    Ok(BinAnalysis {
        target_class,
        threshold,
        groups,
    })
}
