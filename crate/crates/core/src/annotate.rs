//! Frame-level ground-truth labels on the 20 ms grid.
//!
//! Every frame receives exactly one of five labels: TR for transition
//! regions around splice points between bona fide and spoofed material,
//! and BS, BN, SS, SN for bona fide or spoofed speech and non-speech.
//!
//! TR takes priority: a frame overlapping a transition span by at least
//! half the frame length is TR regardless of what it contains. All other
//! frames take the label of the segment owning the frame's midpoint. All
//! arithmetic is in integer samples, so boundary cases are exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::FRAME_LEN;
use crate::synth::{SegmentKind, SpliceLayout};

/// Errors from frame labeling.
#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("layout has no segments")]
    EmptyLayout,
    #[error("segment {index} spans [{start}, {end}) which does not continue from sample {expected}")]
    NonContiguous {
        index: usize,
        start: usize,
        end: usize,
        expected: usize,
    },
    #[error("{frames} frames need {needed} samples but segments cover only {covered}")]
    ShortLayout {
        frames: usize,
        needed: usize,
        covered: usize,
    },
    #[error("unknown frame label {0:?}")]
    UnknownLabel(String),
}

/// One of the five frame categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FrameLabel {
    #[serde(rename = "TR")]
    Tr,
    #[serde(rename = "BS")]
    Bs,
    #[serde(rename = "BN")]
    Bn,
    #[serde(rename = "SS")]
    Ss,
    #[serde(rename = "SN")]
    Sn,
}

impl FrameLabel {
    /// All five labels in canonical report order.
    pub const ALL: [FrameLabel; 5] = [
        FrameLabel::Tr,
        FrameLabel::Bs,
        FrameLabel::Bn,
        FrameLabel::Ss,
        FrameLabel::Sn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FrameLabel::Tr => "TR",
            FrameLabel::Bs => "BS",
            FrameLabel::Bn => "BN",
            FrameLabel::Ss => "SS",
            FrameLabel::Sn => "SN",
        }
    }

    pub fn from_str(s: &str) -> Result<Self, AnnotateError> {
        match s {
            "TR" => Ok(FrameLabel::Tr),
            "BS" => Ok(FrameLabel::Bs),
            "BN" => Ok(FrameLabel::Bn),
            "SS" => Ok(FrameLabel::Ss),
            "SN" => Ok(FrameLabel::Sn),
            other => Err(AnnotateError::UnknownLabel(other.to_string())),
        }
    }

    /// Position in [`FrameLabel::ALL`], used to index mask arrays.
    pub fn index(self) -> usize {
        match self {
            FrameLabel::Tr => 0,
            FrameLabel::Bs => 1,
            FrameLabel::Bn => 2,
            FrameLabel::Ss => 3,
            FrameLabel::Sn => 4,
        }
    }
}

impl std::fmt::Display for FrameLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-frame labels for one utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameAnnotation {
    labels: Vec<FrameLabel>,
}

impl FrameAnnotation {
    pub fn from_labels(labels: Vec<FrameLabel>) -> Self {
        Self { labels }
    }

    pub fn labels(&self) -> &[FrameLabel] {
        &self.labels
    }

    pub fn num_frames(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, frame: usize) -> FrameLabel {
        self.labels[frame]
    }
}

/// Labels the first `num_frames` 20 ms frames of a spliced utterance.
///
/// The layout's segments must start at sample zero, be contiguous, and
/// cover all labeled frames. A frame is TR when its overlap with any
/// transition span is at least half a frame; otherwise it takes the label
/// of the segment owning its midpoint sample.
pub fn label_frames(layout: &SpliceLayout, num_frames: usize) -> Result<FrameAnnotation, AnnotateError> {
    if layout.segments.is_empty() {
        return Err(AnnotateError::EmptyLayout);
    }
    let mut expected = 0usize;
    for (index, seg) in layout.segments.iter().enumerate() {
        if seg.start_sample != expected || seg.end_sample <= seg.start_sample {
            return Err(AnnotateError::NonContiguous {
                index,
                start: seg.start_sample,
                end: seg.end_sample,
                expected,
            });
        }
        expected = seg.end_sample;
    }
    let needed = num_frames * FRAME_LEN;
    if expected < needed {
        return Err(AnnotateError::ShortLayout {
            frames: num_frames,
            needed,
            covered: expected,
        });
    }

    let half_frame = FRAME_LEN / 2;
    let labels = (0..num_frames)
        .map(|t| {
            let frame_start = t * FRAME_LEN;
            let frame_end = frame_start + FRAME_LEN;
            let in_transition = layout.transitions.iter().any(|span| {
                let overlap = span.end_sample.min(frame_end).saturating_sub(span.start_sample.max(frame_start));
                overlap >= half_frame
            });
            if in_transition {
                return FrameLabel::Tr;
            }
            let midpoint = frame_start + half_frame;
            let owner = layout
                .segments
                .iter()
                .find(|seg| seg.start_sample <= midpoint && midpoint < seg.end_sample)
                .expect("contiguous segments cover every labeled frame");
            segment_label(owner.kind)
        })
        .collect();
    Ok(FrameAnnotation { labels })
}

fn segment_label(kind: SegmentKind) -> FrameLabel {
    match kind {
        SegmentKind::BonafideSpeech => FrameLabel::Bs,
        SegmentKind::BonafideNonspeech => FrameLabel::Bn,
        SegmentKind::SpoofedSpeech => FrameLabel::Ss,
        SegmentKind::SpoofedNonspeech => FrameLabel::Sn,
    }
}

/// Frame indices per category, in [`FrameLabel::ALL`] order. The five
/// vectors partition `0..num_frames`.
pub fn category_masks(annotation: &FrameAnnotation) -> [Vec<usize>; 5] {
    let mut masks: [Vec<usize>; 5] = Default::default();
    for (t, label) in annotation.labels().iter().enumerate() {
        masks[label.index()].push(t);
    }
    masks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{PlacedSegment, TransitionSpan};

    fn layout(segments: Vec<(SegmentKind, usize, usize)>, transitions: Vec<(usize, usize)>) -> SpliceLayout {
        SpliceLayout {
            segments: segments
                .into_iter()
                .map(|(kind, start_sample, end_sample)| PlacedSegment {
                    kind,
                    start_sample,
                    end_sample,
                })
                .collect(),
            transitions: transitions
                .into_iter()
                .map(|(start_sample, end_sample)| TransitionSpan {
                    start_sample,
                    end_sample,
                })
                .collect(),
        }
    }

    #[test]
    fn pure_segments_label_by_midpoint() {
        let l = layout(
            vec![
                (SegmentKind::BonafideNonspeech, 0, 2 * FRAME_LEN),
                (SegmentKind::BonafideSpeech, 2 * FRAME_LEN, 4 * FRAME_LEN),
                (SegmentKind::SpoofedSpeech, 4 * FRAME_LEN, 6 * FRAME_LEN),
                (SegmentKind::SpoofedNonspeech, 6 * FRAME_LEN, 8 * FRAME_LEN),
            ],
            vec![],
        );
        let a = label_frames(&l, 8).unwrap();
        use FrameLabel::*;
        assert_eq!(a.labels(), &[Bn, Bn, Bs, Bs, Ss, Ss, Sn, Sn]);
    }

    #[test]
    fn transition_aligned_with_frame_is_one_tr() {
        // A full-frame transition span sitting exactly on frame 2.
        let l = layout(
            vec![
                (SegmentKind::BonafideSpeech, 0, 2 * FRAME_LEN + FRAME_LEN / 2),
                (SegmentKind::SpoofedSpeech, 2 * FRAME_LEN + FRAME_LEN / 2, 5 * FRAME_LEN),
            ],
            vec![(2 * FRAME_LEN, 3 * FRAME_LEN)],
        );
        let a = label_frames(&l, 5).unwrap();
        use FrameLabel::*;
        assert_eq!(a.labels(), &[Bs, Bs, Tr, Ss, Ss]);
    }

    #[test]
    fn straddling_transition_marks_both_frames() {
        // A 20 ms span starting 10 ms into frame 1 overlaps frames 1 and 2
        // by exactly half a frame each, so both are TR.
        let half = FRAME_LEN / 2;
        let l = layout(
            vec![
                (SegmentKind::BonafideSpeech, 0, 2 * FRAME_LEN),
                (SegmentKind::SpoofedSpeech, 2 * FRAME_LEN, 4 * FRAME_LEN),
            ],
            vec![(FRAME_LEN + half, 2 * FRAME_LEN + half)],
        );
        let a = label_frames(&l, 4).unwrap();
        use FrameLabel::*;
        assert_eq!(a.labels(), &[Bs, Tr, Tr, Ss]);
    }

    #[test]
    fn sub_half_overlap_is_not_tr() {
        let half = FRAME_LEN / 2;
        let l = layout(
            vec![
                (SegmentKind::BonafideSpeech, 0, 2 * FRAME_LEN),
                (SegmentKind::SpoofedSpeech, 2 * FRAME_LEN, 4 * FRAME_LEN),
            ],
            // Span of half a frame starting a quarter into frame 1:
            // overlap with frame 1 is half a frame (TR), frame 2 none.
            vec![(FRAME_LEN + half / 2, 2 * FRAME_LEN - half / 2)],
        );
        let a = label_frames(&l, 4).unwrap();
        use FrameLabel::*;
        assert_eq!(a.labels(), &[Bs, Tr, Ss, Ss]);
    }

    #[test]
    fn empty_transition_span_labels_nothing() {
        let l = layout(
            vec![
                (SegmentKind::BonafideSpeech, 0, 2 * FRAME_LEN),
                (SegmentKind::SpoofedSpeech, 2 * FRAME_LEN, 4 * FRAME_LEN),
            ],
            vec![(2 * FRAME_LEN, 2 * FRAME_LEN)],
        );
        let a = label_frames(&l, 4).unwrap();
        assert!(a.labels().iter().all(|&l| l != FrameLabel::Tr));
    }

    #[test]
    fn ragged_tail_is_ignored() {
        let l = layout(
            vec![(SegmentKind::BonafideSpeech, 0, 3 * FRAME_LEN + 7)],
            vec![],
        );
        let a = label_frames(&l, 3).unwrap();
        assert_eq!(a.num_frames(), 3);
    }

    #[test]
    fn short_layout_is_rejected() {
        let l = layout(vec![(SegmentKind::BonafideSpeech, 0, FRAME_LEN)], vec![]);
        assert!(matches!(
            label_frames(&l, 2),
            Err(AnnotateError::ShortLayout { .. })
        ));
    }

    #[test]
    fn non_contiguous_layout_is_rejected() {
        let l = layout(
            vec![
                (SegmentKind::BonafideSpeech, 0, FRAME_LEN),
                (SegmentKind::SpoofedSpeech, FRAME_LEN + 1, 3 * FRAME_LEN),
            ],
            vec![],
        );
        assert!(matches!(
            label_frames(&l, 2),
            Err(AnnotateError::NonContiguous { index: 1, .. })
        ));
    }

    #[test]
    fn masks_partition_frames() {
        use FrameLabel::*;
        let a = FrameAnnotation::from_labels(vec![Bn, Bs, Tr, Ss, Tr, Sn, Bs]);
        let masks = category_masks(&a);
        assert_eq!(masks[Tr.index()], vec![2, 4]);
        assert_eq!(masks[Bs.index()], vec![1, 6]);
        assert_eq!(masks[Bn.index()], vec![0]);
        assert_eq!(masks[Ss.index()], vec![3]);
        assert_eq!(masks[Sn.index()], vec![5]);
        let total: usize = masks.iter().map(Vec::len).sum();
        assert_eq!(total, a.num_frames());
        let mut all: Vec<usize> = masks.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn label_string_roundtrip() {
        for label in FrameLabel::ALL {
            assert_eq!(FrameLabel::from_str(label.as_str()).unwrap(), label);
        }
        assert!(FrameLabel::from_str("XX").is_err());
    }
}
