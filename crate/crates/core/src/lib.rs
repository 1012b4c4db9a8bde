//! # splicecam
//!
//! A desk-scale testbed for explaining partial-spoof audio countermeasures.
//!
//! The crate covers the full pipeline:
//!
//! - [`synth`] / [`corpus`]: generate partially spoofed utterances by
//!   overlap-add splicing of synthetic speech and non-speech segments, with
//!   exact segment, transition, and frame-level ground truth.
//! - [`annotate`]: 20 ms frame labels over the five categories
//!   (TR, BS, BN, SS, SN) and category masks.
//! - [`features`]: log mel filterbank features at the same 20 ms frame grid.
//! - [`autodiff`]: a minimal reverse-mode gradient engine over dense `f64`
//!   tensors, sized for the model below and for Grad-CAM's gradient capture.
//! - [`model`]: a 1-D SE-ResNet countermeasure whose first conv block output
//!   is the Grad-CAM target layer; time resolution is preserved until the
//!   final pooling layer.
//! - [`train`]: Adam training with dev-set early stopping and CSV logs.
//! - [`gradcam`]: frame-level Grad-CAM scores for either output class, no
//!   smoothing and no interpolation.
//! - [`rcq`]: relative contribution quantification per frame category,
//!   including correct/incorrect splits and the 11-group score-bin analysis.
//! - [`eval`]: utterance-level EER with an interpolated threshold.
//! - [`explain`] / [`render`]: per-utterance score dumps, score files, and
//!   SVG/PGM renderings.
//!
//! Everything is deterministic given a single base seed; see [`seeds`] for
//! how named sub-streams are derived from it.

pub mod annotate;
pub mod audio;
pub mod autodiff;
pub mod corpus;
pub mod eval;
pub mod explain;
pub mod features;
pub mod gradcam;
pub mod model;
pub mod rcq;
pub mod render;
pub mod seeds;
pub mod synth;
pub mod train;

pub use annotate::{category_masks, label_frames, FrameAnnotation, FrameLabel};
pub use audio::{Waveform, FRAME_LEN, FRAME_MS, SAMPLE_RATE};
pub use autodiff::{grad_check, Graph, Tensor, TensorId};
pub use corpus::{generate_corpus, CorpusConfig, CorpusManifest, SplitSpec};
pub use eval::{classify, eer, EerResult, GroundTruth, ScoredTrial};
pub use explain::{explain_split, load_explain_dir, write_explain_dir, UtteranceExplanation};
pub use features::{extract_features, FeatureMap, NUM_FILTERS};
pub use gradcam::{gradcam, gradcam_both, GradCamMap, TargetClass};
pub use model::{predict_scores, ModelConfig, ModelState};
pub use rcq::{bin_analysis, category_means, rcq, BinAnalysis, RcqReport, SampleFilter};
pub use render::{render_pgm, render_svg};
pub use synth::{splice, synth_segment, synth_utterance, CorpusMode, SegmentKind, SegmentSpec, UtteranceSpec};
pub use train::{train, TrainConfig, TrainOutcome};

/// Version string stamped into manifests and report metadata.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
