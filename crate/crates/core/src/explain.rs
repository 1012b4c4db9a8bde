//! Explanation artifacts: per-frame relevance CSVs plus an index.
//!
//! [`explain_split`] runs a trained model over one corpus split and
//! produces, for every utterance, the spoof probability and one relevance
//! map per output class at native 20 ms frame resolution. [`write_explain_dir`]
//! lays those out on disk as one CSV per utterance, a `scores.csv` for
//! quick inspection, and an `index.json` tying everything together;
//! [`load_explain_dir`] reads the directory back for aggregation or
//! rendering without re-running the model.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{AnnotateError, FrameAnnotation, FrameLabel};
use crate::corpus::{load_split, CorpusError};
use crate::eval::GroundTruth;
use crate::features::{extract_features, FeatureError};
use crate::gradcam::{gradcam_both, GradCamError, GradCamMap, TargetClass};
use crate::model::{ModelError, ModelState, SPOOF_CLASS};

/// Errors from producing or reading explanation directories.
#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("explanation i/o failed at {path:?}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("{path:?} is not a valid index: {source}")]
    Json {
        path: std::path::PathBuf,
        source: serde_json::Error,
    },
    #[error("{path:?} line {line}: {reason}")]
    Csv {
        path: std::path::PathBuf,
        line: usize,
        reason: String,
    },
    #[error("utterance {utterance_id}: frame labels cover {labels} frames but features cover {frames}")]
    FrameMismatch {
        utterance_id: String,
        labels: usize,
        frames: usize,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    GradCam(#[from] GradCamError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
}

/// Everything produced for one utterance.
#[derive(Debug, Clone)]
pub struct UtteranceExplanation {
    pub utterance_id: String,
    pub ground_truth: GroundTruth,
    pub p_bonafide: f64,
    pub p_spoof: f64,
    pub annotation: FrameAnnotation,
    /// Maps in [`TargetClass`] order: bona fide class, then spoof class.
    pub maps: [GradCamMap; 2],
}

/// One utterance's row in `index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainRecord {
    pub utterance_id: String,
    pub ground_truth: GroundTruth,
    pub p_bonafide: f64,
    pub p_spoof: f64,
    /// WAV location relative to the corpus directory.
    pub wav_path: String,
    /// Frame CSV location relative to the explanation directory.
    pub csv_path: String,
}

/// Top-level `index.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainIndex {
    pub tool_version: String,
    pub corpus_dir: String,
    pub split: String,
    pub target_classes: Vec<TargetClass>,
    pub records: Vec<ExplainRecord>,
}

const CSV_HEADER: &str = "frame_index,time_s,label,score_bonafide_class,score_spoof_class";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExplainError + '_ {
    move |source| ExplainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Scores and explains every utterance in a split, ordered by id.
pub fn explain_split(
    model: &ModelState,
    corpus_dir: &Path,
    split: &str,
) -> Result<Vec<UtteranceExplanation>, ExplainError> {
    let items = load_split(corpus_dir, split)?;
    items
        .into_iter()
        .map(|item| {
            let features = extract_features(&item.waveform)?;
            let annotation = item.sidecar.annotation()?;
            if annotation.num_frames() != features.num_frames() {
                return Err(ExplainError::FrameMismatch {
                    utterance_id: item.utterance_id.clone(),
                    labels: annotation.num_frames(),
                    frames: features.num_frames(),
                });
            }
            let probs = model.predict(&features)?;
            let maps = gradcam_both(model, &features, &item.utterance_id)?;
            Ok(UtteranceExplanation {
                ground_truth: if item.sidecar.is_partially_spoofed() {
                    GroundTruth::Spoofed
                } else {
                    GroundTruth::Bonafide
                },
                p_bonafide: probs[1 - SPOOF_CLASS],
                p_spoof: probs[SPOOF_CLASS],
                annotation,
                maps,
                utterance_id: item.utterance_id,
            })
        })
        .collect()
}

/// Writes explanation artifacts for one split into `out_dir`.
pub fn write_explain_dir(
    out_dir: &Path,
    corpus_dir: &str,
    split: &str,
    explanations: &[UtteranceExplanation],
) -> Result<ExplainIndex, ExplainError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let mut records = Vec::with_capacity(explanations.len());
    let mut scores_csv = String::from("utterance_id,p_spoof\n");
    for exp in explanations {
        let csv_rel = format!("{}.csv", exp.utterance_id);
        let csv_path = out_dir.join(&csv_rel);
        std::fs::write(&csv_path, frame_csv(exp)).map_err(io_err(&csv_path))?;
        writeln!(scores_csv, "{},{}", exp.utterance_id, exp.p_spoof).expect("writing to string");
        records.push(ExplainRecord {
            utterance_id: exp.utterance_id.clone(),
            ground_truth: exp.ground_truth,
            p_bonafide: exp.p_bonafide,
            p_spoof: exp.p_spoof,
            wav_path: format!("{split}/{}.wav", exp.utterance_id),
            csv_path: csv_rel,
        });
    }

    let scores_path = out_dir.join("scores.csv");
    std::fs::write(&scores_path, scores_csv).map_err(io_err(&scores_path))?;

    let index = ExplainIndex {
        tool_version: crate::TOOL_VERSION.to_string(),
        corpus_dir: corpus_dir.to_string(),
        split: split.to_string(),
        target_classes: vec![TargetClass::Bonafide, TargetClass::Spoof],
        records,
    };
    let index_path = out_dir.join("index.json");
    let mut text = serde_json::to_string_pretty(&index).expect("serializable index");
    text.push('\n');
    std::fs::write(&index_path, text).map_err(io_err(&index_path))?;
    Ok(index)
}

/// Formats one utterance's per-frame CSV.
fn frame_csv(exp: &UtteranceExplanation) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let labels = exp.annotation.labels();
    for t in 0..labels.len() {
        writeln!(
            out,
            "{t},{:.3},{},{},{}",
            t as f64 * 0.02,
            labels[t].as_str(),
            exp.maps[0].scores[t],
            exp.maps[1].scores[t],
        )
        .expect("writing to string");
    }
    out
}

/// Reads an explanation directory back into memory.
pub fn load_explain_dir(
    dir: &Path,
) -> Result<(ExplainIndex, Vec<UtteranceExplanation>), ExplainError> {
    let index_path = dir.join("index.json");
    let text = std::fs::read_to_string(&index_path).map_err(io_err(&index_path))?;
    let index: ExplainIndex = serde_json::from_str(&text).map_err(|source| ExplainError::Json {
        path: index_path,
        source,
    })?;

    let mut explanations = Vec::with_capacity(index.records.len());
    for record in &index.records {
        let csv_path = dir.join(&record.csv_path);
        let text = std::fs::read_to_string(&csv_path).map_err(io_err(&csv_path))?;
        let (annotation, maps) = parse_frame_csv(&csv_path, &text, &record.utterance_id)?;
        explanations.push(UtteranceExplanation {
            utterance_id: record.utterance_id.clone(),
            ground_truth: record.ground_truth,
            p_bonafide: record.p_bonafide,
            p_spoof: record.p_spoof,
            annotation,
            maps,
        });
    }
    Ok((index, explanations))
}

fn parse_frame_csv(
    path: &Path,
    text: &str,
    utterance_id: &str,
) -> Result<(FrameAnnotation, [GradCamMap; 2]), ExplainError> {
    let err = |line: usize, reason: String| ExplainError::Csv {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        other => {
            return Err(err(
                1,
                format!("expected header {CSV_HEADER:?}, found {:?}", other.map(|(_, l)| l)),
            ))
        }
    }

    let mut labels = Vec::new();
    let mut bona_scores = Vec::new();
    let mut spoof_scores = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(err(line_no, format!("expected 5 fields, found {}", fields.len())));
        }
        let frame: usize = fields[0]
            .parse()
            .map_err(|e| err(line_no, format!("bad frame index: {e}")))?;
        if frame != labels.len() {
            return Err(err(
                line_no,
                format!("frame index {frame} out of order, expected {}", labels.len()),
            ));
        }
        labels.push(
            FrameLabel::from_str(fields[2]).map_err(|e| err(line_no, e.to_string()))?,
        );
        bona_scores.push(
            fields[3]
                .parse::<f64>()
                .map_err(|e| err(line_no, format!("bad bona fide score: {e}")))?,
        );
        spoof_scores.push(
            fields[4]
                .parse::<f64>()
                .map_err(|e| err(line_no, format!("bad spoof score: {e}")))?,
        );
    }

    Ok((
        FrameAnnotation::from_labels(labels),
        [
            GradCamMap {
                utterance_id: utterance_id.to_string(),
                target_class: TargetClass::Bonafide,
                scores: bona_scores,
            },
            GradCamMap {
                utterance_id: utterance_id.to_string(),
                target_class: TargetClass::Spoof,
                scores: spoof_scores,
            },
        ],
    ))
}
