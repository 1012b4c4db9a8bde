//! Corpus generation: spliced utterances with exact ground truth.
//!
//! A corpus has `train`, `dev`, and `eval` splits, each with a configured
//! number of bona fide and partially spoofed utterances. Every utterance
//! gets a WAV file and a JSON sidecar carrying its segment layout,
//! transition spans, and 20 ms frame labels; a manifest records the SHA-256
//! of every file so a corpus can be verified and regenerated
//! byte-for-byte from its seed.
//!
//! Bona fide utterances are non-speech, speech, non-speech, sometimes
//! with a pause inside a run or a second run. Both classes draw from the
//! same timeline distribution; a spoofed utterance then re-draws the
//! provenance of windows inside its speech runs, so each inserted voice
//! is a fresh draw of the same generator. Fundamentals come from a fixed
//! grid, i.i.d. per voice, and speech is levelled analytically, so away
//! from the junctions no per-frame statistic separates inserted speech
//! from host speech. In splice-only mode the crossfade clash where two
//! voices meet is therefore the only evidence of spoofing; artifact mode
//! additionally marks the inserted speech itself.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::annotate::{label_frames, AnnotateError, FrameAnnotation, FrameLabel};
use crate::audio::{AudioError, Waveform, FRAME_MS, SAMPLE_RATE};
use crate::seeds;
use crate::synth::{
    synth_utterance, CorpusMode, GeneratorParams, SegmentKind, SegmentSpec, SynthError,
    UtteranceSpec,
};

/// Errors from corpus generation and loading.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("split {split:?} needs at least one {class} utterance")]
    EmptyClass {
        split: &'static str,
        class: &'static str,
    },
    #[error("corpus i/o failed at {path:?}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("sidecar {path:?} is not valid json: {source}")]
    Json {
        path: std::path::PathBuf,
        source: serde_json::Error,
    },
    #[error("manifest lists {path:?} with hash {expected}, file hashes to {actual}")]
    HashMismatch {
        path: String,
        expected: String,
        actual: String,
    },
    #[error("manifest is missing from {0:?}")]
    NoManifest(std::path::PathBuf),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// Utterance counts for one split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub bonafide: usize,
    pub spoofed: usize,
}

/// Corpus generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub mode: CorpusMode,
    pub crossfade_ms: f64,
    pub seed: u64,
    pub train: SplitSpec,
    pub dev: SplitSpec,
    pub eval: SplitSpec,
}

impl CorpusConfig {
    pub fn split(&self, name: &str) -> Option<SplitSpec> {
        match name {
            "train" => Some(self.train),
            "dev" => Some(self.dev),
            "eval" => Some(self.eval),
            _ => None,
        }
    }
}

/// Split names in generation order.
pub const SPLITS: [&str; 3] = ["train", "dev", "eval"];

/// One segment of a sidecar, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidecarSegment {
    pub kind: SegmentKind,
    pub start_s: f64,
    pub end_s: f64,
}

/// One transition span of a sidecar, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidecarSpan {
    pub start_s: f64,
    pub end_s: f64,
}

/// Ground truth stored beside each WAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub utterance_id: String,
    pub mode: CorpusMode,
    pub sample_rate: u32,
    pub segments: Vec<SidecarSegment>,
    pub transitions: Vec<SidecarSpan>,
    pub frame_ms: u32,
    pub frame_labels: Vec<String>,
}

impl Sidecar {
    /// True when any segment is spoofed.
    pub fn is_partially_spoofed(&self) -> bool {
        self.segments.iter().any(|s| s.kind.is_spoofed())
    }

    /// Parses the stored frame labels.
    pub fn annotation(&self) -> Result<FrameAnnotation, AnnotateError> {
        let labels = self
            .frame_labels
            .iter()
            .map(|s| FrameLabel::from_str(s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FrameAnnotation::from_labels(labels))
    }
}

/// One file's identity in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

/// Corpus-level manifest written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub tool_version: String,
    pub seed: u64,
    pub mode: CorpusMode,
    pub crossfade_ms: f64,
    pub splits: BTreeMap<String, SplitSpec>,
    pub files: Vec<ManifestEntry>,
}

/// A loaded utterance.
#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub utterance_id: String,
    pub waveform: Waveform,
    pub sidecar: Sidecar,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Generates a corpus under `out_dir` and writes its manifest.
pub fn generate_corpus(config: &CorpusConfig, out_dir: &Path) -> Result<CorpusManifest, CorpusError> {
    for split in SPLITS {
        let spec = config.split(split).expect("known split");
        if spec.bonafide == 0 {
            return Err(CorpusError::EmptyClass {
                split: match split {
                    "train" => "train",
                    "dev" => "dev",
                    _ => "eval",
                },
                class: "bona fide",
            });
        }
        if spec.spoofed == 0 {
            return Err(CorpusError::EmptyClass {
                split: match split {
                    "train" => "train",
                    "dev" => "dev",
                    _ => "eval",
                },
                class: "spoofed",
            });
        }
    }

    let mut files = Vec::new();
    for split in SPLITS {
        let counts = config.split(split).expect("known split");
        let dir = out_dir.join(split);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (class, count, spoofed) in [
            ("bona", counts.bonafide, false),
            ("spoof", counts.spoofed, true),
        ] {
            for index in 0..count {
                let utterance_id = format!("{split}_{class}_{index:04}");
                let spec = sample_utterance(config, &utterance_id, spoofed, index == 0);
                spec.validate()?;
                let (wave, layout) = synth_utterance(&spec)?;
                let annotation = label_frames(&layout, wave.num_frames())?;

                let sidecar = Sidecar {
                    utterance_id: utterance_id.clone(),
                    mode: config.mode,
                    sample_rate: SAMPLE_RATE,
                    segments: layout
                        .segments
                        .iter()
                        .map(|s| SidecarSegment {
                            kind: s.kind,
                            start_s: s.start_sample as f64 / SAMPLE_RATE as f64,
                            end_s: s.end_sample as f64 / SAMPLE_RATE as f64,
                        })
                        .collect(),
                    transitions: layout
                        .transitions
                        .iter()
                        .map(|s| SidecarSpan {
                            start_s: s.start_sample as f64 / SAMPLE_RATE as f64,
                            end_s: s.end_sample as f64 / SAMPLE_RATE as f64,
                        })
                        .collect(),
                    frame_ms: FRAME_MS,
                    frame_labels: annotation.labels().iter().map(|l| l.as_str().to_string()).collect(),
                };

                let wav_rel = format!("{split}/{utterance_id}.wav");
                let json_rel = format!("{split}/{utterance_id}.json");
                let wav_path = out_dir.join(&wav_rel);
                wave.write_wav(&wav_path)?;
                let json_path = out_dir.join(&json_rel);
                let mut text = serde_json::to_string_pretty(&sidecar).expect("serializable sidecar");
                text.push('\n');
                std::fs::write(&json_path, &text).map_err(io_err(&json_path))?;

                files.push(ManifestEntry {
                    path: wav_rel.clone(),
                    sha256: sha256_file(&wav_path)?,
                });
                files.push(ManifestEntry {
                    path: json_rel,
                    sha256: sha256_hex(text.as_bytes()),
                });
            }
        }
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));

    let manifest = CorpusManifest {
        tool_version: crate::TOOL_VERSION.to_string(),
        seed: config.seed,
        mode: config.mode,
        crossfade_ms: config.crossfade_ms,
        splits: SPLITS
            .iter()
            .map(|&s| (s.to_string(), config.split(s).expect("known split")))
            .collect(),
        files,
    };
    let manifest_path = out_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
    text.push('\n');
    std::fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

/// Checks every manifest entry against the files on disk.
pub fn verify_corpus(corpus_dir: &Path) -> Result<CorpusManifest, CorpusError> {
    let manifest_path = corpus_dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(CorpusError::NoManifest(corpus_dir.to_path_buf()));
    }
    let text = std::fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: CorpusManifest = serde_json::from_str(&text).map_err(|source| CorpusError::Json {
        path: manifest_path.clone(),
        source,
    })?;
    for entry in &manifest.files {
        let actual = sha256_file(&corpus_dir.join(&entry.path))?;
        if actual != entry.sha256 {
            return Err(CorpusError::HashMismatch {
                path: entry.path.clone(),
                expected: entry.sha256.clone(),
                actual,
            });
        }
    }
    Ok(manifest)
}

/// Loads one split, ordered by utterance id.
pub fn load_split(corpus_dir: &Path, split: &str) -> Result<Vec<CorpusItem>, CorpusError> {
    let dir = corpus_dir.join(split);
    let mut ids = Vec::new();
    let entries = std::fs::read_dir(&dir).map_err(io_err(&dir))?;
    for entry in entries {
        let entry = entry.map_err(io_err(&dir))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    ids.iter()
        .map(|id| {
            let json_path = dir.join(format!("{id}.json"));
            let text = std::fs::read_to_string(&json_path).map_err(io_err(&json_path))?;
            let sidecar: Sidecar =
                serde_json::from_str(&text).map_err(|source| CorpusError::Json {
                    path: json_path.clone(),
                    source,
                })?;
            let waveform = Waveform::read_wav(&dir.join(format!("{id}.wav")))?;
            Ok(CorpusItem {
                utterance_id: id.clone(),
                waveform,
                sidecar,
            })
        })
        .collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        write!(out, "{byte:02x}").expect("writing to string");
    }
    out
}

fn sha256_file(path: &Path) -> Result<String, CorpusError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(sha256_hex(&bytes))
}

/// A speech or non-speech unit before seed assignment.
struct Unit {
    kind: SegmentKind,
    duration_s: f64,
    f0_hz: f64,
    artifact_strength: f64,
}

/// Fundamentals for speech units. Every voice, host or inserted, draws
/// independently and uniformly from this grid, so the per-frame
/// distribution of the fundamental is identical across categories while
/// adjacent voices still differ, and clash, five times out of six.
const F0_GRID: [f64; 6] = [110.0, 140.0, 170.0, 200.0, 230.0, 260.0];

/// Shortest speech piece, in seconds.
const MIN_PIECE: f64 = 0.15;

fn grid_f0(rng: &mut ChaCha8Rng) -> f64 {
    F0_GRID[rng.random_range(0..F0_GRID.len())]
}

fn nonspeech(duration_s: f64, spoofed: bool) -> Unit {
    Unit {
        kind: if spoofed {
            SegmentKind::SpoofedNonspeech
        } else {
            SegmentKind::BonafideNonspeech
        },
        duration_s,
        f0_hz: 100.0,
        artifact_strength: 0.0,
    }
}

fn bona_speech(duration_s: f64, f0_hz: f64) -> Unit {
    Unit {
        kind: SegmentKind::BonafideSpeech,
        duration_s,
        f0_hz,
        artifact_strength: 0.0,
    }
}

/// Class-independent utterance shape.
struct Timeline {
    lead: f64,
    tail: f64,
    /// Gap between the two runs, when there are two.
    midgap: Option<f64>,
    /// Speech runs as (duration, fundamental).
    runs: Vec<(f64, f64)>,
    /// Index of the longest run.
    main_run: usize,
    /// Pause inside the main run: (speech before it, pause duration).
    minigap: Option<(f64, f64)>,
    noise_level: f64,
}

/// Draws the timeline. Both classes call this with the same inputs, so
/// pause layout, run lengths, voices, and noise level cannot separate
/// them; `force_minigap` is keyed on the utterance index, not the class.
fn sample_timeline(rng: &mut ChaCha8Rng, force_minigap: bool) -> Timeline {
    let lead = rng.random_range(0.30..0.45);
    let tail = rng.random_range(0.30..0.45);
    let speech_total = rng.random_range(2.2..2.5);
    let noise_level = rng.random_range(0.45..0.55);
    let midgap = if rng.random_range(0.0..1.0) < 0.20 {
        Some(rng.random_range(0.25..0.40))
    } else {
        None
    };
    let mut runs: Vec<(f64, f64)> = Vec::new();
    if midgap.is_some() {
        let fraction = rng.random_range(0.35..0.65);
        runs.push((speech_total * fraction, grid_f0(rng)));
        runs.push((speech_total * (1.0 - fraction), grid_f0(rng)));
    } else {
        runs.push((speech_total, grid_f0(rng)));
    }
    let main_run = if runs.len() == 2 && runs[1].0 > runs[0].0 {
        1
    } else {
        0
    };
    let wants_minigap = rng.random_range(0.0..1.0) < 0.30;
    let minigap = if wants_minigap || force_minigap {
        let gap = rng.random_range(0.18..0.26);
        let offset = runs[main_run].0 * rng.random_range(0.40..0.60);
        Some((offset, gap))
    } else {
        None
    };
    Timeline {
        lead,
        tail,
        midgap,
        runs,
        main_run,
        minigap,
        noise_level,
    }
}

/// Samples the full utterance spec from the utterance's private stream.
///
/// A spoofed utterance re-draws the provenance of windows inside the
/// main run (and sometimes the other run): each window becomes a fresh
/// voice of the same generator, with the windows absorbing the run's
/// pause when there is one, so the pause layout survives spoofing
/// unchanged. `force_minigap` is applied to the first utterance of each
/// class per split; combined with the absorb rule it guarantees spoofed
/// non-speech coverage without skewing the timeline of one class.
fn sample_utterance(
    config: &CorpusConfig,
    utterance_id: &str,
    spoofed: bool,
    force_minigap: bool,
) -> UtteranceSpec {
    use rand::SeedableRng;
    let utt_seed = seeds::derive(config.seed, &format!("utterance/{utterance_id}"));
    let mut rng = ChaCha8Rng::seed_from_u64(utt_seed);
    let tl = sample_timeline(&mut rng, force_minigap);
    let crossfade_s = config.crossfade_ms / 1000.0;

    let mut units: Vec<Unit> = vec![nonspeech(tl.lead, false)];
    for (i, &(duration, f0)) in tl.runs.iter().enumerate() {
        let minigap = if i == tl.main_run { tl.minigap } else { None };
        let insert_here = spoofed && (i == tl.main_run || duration >= 0.60);
        if insert_here {
            units.extend(spoofed_run_units(
                &mut rng,
                duration,
                f0,
                minigap,
                config.mode,
                crossfade_s,
            ));
        } else {
            match minigap {
                Some((offset, gap)) => {
                    units.push(bona_speech(offset, f0));
                    units.push(nonspeech(gap, false));
                    units.push(bona_speech(duration - offset, f0));
                }
                None => units.push(bona_speech(duration, f0)),
            }
        }
        if i == 0 {
            if let Some(midgap) = tl.midgap {
                units.push(nonspeech(midgap, false));
            }
        }
    }
    units.push(nonspeech(tl.tail, false));

    let segments = units
        .into_iter()
        .enumerate()
        .map(|(index, unit)| SegmentSpec {
            kind: unit.kind,
            duration_s: unit.duration_s,
            params: GeneratorParams {
                f0_hz: unit.f0_hz,
                artifact_strength: unit.artifact_strength,
                noise_level: tl.noise_level,
                seed: seeds::derive(utt_seed, &format!("segment-{index}")),
            },
        })
        .collect();

    UtteranceSpec {
        utterance_id: utterance_id.to_string(),
        mode: config.mode,
        segments,
        crossfade_ms: config.crossfade_ms,
    }
}

/// Renders one speech run with spoofed windows.
///
/// With a pause in the run the windows absorb it: the pieces touching the
/// pause are inserts, so the pause keeps its drawn position and duration
/// and turns spoofed. Without one, interior windows replace spans of the
/// host voice. Crossfades consume material at every junction a window
/// adds, so each insert is lengthened by the consumed amount to keep
/// output duration and speech time class-independent.
fn spoofed_run_units(
    rng: &mut ChaCha8Rng,
    duration: f64,
    host_f0: f64,
    minigap: Option<(f64, f64)>,
    mode: CorpusMode,
    crossfade_s: f64,
) -> Vec<Unit> {
    match minigap {
        Some((offset, gap)) => {
            // One inserted voice owns the pause, as the host voice does in
            // the bona fide rendering: the fundamental must not change
            // across the gap, or the change itself would mark the class
            // away from any junction.
            let gap_voice = insert_voice(rng, mode);
            let mut units = windowed_span(
                rng,
                offset,
                host_f0,
                mode,
                crossfade_s,
                SpanEnd::Host,
                SpanEnd::Insert,
                Some(gap_voice),
            );
            units.push(nonspeech(gap, true));
            units.extend(windowed_span(
                rng,
                duration - offset,
                host_f0,
                mode,
                crossfade_s,
                SpanEnd::Insert,
                SpanEnd::Host,
                Some(gap_voice),
            ));
            units
        }
        None => windowed_span(
            rng,
            duration,
            host_f0,
            mode,
            crossfade_s,
            SpanEnd::Host,
            SpanEnd::Host,
            None,
        ),
    }
}

/// Draws the fundamental and artifact strength of one inserted voice.
fn insert_voice(rng: &mut ChaCha8Rng, mode: CorpusMode) -> (f64, f64) {
    let f0 = grid_f0(rng);
    let strength = match mode {
        CorpusMode::Artifact => rng.random_range(0.65..0.95),
        CorpusMode::SpliceOnly => 0.0,
    };
    (f0, strength)
}

/// Which piece kind a windowed span starts or ends with. An `Insert` end
/// sits against the run's pause, whose junction exists in the bona fide
/// rendering too and therefore needs no crossfade compensation.
#[derive(Clone, Copy, PartialEq)]
enum SpanEnd {
    Host,
    Insert,
}

/// Shortest insert window, seconds. Windows stay long relative to the
/// junction neighbourhood a stacked kernel-3 network reacts to, so the
/// inserted-speech category is dominated by frames away from junctions.
const MIN_INSERT: f64 = 0.30;
/// Target span length per insert window, seconds.
const SPAN_PER_INSERT: f64 = 0.72;

/// Splits a host-voice span into alternating host and insert pieces.
///
/// Several windows per span keep the transition cue from drowning in the
/// time average a classifier pools over: one junction pair in a hundred
/// plus frames is a weaker training signal than four. The insert count
/// scales with the span so short spans stay intact. `gap_voice` is the
/// voice of the piece sitting against the run's pause, shared by the
/// spans on both sides of it.
#[allow(clippy::too_many_arguments)]
fn windowed_span(
    rng: &mut ChaCha8Rng,
    span: f64,
    host_f0: f64,
    mode: CorpusMode,
    crossfade_s: f64,
    start: SpanEnd,
    end: SpanEnd,
    gap_voice: Option<(f64, f64)>,
) -> Vec<Unit> {
    let edge_inserts =
        usize::from(start == SpanEnd::Insert) + usize::from(end == SpanEnd::Insert);
    let hosts = |inserts: usize| inserts + 1 - edge_inserts;
    let fits = |inserts: usize| {
        MIN_PIECE * hosts(inserts) as f64 + MIN_INSERT * inserts as f64 <= span
    };
    let mut inserts = ((span / SPAN_PER_INSERT) as usize).clamp(1, 4);
    while inserts > 1 && !fits(inserts) {
        inserts -= 1;
    }

    let host_count = hosts(inserts);
    let insert_total = (span * rng.random_range(0.30..0.42))
        .max(MIN_INSERT * inserts as f64)
        .min(span - MIN_PIECE * host_count as f64);
    let host_total = span - insert_total;

    let mut host_pieces: Vec<f64> = (0..host_count).map(|_| rng.random_range(0.8..1.2)).collect();
    let weight_sum: f64 = host_pieces.iter().sum();
    for w in &mut host_pieces {
        *w = *w / weight_sum * host_total;
    }

    let total_pieces = inserts + host_count;
    let mut hosts_iter = host_pieces.into_iter();
    let mut units = Vec::with_capacity(total_pieces);
    for position in 0..total_pieces {
        let is_insert = (position % 2 == 0) == (start == SpanEnd::Insert);
        if is_insert {
            // A junction against the pause exists for both classes and
            // consumes no extra material.
            let mut extra_junctions = 2;
            let against_gap = (position == 0 && start == SpanEnd::Insert)
                || (position == total_pieces - 1 && end == SpanEnd::Insert);
            if against_gap {
                extra_junctions -= 1;
            }
            let (f0_hz, artifact_strength) = if against_gap {
                gap_voice.expect("gap voice provided with an insert end")
            } else {
                insert_voice(rng, mode)
            };
            units.push(Unit {
                kind: SegmentKind::SpoofedSpeech,
                duration_s: insert_total / inserts as f64
                    + extra_junctions as f64 * crossfade_s,
                f0_hz,
                artifact_strength,
            });
        } else {
            units.push(bona_speech(hosts_iter.next().expect("host piece"), host_f0));
        }
    }
    units
}
