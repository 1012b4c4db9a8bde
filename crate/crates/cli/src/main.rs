//! Command-line surface for the splicecam pipeline.
//!
//! Subcommands cover the full loop: `gen-corpus` synthesizes a spliced
//! corpus with ground truth, `train` fits the countermeasure, `explain`
//! dumps per-frame relevance maps, `rcq-report` aggregates them per frame
//! category, `eer` scores a score file, and `render` draws one utterance.
//! Every artifact-writing command also emits a run manifest listing its
//! inputs (with hashes), its outputs, and a hash of its own configuration,
//! so a finished directory documents how it was produced.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use splicecam::corpus::{generate_corpus, load_split, CorpusConfig, SplitSpec};
use splicecam::eval::{eer, EerResult, GroundTruth, ScoredTrial};
use splicecam::explain::{explain_split, load_explain_dir, write_explain_dir, UtteranceExplanation};
use splicecam::features::extract_features;
use splicecam::gradcam::TargetClass;
use splicecam::model::{ModelConfig, ModelState};
use splicecam::rcq::{
    bin_analysis, build_report, category_means, AnalyzedSample, BinAnalysis, RcqReport,
    SampleFilter,
};
use splicecam::render::{render_pgm, render_svg};
use splicecam::synth::CorpusMode;
use splicecam::train::{train, write_log_csv, LabeledFeatures, SoftmaxMse, TrainConfig};

#[derive(Parser)]
#[command(
    name = "splicecam",
    version = splicecam::TOOL_VERSION,
    about = "Partial-spoof countermeasure testbed: corpus synthesis, training, \
             frame-level relevance maps, and RCQ reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a spliced corpus with frame-level ground truth.
    GenCorpus(GenCorpusArgs),
    /// Train the countermeasure on a corpus.
    Train(TrainArgs),
    /// Score a split and dump per-frame relevance maps.
    Explain(ExplainArgs),
    /// Aggregate an explanation directory into RCQ reports.
    RcqReport(RcqReportArgs),
    /// Compute the equal error rate of a score file.
    Eer(EerArgs),
    /// Render one explained utterance as SVG (and optionally PGM).
    Render(RenderArgs),
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenCorpus(args) => args.run(),
        Command::Train(args) => args.run(),
        Command::Explain(args) => args.run(),
        Command::RcqReport(args) => args.run(),
        Command::Eer(args) => args.run(),
        Command::Render(args) => args.run(),
    }
}

/// Provenance record written beside every command's outputs.
#[derive(Serialize)]
struct RunManifest {
    tool_version: String,
    command: String,
    /// SHA-256 of the command's canonical configuration line.
    config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    corpus_dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint_path: Option<String>,
    /// Input files with their hashes at run time.
    inputs: Vec<FileHash>,
    /// Every artifact this run emitted.
    artifacts: Vec<String>,
}

#[derive(Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

impl RunManifest {
    fn new(command: &str, config_line: &str) -> Self {
        Self {
            tool_version: splicecam::TOOL_VERSION.to_string(),
            command: command.to_string(),
            config_hash: sha256_hex(config_line.as_bytes()),
            seed: None,
            corpus_dir: None,
            checkpoint_path: None,
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("serializable manifest");
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        write!(out, "{byte:02x}").expect("writing to string");
    }
    out
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Artifact,
    #[value(name = "splice_only", alias = "splice-only")]
    SpliceOnly,
}

impl From<ModeArg> for CorpusMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Artifact => CorpusMode::Artifact,
            ModeArg::SpliceOnly => CorpusMode::SpliceOnly,
        }
    }
}

/// Splits a per-split utterance count into classes, bona fide first.
fn class_counts(total: usize) -> SplitSpec {
    SplitSpec {
        bonafide: total - total / 2,
        spoofed: total / 2,
    }
}

#[derive(Args)]
struct GenCorpusArgs {
    /// Output corpus directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Training utterances (half bona fide, half spoofed).
    #[arg(long, value_name = "N")]
    train: usize,
    /// Development utterances.
    #[arg(long, value_name = "N")]
    dev: usize,
    /// Evaluation utterances.
    #[arg(long, value_name = "N")]
    eval: usize,
    /// Whether spoofed speech carries a spectral artifact or only splices.
    #[arg(long, value_enum, default_value = "artifact")]
    mode: ModeArg,
    /// Crossfade length at each junction, in milliseconds (0 to 40).
    #[arg(long, value_name = "F", default_value_t = 20.0)]
    crossfade_ms: f64,
    /// Base seed; every utterance derives its own stream from it.
    #[arg(long, value_name = "S", default_value_t = 1)]
    seed: u64,
}

impl GenCorpusArgs {
    fn run(self) -> Result<()> {
        if !(0.0..=40.0).contains(&self.crossfade_ms) || !self.crossfade_ms.is_finite() {
            bail!("--crossfade-ms {} is outside [0, 40]", self.crossfade_ms);
        }
        for (name, total) in [("train", self.train), ("dev", self.dev), ("eval", self.eval)] {
            if total < 2 {
                bail!("--{name} {total} is too small: each split needs at least one utterance per class");
            }
        }
        let mode: CorpusMode = self.mode.into();
        let config = CorpusConfig {
            mode,
            crossfade_ms: self.crossfade_ms,
            seed: self.seed,
            train: class_counts(self.train),
            dev: class_counts(self.dev),
            eval: class_counts(self.eval),
        };
        let manifest = generate_corpus(&config, &self.out)?;

        let config_line = format!(
            "gen-corpus mode={mode} crossfade_ms={} seed={} train={} dev={} eval={}",
            self.crossfade_ms, self.seed, self.train, self.dev, self.eval
        );
        let mut run = RunManifest::new("gen-corpus", &config_line);
        run.seed = Some(self.seed);
        run.corpus_dir = Some(self.out.display().to_string());
        run.artifacts = manifest.files.iter().map(|f| f.path.clone()).collect();
        run.artifacts.push("manifest.json".to_string());
        run.write(&self.out.join("run.json"))?;

        println!("corpus_dir {}", self.out.display());
        println!("files {}", manifest.files.len());
        println!(
            "manifest_sha256 {}",
            sha256_file(&self.out.join("manifest.json"))?
        );
        Ok(())
    }
}

/// Loads a split and extracts features for training or scoring.
fn load_labeled(corpus: &Path, split: &str) -> Result<Vec<LabeledFeatures>> {
    load_split(corpus, split)
        .with_context(|| format!("loading split {split:?} from {}", corpus.display()))?
        .into_iter()
        .map(|item| {
            let features = extract_features(&item.waveform)
                .with_context(|| format!("featurizing {}", item.utterance_id))?;
            let ground_truth = if item.sidecar.is_partially_spoofed() {
                GroundTruth::Spoofed
            } else {
                GroundTruth::Bonafide
            };
            Ok(LabeledFeatures {
                utterance_id: item.utterance_id,
                features,
                ground_truth,
            })
        })
        .collect()
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus directory from gen-corpus.
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Checkpoint file to write (JSON). The training log lands beside it.
    #[arg(long, value_name = "CKPT")]
    out: PathBuf,
    /// Maximum training epochs.
    #[arg(long, value_name = "N", default_value_t = 60)]
    epochs: usize,
    /// Training seed for init and shuffles.
    #[arg(long, value_name = "S", default_value_t = 1)]
    seed: u64,
    /// Adam learning rate.
    #[arg(long, value_name = "LR", default_value_t = 1e-3)]
    learning_rate: f64,
    /// Utterances per optimizer step.
    #[arg(long, value_name = "B", default_value_t = 2)]
    batch_size: usize,
    /// Epochs without a dev EER improvement before stopping early.
    #[arg(long, value_name = "P", default_value_t = 20)]
    patience: usize,
    /// Epochs for the learning rate to halve.
    #[arg(long, value_name = "H", default_value_t = 60)]
    lr_half_life: usize,
}

impl TrainArgs {
    fn run(self) -> Result<()> {
        let train_set = load_labeled(&self.corpus, "train")?;
        let dev_set = load_labeled(&self.corpus, "dev")?;
        let config = TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: self.seed,
            ..TrainConfig::default()
        };
        let outcome = train(&train_set, &dev_set, ModelConfig::default(), &config, &SoftmaxMse)?;

        for record in &outcome.log {
            println!(
                "epoch {} train_loss {:.6} dev_eer {:.4}{}",
                record.epoch,
                record.train_loss,
                record.dev_eer,
                if record.is_best { " *" } else { "" }
            );
        }
        outcome.best_model.save(&self.out)?;
        let log_path = self.out.with_extension("log.csv");
        write_log_csv(&outcome.log, &log_path)?;

        let config_line = format!(
            "train corpus={} epochs={} seed={} learning_rate={} batch_size={} patience={}",
            self.corpus.display(),
            self.epochs,
            self.seed,
            self.learning_rate,
            self.batch_size,
            self.patience
        );
        let mut run = RunManifest::new("train", &config_line);
        run.seed = Some(self.seed);
        run.corpus_dir = Some(self.corpus.display().to_string());
        run.checkpoint_path = Some(self.out.display().to_string());
        run.input(&self.corpus.join("manifest.json"))?;
        run.artifacts = vec![
            self.out.display().to_string(),
            log_path.display().to_string(),
        ];
        run.write(&self.out.with_extension("run.json"))?;

        println!("best_epoch {}", outcome.best_epoch);
        println!("best_dev_eer {:.4}", outcome.best_dev_eer);
        println!("checkpoint {}", self.out.display());
        println!("log {}", log_path.display());
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TargetClassArg {
    Spoof,
    Bonafide,
    Both,
}

#[derive(Args)]
struct ExplainArgs {
    /// Corpus directory the split lives in.
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Trained checkpoint from the train command.
    #[arg(long, value_name = "CKPT")]
    ckpt: PathBuf,
    /// Split to explain.
    #[arg(long, value_name = "SPLIT", default_value = "eval")]
    split: String,
    /// Target classes to report on downstream. Maps for both classes are
    /// always computed and stored; this selects which ones reports cover.
    #[arg(long, value_enum, default_value = "both")]
    target_class: TargetClassArg,
    /// Output directory for per-utterance CSVs, scores.csv, index.json.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

impl ExplainArgs {
    fn run(self) -> Result<()> {
        if !["train", "dev", "eval"].contains(&self.split.as_str()) {
            bail!("--split {:?} is not one of train, dev, eval", self.split);
        }
        let model = ModelState::load(&self.ckpt)?;
        let explanations = explain_split(&model, &self.corpus, &self.split)?;
        let mut index = write_explain_dir(
            &self.out,
            &self.corpus.display().to_string(),
            &self.split,
            &explanations,
        )?;
        let selected = match self.target_class {
            TargetClassArg::Both => vec![TargetClass::Bonafide, TargetClass::Spoof],
            TargetClassArg::Bonafide => vec![TargetClass::Bonafide],
            TargetClassArg::Spoof => vec![TargetClass::Spoof],
        };
        if index.target_classes != selected {
            index.target_classes = selected;
            let index_path = self.out.join("index.json");
            let mut text = serde_json::to_string_pretty(&index).expect("serializable index");
            text.push('\n');
            std::fs::write(&index_path, text)
                .with_context(|| format!("writing {}", index_path.display()))?;
        }

        let config_line = format!(
            "explain corpus={} ckpt={} split={} target_class={}",
            self.corpus.display(),
            self.ckpt.display(),
            self.split,
            index
                .target_classes
                .iter()
                .map(|c| c.as_str())
                .collect::<Vec<_>>()
                .join("+")
        );
        let mut run = RunManifest::new("explain", &config_line);
        run.corpus_dir = Some(self.corpus.display().to_string());
        run.checkpoint_path = Some(self.ckpt.display().to_string());
        run.input(&self.ckpt)?;
        run.input(&self.corpus.join("manifest.json"))?;
        run.artifacts = index
            .records
            .iter()
            .map(|r| r.csv_path.clone())
            .chain(["scores.csv".to_string(), "index.json".to_string()])
            .collect();
        run.write(&self.out.join("run.json"))?;

        println!("explained {}", index.records.len());
        println!("explain_dir {}", self.out.display());
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FilterArg {
    All,
    Correct,
    Incorrect,
    Bins,
}

impl FilterArg {
    fn as_str(self) -> &'static str {
        match self {
            FilterArg::All => "all",
            FilterArg::Correct => "correct",
            FilterArg::Incorrect => "incorrect",
            FilterArg::Bins => "bins",
        }
    }
}

/// Top-level report document for the non-bin filters.
#[derive(Serialize)]
struct RcqDocument {
    tool_version: String,
    filter: &'static str,
    threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    eer_percent: Option<f64>,
    num_spoofed_samples: usize,
    reports: Vec<RcqReport>,
}

/// Top-level document for the eleven-group bin analysis.
#[derive(Serialize)]
struct BinDocument {
    tool_version: String,
    filter: &'static str,
    threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    eer_percent: Option<f64>,
    num_spoofed_samples: usize,
    analyses: Vec<BinAnalysis>,
}

#[derive(Args)]
struct RcqReportArgs {
    /// Explanation directory from the explain command.
    #[arg(long, value_name = "DIR")]
    explain_dir: PathBuf,
    /// Sample subset: all spoofed, correctly classified only, misclassified
    /// only, or the eleven-group score-bin analysis.
    #[arg(long, value_enum, default_value = "all")]
    filter: FilterArg,
    /// Report file; .csv extension selects CSV, anything else JSON. The bin
    /// analysis is JSON only.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Decision threshold override; defaults to the EER threshold computed
    /// over every sample in the explanation directory.
    #[arg(long, value_name = "T")]
    threshold: Option<f64>,
}

impl RcqReportArgs {
    fn run(self) -> Result<()> {
        let (index, explanations) = load_explain_dir(&self.explain_dir)?;

        let eer_result: Option<EerResult> = if self.threshold.is_none() {
            let trials: Vec<ScoredTrial> = explanations
                .iter()
                .map(|e| ScoredTrial {
                    utterance_id: e.utterance_id.clone(),
                    score: e.p_spoof,
                    ground_truth: e.ground_truth,
                })
                .collect();
            Some(eer(&trials)?)
        } else {
            None
        };
        let threshold = match self.threshold {
            Some(t) => {
                if !t.is_finite() {
                    bail!("--threshold must be finite");
                }
                t
            }
            None => eer_result.expect("computed when no override").threshold,
        };

        let spoofed: Vec<&UtteranceExplanation> = explanations
            .iter()
            .filter(|e| e.ground_truth == GroundTruth::Spoofed)
            .collect();

        let is_csv = self.out.extension().and_then(|e| e.to_str()) == Some("csv");
        let text = if self.filter == FilterArg::Bins {
            if is_csv {
                bail!("the bin analysis is emitted as JSON; use a non-.csv output path");
            }
            let analyses = index
                .target_classes
                .iter()
                .map(|&tc| {
                    let samples = analyzed_samples(&spoofed, tc, threshold);
                    bin_analysis(&samples, tc, threshold)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let doc = BinDocument {
                tool_version: splicecam::TOOL_VERSION.to_string(),
                filter: self.filter.as_str(),
                threshold,
                eer_percent: eer_result.map(|r| r.eer_percent),
                num_spoofed_samples: spoofed.len(),
                analyses,
            };
            let mut text = serde_json::to_string_pretty(&doc).expect("serializable document");
            text.push('\n');
            text
        } else {
            let sample_filter = match self.filter {
                FilterArg::All => SampleFilter::All,
                FilterArg::Correct => SampleFilter::Correct,
                FilterArg::Incorrect => SampleFilter::Incorrect,
                FilterArg::Bins => unreachable!("handled above"),
            };
            let reports = index
                .target_classes
                .iter()
                .map(|&tc| {
                    let samples = analyzed_samples(&spoofed, tc, threshold);
                    let kept: Vec<&AnalyzedSample> = samples
                        .iter()
                        .filter(|s| match sample_filter {
                            SampleFilter::All => true,
                            SampleFilter::Correct => s.correct,
                            SampleFilter::Incorrect => !s.correct,
                        })
                        .collect();
                    let maps: Vec<_> = kept.iter().map(|s| &s.map).collect();
                    let annotations: Vec<_> = kept.iter().map(|s| &s.annotation).collect();
                    let means = category_means(&maps, &annotations)?;
                    Ok(build_report(&means, tc, sample_filter, kept.len()))
                })
                .collect::<Result<Vec<_>, splicecam::rcq::RcqError>>()?;
            let doc = RcqDocument {
                tool_version: splicecam::TOOL_VERSION.to_string(),
                filter: self.filter.as_str(),
                threshold,
                eer_percent: eer_result.map(|r| r.eer_percent),
                num_spoofed_samples: spoofed.len(),
                reports,
            };
            if is_csv {
                rcq_csv(&doc)
            } else {
                let mut text = serde_json::to_string_pretty(&doc).expect("serializable document");
                text.push('\n');
                text
            }
        };
        std::fs::write(&self.out, text)
            .with_context(|| format!("writing {}", self.out.display()))?;

        let config_line = format!(
            "rcq-report explain_dir={} filter={} threshold={:?}",
            self.explain_dir.display(),
            self.filter.as_str(),
            self.threshold
        );
        let mut run = RunManifest::new("rcq-report", &config_line);
        run.input(&self.explain_dir.join("index.json"))?;
        run.artifacts = vec![self.out.display().to_string()];
        run.write(&run_manifest_path(&self.out))?;

        println!("threshold {threshold}");
        if let Some(r) = eer_result {
            println!("eer_percent {:.4}", r.eer_percent);
        }
        println!("report {}", self.out.display());
        Ok(())
    }
}

/// Pairs each spoofed sample with its map for one target class and its
/// correctness at the threshold.
fn analyzed_samples(
    spoofed: &[&UtteranceExplanation],
    target_class: TargetClass,
    threshold: f64,
) -> Vec<AnalyzedSample> {
    let map_index = match target_class {
        TargetClass::Bonafide => 0,
        TargetClass::Spoof => 1,
    };
    spoofed
        .iter()
        .map(|e| AnalyzedSample {
            utterance_id: e.utterance_id.clone(),
            p_spoof: e.p_spoof,
            correct: e.p_spoof >= threshold,
            map: e.maps[map_index].clone(),
            annotation: e.annotation.clone(),
        })
        .collect()
}

/// CSV rendering of a non-bin report document: one stanza per target class
/// with metadata comment lines, absent values as n/a.
fn rcq_csv(doc: &RcqDocument) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| x.to_string());
    let mut out = String::new();
    for report in &doc.reports {
        writeln!(out, "# target_class,{}", report.target_class).expect("writing to string");
        writeln!(out, "# filter,{}", report.filter).expect("writing to string");
        writeln!(out, "# threshold,{}", doc.threshold).expect("writing to string");
        writeln!(out, "# num_samples,{}", report.num_samples).expect("writing to string");
        writeln!(out, "# total_frames,{}", report.total_frames).expect("writing to string");
        writeln!(out, "# overall_mean,{}", fmt(report.overall_mean)).expect("writing to string");
        writeln!(out, "category,frames,mean_score,rcq_percent").expect("writing to string");
        for row in &report.categories {
            writeln!(
                out,
                "{},{},{},{}",
                row.category.as_str(),
                row.frames,
                fmt(row.mean_score),
                fmt(row.rcq_percent)
            )
            .expect("writing to string");
        }
        out.push('\n');
    }
    out
}

/// `report.json` gets `report.json.run.json` beside it.
fn run_manifest_path(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("artifact");
    out.with_file_name(format!("{name}.run.json"))
}

#[derive(Args)]
struct EerArgs {
    /// Two-column score CSV (utterance_id, p_spoof), as written by explain.
    /// Ground truth is inferred from the utterance ids.
    #[arg(long, value_name = "FILE")]
    scores: PathBuf,
}

impl EerArgs {
    fn run(self) -> Result<()> {
        let text = std::fs::read_to_string(&self.scores)
            .with_context(|| format!("reading {}", self.scores.display()))?;
        let trials = parse_score_file(&text)?;
        let result = eer(&trials)?;
        println!("eer_percent {:.2}", result.eer_percent);
        println!("threshold {}", result.threshold);
        Ok(())
    }
}

/// Parses a score CSV into trials, inferring ground truth from ids.
fn parse_score_file(text: &str) -> Result<Vec<ScoredTrial>> {
    let mut trials = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || (i == 0 && line == "utterance_id,p_spoof") {
            continue;
        }
        let (id, score) = line
            .split_once(',')
            .with_context(|| format!("line {}: expected utterance_id,p_spoof", i + 1))?;
        let score: f64 = score
            .trim()
            .parse()
            .with_context(|| format!("line {}: bad score {score:?}", i + 1))?;
        let ground_truth = truth_from_id(id)
            .with_context(|| format!("line {}: cannot infer ground truth from id {id:?}", i + 1))?;
        trials.push(ScoredTrial {
            utterance_id: id.to_string(),
            score,
            ground_truth,
        });
    }
    Ok(trials)
}

/// Reads the class token corpus ids carry (`..._bona_...` / `..._spoof_...`).
fn truth_from_id(id: &str) -> Option<GroundTruth> {
    let bona = id.contains("bona");
    let spoof = id.contains("spoof");
    match (bona, spoof) {
        (true, false) => Some(GroundTruth::Bonafide),
        (false, true) => Some(GroundTruth::Spoofed),
        _ => None,
    }
}

#[derive(Args)]
struct RenderArgs {
    /// Utterance id to render, as listed in the explanation index.
    #[arg(long, value_name = "ID")]
    utterance: String,
    /// Explanation directory from the explain command.
    #[arg(long, value_name = "DIR")]
    explain_dir: PathBuf,
    /// Output SVG path.
    #[arg(long, value_name = "SVG")]
    out: PathBuf,
    /// Corpus directory override; defaults to the one recorded at explain
    /// time.
    #[arg(long, value_name = "DIR")]
    corpus: Option<PathBuf>,
    /// Also write the heat strips as a plain-text PGM image.
    #[arg(long, value_name = "FILE")]
    pgm: Option<PathBuf>,
}

impl RenderArgs {
    fn run(self) -> Result<()> {
        let (index, explanations) = load_explain_dir(&self.explain_dir)?;
        let position = index
            .records
            .iter()
            .position(|r| r.utterance_id == self.utterance)
            .with_context(|| {
                format!(
                    "utterance {:?} is not in {}",
                    self.utterance,
                    self.explain_dir.join("index.json").display()
                )
            })?;
        let record = &index.records[position];
        let explanation = &explanations[position];

        let corpus_dir = self
            .corpus
            .clone()
            .unwrap_or_else(|| PathBuf::from(&index.corpus_dir));
        let wav_path = corpus_dir.join(&record.wav_path);
        let wave = splicecam::audio::Waveform::read_wav(&wav_path)
            .with_context(|| format!("reading {}", wav_path.display()))?;

        let svg = render_svg(&wave, explanation)?;
        std::fs::write(&self.out, svg)
            .with_context(|| format!("writing {}", self.out.display()))?;
        let mut artifacts = vec![self.out.display().to_string()];
        if let Some(pgm_path) = &self.pgm {
            let pgm = render_pgm(explanation, 24)?;
            std::fs::write(pgm_path, pgm)
                .with_context(|| format!("writing {}", pgm_path.display()))?;
            artifacts.push(pgm_path.display().to_string());
        }

        let config_line = format!(
            "render utterance={} explain_dir={}",
            self.utterance,
            self.explain_dir.display()
        );
        let mut run = RunManifest::new("render", &config_line);
        run.input(&self.explain_dir.join("index.json"))?;
        run.input(&wav_path)?;
        run.artifacts = artifacts;
        run.write(&run_manifest_path(&self.out))?;

        println!("svg {}", self.out.display());
        Ok(())
    }
}
