//! Synthetic speech segments and overlap-add splicing.
//!
//! Speech segments are harmonic stacks with fundamental drift, per-period
//! jitter, random harmonic phases, a syllable-rate envelope, and a touch of
//! shaped noise, levelled to a fixed expected rms so loudness carries no
//! information about a segment's length or origin. Non-speech segments are
//! low-level uniform noise. A spoofing artifact of configurable strength
//! makes speech buzzier: jitter shrinks, harmonic phases align, and the
//! spectral rolloff flattens so the artifact is visible to power-spectrum
//! features.
//!
//! [`splice`] joins segments with an equal-power raised-cosine crossfade.
//! [`synth_utterance`] synthesizes and joins a whole utterance and returns
//! the exact sample spans of every segment and every bona fide to spoof
//! transition for downstream frame labeling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioError, Waveform, SAMPLE_RATE};

/// Errors from synthesis and splicing.
#[derive(Debug, Error)]
pub enum SynthError {
    #[error("utterance has no segments")]
    NoSegments,
    #[error("segment {index}: duration {duration_s} s is not positive")]
    BadDuration { index: usize, duration_s: f64 },
    #[error("segment {index}: f0 {f0_hz} Hz outside [60, 400]")]
    BadF0 { index: usize, f0_hz: f64 },
    #[error("segment {index}: {field} {value} outside [0, 1]")]
    BadUnitParam {
        index: usize,
        field: &'static str,
        value: f64,
    },
    #[error("crossfade {crossfade_ms} ms outside [0, 40]")]
    BadCrossfade { crossfade_ms: f64 },
    #[error("segment {index} has {samples} samples, too short for a {crossfade} sample crossfade on each side")]
    SegmentTooShort {
        index: usize,
        samples: usize,
        crossfade: usize,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// What a segment contains and which class it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    BonafideSpeech,
    BonafideNonspeech,
    SpoofedSpeech,
    SpoofedNonspeech,
}

impl SegmentKind {
    pub fn is_spoofed(self) -> bool {
        matches!(self, SegmentKind::SpoofedSpeech | SegmentKind::SpoofedNonspeech)
    }

    pub fn is_speech(self) -> bool {
        matches!(self, SegmentKind::BonafideSpeech | SegmentKind::SpoofedSpeech)
    }
}

/// Per-segment generator inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Fundamental frequency for speech segments, in Hz. Ignored for
    /// non-speech.
    pub f0_hz: f64,
    /// Spoofing artifact strength in `[0, 1]`. Zero reproduces the bona
    /// fide generator exactly; only speech segments of spoofed kind apply
    /// it.
    pub artifact_strength: f64,
    /// Scales the non-speech noise floor; peak amplitude is
    /// `0.05 * noise_level`. Ignored for speech.
    pub noise_level: f64,
    /// Seed for this segment's private random stream.
    pub seed: u64,
}

/// One segment to synthesize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub kind: SegmentKind,
    pub duration_s: f64,
    pub params: GeneratorParams,
}

/// Corpus flavor: `Artifact` leaves artifact strengths as specified;
/// `SpliceOnly` forces them to zero so splice boundaries are the only
/// evidence of spoofing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusMode {
    Artifact,
    SpliceOnly,
}

impl std::fmt::Display for CorpusMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CorpusMode::Artifact => "artifact",
            CorpusMode::SpliceOnly => "splice_only",
        })
    }
}

/// Full specification of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceSpec {
    pub utterance_id: String,
    pub mode: CorpusMode,
    pub segments: Vec<SegmentSpec>,
    pub crossfade_ms: f64,
}

/// A segment's owned sample span after splicing. Crossfade regions are
/// split at their midpoint between the two neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlacedSegment {
    pub kind: SegmentKind,
    pub start_sample: usize,
    pub end_sample: usize,
}

/// Sample span of one crossfade between segments of different classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionSpan {
    pub start_sample: usize,
    pub end_sample: usize,
}

/// Exact placement of segments and class transitions in a spliced
/// utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpliceLayout {
    pub segments: Vec<PlacedSegment>,
    pub transitions: Vec<TransitionSpan>,
}

impl UtteranceSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.segments.is_empty() {
            return Err(SynthError::NoSegments);
        }
        if !(0.0..=40.0).contains(&self.crossfade_ms) || !self.crossfade_ms.is_finite() {
            return Err(SynthError::BadCrossfade {
                crossfade_ms: self.crossfade_ms,
            });
        }
        let crossfade = crossfade_samples(self.crossfade_ms);
        for (index, seg) in self.segments.iter().enumerate() {
            if !(seg.duration_s > 0.0) {
                return Err(SynthError::BadDuration {
                    index,
                    duration_s: seg.duration_s,
                });
            }
            if seg.kind.is_speech() && !(60.0..=400.0).contains(&seg.params.f0_hz) {
                return Err(SynthError::BadF0 {
                    index,
                    f0_hz: seg.params.f0_hz,
                });
            }
            for (field, value) in [
                ("artifact_strength", seg.params.artifact_strength),
                ("noise_level", seg.params.noise_level),
            ] {
                if !(0.0..=1.0).contains(&value) {
                    return Err(SynthError::BadUnitParam { index, field, value });
                }
            }
            let samples = duration_samples(seg.duration_s);
            if samples < 2 * crossfade.max(1) {
                return Err(SynthError::SegmentTooShort {
                    index,
                    samples,
                    crossfade,
                });
            }
        }
        Ok(())
    }
}

/// Segment duration in whole samples.
pub fn duration_samples(duration_s: f64) -> usize {
    (duration_s * SAMPLE_RATE as f64).round() as usize
}

/// Crossfade length in whole samples.
pub fn crossfade_samples(crossfade_ms: f64) -> usize {
    (crossfade_ms * SAMPLE_RATE as f64 / 1000.0).round() as usize
}

/// Root-mean-square target for speech segments.
const SPEECH_RMS: f64 = 0.12;

/// Synthesizes one segment. The same spec always produces the same
/// samples, and a spoofed speech segment with zero artifact strength is
/// sample-identical to the bona fide segment with the same parameters.
pub fn synth_segment(spec: &SegmentSpec) -> Result<Waveform, SynthError> {
    let n = duration_samples(spec.duration_s);
    if n == 0 {
        return Err(SynthError::BadDuration {
            index: 0,
            duration_s: spec.duration_s,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.params.seed);
    let samples = if spec.kind.is_speech() {
        let strength = if spec.kind.is_spoofed() {
            spec.params.artifact_strength
        } else {
            0.0
        };
        speech_samples(n, spec.params.f0_hz, strength, &mut rng)
    } else {
        nonspeech_samples(n, spec.params.noise_level, &mut rng)
    };
    Ok(Waveform::new(samples)?)
}

fn speech_samples(n: usize, f0: f64, strength: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    // The artifact makes the voice buzzier: steadier pitch, coherent
    // harmonic phases, flatter rolloff.
    let jitter_sd = 0.02 * (1.0 - strength);
    let rolloff = 1.4 - 0.55 * strength;
    let harmonics = ((0.475 * fs / f0) as usize).clamp(1, 24);

    let amplitudes: Vec<f64> = (1..=harmonics)
        .map(|h| (h as f64).powf(-rolloff))
        .collect();
    let phases: Vec<f64> = (0..harmonics)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU) * (1.0 - strength))
        .collect();

    let envelope_rate = rng.random_range(3.0..5.0);
    let envelope_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let drift_rate = rng.random_range(0.3..0.8);
    let drift_phase = rng.random_range(0.0..std::f64::consts::TAU);

    let mut fundamental_phase = 0.0f64;
    let mut period_jitter = draw_jitter(rng, jitter_sd);
    let mut out = Vec::with_capacity(n);
    let mut noise_state = 0.0f64;
    for i in 0..n {
        let t = i as f64 / fs;
        let drift = 1.0 + 0.03 * (std::f64::consts::TAU * drift_rate * t + drift_phase).sin();
        let f_inst = f0 * drift * (1.0 + period_jitter);
        fundamental_phase += std::f64::consts::TAU * f_inst / fs;
        if fundamental_phase >= std::f64::consts::TAU {
            fundamental_phase -= std::f64::consts::TAU;
            period_jitter = draw_jitter(rng, jitter_sd);
        }
        let mut sample = 0.0;
        for (h, (&a, &p)) in amplitudes.iter().zip(&phases).enumerate() {
            sample += a * ((h + 1) as f64 * fundamental_phase + p).sin();
        }
        let envelope = 0.3
            + 0.7 * (0.5 - 0.5 * (std::f64::consts::TAU * envelope_rate * t + envelope_phase).cos());
        // One-pole lowpass over white noise for a dull breath floor.
        noise_state = 0.95 * noise_state + 0.05 * rng.random_range(-1.0..1.0);
        out.push(sample * envelope + noise_state * 0.05);
    }
    // Analytic gain. The expected power of the modulated stack is
    // E[env^2] * sum(a_h^2) / 2 regardless of phases, jitter, or length;
    // env = 0.65 - 0.35 cos gives E[env^2] = 0.65^2 + 0.35^2 / 2.
    // Normalizing by the realized peak instead would tie loudness to
    // segment length (short segments see fewer envelope crests), letting
    // a detector separate inserted speech from host speech by level
    // alone. The worst-case peak over all strengths stays below 0.9.
    let envelope_power = 0.65 * 0.65 + 0.35 * 0.35 / 2.0;
    let stack_power: f64 = amplitudes.iter().map(|a| a * a).sum::<f64>() / 2.0;
    let gain = SPEECH_RMS / (envelope_power * stack_power).sqrt();
    for v in &mut out {
        *v *= gain;
    }
    out
}

fn draw_jitter(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    // Uniform with matching standard deviation; bounded, which keeps the
    // instantaneous frequency well away from zero.
    rng.random_range(-1.0..1.0) * sd * 3.0f64.sqrt()
}

fn nonspeech_samples(n: usize, noise_level: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let peak = 0.05 * noise_level;
    (0..n).map(|_| rng.random_range(-1.0..1.0) * peak).collect()
}

/// Joins segments with an equal-power raised-cosine crossfade.
///
/// With fade length `c` samples, the output length is the sum of segment
/// lengths minus `c` per junction; `c == 0` is plain concatenation. At
/// offset `i` of the fade the outgoing segment is weighted
/// `cos(pi/2 * u)` and the incoming `sin(pi/2 * u)` with
/// `u = (i + 0.5) / c`, so the squared weights always sum to one.
pub fn splice(segments: &[Waveform], crossfade_ms: f64) -> Result<Waveform, SynthError> {
    if segments.is_empty() {
        return Err(SynthError::NoSegments);
    }
    if !(0.0..=40.0).contains(&crossfade_ms) || !crossfade_ms.is_finite() {
        return Err(SynthError::BadCrossfade { crossfade_ms });
    }
    let c = crossfade_samples(crossfade_ms);
    for (index, seg) in segments.iter().enumerate() {
        if seg.len() < 2 * c.max(1) {
            return Err(SynthError::SegmentTooShort {
                index,
                samples: seg.len(),
                crossfade: c,
            });
        }
    }
    let total: usize = segments.iter().map(Waveform::len).sum();
    let mut out = Vec::with_capacity(total - (segments.len() - 1) * c);
    out.extend_from_slice(segments[0].samples());
    for seg in &segments[1..] {
        let incoming = seg.samples();
        let start = out.len() - c;
        for i in 0..c {
            let u = (i as f64 + 0.5) / c as f64;
            let w_out = (std::f64::consts::FRAC_PI_2 * u).cos();
            let w_in = (std::f64::consts::FRAC_PI_2 * u).sin();
            out[start + i] = out[start + i] * w_out + incoming[i] * w_in;
        }
        out.extend_from_slice(&incoming[c..]);
    }
    Ok(Waveform::new(out)?)
}

/// Synthesizes all segments of an utterance, splices them, and reports the
/// resulting layout.
///
/// In [`CorpusMode::SpliceOnly`] artifact strengths are forced to zero, so
/// segment content never betrays the spoof. Transition spans cover each
/// crossfade between segments of different classes; junctions between
/// same-class segments are not transitions. With a zero crossfade no spans
/// are recorded.
pub fn synth_utterance(spec: &UtteranceSpec) -> Result<(Waveform, SpliceLayout), SynthError> {
    spec.validate()?;
    let waves: Vec<Waveform> = spec
        .segments
        .iter()
        .map(|seg| {
            let mut seg = seg.clone();
            if spec.mode == CorpusMode::SpliceOnly {
                seg.params.artifact_strength = 0.0;
            }
            synth_segment(&seg)
        })
        .collect::<Result<_, _>>()?;
    let wave = splice(&waves, spec.crossfade_ms)?;
    let c = crossfade_samples(spec.crossfade_ms);

    let mut segments = Vec::with_capacity(spec.segments.len());
    let mut transitions = Vec::new();
    let mut offset = 0usize;
    let mut previous_mid = 0usize;
    for (i, seg) in waves.iter().enumerate() {
        offset += seg.len();
        let is_last = i + 1 == waves.len();
        if !is_last {
            offset -= c;
        }
        // Overlap with the next segment occupies the last c samples placed.
        let end = if is_last { offset } else { offset + c };
        let mid = if is_last { end } else { offset + c / 2 };
        segments.push(PlacedSegment {
            kind: spec.segments[i].kind,
            start_sample: previous_mid,
            end_sample: mid,
        });
        previous_mid = mid;
        if !is_last && c > 0 {
            let next_kind = spec.segments[i + 1].kind;
            if spec.segments[i].kind.is_spoofed() != next_kind.is_spoofed() {
                transitions.push(TransitionSpan {
                    start_sample: offset,
                    end_sample: offset + c,
                });
            }
        }
    }
    Ok((wave, SpliceLayout { segments, transitions }))
}
