//! Mono 16 kHz waveforms and 16-bit PCM WAV input/output.

use std::path::Path;

use thiserror::Error;

/// Sample rate used throughout the pipeline, in Hz.
pub const SAMPLE_RATE: u32 = 16_000;

/// Analysis frame length in milliseconds.
pub const FRAME_MS: u32 = 20;

/// Analysis frame length in samples (20 ms at 16 kHz).
pub const FRAME_LEN: usize = (SAMPLE_RATE as usize / 1000) * FRAME_MS as usize;

/// Errors from waveform construction and WAV input/output.
#[derive(Debug, Error)]
pub enum AudioError {
    #[error("waveform is empty")]
    Empty,
    #[error("sample {index} is {value}, outside [-1, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("sample {index} is not finite")]
    NotFinite { index: usize },
    #[error("expected sample rate {expected} Hz, file has {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error("expected mono 16-bit PCM, file has {channels} channel(s), {bits} bits, {format} format")]
    FormatMismatch {
        channels: u16,
        bits: u16,
        format: &'static str,
    },
    #[error("wav i/o failed: {0}")]
    Wav(#[from] hound::Error),
}

/// A finite mono waveform with samples in `[-1, 1]` at 16 kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    /// Wraps samples after checking they are non-empty, finite, and within
    /// `[-1, 1]`.
    pub fn new(samples: Vec<f64>) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::Empty);
        }
        for (index, &value) in samples.iter().enumerate() {
            if !value.is_finite() {
                return Err(AudioError::NotFinite { index });
            }
            if !(-1.0..=1.0).contains(&value) {
                return Err(AudioError::OutOfRange { index, value });
            }
        }
        Ok(Self {
            samples,
            sample_rate: SAMPLE_RATE,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Number of whole 20 ms analysis frames; a trailing partial frame is
    /// dropped.
    pub fn num_frames(&self) -> usize {
        self.samples.len() / FRAME_LEN
    }

    /// Writes the waveform as mono 16-bit PCM WAV.
    pub fn write_wav(&self, path: &Path) -> Result<(), AudioError> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(path, spec)?;
        for &sample in &self.samples {
            let quantized = (sample * i16::MAX as f64).round();
            writer.write_sample(quantized.clamp(i16::MIN as f64, i16::MAX as f64) as i16)?;
        }
        writer.finalize()?;
        Ok(())
    }

    /// Reads a mono 16-bit PCM WAV at 16 kHz.
    pub fn read_wav(path: &Path) -> Result<Self, AudioError> {
        let mut reader = hound::WavReader::open(path)?;
        let spec = reader.spec();
        if spec.sample_rate != SAMPLE_RATE {
            return Err(AudioError::SampleRateMismatch {
                expected: SAMPLE_RATE,
                actual: spec.sample_rate,
            });
        }
        if spec.channels != 1
            || spec.bits_per_sample != 16
            || spec.sample_format != hound::SampleFormat::Int
        {
            return Err(AudioError::FormatMismatch {
                channels: spec.channels,
                bits: spec.bits_per_sample,
                format: match spec.sample_format {
                    hound::SampleFormat::Int => "int",
                    hound::SampleFormat::Float => "float",
                },
            });
        }
        let samples = reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / i16::MAX as f64))
            .collect::<Result<Vec<f64>, _>>()?;
        Self::new(samples)
    }
}
