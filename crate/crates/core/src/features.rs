//! Log mel filterbank features on the 20 ms frame grid.
//!
//! Each non-overlapping 320-sample frame is Hann-windowed, zero-padded to a
//! 512-point transform, and reduced to 64 triangular mel-band energies over
//! 0 to 8 kHz. Energies are floored at `1e-10` before the natural log, so a
//! digitally silent frame maps to a constant `ln(1e-10)` in every band.
//!
//! The frame grid matches the annotation grid exactly: feature frame `t`
//! covers the same samples as label frame `t`, with no overlap and no
//! lookahead, so Grad-CAM scores line up with frame labels by index.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::audio::{Waveform, FRAME_LEN, SAMPLE_RATE};

/// Number of mel bands.
pub const NUM_FILTERS: usize = 64;

/// DFT length; frames are zero-padded from 320 to this.
pub const FFT_SIZE: usize = 512;

/// Power floor applied before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

/// Errors from feature extraction.
#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("waveform has {samples} samples, shorter than one {frame} sample frame")]
    TooShort { samples: usize, frame: usize },
}

/// Feature matrix of shape `[num_frames, NUM_FILTERS]`, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    values: Vec<f64>,
    num_frames: usize,
}

impl FeatureMap {
    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_filters(&self) -> usize {
        NUM_FILTERS
    }

    /// One frame's band energies.
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * NUM_FILTERS..(t + 1) * NUM_FILTERS]
    }

    pub fn value(&self, t: usize, band: usize) -> f64 {
        self.values[t * NUM_FILTERS + band]
    }

    /// Flat row-major values, frame-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Transposed copy laid out `[NUM_FILTERS, num_frames]`, the layout the
    /// model's convolution expects (bands as input channels).
    pub fn to_channels_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        for t in 0..self.num_frames {
            for b in 0..NUM_FILTERS {
                out[b * self.num_frames + t] = self.values[t * NUM_FILTERS + b];
            }
        }
        out
    }
}

/// HTK mel scale.
fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters as dense weights over the non-negative DFT bins.
///
/// Filter `m` rises from edge `m` to edge `m + 1` and falls to edge
/// `m + 2`, where the 66 edges are equally spaced on the mel scale between
/// 0 Hz and half the sample rate. Peaks are unit height. A filter narrower
/// than the bin spacing can end up with all-zero weights; its band then
/// stays at the log floor, which downstream layers treat as a constant.
pub fn mel_filterbank() -> Vec<Vec<f64>> {
    let num_bins = FFT_SIZE / 2 + 1;
    let bin_hz = SAMPLE_RATE as f64 / FFT_SIZE as f64;
    let max_mel = hz_to_mel(SAMPLE_RATE as f64 / 2.0);
    let edges_hz: Vec<f64> = (0..NUM_FILTERS + 2)
        .map(|i| mel_to_hz(max_mel * i as f64 / (NUM_FILTERS + 1) as f64))
        .collect();
    (0..NUM_FILTERS)
        .map(|m| {
            let (lo, center, hi) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
            (0..num_bins)
                .map(|bin| {
                    let f = bin as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= center {
                        (f - lo) / (center - lo)
                    } else {
                        (hi - f) / (hi - center)
                    }
                })
                .collect()
        })
        .collect()
}

/// Periodic Hann window of length [`FRAME_LEN`].
fn hann_window() -> Vec<f64> {
    (0..FRAME_LEN)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / FRAME_LEN as f64).cos()))
        .collect()
}

/// Extracts the log mel feature matrix for a waveform.
///
/// Produces exactly `waveform.num_frames()` rows; trailing samples beyond
/// the last whole frame are ignored.
pub fn extract_features(waveform: &Waveform) -> Result<FeatureMap, FeatureError> {
    let num_frames = waveform.num_frames();
    if num_frames == 0 {
        return Err(FeatureError::TooShort {
            samples: waveform.len(),
            frame: FRAME_LEN,
        });
    }
    let window = hann_window();
    let filters = mel_filterbank();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(FFT_SIZE);
    let samples = waveform.samples();
    let num_bins = FFT_SIZE / 2 + 1;

    let mut values = Vec::with_capacity(num_frames * NUM_FILTERS);
    let mut buffer = vec![Complex::new(0.0, 0.0); FFT_SIZE];
    let mut power = vec![0.0; num_bins];
    for t in 0..num_frames {
        let frame = &samples[t * FRAME_LEN..(t + 1) * FRAME_LEN];
        for (slot, (&s, &w)) in buffer.iter_mut().zip(frame.iter().zip(&window)) {
            *slot = Complex::new(s * w, 0.0);
        }
        for slot in buffer.iter_mut().skip(FRAME_LEN) {
            *slot = Complex::new(0.0, 0.0);
        }
        fft.process(&mut buffer);
        for (p, c) in power.iter_mut().zip(buffer.iter().take(num_bins)) {
            *p = c.re * c.re + c.im * c.im;
        }
        for weights in &filters {
            let energy: f64 = weights.iter().zip(&power).map(|(w, p)| w * p).sum();
            values.push(energy.max(LOG_FLOOR).ln());
        }
    }
    Ok(FeatureMap { values, num_frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::Waveform;

    /// Direct quadratic-time DFT of one windowed, zero-padded frame,
    /// written from the transform definition as an independent check on
    /// the FFT-based path.
    fn naive_frame_power(frame: &[f64]) -> Vec<f64> {
        assert_eq!(frame.len(), FRAME_LEN);
        let windowed: Vec<f64> = frame
            .iter()
            .enumerate()
            .map(|(n, &s)| {
                s * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / FRAME_LEN as f64).cos())
            })
            .collect();
        (0..FFT_SIZE / 2 + 1)
            .map(|k| {
                let mut re = 0.0;
                let mut im = 0.0;
                for (n, &x) in windowed.iter().enumerate() {
                    let angle = -2.0 * std::f64::consts::PI * k as f64 * n as f64 / FFT_SIZE as f64;
                    re += x * angle.cos();
                    im += x * angle.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    /// Mel weights rebuilt from the documented construction, independent of
    /// [`mel_filterbank`].
    fn naive_mel_weights() -> Vec<Vec<f64>> {
        let mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
        let hz = |mel: f64| 700.0 * (10f64.powf(mel / 2595.0) - 1.0);
        let top = mel(8000.0);
        let mut edges = Vec::new();
        for i in 0..(NUM_FILTERS + 2) {
            edges.push(hz(top * i as f64 / (NUM_FILTERS + 1) as f64));
        }
        let mut filters = Vec::new();
        for m in 0..NUM_FILTERS {
            let mut row = Vec::new();
            for bin in 0..(FFT_SIZE / 2 + 1) {
                let f = bin as f64 * 16000.0 / FFT_SIZE as f64;
                let w = if f <= edges[m] || f >= edges[m + 2] {
                    0.0
                } else if f <= edges[m + 1] {
                    (f - edges[m]) / (edges[m + 1] - edges[m])
                } else {
                    (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1])
                };
                row.push(w);
            }
            filters.push(row);
        }
        filters
    }

    fn sine(freq: f64, amplitude: f64, samples: usize) -> Waveform {
        let data: Vec<f64> = (0..samples)
            .map(|i| {
                amplitude
                    * (2.0 * std::f64::consts::PI * freq * i as f64 / SAMPLE_RATE as f64).sin()
            })
            .collect();
        Waveform::new(data).unwrap()
    }

    #[test]
    fn matches_naive_dft_pipeline() {
        let w = sine(440.0, 0.5, 3 * FRAME_LEN);
        let features = extract_features(&w).unwrap();
        let filters = naive_mel_weights();
        for t in 0..3 {
            let frame = &w.samples()[t * FRAME_LEN..(t + 1) * FRAME_LEN];
            let power = naive_frame_power(frame);
            for (band, weights) in filters.iter().enumerate() {
                let energy: f64 = weights.iter().zip(&power).map(|(w, p)| w * p).sum();
                let expected = energy.max(LOG_FLOOR).ln();
                let actual = features.value(t, band);
                // A difference in log power is a relative difference in
                // power, so near-floor bands (1e-10 energies) expose the
                // two transforms' own rounding; 1e-7 is still orders below
                // any signal-level effect.
                assert!(
                    (expected - actual).abs() < 1e-7,
                    "frame {t} band {band}: naive {expected} vs fft {actual}"
                );
            }
        }
    }

    #[test]
    fn pure_tone_peaks_in_nearest_band() {
        let w = sine(1000.0, 0.5, 5 * FRAME_LEN);
        let features = extract_features(&w).unwrap();
        // Band whose triangle center is nearest 1 kHz.
        let max_mel = hz_to_mel(8000.0);
        let center = |m: usize| mel_to_hz(max_mel * (m + 1) as f64 / (NUM_FILTERS + 1) as f64);
        let nearest = (0..NUM_FILTERS)
            .min_by(|&a, &b| {
                (center(a) - 1000.0)
                    .abs()
                    .partial_cmp(&(center(b) - 1000.0).abs())
                    .unwrap()
            })
            .unwrap();
        for t in 0..features.num_frames() {
            let argmax = (0..NUM_FILTERS)
                .max_by(|&a, &b| features.value(t, a).partial_cmp(&features.value(t, b)).unwrap())
                .unwrap();
            let distance = (argmax as isize - nearest as isize).abs();
            assert!(
                distance <= 1,
                "frame {t}: peak band {argmax}, tone band {nearest}"
            );
        }
    }

    #[test]
    fn silence_hits_log_floor_everywhere() {
        let w = Waveform::new(vec![0.0; 2 * FRAME_LEN]).unwrap();
        let features = extract_features(&w).unwrap();
        let floor = LOG_FLOOR.ln();
        for t in 0..2 {
            for band in 0..NUM_FILTERS {
                assert_eq!(features.value(t, band), floor);
            }
        }
    }

    #[test]
    fn amplitude_scaling_never_decreases_bands() {
        let quiet = sine(700.0, 0.2, 2 * FRAME_LEN);
        let loud = sine(700.0, 0.8, 2 * FRAME_LEN);
        let fq = extract_features(&quiet).unwrap();
        let fl = extract_features(&loud).unwrap();
        for t in 0..2 {
            for band in 0..NUM_FILTERS {
                assert!(
                    fl.value(t, band) >= fq.value(t, band) - 1e-12,
                    "band {band} decreased when amplitude rose"
                );
            }
        }
    }

    #[test]
    fn frame_count_matches_waveform() {
        let w = sine(300.0, 0.3, 7 * FRAME_LEN + 100);
        let features = extract_features(&w).unwrap();
        assert_eq!(features.num_frames(), 7);
    }

    #[test]
    fn too_short_is_an_error() {
        let w = Waveform::new(vec![0.1; FRAME_LEN - 1]).unwrap();
        assert!(matches!(
            extract_features(&w),
            Err(FeatureError::TooShort { .. })
        ));
    }

    #[test]
    fn channels_major_transpose_is_consistent() {
        let w = sine(500.0, 0.4, 3 * FRAME_LEN);
        let f = extract_features(&w).unwrap();
        let cm = f.to_channels_major();
        for t in 0..3 {
            for b in 0..NUM_FILTERS {
                assert_eq!(cm[b * 3 + t], f.value(t, b));
            }
        }
    }

    #[test]
    fn deterministic_across_calls() {
        let w = sine(640.0, 0.45, 4 * FRAME_LEN);
        assert_eq!(extract_features(&w).unwrap(), extract_features(&w).unwrap());
    }
}
