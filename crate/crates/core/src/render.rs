//! SVG and PGM renderings of one explained utterance.
//!
//! The SVG stacks four aligned panels on a shared frame axis: the raw
//! waveform, one heat strip per target class where a deeper shade of red
//! marks a higher relevance score, and a category band coloring each 20 ms
//! frame by its ground-truth label. Both heat strips share one
//! normalization so the two classes are comparable at a glance.
//!
//! The PGM output is a plain-text grayscale fallback holding the same two
//! heat strips stacked vertically, with darker pixels for higher scores.

use std::fmt::Write as _;

use thiserror::Error;

use crate::annotate::FrameLabel;
use crate::audio::{Waveform, FRAME_LEN};
use crate::eval::GroundTruth;
use crate::explain::UtteranceExplanation;

/// Errors from rendering.
#[derive(Debug, Error)]
pub enum RenderError {
    #[error("utterance {utterance_id}: waveform covers {wave_frames} whole frames but annotation covers {label_frames}")]
    FrameMismatch {
        utterance_id: String,
        wave_frames: usize,
        label_frames: usize,
    },
    #[error("utterance {utterance_id} has no frames to render")]
    Empty { utterance_id: String },
}

const STRIP_H: f64 = 26.0;
const WAVE_H: f64 = 110.0;
const BAND_H: f64 = 16.0;
const GAP: f64 = 6.0;
const LEFT: f64 = 86.0;
const RIGHT: f64 = 12.0;
const TOP: f64 = 28.0;
const LEGEND_H: f64 = 22.0;

fn label_color(label: FrameLabel) -> &'static str {
    match label {
        FrameLabel::Tr => "#d62728",
        FrameLabel::Bs => "#1f77b4",
        FrameLabel::Bn => "#aec7e8",
        FrameLabel::Ss => "#ff7f0e",
        FrameLabel::Sn => "#ffbb78",
    }
}

/// White at zero through dark red at the shared maximum.
fn heat_color(v: f64) -> String {
    let stops = [
        (255.0, 255.0, 255.0),
        (251.0, 106.0, 74.0),
        (103.0, 0.0, 13.0),
    ];
    let v = v.clamp(0.0, 1.0);
    let (lo, hi, t) = if v < 0.5 {
        (stops[0], stops[1], v * 2.0)
    } else {
        (stops[1], stops[2], (v - 0.5) * 2.0)
    };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(lo.0, hi.0),
        lerp(lo.1, hi.1),
        lerp(lo.2, hi.2)
    )
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
    out
}

fn check(wave: &Waveform, exp: &UtteranceExplanation) -> Result<usize, RenderError> {
    let frames = exp.annotation.num_frames();
    if frames == 0 {
        return Err(RenderError::Empty {
            utterance_id: exp.utterance_id.clone(),
        });
    }
    if wave.num_frames() != frames {
        return Err(RenderError::FrameMismatch {
            utterance_id: exp.utterance_id.clone(),
            wave_frames: wave.num_frames(),
            label_frames: frames,
        });
    }
    Ok(frames)
}

/// Renders the aligned waveform, heat strips, and category band as SVG.
pub fn render_svg(wave: &Waveform, exp: &UtteranceExplanation) -> Result<String, RenderError> {
    let frames = check(wave, exp)?;
    let px = (900.0 / frames as f64).clamp(2.0, 8.0);
    let plot_w = frames as f64 * px;
    let width = LEFT + plot_w + RIGHT;
    let height = TOP
        + WAVE_H
        + GAP
        + 2.0 * STRIP_H
        + GAP
        + GAP
        + BAND_H
        + GAP
        + LEGEND_H
        + 14.0;

    let vmax = exp
        .maps
        .iter()
        .flat_map(|m| m.scores.iter())
        .cloned()
        .fold(0.0_f64, f64::max);

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"11\">"
    )
    .expect("writing to string");
    writeln!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{height:.0}\" fill=\"#ffffff\"/>"
    )
    .expect("writing to string");

    let truth = match exp.ground_truth {
        GroundTruth::Bonafide => "bona fide",
        GroundTruth::Spoofed => "spoofed",
    };
    writeln!(
        svg,
        "<text x=\"{LEFT}\" y=\"18\">{} &#183; truth: {truth} &#183; p_spoof: {:.4}</text>",
        escape_xml(&exp.utterance_id),
        exp.p_spoof
    )
    .expect("writing to string");

    // Waveform panel: one min/max bar per frame.
    let wave_mid = TOP + WAVE_H / 2.0;
    writeln!(
        svg,
        "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">waveform</text>",
        LEFT - 8.0,
        wave_mid + 4.0
    )
    .expect("writing to string");
    writeln!(
        svg,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{plot_w:.1}\" height=\"{WAVE_H}\" fill=\"#f7f7f7\"/>"
    )
    .expect("writing to string");
    let mut path = String::new();
    for t in 0..frames {
        let slice = &wave.samples()[t * FRAME_LEN..(t + 1) * FRAME_LEN];
        let lo = slice.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let x = LEFT + (t as f64 + 0.5) * px;
        let y1 = wave_mid - hi * (WAVE_H / 2.0 - 2.0);
        let y2 = wave_mid - lo * (WAVE_H / 2.0 - 2.0);
        write!(path, "M{x:.1} {y1:.1}L{x:.1} {y2:.1}").expect("writing to string");
    }
    writeln!(
        svg,
        "<path d=\"{path}\" stroke=\"#444444\" stroke-width=\"{:.1}\" fill=\"none\"/>",
        (px * 0.8).min(2.0)
    )
    .expect("writing to string");

    // Heat strips, one per target class, sharing vmax.
    for (row, map) in exp.maps.iter().enumerate() {
        let y = TOP + WAVE_H + GAP + row as f64 * (STRIP_H + GAP / 2.0);
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{} class</text>",
            LEFT - 8.0,
            y + STRIP_H / 2.0 + 4.0,
            map.target_class
        )
        .expect("writing to string");
        for (t, &score) in map.scores.iter().enumerate() {
            let v = if vmax > 0.0 { score / vmax } else { 0.0 };
            writeln!(
                svg,
                "<rect x=\"{:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{STRIP_H}\" fill=\"{}\"/>",
                LEFT + t as f64 * px,
                px + 0.4,
                heat_color(v)
            )
            .expect("writing to string");
        }
    }

    // Category band.
    let band_y = TOP + WAVE_H + GAP + 2.0 * STRIP_H + GAP / 2.0 + GAP + GAP;
    writeln!(
        svg,
        "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">labels</text>",
        LEFT - 8.0,
        band_y + BAND_H / 2.0 + 4.0
    )
    .expect("writing to string");
    for (t, &label) in exp.annotation.labels().iter().enumerate() {
        writeln!(
            svg,
            "<rect x=\"{:.1}\" y=\"{band_y:.1}\" width=\"{:.1}\" height=\"{BAND_H}\" fill=\"{}\"/>",
            LEFT + t as f64 * px,
            px + 0.4,
            label_color(label)
        )
        .expect("writing to string");
    }

    // Legend and time ticks.
    let legend_y = band_y + BAND_H + GAP + 12.0;
    let mut x = LEFT;
    for label in FrameLabel::ALL {
        writeln!(
            svg,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/>",
            legend_y - 9.0,
            label_color(label)
        )
        .expect("writing to string");
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{legend_y:.1}\">{}</text>",
            x + 14.0,
            label.as_str()
        )
        .expect("writing to string");
        x += 58.0;
    }
    let tick_every = 25; // frames, i.e. 0.5 s
    let mut t = 0;
    while t <= frames {
        let tx = LEFT + t as f64 * px;
        writeln!(
            svg,
            "<text x=\"{tx:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"#666666\">{:.1}s</text>",
            legend_y + 14.0,
            t as f64 * 0.02
        )
        .expect("writing to string");
        t += tick_every;
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders both heat strips as a plain-text PGM image.
///
/// The image is `frames` wide and `2 * rows` tall: the bona fide class
/// strip above the spoof class strip. Pixels run from 255 (zero score) down
/// to 0 (the shared maximum), so deeper means higher here too.
pub fn render_pgm(exp: &UtteranceExplanation, rows: usize) -> Result<String, RenderError> {
    let frames = exp.annotation.num_frames();
    if frames == 0 || rows == 0 {
        return Err(RenderError::Empty {
            utterance_id: exp.utterance_id.clone(),
        });
    }
    let vmax = exp
        .maps
        .iter()
        .flat_map(|m| m.scores.iter())
        .cloned()
        .fold(0.0_f64, f64::max);

    let mut out = String::new();
    writeln!(out, "P2").expect("writing to string");
    writeln!(out, "{} {}", frames, 2 * rows).expect("writing to string");
    writeln!(out, "255").expect("writing to string");
    for map in &exp.maps {
        let pixels: Vec<String> = map
            .scores
            .iter()
            .map(|&s| {
                let v = if vmax > 0.0 { s / vmax } else { 0.0 };
                format!("{}", 255 - (v * 255.0).round() as u16)
            })
            .collect();
        let row = pixels.join(" ");
        for _ in 0..rows {
            writeln!(out, "{row}").expect("writing to string");
        }
    }
    Ok(out)
}
