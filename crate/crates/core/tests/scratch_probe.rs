//! Throwaway diagnostic, not part of the suite.

use splicecam::annotate::FrameLabel;
use splicecam::corpus::load_split;
use splicecam::features::extract_features;

fn shape(f: &splicecam::features::FeatureMap, t: usize) -> (Vec<f64>, f64) {
    let bands = f.num_filters();
    let mut p: Vec<f64> = (0..bands).map(|b| f.value(t, b).exp()).collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total.max(1e-30);
    }
    let peak = p.iter().cloned().fold(0.0, f64::max) * bands as f64;
    (p, peak)
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[test]
#[ignore]
fn junction_statistic_separates_classes() {
    let corpus = std::path::Path::new("/tmp/s7/corpus");
    let items = load_split(corpus, "eval").unwrap();

    // Per-frame relation stat at annotated TR frames vs interior speech.
    let mut tr_vals = Vec::new();
    let mut interior_vals = Vec::new();
    let mut tr_peaks = Vec::new();
    let mut speech_peaks = Vec::new();
    let mut noise_peaks = Vec::new();
    let mut rows: Vec<(bool, f64)> = Vec::new();

    for item in &items {
        let f = extract_features(&item.waveform).unwrap();
        let frames = f.num_frames();
        let ann = item.sidecar.annotation().unwrap();
        let labels = ann.labels();

        let data: Vec<(Vec<f64>, f64)> = (0..frames).map(|t| shape(&f, t)).collect();
        for t in 0..frames {
            match labels[t] {
                FrameLabel::Bs | FrameLabel::Ss => speech_peaks.push(data[t].1),
                FrameLabel::Bn | FrameLabel::Sn => noise_peaks.push(data[t].1),
                FrameLabel::Tr => tr_peaks.push(data[t].1),
            }
        }
        let mut stat = 0.0f64;
        for t in 1..frames.saturating_sub(1) {
            let (ref a, pa) = data[t - 1];
            let (ref b, pb) = data[t + 1];
            let voiced = pa > 6.0 && pb > 6.0;
            if !voiced {
                continue;
            }
            let d = l1(a, b);
            let speech_neighbors = matches!(labels[t - 1], FrameLabel::Bs | FrameLabel::Ss)
                && matches!(labels[t + 1], FrameLabel::Bs | FrameLabel::Ss);
            if labels[t] == FrameLabel::Tr {
                tr_vals.push(d);
            } else if speech_neighbors && labels[t] != FrameLabel::Tr {
                interior_vals.push(d);
            }
            stat = stat.max(d);
        }
        rows.push((item.sidecar.is_partially_spoofed(), stat));
    }

    let mut print_q = |name: &str, v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if v.is_empty() {
            println!("{name}: empty");
            return;
        }
        let q = |p: f64| v[((v.len() - 1) as f64 * p) as usize];
        println!(
            "{name}: n={} p10={:.3} p50={:.3} p90={:.3}",
            v.len(),
            q(0.1),
            q(0.5),
            q(0.9)
        );
    };
    print_q("peak speech", &mut speech_peaks);
    print_q("peak noise ", &mut noise_peaks);
    print_q("peak TR    ", &mut tr_peaks);
    print_q("l1 at TR   ", &mut tr_vals);
    print_q("l1 interior", &mut interior_vals);

    let mut best = rows.len();
    for &(_, s) in &rows {
        let errors = rows
            .iter()
            .filter(|&&(is_spoof, v)| if is_spoof { v < s } else { v >= s })
            .count();
        best = best.min(errors);
    }
    println!("utterance stat: best threshold errors {}/{}", best, rows.len());
}
