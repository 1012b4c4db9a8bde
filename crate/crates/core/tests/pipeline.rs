//! Cross-module checks through the public API: corpus files feed the
//! feature, training, explanation, and aggregation stages without any
//! private plumbing.

use splicecam::annotate::category_masks;
use splicecam::corpus::{generate_corpus, load_split, verify_corpus, CorpusConfig, SplitSpec, SPLITS};
use splicecam::eval::GroundTruth;
use splicecam::features::extract_features;
use splicecam::gradcam::{gradcam_both, TargetClass};
use splicecam::model::{ModelConfig, ModelState};
use splicecam::rcq::{build_report, category_means, SampleFilter};
use splicecam::synth::CorpusMode;
use splicecam::train::{train, LabeledFeatures, SoftmaxMse, TrainConfig};
use splicecam::Graph;

fn tiny_corpus(mode: CorpusMode, seed: u64) -> CorpusConfig {
    CorpusConfig {
        mode,
        crossfade_ms: 20.0,
        seed,
        train: SplitSpec {
            bonafide: 3,
            spoofed: 3,
        },
        dev: SplitSpec {
            bonafide: 2,
            spoofed: 2,
        },
        eval: SplitSpec {
            bonafide: 2,
            spoofed: 2,
        },
    }
}

fn labeled(corpus: &std::path::Path, split: &str) -> Vec<LabeledFeatures> {
    load_split(corpus, split)
        .unwrap()
        .into_iter()
        .map(|item| LabeledFeatures {
            features: extract_features(&item.waveform).unwrap(),
            ground_truth: if item.sidecar.is_partially_spoofed() {
                GroundTruth::Spoofed
            } else {
                GroundTruth::Bonafide
            },
            utterance_id: item.utterance_id,
        })
        .collect()
}

#[test]
fn corpus_files_reload_into_consistent_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    generate_corpus(&tiny_corpus(CorpusMode::Artifact, 41), dir.path()).unwrap();
    verify_corpus(dir.path()).unwrap();

    for split in SPLITS {
        for item in load_split(dir.path(), split).unwrap() {
            let annotation = item.sidecar.annotation().unwrap();
            let features = extract_features(&item.waveform).unwrap();
            assert_eq!(annotation.num_frames(), features.num_frames());

            // The five masks partition the frames.
            let masks = category_masks(&annotation);
            let total: usize = masks.iter().map(Vec::len).sum();
            assert_eq!(total, annotation.num_frames());

            let spoofed = item.utterance_id.contains("spoof");
            assert_eq!(item.sidecar.is_partially_spoofed(), spoofed);
        }
    }
}

#[test]
fn model_loss_gradients_match_finite_differences() {
    let config = ModelConfig {
        in_channels: 8,
        hidden_channels: 6,
        kernel_size: 3,
        se_reduction: 2,
        classes: 2,
    };
    let frames = 10;
    for seed in 0..3u64 {
        let model = ModelState::init(config, seed).unwrap();
        let mut input = Vec::with_capacity(config.in_channels * frames);
        let mut state = seed.wrapping_mul(2654435761).wrapping_add(12345);
        for _ in 0..config.in_channels * frames {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            input.push(((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0);
        }

        let loss_value = |m: &ModelState| -> f64 {
            let mut graph = Graph::new();
            let pass = m.forward_values(&mut graph, &input, frames, false).unwrap();
            let loss = splicecam::train::Loss::build(
                &SoftmaxMse,
                &mut graph,
                pass.logits,
                GroundTruth::Spoofed,
                config.classes,
            )
            .unwrap();
            graph.values(loss)[0]
        };

        let mut graph = Graph::new();
        let pass = model.forward_values(&mut graph, &input, frames, true).unwrap();
        let loss = splicecam::train::Loss::build(
            &SoftmaxMse,
            &mut graph,
            pass.logits,
            GroundTruth::Spoofed,
            config.classes,
        )
        .unwrap();
        graph.backward(loss).unwrap();

        let epsilon = 1e-5;
        for (name, id) in &pass.params {
            let analytic = graph.grad(*id).to_vec();
            for index in 0..analytic.len() {
                let mut plus = model.clone();
                plus.param_mut(name)[index] += epsilon;
                let mut minus = model.clone();
                minus.param_mut(name)[index] -= epsilon;
                let numeric = (loss_value(&plus) - loss_value(&minus)) / (2.0 * epsilon);
                let rel = (analytic[index] - numeric).abs() / numeric.abs().max(1e-8);
                assert!(
                    rel < 1e-3,
                    "seed {seed} {name}[{index}]: analytic {} vs numeric {numeric}",
                    analytic[index]
                );
            }
        }
    }
}

#[test]
fn corpus_to_rcq_report_holds_the_zero_sum_identity() {
    let dir = tempfile::tempdir().unwrap();
    generate_corpus(&tiny_corpus(CorpusMode::Artifact, 17), dir.path()).unwrap();

    let train_set = labeled(dir.path(), "train");
    let dev_set = labeled(dir.path(), "dev");
    let outcome = train(
        &train_set,
        &dev_set,
        ModelConfig::default(),
        &TrainConfig {
            max_epochs: 3,
            patience: 3,
            ..TrainConfig::default()
        },
        &SoftmaxMse,
    )
    .unwrap();

    let mut maps = Vec::new();
    let mut annotations = Vec::new();
    for item in load_split(dir.path(), "eval").unwrap() {
        let features = extract_features(&item.waveform).unwrap();
        let probabilities = outcome.best_model.predict(&features).unwrap();
        assert!((probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let [bona, spoof] = gradcam_both(&outcome.best_model, &features, &item.utterance_id).unwrap();
        assert_eq!(bona.scores.len(), features.num_frames());
        assert!(spoof.scores.iter().all(|&s| s >= 0.0 && s.is_finite()));

        if item.sidecar.is_partially_spoofed() {
            maps.push(spoof);
            annotations.push(item.sidecar.annotation().unwrap());
        }
    }

    let map_refs: Vec<_> = maps.iter().collect();
    let annotation_refs: Vec<_> = annotations.iter().collect();
    let means = category_means(&map_refs, &annotation_refs).unwrap();
    let report = build_report(&means, TargetClass::Spoof, SampleFilter::All, maps.len());

    // Frame-weighted quotients cancel: sum F_c * RCQ_c == 0.
    let weighted: f64 = report
        .categories
        .iter()
        .filter_map(|row| row.rcq_percent.map(|q| row.frames as f64 * q))
        .sum();
    assert!(
        weighted.abs() / (means.total_frames as f64).max(1.0) < 1e-9,
        "weighted sum {weighted}"
    );
}
