//! Training loop: Adam over mini-batches with dev-set early stopping.
//!
//! Batches accumulate gradients across their items and apply one averaged
//! optimizer step. After every epoch the dev set is scored and its equal
//! error rate logged; the best model is the one with the lowest dev EER,
//! earlier epoch winning ties, and training stops once no improvement has
//! been seen for `patience` epochs. All shuffling derives from the
//! training seed, so a run is reproducible end to end.

use std::path::Path;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::autodiff::{AutodiffError, Graph, TensorId};
use crate::eval::{eer, EvalError, GroundTruth, ScoredTrial};
use crate::features::FeatureMap;
use crate::model::{ModelConfig, ModelError, ModelState, SPOOF_CLASS};
use crate::seeds;

/// Errors from training.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{which} set is empty")]
    NoData { which: &'static str },
    #[error("batch_size must be positive")]
    ZeroBatch,
    #[error("max_epochs must be positive")]
    ZeroEpochs,
    #[error("lr_half_life must be positive")]
    ZeroHalfLife,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("dev scoring failed: {0}")]
    Eval(#[from] EvalError),
    #[error("log i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Optimizer and loop hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new best dev EER before stopping.
    pub patience: usize,
    /// Global L2 norm the per-batch gradient is rescaled to when it is
    /// larger. Softmax under a squared-error loss saturates irrecoverably
    /// after one oversized step, so the cap keeps late training stable.
    pub max_grad_norm: f64,
    /// Epochs for the learning rate to halve. Early epochs keep the full
    /// rate to find a minimum; the shrinking tail keeps the optimizer from
    /// stepping back out of a sharp one.
    pub lr_half_life: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 2,
            max_epochs: 60,
            patience: 20,
            max_grad_norm: 5.0,
            lr_half_life: 60,
            seed: 1,
        }
    }
}

/// One utterance ready for training or scoring.
#[derive(Debug, Clone)]
pub struct LabeledFeatures {
    pub utterance_id: String,
    pub features: FeatureMap,
    pub ground_truth: GroundTruth,
}

/// Builds the scalar training loss for one utterance on the graph.
pub trait Loss {
    fn build(
        &self,
        graph: &mut Graph,
        logits: TensorId,
        truth: GroundTruth,
        classes: usize,
    ) -> Result<TensorId, AutodiffError>;
}

/// Mean squared error between the softmax of the logits and the one-hot
/// target.
pub struct SoftmaxMse;

impl Loss for SoftmaxMse {
    fn build(
        &self,
        graph: &mut Graph,
        logits: TensorId,
        truth: GroundTruth,
        classes: usize,
    ) -> Result<TensorId, AutodiffError> {
        let probs = graph.softmax(logits)?;
        let mut one_hot = vec![0.0; classes];
        let index = match truth {
            GroundTruth::Bonafide => crate::model::BONAFIDE_CLASS,
            GroundTruth::Spoofed => SPOOF_CLASS,
        };
        one_hot[index] = 1.0;
        let target = graph.constant(&[classes], one_hot)?;
        graph.mse_loss(probs, target)
    }
}

/// Factor that rescales a gradient of squared global norm `norm_sq` down
/// to `max_norm`; 1.0 when it is already within the cap (including the
/// all-zero gradient).
fn clip_scale(norm_sq: f64, max_norm: f64) -> f64 {
    (max_norm / norm_sq.sqrt()).min(1.0)
}

/// Learning rate for a 1-based epoch under exponential decay.
fn decayed_rate(base: f64, epoch: usize, half_life: usize) -> f64 {
    base * 0.5f64.powf((epoch - 1) as f64 / half_life as f64)
}

/// One in-place Adam update with bias correction; `step` is the number of
/// updates applied so far including this one (starting at 1).
pub fn adam_update(
    values: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    config: &TrainConfig,
) {
    let b1 = config.beta1;
    let b2 = config.beta2;
    let bias1 = 1.0 - b1.powi(step as i32);
    let bias2 = 1.0 - b2.powi(step as i32);
    for i in 0..values.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * grads[i];
        v[i] = b2 * v[i] + (1.0 - b2) * grads[i] * grads[i];
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        values[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

/// One epoch's log line.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_eer: f64,
    pub is_best: bool,
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest dev EER.
    pub best_model: ModelState,
    pub best_epoch: usize,
    pub best_dev_eer: f64,
    pub log: Vec<EpochRecord>,
}

/// Trains a fresh model. The model is initialized from the training seed,
/// per-epoch shuffles come from derived streams, and the returned best
/// model is a snapshot taken when its epoch finished.
pub fn train(
    train_set: &[LabeledFeatures],
    dev_set: &[LabeledFeatures],
    model_config: ModelConfig,
    config: &TrainConfig,
    loss: &dyn Loss,
) -> Result<TrainOutcome, TrainError> {
    if train_set.is_empty() {
        return Err(TrainError::NoData { which: "train" });
    }
    if dev_set.is_empty() {
        return Err(TrainError::NoData { which: "dev" });
    }
    if config.batch_size == 0 {
        return Err(TrainError::ZeroBatch);
    }
    if config.max_epochs == 0 {
        return Err(TrainError::ZeroEpochs);
    }
    if config.lr_half_life == 0 {
        return Err(TrainError::ZeroHalfLife);
    }

    let mut model = ModelState::init(model_config, seeds::derive(config.seed, "model-init"))?;
    let shapes = model_config.param_shapes();
    let mut moment1: Vec<Vec<f64>> = shapes
        .iter()
        .map(|(_, shape)| vec![0.0; shape.iter().product()])
        .collect();
    let mut moment2 = moment1.clone();

    let mut best: Option<(usize, f64, ModelState)> = None;
    let mut log = Vec::new();
    let mut step = 0u64;

    for epoch in 1..=config.max_epochs {
        let epoch_config = TrainConfig {
            learning_rate: decayed_rate(config.learning_rate, epoch, config.lr_half_life),
            ..config.clone()
        };
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut seeds::stream(config.seed, &format!("shuffle-{epoch}")));

        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grad_sums: Vec<Vec<f64>> = shapes
                .iter()
                .map(|(_, shape)| vec![0.0; shape.iter().product()])
                .collect();
            for &index in batch {
                let item = &train_set[index];
                let mut graph = Graph::new();
                let pass = model.forward(&mut graph, &item.features, true)?;
                let loss_node = loss.build(
                    &mut graph,
                    pass.logits,
                    item.ground_truth,
                    model_config.classes,
                )?;
                graph.backward(loss_node)?;
                loss_sum += graph.scalar(loss_node);
                for ((_, id), sums) in pass.params.iter().zip(&mut grad_sums) {
                    for (sum, g) in sums.iter_mut().zip(graph.grad(*id)) {
                        *sum += g;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let mut norm_sq = 0.0;
            for grads in &mut grad_sums {
                for g in grads.iter_mut() {
                    *g *= scale;
                    norm_sq += *g * *g;
                }
            }
            let clip = clip_scale(norm_sq, config.max_grad_norm);
            step += 1;
            for (((name, _), grads), (m, v)) in shapes
                .iter()
                .zip(&mut grad_sums)
                .zip(moment1.iter_mut().zip(&mut moment2))
            {
                for g in grads.iter_mut() {
                    *g *= clip;
                }
                adam_update(model.param_mut(name), grads, m, v, step, &epoch_config);
            }
        }
        model.step = step;
        let train_loss = loss_sum / train_set.len() as f64;

        let dev_eer = evaluate_dev(&model, dev_set)?;
        let is_best = best.as_ref().map_or(true, |(_, e, _)| dev_eer < *e);
        if is_best {
            best = Some((epoch, dev_eer, model.clone()));
        }
        log.push(EpochRecord {
            epoch,
            train_loss,
            dev_eer,
            is_best,
        });

        let best_epoch = best.as_ref().expect("set above").0;
        if epoch - best_epoch >= config.patience {
            break;
        }
    }

    let (best_epoch, best_dev_eer, best_model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        best_model,
        best_epoch,
        best_dev_eer,
        log,
    })
}

/// Dev-set EER in percent for the current parameters.
pub fn evaluate_dev(model: &ModelState, dev_set: &[LabeledFeatures]) -> Result<f64, TrainError> {
    let trials = score_set(model, dev_set)?;
    Ok(eer(&trials)?.eer_percent)
}

/// Scores a set into EER-ready trials using the spoof probability.
pub fn score_set(
    model: &ModelState,
    set: &[LabeledFeatures],
) -> Result<Vec<ScoredTrial>, TrainError> {
    set.iter()
        .map(|item| {
            let probs = model.predict(&item.features)?;
            Ok(ScoredTrial {
                utterance_id: item.utterance_id.clone(),
                score: probs[SPOOF_CLASS],
                ground_truth: item.ground_truth,
            })
        })
        .collect()
}

/// Writes the per-epoch log as CSV.
pub fn write_log_csv(records: &[EpochRecord], path: &Path) -> Result<(), TrainError> {
    let mut out = String::from("epoch,train_loss,dev_eer,is_best\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.epoch, r.train_loss, r.dev_eer, r.is_best
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{Waveform, FRAME_LEN};
    use crate::features::extract_features;

    #[test]
    fn adam_constant_gradient_oracle() {
        // With a constant unit gradient the bias-corrected moments are
        // exactly 1 and 1, so every step moves the parameter by
        // lr / (1 + epsilon). Three steps from 1.0 at lr 0.1:
        let config = TrainConfig {
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let mut theta = [1.0f64];
        let mut m = [0.0f64];
        let mut v = [0.0f64];
        for step in 1..=3 {
            adam_update(&mut theta, &[1.0], &mut m, &mut v, step, &config);
        }
        let expected = 1.0 - 3.0 * 0.1 / (1.0 + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-12, "{} vs {expected}", theta[0]);
        // Intermediate moments after three constant-gradient steps.
        assert!((m[0] - (1.0 - 0.9f64.powi(3))).abs() < 1e-15);
        assert!((v[0] - (1.0 - 0.999f64.powi(3))).abs() < 1e-15);
    }

    #[test]
    fn adam_negative_gradient_moves_up() {
        let config = TrainConfig::default();
        let mut theta = [0.5f64];
        let mut m = [0.0f64];
        let mut v = [0.0f64];
        adam_update(&mut theta, &[-2.0], &mut m, &mut v, 1, &config);
        assert!(theta[0] > 0.5);
    }

    #[test]
    fn adam_bias_correction_matters_early() {
        // Without correction the first step would be scaled by 1 - beta1;
        // with it the first step has full magnitude lr * g / (|g| + eps).
        let config = TrainConfig {
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let mut theta = [0.0f64];
        let mut m = [0.0f64];
        let mut v = [0.0f64];
        adam_update(&mut theta, &[0.5], &mut m, &mut v, 1, &config);
        assert!((theta[0] + 0.01).abs() < 1e-9, "{}", theta[0]);
    }

    #[test]
    fn clip_scale_caps_only_oversized_gradients() {
        // Norm 5 against a cap of 2 rescales by 2/5; anything at or under
        // the cap, including a zero gradient, passes through unscaled.
        assert!((clip_scale(25.0, 2.0) - 0.4).abs() < 1e-12);
        assert_eq!(clip_scale(1.0, 2.0), 1.0);
        assert_eq!(clip_scale(4.0, 2.0), 1.0);
        assert_eq!(clip_scale(0.0, 2.0), 1.0);
    }

    #[test]
    fn decayed_rate_halves_per_half_life() {
        assert!((decayed_rate(1e-3, 1, 60) - 1e-3).abs() < 1e-15);
        assert!((decayed_rate(1e-3, 61, 60) - 5e-4).abs() < 1e-15);
        assert!((decayed_rate(1e-3, 121, 60) - 2.5e-4).abs() < 1e-15);
    }

    #[test]
    fn zero_half_life_is_rejected() {
        let (train_set, dev_set) = toy_sets();
        let config = TrainConfig {
            lr_half_life: 0,
            ..TrainConfig::default()
        };
        let err = train(&train_set, &dev_set, small_model(), &config, &SoftmaxMse);
        assert!(matches!(err, Err(TrainError::ZeroHalfLife)));
    }

    fn toy_item(id: &str, freq: f64, truth: GroundTruth, seed: u64) -> LabeledFeatures {
        let mut rng = crate::seeds::stream(seed, "toy");
        use rand::Rng;
        let samples: Vec<f64> = (0..8 * FRAME_LEN)
            .map(|i| {
                0.4 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin()
                    + 0.02 * rng.random_range(-1.0..1.0)
            })
            .collect();
        LabeledFeatures {
            utterance_id: id.to_string(),
            features: extract_features(&Waveform::new(samples).unwrap()).unwrap(),
            ground_truth: truth,
        }
    }

    fn toy_sets() -> (Vec<LabeledFeatures>, Vec<LabeledFeatures>) {
        // Bona fide is a low tone, spoof a high tone: trivially separable.
        let train = vec![
            toy_item("t0", 300.0, GroundTruth::Bonafide, 0),
            toy_item("t1", 330.0, GroundTruth::Bonafide, 1),
            toy_item("t2", 2500.0, GroundTruth::Spoofed, 2),
            toy_item("t3", 2700.0, GroundTruth::Spoofed, 3),
        ];
        let dev = vec![
            toy_item("d0", 315.0, GroundTruth::Bonafide, 4),
            toy_item("d1", 2600.0, GroundTruth::Spoofed, 5),
        ];
        (train, dev)
    }

    fn small_model() -> ModelConfig {
        ModelConfig {
            hidden_channels: 8,
            ..ModelConfig::default()
        }
    }

    fn quick_config(max_epochs: usize) -> TrainConfig {
        TrainConfig {
            max_epochs,
            patience: 20,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn loss_decreases_on_separable_toy_data() {
        let (train_set, dev_set) = toy_sets();
        let outcome = train(&train_set, &dev_set, small_model(), &quick_config(8), &SoftmaxMse)
            .unwrap();
        assert_eq!(outcome.log.len(), 8);
        let first = outcome.log.first().unwrap().train_loss;
        let last = outcome.log.last().unwrap().train_loss;
        assert!(last < first, "loss should fall: {first} -> {last}");
        assert!(outcome.best_dev_eer <= outcome.log[0].dev_eer);
        for (i, record) in outcome.log.iter().enumerate() {
            assert_eq!(record.epoch, i + 1);
            assert!(record.train_loss.is_finite());
            assert!((0.0..=100.0).contains(&record.dev_eer));
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let (train_set, dev_set) = toy_sets();
        let a = train(&train_set, &dev_set, small_model(), &quick_config(3), &SoftmaxMse).unwrap();
        let b = train(&train_set, &dev_set, small_model(), &quick_config(3), &SoftmaxMse).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.best_model, b.best_model);

        let mut other = quick_config(3);
        other.seed = 4;
        let c = train(&train_set, &dev_set, small_model(), &other, &SoftmaxMse).unwrap();
        assert_ne!(a.log, c.log);
    }

    #[test]
    fn early_stopping_honors_patience() {
        // Two identical dev items with opposite labels pin dev EER at 50%
        // forever, so the best epoch stays at 1 and training stops after
        // patience more epochs.
        let (train_set, _) = toy_sets();
        let twin = toy_item("same", 440.0, GroundTruth::Bonafide, 9);
        let dev_set = vec![
            LabeledFeatures {
                utterance_id: "same-b".into(),
                features: twin.features.clone(),
                ground_truth: GroundTruth::Bonafide,
            },
            LabeledFeatures {
                utterance_id: "same-s".into(),
                features: twin.features.clone(),
                ground_truth: GroundTruth::Spoofed,
            },
        ];
        let config = TrainConfig {
            max_epochs: 50,
            patience: 3,
            seed: 3,
            ..TrainConfig::default()
        };
        let outcome = train(&train_set, &dev_set, small_model(), &config, &SoftmaxMse).unwrap();
        assert_eq!(outcome.best_epoch, 1);
        assert_eq!(outcome.log.len(), 1 + 3);
        assert!((outcome.best_dev_eer - 50.0).abs() < 1e-9);
    }

    #[test]
    fn ties_keep_the_earlier_epoch() {
        let (train_set, _) = toy_sets();
        let twin = toy_item("same", 440.0, GroundTruth::Bonafide, 9);
        let dev_set = vec![
            LabeledFeatures {
                utterance_id: "same-b".into(),
                features: twin.features.clone(),
                ground_truth: GroundTruth::Bonafide,
            },
            LabeledFeatures {
                utterance_id: "same-s".into(),
                features: twin.features.clone(),
                ground_truth: GroundTruth::Spoofed,
            },
        ];
        let config = TrainConfig {
            max_epochs: 4,
            patience: 10,
            seed: 3,
            ..TrainConfig::default()
        };
        let outcome = train(&train_set, &dev_set, small_model(), &config, &SoftmaxMse).unwrap();
        assert_eq!(outcome.best_epoch, 1);
        assert!(outcome.log[0].is_best);
        assert!(outcome.log[1..].iter().all(|r| !r.is_best));
    }

    #[test]
    fn saved_best_model_reproduces_logged_eer() {
        let (train_set, dev_set) = toy_sets();
        let outcome = train(&train_set, &dev_set, small_model(), &quick_config(4), &SoftmaxMse)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("best.json");
        outcome.best_model.save(&path).unwrap();
        let reloaded = ModelState::load(&path).unwrap();
        let eer_again = evaluate_dev(&reloaded, &dev_set).unwrap();
        assert_eq!(eer_again, outcome.best_dev_eer);
    }

    #[test]
    fn log_csv_has_expected_shape() {
        let records = vec![
            EpochRecord {
                epoch: 1,
                train_loss: 0.25,
                dev_eer: 50.0,
                is_best: true,
            },
            EpochRecord {
                epoch: 2,
                train_loss: 0.125,
                dev_eer: 25.0,
                is_best: true,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        write_log_csv(&records, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epoch,train_loss,dev_eer,is_best");
        assert_eq!(lines[1], "1,0.25,50,true");
        assert_eq!(lines[2], "2,0.125,25,true");
    }

    #[test]
    fn empty_sets_are_rejected() {
        let (train_set, dev_set) = toy_sets();
        assert!(matches!(
            train(&[], &dev_set, small_model(), &quick_config(1), &SoftmaxMse),
            Err(TrainError::NoData { which: "train" })
        ));
        assert!(matches!(
            train(&train_set, &[], small_model(), &quick_config(1), &SoftmaxMse),
            Err(TrainError::NoData { which: "dev" })
        ));
    }
}
