//! Margin-loss training with Adam and global-norm clipping.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{backward, forward, ForwardMode};
use super::params::{ModelConfig, NeuralScorerParams, ParamGroup};
use super::NeuralScorer;
use crate::ingest::split_sentences;
use crate::pairs::TrainingTriplet;
use crate::scoring::margin_loss;
use crate::scoring::tokenize::{tokenize, EncodedPair, Vocab};
use crate::seed::rng_for;
use crate::{Error, Result};

/// Minimum token frequency for the learned vocabulary.
pub const VOCAB_MIN_FREQ: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub grad_clip_norm: f64,
    pub rng_seed: u64,
    pub freeze_encoder: bool,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 1,
            dropout_rate: 0.2,
            grad_clip_norm: 5.0,
            rng_seed: 7,
            freeze_encoder: false,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return bad("alpha must be > 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return bad("learning rate must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout rate must lie in [0, 1)");
        }
        if self.grad_clip_norm.is_nan() || self.grad_clip_norm <= 0.0 {
            return bad("gradient clip norm must be > 0");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch size and epochs must be >= 1");
        }
        for b in [self.adam_beta1, self.adam_beta2] {
            if !(b > 0.0 && b < 1.0) {
                return bad("Adam decay rates must lie in (0, 1)");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchLog {
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    /// Global gradient norm after clipping.
    pub clipped_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub batches: Vec<BatchLog>,
    /// Triplets dropped because a side had no tokens.
    pub skipped: usize,
}

impl TrainingLog {
    pub fn mean_loss(&self) -> f64 {
        if self.batches.is_empty() {
            return 0.0;
        }
        self.batches.iter().map(|b| b.loss).sum::<f64>() / self.batches.len() as f64
    }
}

/// One training instance after sentence sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub caption: String,
    pub positive: String,
    pub negative: String,
}

pub(crate) fn sample_sentence(paragraph: &str, rng: &mut impl Rng) -> String {
    let sentences = split_sentences(paragraph);
    let usable: Vec<&str> = sentences
        .iter()
        .map(|s| s.text)
        .filter(|s| !tokenize(s).is_empty())
        .collect();
    usable
        .choose(rng)
        .map(|s| s.to_string())
        .unwrap_or_else(|| paragraph.to_string())
}

/// Draws one sentence from each paragraph of the triplet.
pub fn sample_training_example(t: &TrainingTriplet, rng: &mut impl Rng) -> TrainingExample {
    TrainingExample {
        caption: t.caption.clone(),
        positive: sample_sentence(&t.positive_text, rng),
        negative: sample_sentence(&t.negative_text, rng),
    }
}

pub(crate) struct EncodedExample {
    pub positive: EncodedPair,
    pub negative: EncodedPair,
}

pub(crate) fn encode_example(model: &NeuralScorer, ex: &TrainingExample) -> Result<EncodedExample> {
    Ok(EncodedExample {
        positive: model.encode(&ex.positive, &ex.caption)?,
        negative: model.encode(&ex.negative, &ex.caption)?,
    })
}

/// Mean margin loss of a batch and its gradient (accumulated into `grads`).
pub(crate) fn batch_loss_and_grad(
    params: &NeuralScorerParams,
    batch: &[EncodedExample],
    alpha: f64,
    mode: &mut ForwardMode<'_>,
    grads: Option<(&mut NeuralScorerParams, bool)>,
) -> Result<f64> {
    let n = batch.len() as f64;
    let mut total = 0.0;
    let mut caches = Vec::with_capacity(batch.len());
    for ex in batch {
        let pos = forward(params, &ex.positive, mode)?;
        let neg = forward(params, &ex.negative, mode)?;
        let loss = margin_loss(pos.score, neg.score, alpha);
        total += loss;
        caches.push((pos, neg, loss > 0.0));
    }
    if let Some((grads, encoder)) = grads {
        for (pos, neg, active) in &caches {
            if *active {
                backward(params, pos, 1.0 / n, grads, encoder);
                backward(params, neg, -1.0 / n, grads, encoder);
            }
        }
    }
    Ok(total / n)
}

struct Adam {
    m: NeuralScorerParams,
    v: NeuralScorerParams,
    step: i32,
}

impl Adam {
    fn new(params: &NeuralScorerParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    fn update(
        &mut self,
        params: &mut NeuralScorerParams,
        grads: &NeuralScorerParams,
        cfg: &TrainConfig,
    ) {
        self.step += 1;
        let bc1 = 1.0 - cfg.adam_beta1.powi(self.step);
        let bc2 = 1.0 - cfg.adam_beta2.powi(self.step);
        let grads = grads.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((_, group, p), (_, _, g)), ((_, _, m), (_, _, v))) in params
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(ms.into_iter().zip(vs))
        {
            if cfg.freeze_encoder && group == ParamGroup::Encoder {
                continue;
            }
            for i in 0..p.len() {
                m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
                v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
            }
        }
    }
}

pub(crate) fn global_norm(grads: &NeuralScorerParams, head_only: bool) -> f64 {
    grads
        .tensors()
        .iter()
        .filter(|(_, g, _)| !head_only || *g == ParamGroup::Head)
        .flat_map(|(_, _, t)| t.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

fn scale_grads(grads: &mut NeuralScorerParams, factor: f64) {
    for (_, _, t) in grads.tensors_mut() {
        t.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Builds the vocabulary from the triplets, initializes a model and trains it.
///
/// Each distinct caption and paragraph contributes its tokens once when
/// counting vocabulary frequencies.
pub fn train_neural(
    triplets: &[TrainingTriplet],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(NeuralScorer, TrainingLog)> {
    if triplets.is_empty() {
        return Err(Error::EmptyInput("triplet file"));
    }
    cfg.check()?;
    let vocab = vocabulary_from_triplets(triplets);
    let model = NeuralScorer::initialize(vocab, *model_cfg, cfg.rng_seed)?;
    train_from(model, triplets, cfg)
}

pub fn vocabulary_from_triplets(triplets: &[TrainingTriplet]) -> Vocab {
    let mut seen = std::collections::HashSet::new();
    let mut texts: Vec<&str> = Vec::new();
    for t in triplets {
        if seen.insert((&t.paper_id, "fig", &t.anchor_figure_id)) {
            texts.push(&t.caption);
        }
        if seen.insert((&t.paper_id, "para", &t.positive_paragraph_id)) {
            texts.push(&t.positive_text);
        }
        if seen.insert((&t.paper_id, "para", &t.negative_paragraph_id)) {
            texts.push(&t.negative_text);
        }
    }
    Vocab::build(texts, VOCAB_MIN_FREQ)
}

/// Trains an existing model in place of a fresh one.
pub fn train_from(
    mut model: NeuralScorer,
    triplets: &[TrainingTriplet],
    cfg: &TrainConfig,
) -> Result<(NeuralScorer, TrainingLog)> {
    if triplets.is_empty() {
        return Err(Error::EmptyInput("triplet file"));
    }
    cfg.check()?;
    let mut rng = rng_for(cfg.rng_seed, "train");
    let mut log = TrainingLog::default();
    let mut adam = Adam::new(&model.params);
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let mut batch_index = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut encoded = Vec::with_capacity(order.len());
        for &i in &order {
            let ex = sample_training_example(&triplets[i], &mut rng);
            match encode_example(&model, &ex) {
                Ok(e) => encoded.push(e),
                Err(Error::EmptyInput(_)) => log.skipped += 1,
                Err(e) => return Err(e),
            }
        }
        for (b, batch) in encoded.chunks(cfg.batch_size).enumerate() {
            let mut grads = model.params.zeros_like();
            let loss = {
                let mut mode = ForwardMode::Train {
                    rate: cfg.dropout_rate,
                    rng: &mut rng,
                };
                batch_loss_and_grad(
                    &model.params,
                    batch,
                    cfg.alpha,
                    &mut mode,
                    Some((&mut grads, !cfg.freeze_encoder)),
                )?
            };
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { batch: batch_index });
            }
            let norm = global_norm(&grads, cfg.freeze_encoder);
            if norm > cfg.grad_clip_norm {
                scale_grads(&mut grads, cfg.grad_clip_norm / norm);
            }
            let clipped_norm = global_norm(&grads, cfg.freeze_encoder);
            adam.update(&mut model.params, &grads, cfg);
            log.batches.push(BatchLog {
                epoch,
                batch: b,
                loss,
                grad_norm: norm,
                clipped_norm,
            });
            batch_index += 1;
        }
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triplet(
        paper: &str,
        fig: &str,
        caption: &str,
        p: (&str, &str),
        n: (&str, &str),
    ) -> TrainingTriplet {
        TrainingTriplet {
            paper_id: paper.into(),
            anchor_figure_id: fig.into(),
            caption: caption.into(),
            positive_paragraph_id: p.0.into(),
            positive_text: p.1.into(),
            negative_paragraph_id: n.0.into(),
            negative_text: n.1.into(),
        }
    }

    fn toy_triplets() -> Vec<TrainingTriplet> {
        (0..12)
            .map(|i| {
                triplet(
                    &format!("paper{i}"),
                    "f1",
                    "figure shows the tracking results",
                    ("p1", "The tracking results improve. Figure 1 shows them."),
                    ("p2", "The parsing model is slow. Figure 2 compares it."),
                )
            })
            .collect()
    }

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            hidden: 8,
            layers: 1,
            heads: 2,
            ff_width: 8,
            max_len: 32,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().check().is_ok());
        for cfg in [
            TrainConfig {
                alpha: 0.0,
                ..Default::default()
            },
            TrainConfig {
                learning_rate: 1.0,
                ..Default::default()
            },
            TrainConfig {
                grad_clip_norm: -1.0,
                ..Default::default()
            },
            TrainConfig {
                dropout_rate: 1.0,
                ..Default::default()
            },
        ] {
            assert!(cfg.check().is_err());
        }
        assert!(matches!(
            train_neural(&[], &tiny_cfg(), &TrainConfig::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn same_seed_gives_identical_parameters() {
        let cfg = TrainConfig {
            batch_size: 4,
            ..Default::default()
        };
        let (a, la) = train_neural(&toy_triplets(), &tiny_cfg(), &cfg).unwrap();
        let (b, lb) = train_neural(&toy_triplets(), &tiny_cfg(), &cfg).unwrap();
        assert_eq!(a.params.checksum(None), b.params.checksum(None));
        assert_eq!(la, lb);
        assert_eq!(la.batches.len(), 3);
        let other = TrainConfig { rng_seed: 8, ..cfg };
        let (c, _) = train_neural(&toy_triplets(), &tiny_cfg(), &other).unwrap();
        assert_ne!(a.params.checksum(None), c.params.checksum(None));
    }

    #[test]
    fn frozen_encoder_is_untouched() {
        let cfg = TrainConfig {
            batch_size: 4,
            freeze_encoder: true,
            ..Default::default()
        };
        let vocab = vocabulary_from_triplets(&toy_triplets());
        let init = NeuralScorer::initialize(vocab, tiny_cfg(), cfg.rng_seed).unwrap();
        let (trained, _) = train_from(init.clone(), &toy_triplets(), &cfg).unwrap();
        assert_eq!(
            trained.params.encoder_checksum(),
            init.params.encoder_checksum()
        );
        assert_ne!(trained.params.checksum(None), init.params.checksum(None));
    }

    #[test]
    fn clipped_norm_never_exceeds_threshold() {
        let cfg = TrainConfig {
            batch_size: 2,
            grad_clip_norm: 0.05,
            learning_rate: 0.05,
            ..Default::default()
        };
        let (_, log) = train_neural(&toy_triplets(), &tiny_cfg(), &cfg).unwrap();
        assert!(log.batches.iter().any(|b| b.grad_norm > cfg.grad_clip_norm));
        for b in &log.batches {
            assert!(b.clipped_norm <= cfg.grad_clip_norm + 1e-9);
        }
    }

    #[test]
    fn vocabulary_counts_each_text_once() {
        let ts = toy_triplets();
        let v = vocabulary_from_triplets(&ts[..1]);
        // Tokens shared between caption and paragraphs reach frequency 2.
        assert_ne!(v.id("tracking"), crate::scoring::tokenize::UNK_ID);
        assert_eq!(v.id("slow"), crate::scoring::tokenize::UNK_ID);
    }
}
