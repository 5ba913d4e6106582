//! Attention-map comparison between models and cross-segment inspection.
//!
//! A pair's attention is flattened layer-major, head-minor, each head's
//! `T x T` map row-major. Encodings carry no padding, so `T` is the actual
//! token count and nothing needs masking.

use rand::seq::index;
use serde::Serialize;

use crate::corpus::{Document, GoldAnnotation};
use crate::pairs::TrainingTriplet;
use crate::ranking::{evaluate, rank_corpus, EvalReport};
use crate::scoring::neural::{neural_cost, sample_sentence, train_from, vocabulary_from_triplets};
use crate::scoring::{
    AttentionRecord, ForwardMode, ModelConfig, NeuralScorer, TrainConfig, TrainingLog,
};
use crate::seed::rng_for;
use crate::{Error, Result};

/// Default number of sampled pairs for similarity reports.
pub const DEFAULT_SAMPLE_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttentionSimilarityReport {
    /// Mean cosine per layer; empty unless requested.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_layer: Vec<f64>,
    /// Mean cosine of the fully flattened maps.
    pub overall_mean: f64,
    pub sample_count: usize,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
}

fn flatten_layer(record: &AttentionRecord, layer: usize) -> Vec<f64> {
    record.layers[layer]
        .iter()
        .flat_map(|head| head.iter().copied())
        .collect()
}

fn flatten(record: &AttentionRecord) -> Vec<f64> {
    (0..record.layers.len())
        .flat_map(|l| flatten_layer(record, l))
        .collect()
}

fn trace(model: &NeuralScorer, text: &str, caption: &str) -> Result<AttentionRecord> {
    let (_, record) = neural_cost(model, text, caption, ForwardMode::Infer, true)?;
    Ok(record.expect("trace requested"))
}

/// Mean cosine similarity between the two models' attention maps over
/// `samples` of `(text, caption)`.
pub fn attention_cosine(
    a: &NeuralScorer,
    b: &NeuralScorer,
    samples: &[(String, String)],
    per_layer: bool,
) -> Result<AttentionSimilarityReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("attention sample pairs"));
    }
    let (ca, cb) = (a.config(), b.config());
    if (ca.layers, ca.heads, ca.max_len) != (cb.layers, cb.heads, cb.max_len) {
        return Err(Error::ShapeMismatch(format!(
            "layers/heads/max_len {}/{}/{} vs {}/{}/{}",
            ca.layers, ca.heads, ca.max_len, cb.layers, cb.heads, cb.max_len
        )));
    }
    let layers = ca.layers;
    let mut overall = 0.0;
    let mut by_layer = vec![0.0; layers];
    for (text, caption) in samples {
        let ta = trace(a, text, caption)?;
        let tb = trace(b, text, caption)?;
        if ta.seq_len() != tb.seq_len() {
            return Err(Error::ShapeMismatch(format!(
                "sequence length {} vs {}",
                ta.seq_len(),
                tb.seq_len()
            )));
        }
        overall += cosine(&flatten(&ta), &flatten(&tb));
        if per_layer {
            for (l, slot) in by_layer.iter_mut().enumerate() {
                *slot += cosine(&flatten_layer(&ta, l), &flatten_layer(&tb, l));
            }
        }
    }
    let n = samples.len() as f64;
    Ok(AttentionSimilarityReport {
        per_layer: if per_layer {
            by_layer.into_iter().map(|s| s / n).collect()
        } else {
            Vec::new()
        },
        overall_mean: overall / n,
        sample_count: samples.len(),
    })
}

/// One attention weight between a text token and a caption token.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossAttention {
    pub text_token: String,
    pub caption_token: String,
    pub weight: f64,
    pub layer: usize,
    pub head: usize,
    pub query: usize,
    pub key: usize,
    /// The query attends from the text segment to the caption.
    pub text_to_caption: bool,
    pub same_token: bool,
}

/// The `k` largest weights whose query and key lie in different segments,
/// descending; ties go to the lower `(layer, head, query, key)`. Special
/// tokens are skipped.
pub fn top_attended_cross_pairs(trace: &AttentionRecord, k: usize) -> Vec<CrossAttention> {
    let t = trace.seq_len();
    let mut out = Vec::new();
    for (l, heads) in trace.layers.iter().enumerate() {
        for (h, map) in heads.iter().enumerate() {
            for q in 0..t {
                for key in 0..t {
                    if trace.segments[q] == trace.segments[key]
                        || trace.is_special(q)
                        || trace.is_special(key)
                    {
                        continue;
                    }
                    let text_to_caption = trace.segments[q] == 0;
                    let (text, caption) = if text_to_caption { (q, key) } else { (key, q) };
                    out.push(CrossAttention {
                        text_token: trace.tokens[text].clone(),
                        caption_token: trace.tokens[caption].clone(),
                        weight: map[[q, key]],
                        layer: l,
                        head: h,
                        query: q,
                        key,
                        text_to_caption,
                        same_token: trace.tokens[q] == trace.tokens[key],
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then_with(|| (a.layer, a.head, a.query, a.key).cmp(&(b.layer, b.head, b.query, b.key)))
    });
    out.truncate(k);
    out
}

/// Scores `(text, caption)` and returns its top cross-segment weights.
pub fn inspect_pair(
    model: &NeuralScorer,
    text: &str,
    caption: &str,
    k: usize,
) -> Result<Vec<CrossAttention>> {
    Ok(top_attended_cross_pairs(&trace(model, text, caption)?, k))
}

/// Seeded sample of up to `n` distinct triplets, each reduced to one
/// sentence of its positive paragraph and the caption.
pub fn sample_pairs(triplets: &[TrainingTriplet], n: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = rng_for(seed, "attention-sample");
    let mut picked = index::sample(&mut rng, triplets.len(), n.min(triplets.len())).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| {
            (
                sample_sentence(&triplets[i].positive_text, &mut rng),
                triplets[i].caption.clone(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreezeComparison {
    pub finetuned: EvalReport,
    pub frozen: EvalReport,
    /// Fine-tuned vs frozen, per layer.
    pub similarity: AttentionSimilarityReport,
    /// Frozen vs its own initialization, per layer.
    pub frozen_vs_initial: AttentionSimilarityReport,
    #[serde(skip)]
    pub logs: (TrainingLog, TrainingLog),
}

/// Trains twin models from one initialization, one fine-tuning the
/// encoder and one updating only the head, then evaluates both on `docs`
/// and compares their attention.
pub fn finetune_vs_freeze_report(
    triplets: &[TrainingTriplet],
    docs: &[Document],
    gold: &[GoldAnnotation],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    sample_size: usize,
) -> Result<FreezeComparison> {
    if triplets.is_empty() {
        return Err(Error::EmptyInput("triplet file"));
    }
    let initial = NeuralScorer::initialize(
        vocabulary_from_triplets(triplets),
        *model_cfg,
        train_cfg.rng_seed,
    )?;
    let fine_cfg = TrainConfig {
        freeze_encoder: false,
        ..*train_cfg
    };
    let frozen_cfg = TrainConfig {
        freeze_encoder: true,
        ..*train_cfg
    };
    let (finetuned, fine_log) = train_from(initial.clone(), triplets, &fine_cfg)?;
    let (frozen, frozen_log) = train_from(initial.clone(), triplets, &frozen_cfg)?;

    let samples = sample_pairs(triplets, sample_size, train_cfg.rng_seed);
    Ok(FreezeComparison {
        finetuned: evaluate(&rank_corpus(&finetuned, docs)?, gold, None)?,
        frozen: evaluate(&rank_corpus(&frozen, docs)?, gold, None)?,
        similarity: attention_cosine(&finetuned, &frozen, &samples, true)?,
        frozen_vs_initial: attention_cosine(&frozen, &initial, &samples, true)?,
        logs: (fine_log, frozen_log),
    })
}
