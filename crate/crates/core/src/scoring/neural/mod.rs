//! Miniature cross-encoder scorer.
//!
//! Input is `[CLS] text [SEP] caption [SEP]` with segment ids 0/1. The final
//! hidden state at `[CLS]` goes through a linear head to a scalar cost.
//! Gradients are written out by hand in [`model`] and checked against
//! central finite differences by [`grad_check`].

mod gradcheck;
mod io;
mod model;
mod params;
mod train;

pub use gradcheck::{grad_check, GradCheckReport};
pub use io::{load_model, save_model, MODEL_FORMAT, MODEL_VERSION};
pub use model::ForwardMode;
pub use params::{LayerParams, ModelConfig, NeuralScorerParams, ParamGroup};
pub(crate) use train::sample_sentence;
pub use train::{
    sample_training_example, train_from, train_neural, vocabulary_from_triplets, BatchLog,
    TrainConfig, TrainingExample, TrainingLog,
};

use ndarray::Array2;

use super::tokenize::{encode_pair, EncodedPair, Vocab, SPECIAL_TOKENS};
use super::Scorer;
use crate::seed::rng_for;
use crate::Result;

/// Per-layer, per-head attention probabilities of one scored pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    /// `layers[l][h]` is a `T x T` matrix; row = query token, column = key.
    pub layers: Vec<Vec<Array2<f64>>>,
    pub tokens: Vec<String>,
    pub segments: Vec<u8>,
}

impl AttentionRecord {
    pub fn seq_len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_special(&self, pos: usize) -> bool {
        SPECIAL_TOKENS.contains(&self.tokens[pos].as_str())
    }
}

/// Vocabulary plus parameters: everything needed to score text pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralScorer {
    pub vocab: Vocab,
    pub params: NeuralScorerParams,
}

impl NeuralScorer {
    /// Fresh model over `vocab`; `config.vocab_size` is taken from it.
    pub fn initialize(vocab: Vocab, config: ModelConfig, seed: u64) -> Result<Self> {
        let config = ModelConfig {
            vocab_size: vocab.len(),
            ..config
        };
        let mut rng = rng_for(seed, "init");
        let params = NeuralScorerParams::init(config, &mut rng)?;
        Ok(Self { vocab, params })
    }

    pub fn encode(&self, text: &str, caption: &str) -> Result<EncodedPair> {
        encode_pair(&self.vocab, text, caption, self.params.config.max_len)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.params.config
    }
}

/// Scores one pair. Infer mode is a pure function of the inputs; train mode
/// draws dropout masks from the supplied generator.
pub fn neural_cost(
    model: &NeuralScorer,
    text: &str,
    caption: &str,
    mut mode: ForwardMode<'_>,
    trace: bool,
) -> Result<(f64, Option<AttentionRecord>)> {
    let enc = model.encode(text, caption)?;
    let cache = model::forward(&model.params, &enc, &mut mode)?;
    let record = trace.then(|| AttentionRecord {
        layers: cache.layers.iter().map(|l| l.probs.clone()).collect(),
        tokens: enc.tokens.clone(),
        segments: enc.segments.clone(),
    });
    Ok((cache.score, record))
}

impl Scorer for NeuralScorer {
    fn cost(&self, text: &str, caption: &str) -> Result<f64> {
        neural_cost(self, text, caption, ForwardMode::Infer, false).map(|(c, _)| c)
    }
}
