//! Scorers share one contract: `cost(text, caption)` where a LOWER cost
//! means a better match. Rankings sort ascending by cost.

pub mod neural;
pub mod tfidf;
pub mod tokenize;

pub use neural::{
    grad_check, neural_cost, sample_training_example, train_neural, vocabulary_from_triplets,
    AttentionRecord, ForwardMode, GradCheckReport, ModelConfig, NeuralScorer, NeuralScorerParams,
    TrainConfig, TrainingExample, TrainingLog,
};
pub use tfidf::{fit_tfidf, tfidf_cost, TfIdfModel};
pub use tokenize::{tokenize, Vocab};

use crate::Result;

pub trait Scorer: Send + Sync {
    /// Match cost of an abstract sentence (or paragraph sentence) against a
    /// figure caption. Deterministic and finite for nonempty inputs.
    fn cost(&self, text: &str, caption: &str) -> Result<f64>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn cost(&self, text: &str, caption: &str) -> Result<f64> {
        (**self).cost(text, caption)
    }
}

/// Hinge on the cost gap: `max(s_p - s_n + alpha, 0)`.
pub fn margin_loss(s_p: f64, s_n: f64, alpha: f64) -> f64 {
    (s_p - s_n + alpha).max(0.0)
}
