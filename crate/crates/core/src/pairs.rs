//! Self-supervised triplet mining from inline figure references.
//!
//! A paragraph that mentions figure `i` is a positive for `i`. A paragraph
//! that mentions some figure but not `i` is a candidate negative for `i`.
//! Negatives are always drawn from the same paper.

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::ingest::{build_mention_index, MentionIndex};
use crate::seed::rng_for;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTriplet {
    pub paper_id: String,
    #[serde(rename = "figure_id")]
    pub anchor_figure_id: String,
    pub caption: String,
    #[serde(rename = "pos_id")]
    pub positive_paragraph_id: String,
    #[serde(rename = "pos_text")]
    pub positive_text: String,
    #[serde(rename = "neg_id")]
    pub negative_paragraph_id: String,
    #[serde(rename = "neg_text")]
    pub negative_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairGenConfig {
    pub negatives_per_positive: usize,
    pub rng_seed: u64,
    pub max_pairs: Option<usize>,
}

impl Default for PairGenConfig {
    fn default() -> Self {
        Self {
            negatives_per_positive: 1,
            rng_seed: 17,
            max_pairs: None,
        }
    }
}

impl PairGenConfig {
    fn check(&self) -> Result<()> {
        if self.negatives_per_positive == 0 {
            return Err(Error::Config("negatives_per_positive must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PairStats {
    pub documents_seen: usize,
    pub documents_with_triplets: usize,
    pub triplets_emitted: usize,
    pub mean_triplets_per_document: f64,
}

/// Mines triplets for one document.
///
/// For each positive `(figure, paragraph)` link, up to
/// `negatives_per_positive` distinct negatives are sampled uniformly without
/// replacement. The sampler is seeded from `(rng_seed, paper id)`.
pub fn generate_triplets(
    doc: &Document,
    index: &MentionIndex,
    cfg: &PairGenConfig,
) -> Result<Vec<TrainingTriplet>> {
    cfg.check()?;
    if index.figure_count() != doc.figures.len() || index.paragraph_count() != doc.paragraphs.len()
    {
        return Err(Error::ShapeMismatch(format!(
            "mention index does not belong to '{}'",
            doc.id
        )));
    }
    let mut out = Vec::new();
    if index.mentioned_figure_count() < 2 {
        return Ok(out);
    }
    let mut rng = rng_for(cfg.rng_seed, &doc.id);
    let referring: Vec<usize> = (0..doc.paragraphs.len())
        .filter(|&p| !index.figures_of(p).is_empty())
        .collect();

    let mut figure_order: Vec<usize> = (0..doc.figures.len()).collect();
    figure_order.sort_by_key(|&f| doc.figures[f].order_index);
    for fig in figure_order {
        let positives = index.paragraphs_of(fig);
        if positives.is_empty() {
            continue;
        }
        let eligible: Vec<usize> = referring
            .iter()
            .copied()
            .filter(|&p| !index.figures_of(p).contains(&fig))
            .collect();
        if eligible.is_empty() {
            continue;
        }
        let figure = &doc.figures[fig];
        let take = cfg.negatives_per_positive.min(eligible.len());
        for &pos in positives {
            for k in index::sample(&mut rng, eligible.len(), take) {
                let neg = eligible[k];
                out.push(TrainingTriplet {
                    paper_id: doc.id.clone(),
                    anchor_figure_id: figure.id.clone(),
                    caption: figure.caption.clone(),
                    positive_paragraph_id: doc.paragraphs[pos].id.clone(),
                    positive_text: doc.paragraphs[pos].text.clone(),
                    negative_paragraph_id: doc.paragraphs[neg].id.clone(),
                    negative_text: doc.paragraphs[neg].text.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Mines triplets for a whole corpus, in corpus order.
///
/// With `max_pairs` set, the concatenated list is shuffled with a seeded
/// generator and truncated.
pub fn build_corpus_triplets(
    docs: &[Document],
    cfg: &PairGenConfig,
) -> Result<(Vec<TrainingTriplet>, PairStats)> {
    cfg.check()?;
    let per_doc: Vec<Vec<TrainingTriplet>> = docs
        .par_iter()
        .map(|doc| {
            let index = build_mention_index(doc)?;
            generate_triplets(doc, &index, cfg)
        })
        .collect::<Result<_>>()?;

    let documents_with_triplets = per_doc.iter().filter(|t| !t.is_empty()).count();
    let mut triplets: Vec<TrainingTriplet> = per_doc.into_iter().flatten().collect();
    if let Some(max) = cfg.max_pairs {
        let mut rng = rng_for(cfg.rng_seed, "corpus-shuffle");
        triplets.shuffle(&mut rng);
        triplets.truncate(max);
    }
    let stats = PairStats {
        documents_seen: docs.len(),
        documents_with_triplets,
        triplets_emitted: triplets.len(),
        mean_triplets_per_document: if docs.is_empty() {
            0.0
        } else {
            triplets.len() as f64 / docs.len() as f64
        },
    };
    Ok((triplets, stats))
}
