//! Figure ranking against an abstract, baselines, metrics and agreement.

mod agreement;
mod crossdomain;
mod metrics;

pub use agreement::{
    agreement_summary, krippendorff_alpha_ordinal, AgreementSummary, UNRANKED_CATEGORY,
};
pub use crossdomain::{cross_domain_eval, CrossDomainGrid, FIRST_COLUMN, RANDOM_COLUMN};
pub use metrics::{
    accuracy_at_k, average_precision, evaluate, mean_average_precision, mean_reciprocal_rank,
    reciprocal_rank, EvalReport, MetricSet,
};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::corpus::{Document, RankedList};
use crate::ingest::split_sentences;
use crate::scoring::Scorer;
use crate::seed::rng_for;
use crate::{Error, Result};

/// Total cost of each figure (indexed like `doc.figures`): the sum over
/// abstract sentences of `scorer.cost(sentence, caption)`.
pub fn figure_costs<S: Scorer + ?Sized>(scorer: &S, doc: &Document) -> Result<Vec<f64>> {
    let sentences = split_sentences(&doc.abstract_text);
    if sentences.is_empty() {
        return Err(Error::EmptyInput("abstract"));
    }
    doc.figures
        .iter()
        .map(|fig| {
            sentences.iter().try_fold(0.0, |acc, s| {
                scorer
                    .cost(s.text, &fig.caption)
                    .map(|c| acc + c)
                    .map_err(|e| Error::Scoring {
                        paper: doc.id.clone(),
                        figure: fig.id.clone(),
                        source: Box::new(e),
                    })
            })
        })
        .collect()
}

/// Ranks figures ascending by total cost; ties go to the earlier figure.
pub fn rank_figures<S: Scorer + ?Sized>(scorer: &S, doc: &Document) -> Result<RankedList> {
    Ok(RankedList::from_costs(doc, &figure_costs(scorer, doc)?))
}

/// [`rank_figures`] over many papers in parallel; output order follows `docs`.
pub fn rank_corpus<S: Scorer + ?Sized>(scorer: &S, docs: &[Document]) -> Result<Vec<RankedList>> {
    docs.par_iter().map(|d| rank_figures(scorer, d)).collect()
}

/// Uniform random permutation, reproducible per `(seed, paper id)`.
pub fn baseline_random(doc: &Document, seed: u64) -> RankedList {
    let mut ordering: Vec<String> = doc
        .figures_in_order()
        .iter()
        .map(|f| f.id.clone())
        .collect();
    ordering.shuffle(&mut rng_for(seed, &doc.id));
    RankedList {
        paper_id: doc.id.clone(),
        ordering,
        costs: None,
    }
}

/// Figures in document order.
pub fn baseline_pick_first(doc: &Document) -> RankedList {
    RankedList {
        paper_id: doc.id.clone(),
        ordering: doc
            .figures_in_order()
            .iter()
            .map(|f| f.id.clone())
            .collect(),
        costs: None,
    }
}
