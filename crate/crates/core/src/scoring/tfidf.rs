//! TF-IDF text-only scorer: cost = 1 - cosine(tfidf(a), tfidf(b)).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::Scorer;
use crate::corpus::Document;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    pub vocabulary: HashMap<String, usize>,
    /// Smoothed idf, `ln((1 + N) / (1 + df)) + 1`, indexed by vocabulary id.
    pub idf: Vec<f64>,
    pub corpus_doc_count: usize,
}

/// Fits document frequencies over abstracts, captions and paragraphs; each
/// document counts once per term.
pub fn fit_tfidf<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Result<TfIdfModel> {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut n = 0usize;
    for doc in docs {
        n += 1;
        let mut terms: BTreeSet<String> = tokenize(&doc.abstract_text).into_iter().collect();
        for f in &doc.figures {
            terms.extend(tokenize(&f.caption));
        }
        for p in &doc.paragraphs {
            terms.extend(tokenize(&p.text));
        }
        for t in terms {
            *df.entry(t).or_default() += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut vocabulary = HashMap::with_capacity(df.len());
    let mut idf = Vec::with_capacity(df.len());
    for (i, (term, count)) in df.into_iter().enumerate() {
        vocabulary.insert(term, i);
        idf.push(((1.0 + n as f64) / (1.0 + count as f64)).ln() + 1.0);
    }
    Ok(TfIdfModel {
        vocabulary,
        idf,
        corpus_doc_count: n,
    })
}

impl TfIdfModel {
    /// Sparse tf-idf vector sorted by term id. Unknown terms are dropped.
    pub fn vectorize(&self, text: &str) -> Vec<(usize, f64)> {
        let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
        for tok in tokenize(text) {
            if let Some(&id) = self.vocabulary.get(&tok) {
                *tf.entry(id).or_default() += 1.0;
            }
        }
        tf.into_iter()
            .map(|(id, c)| (id, c * self.idf[id]))
            .collect()
    }
}

pub fn tfidf_cost(model: &TfIdfModel, a: &str, b: &str) -> f64 {
    let va = model.vectorize(a);
    let vb = model.vectorize(b);
    let na: f64 = va.iter().map(|(_, w)| w * w).sum();
    let nb: f64 = vb.iter().map(|(_, w)| w * w).sum();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let mut dot = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < va.len() && j < vb.len() {
        match va[i].0.cmp(&vb[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += va[i].1 * vb[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    // sqrt(x * x) == x exactly, so identical vectors give cosine 1.
    let cosine = dot / (na * nb).sqrt();
    (1.0 - cosine).clamp(0.0, 1.0)
}

impl Scorer for TfIdfModel {
    fn cost(&self, text: &str, caption: &str) -> Result<f64> {
        Ok(tfidf_cost(self, text, caption))
    }
}
