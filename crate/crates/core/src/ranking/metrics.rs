use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{GoldAnnotation, RankedList};
use crate::{Error, Result};

/// `(1/|R|) * sum over positions k holding a relevant figure of hits(k)/k`.
pub fn average_precision<S: AsRef<str>>(ordering: &[S], relevant: &[S]) -> Result<f64> {
    let ranks = relevant_ranks(ordering, relevant)?;
    let ap: f64 = ranks
        .iter()
        .enumerate()
        .map(|(hit, &r)| (hit + 1) as f64 / r as f64)
        .sum();
    Ok(ap / ranks.len() as f64)
}

/// One over the rank of the first relevant figure in `ordering`.
pub fn reciprocal_rank<S: AsRef<str>>(ordering: &[S], relevant: &[S]) -> Result<f64> {
    Ok(1.0 / relevant_ranks(ordering, relevant)?[0] as f64)
}

/// 1-based ranks of the relevant figures, ascending.
fn relevant_ranks<S: AsRef<str>>(ordering: &[S], relevant: &[S]) -> Result<Vec<usize>> {
    if relevant.is_empty() {
        return Err(Error::EmptyInput("relevant set"));
    }
    let mut ranks = relevant
        .iter()
        .map(|r| {
            ordering
                .iter()
                .position(|o| o.as_ref() == r.as_ref())
                .map(|p| p + 1)
                .ok_or_else(|| Error::RelevantNotRanked {
                    figure: r.as_ref().to_string(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    ranks.sort_unstable();
    ranks.dedup();
    Ok(ranks)
}

/// Gold grouped by paper, each paper's annotations in input order.
fn by_paper(gold: &[GoldAnnotation]) -> BTreeMap<&str, Vec<&GoldAnnotation>> {
    let mut out: BTreeMap<&str, Vec<&GoldAnnotation>> = BTreeMap::new();
    for g in gold {
        out.entry(g.paper_id.as_str()).or_default().push(g);
    }
    out
}

fn index_rankings(ranked: &[RankedList]) -> HashMap<&str, &RankedList> {
    ranked.iter().map(|r| (r.paper_id.as_str(), r)).collect()
}

/// Per-paper value averaged over that paper's annotators, then averaged
/// over papers.
fn paper_mean(
    ranked: &[RankedList],
    gold: &[GoldAnnotation],
    per_annotation: impl Fn(&RankedList, &GoldAnnotation) -> Result<f64>,
) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::EmptyInput("gold annotations"));
    }
    let index = index_rankings(ranked);
    let grouped = by_paper(gold);
    let missing: Vec<String> = grouped
        .keys()
        .filter(|p| !index.contains_key(*p))
        .map(|p| p.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingRankings(missing));
    }
    let mut total = 0.0;
    for (paper, anns) in &grouped {
        let r = index[paper];
        let mut sum = 0.0;
        for a in anns {
            sum += per_annotation(r, a)?;
        }
        total += sum / anns.len() as f64;
    }
    Ok(total / grouped.len() as f64)
}

/// Fraction of papers whose single gold figure sits in the first `k`
/// positions. Every annotation must have exactly one figure.
pub fn accuracy_at_k(ranked: &[RankedList], gold: &[GoldAnnotation], k: usize) -> Result<f64> {
    paper_mean(ranked, gold, |r, g| {
        if g.k() != 1 {
            return Err(Error::GoldLength {
                paper: g.paper_id.clone(),
                found: g.k(),
                expected: 1,
            });
        }
        let rank = relevant_ranks(&r.ordering, &g.ranking)?[0];
        Ok(if rank <= k { 1.0 } else { 0.0 })
    })
}

/// The gold ranking is treated as an unordered relevant set.
pub fn mean_average_precision(ranked: &[RankedList], gold: &[GoldAnnotation]) -> Result<f64> {
    paper_mean(ranked, gold, |r, g| {
        average_precision(&r.ordering, &g.ranking)
    })
}

pub fn mean_reciprocal_rank(ranked: &[RankedList], gold: &[GoldAnnotation]) -> Result<f64> {
    paper_mean(ranked, gold, |r, g| {
        reciprocal_rank(&r.ordering, &g.ranking)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    /// Present only when every annotation in the slice has one figure.
    #[serde(rename = "acc@1", skip_serializing_if = "Option::is_none", default)]
    pub acc_at_1: Option<f64>,
    #[serde(rename = "acc@3", skip_serializing_if = "Option::is_none", default)]
    pub acc_at_3: Option<f64>,
    pub map: f64,
    pub mrr: f64,
    pub paper_count: usize,
}

impl MetricSet {
    pub fn compute(ranked: &[RankedList], gold: &[GoldAnnotation]) -> Result<Self> {
        let single = gold.iter().all(|g| g.k() == 1);
        let acc = |k| single.then(|| accuracy_at_k(ranked, gold, k)).transpose();
        Ok(Self {
            acc_at_1: acc(1)?,
            acc_at_3: acc(3)?,
            map: mean_average_precision(ranked, gold)?,
            mrr: mean_reciprocal_rank(ranked, gold)?,
            paper_count: by_paper(gold).len(),
        })
    }

    /// Looks a metric up by its report name (`acc@1`, `acc@3`, `map`, `mrr`).
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "acc@1" => self.acc_at_1,
            "acc@3" => self.acc_at_3,
            "map" => Some(self.map),
            "mrr" => Some(self.mrr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: MetricSet,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_domain: BTreeMap<String, MetricSet>,
}

/// Scores `ranked` against `gold`. With `domains` (paper id to domain
/// label), also reports each domain separately.
pub fn evaluate(
    ranked: &[RankedList],
    gold: &[GoldAnnotation],
    domains: Option<&HashMap<String, String>>,
) -> Result<EvalReport> {
    let overall = MetricSet::compute(ranked, gold)?;
    let mut by_domain = BTreeMap::new();
    if let Some(domains) = domains {
        let mut split: BTreeMap<&str, Vec<GoldAnnotation>> = BTreeMap::new();
        for g in gold {
            let d = domains
                .get(&g.paper_id)
                .ok_or_else(|| Error::UnknownPaper(g.paper_id.clone()))?;
            split.entry(d.as_str()).or_default().push(g.clone());
        }
        for (d, g) in split {
            by_domain.insert(d.to_string(), MetricSet::compute(ranked, &g)?);
        }
    }
    Ok(EvalReport { overall, by_domain })
}
