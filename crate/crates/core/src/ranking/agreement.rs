use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::corpus::GoldAnnotation;
use crate::{Error, Result};

/// Ordinal value of a figure an annotator did not rank.
pub const UNRANKED_CATEGORY: u32 = 4;

/// Ordinal Krippendorff's alpha over `(paper, figure)` units.
///
/// Each annotator contributes rank 1..=3 for figures in their ranking and
/// [`UNRANKED_CATEGORY`] for the rest. Only papers with at least two
/// annotators form units; if an annotator submitted more than once, the
/// latest submission (by `ts`, then input order) counts. `figures` maps a
/// paper id to all of its figure ids.
pub fn krippendorff_alpha_ordinal(
    annotations: &[GoldAnnotation],
    figures: &HashMap<String, Vec<String>>,
) -> Result<f64> {
    let units = units(annotations, figures)?;
    ordinal_alpha(&units)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementSummary {
    pub alpha: Option<f64>,
    pub n_doubly_annotated: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub undefined: Option<String>,
}

/// Like [`krippendorff_alpha_ordinal`] but reports an undefined alpha as
/// `None` with the reason.
pub fn agreement_summary(
    annotations: &[GoldAnnotation],
    figures: &HashMap<String, Vec<String>>,
) -> Result<AgreementSummary> {
    let n_doubly_annotated = latest_by_paper(annotations)
        .values()
        .filter(|a| a.len() >= 2)
        .count();
    match krippendorff_alpha_ordinal(annotations, figures) {
        Ok(alpha) => Ok(AgreementSummary {
            alpha: Some(alpha),
            n_doubly_annotated,
            undefined: None,
        }),
        Err(Error::UndefinedAgreement(reason)) => Ok(AgreementSummary {
            alpha: None,
            n_doubly_annotated,
            undefined: Some(reason.to_string()),
        }),
        Err(e) => Err(e),
    }
}

/// Latest annotation per annotator, grouped by paper.
fn latest_by_paper(
    annotations: &[GoldAnnotation],
) -> BTreeMap<&str, BTreeMap<&str, &GoldAnnotation>> {
    let mut out: BTreeMap<&str, BTreeMap<&str, &GoldAnnotation>> = BTreeMap::new();
    for a in annotations {
        let slot = out.entry(a.paper_id.as_str()).or_default();
        match slot.get(a.annotator_id.as_str()) {
            Some(prev) if prev.ts > a.ts => {}
            _ => {
                slot.insert(a.annotator_id.as_str(), a);
            }
        }
    }
    out
}

fn units(
    annotations: &[GoldAnnotation],
    figures: &HashMap<String, Vec<String>>,
) -> Result<Vec<Vec<u32>>> {
    let mut out = Vec::new();
    for (paper, by_annotator) in latest_by_paper(annotations) {
        if by_annotator.len() < 2 {
            continue;
        }
        let figs = figures
            .get(paper)
            .ok_or_else(|| Error::UnknownPaper(paper.to_string()))?;
        for fig in figs {
            out.push(
                by_annotator
                    .values()
                    .map(|a| {
                        a.ranking
                            .iter()
                            .position(|f| f == fig)
                            .map_or(UNRANKED_CATEGORY, |p| p as u32 + 1)
                    })
                    .collect(),
            );
        }
    }
    Ok(out)
}

/// Ordinal alpha from raw reliability data: each unit lists the values the
/// coders assigned to it. Units with fewer than two values are not
/// pairable and are ignored.
pub(crate) fn ordinal_alpha(units: &[Vec<u32>]) -> Result<f64> {
    let categories: Vec<u32> = units
        .iter()
        .filter(|u| u.len() >= 2)
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pos: HashMap<u32, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let q = categories.len();

    let mut coincidence = vec![vec![0.0f64; q]; q];
    for unit in units.iter().filter(|u| u.len() >= 2) {
        let weight = 1.0 / (unit.len() - 1) as f64;
        for (i, &a) in unit.iter().enumerate() {
            for (j, &b) in unit.iter().enumerate() {
                if i != j {
                    coincidence[pos[&a]][pos[&b]] += weight;
                }
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n < 2.0 {
        return Err(Error::UndefinedAgreement("fewer than two pairable values"));
    }

    let delta = |c: usize, k: usize| -> f64 {
        let (lo, hi) = (c.min(k), c.max(k));
        let between: f64 = marginals[lo..=hi].iter().sum();
        (between - (marginals[c] + marginals[k]) / 2.0).powi(2)
    };
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..q {
        for k in 0..q {
            let d = delta(c, k);
            observed += coincidence[c][k] * d;
            expected += marginals[c] * marginals[k] * d;
        }
    }
    expected /= n - 1.0;
    if expected == 0.0 {
        return Err(Error::UndefinedAgreement("all values identical"));
    }
    Ok(1.0 - observed / expected)
}
