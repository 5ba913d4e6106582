use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::metrics::MetricSet;
use super::{baseline_pick_first, baseline_random, rank_corpus};
use crate::corpus::{Document, GoldAnnotation, RankedList};
use crate::scoring::Scorer;
use crate::Result;

pub const RANDOM_COLUMN: &str = "random";
pub const FIRST_COLUMN: &str = "first";

/// Rows are test domains, columns are training domains followed by the
/// two baselines. A cell is `None` when its test slice has no gold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossDomainGrid {
    pub columns: Vec<String>,
    pub rows: BTreeMap<String, BTreeMap<String, Option<MetricSet>>>,
}

/// Evaluates every `(training domain, scorer)` pair and both baselines on
/// each domain slice of `docs`.
pub fn cross_domain_eval(
    models: &[(String, &dyn Scorer)],
    docs: &[Document],
    gold: &[GoldAnnotation],
    seed: u64,
) -> Result<CrossDomainGrid> {
    let mut slices: BTreeMap<String, Vec<&Document>> = BTreeMap::new();
    for d in docs {
        slices
            .entry(d.domain.as_str().to_string())
            .or_default()
            .push(d);
    }
    let mut columns: Vec<String> = models.iter().map(|(name, _)| name.clone()).collect();
    columns.push(RANDOM_COLUMN.into());
    columns.push(FIRST_COLUMN.into());

    let mut rows = BTreeMap::new();
    for (domain, slice) in slices {
        let ids: HashSet<&str> = slice.iter().map(|d| d.id.as_str()).collect();
        let slice_gold: Vec<GoldAnnotation> = gold
            .iter()
            .filter(|g| ids.contains(g.paper_id.as_str()))
            .cloned()
            .collect();
        let owned: Vec<Document> = slice.into_iter().cloned().collect();
        let mut cells = BTreeMap::new();
        let mut put = |name: &str, ranked: Vec<RankedList>| -> Result<()> {
            let cell = if slice_gold.is_empty() {
                None
            } else {
                Some(MetricSet::compute(&ranked, &slice_gold)?)
            };
            cells.insert(name.to_string(), cell);
            Ok(())
        };
        for (name, scorer) in models {
            put(name, rank_corpus(*scorer, &owned)?)?;
        }
        put(
            RANDOM_COLUMN,
            owned.iter().map(|d| baseline_random(d, seed)).collect(),
        )?;
        put(
            FIRST_COLUMN,
            owned.iter().map(baseline_pick_first).collect(),
        )?;
        rows.insert(domain, cells);
    }
    Ok(CrossDomainGrid { columns, rows })
}
