use std::collections::HashMap;

use serde::Serialize;

use super::mentions::{extract_figure_mentions, parse_caption_label};
use crate::corpus::{validate_document, Document};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MentionDiagnostics {
    pub mentions_found: usize,
    pub numbers_referenced: usize,
    pub numbers_resolved: usize,
    pub unresolved_count: usize,
}

/// Bidirectional paragraph/figure links of one document.
///
/// Positions refer to `doc.paragraphs` and `doc.figures` as stored in the
/// document the index was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct MentionIndex {
    paragraph_ids: Vec<String>,
    figure_ids: Vec<String>,
    by_figure: Vec<Vec<usize>>,
    by_paragraph: Vec<Vec<usize>>,
    pub diagnostics: MentionDiagnostics,
}

impl MentionIndex {
    /// Paragraph positions mentioning figure position `fig`, ascending.
    pub fn paragraphs_of(&self, fig: usize) -> &[usize] {
        &self.by_figure[fig]
    }

    /// Figure positions mentioned by paragraph position `para`, ascending.
    pub fn figures_of(&self, para: usize) -> &[usize] {
        &self.by_paragraph[para]
    }

    pub fn paragraphs_mentioning(&self, figure_id: &str) -> Vec<&str> {
        self.figure_ids
            .iter()
            .position(|f| f == figure_id)
            .map(|fig| {
                self.by_figure[fig]
                    .iter()
                    .map(|&p| self.paragraph_ids[p].as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn figures_mentioned_by(&self, paragraph_id: &str) -> Vec<&str> {
        self.paragraph_ids
            .iter()
            .position(|p| p == paragraph_id)
            .map(|para| {
                self.by_paragraph[para]
                    .iter()
                    .map(|&f| self.figure_ids[f].as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn figure_count(&self) -> usize {
        self.figure_ids.len()
    }

    pub fn paragraph_count(&self) -> usize {
        self.paragraph_ids.len()
    }

    /// Figures mentioned by at least one paragraph.
    pub fn mentioned_figure_count(&self) -> usize {
        self.by_figure.iter().filter(|ps| !ps.is_empty()).count()
    }

    /// True when the two link maps are exact inverses.
    pub fn is_consistent(&self) -> bool {
        let forward = self
            .by_figure
            .iter()
            .enumerate()
            .all(|(f, ps)| ps.iter().all(|&p| self.by_paragraph[p].contains(&f)));
        let backward = self
            .by_paragraph
            .iter()
            .enumerate()
            .all(|(p, fs)| fs.iter().all(|&f| self.by_figure[f].contains(&p)));
        forward && backward
    }
}

/// Links every paragraph to the figures it references.
///
/// A mentioned number resolves to the figure carrying that printed label
/// (explicit `label_number` or parsed from the caption). When no figure in
/// the document carries a label, number `n` resolves to `order_index = n-1`.
pub fn build_mention_index(doc: &Document) -> Result<MentionIndex> {
    let violations = validate_document(doc);
    if !violations.is_empty() {
        return Err(Error::InvalidDocument {
            id: doc.id.clone(),
            violations,
        });
    }

    let labels: Vec<Option<u32>> = doc
        .figures
        .iter()
        .map(|f| f.label_number.or_else(|| parse_caption_label(&f.caption)))
        .collect();
    let mut resolve: HashMap<u32, usize> = HashMap::new();
    if labels.iter().any(Option::is_some) {
        for (pos, label) in labels.iter().enumerate() {
            if let Some(n) = label {
                resolve.entry(*n).or_insert(pos);
            }
        }
    } else {
        for (pos, f) in doc.figures.iter().enumerate() {
            resolve.insert(f.order_index as u32 + 1, pos);
        }
    }

    let mut diagnostics = MentionDiagnostics::default();
    let mut by_figure = vec![Vec::new(); doc.figures.len()];
    let mut by_paragraph = vec![Vec::new(); doc.paragraphs.len()];
    for (p, para) in doc.paragraphs.iter().enumerate() {
        for mention in extract_figure_mentions(&para.text) {
            diagnostics.mentions_found += 1;
            for n in mention.numbers {
                diagnostics.numbers_referenced += 1;
                match resolve.get(&n) {
                    Some(&f) => {
                        diagnostics.numbers_resolved += 1;
                        if !by_paragraph[p].contains(&f) {
                            by_paragraph[p].push(f);
                            by_figure[f].push(p);
                        }
                    }
                    None => diagnostics.unresolved_count += 1,
                }
            }
        }
    }
    for figs in &mut by_paragraph {
        figs.sort_by_key(|&f| doc.figures[f].order_index);
    }

    Ok(MentionIndex {
        paragraph_ids: doc.paragraphs.iter().map(|p| p.id.clone()).collect(),
        figure_ids: doc.figures.iter().map(|f| f.id.clone()).collect(),
        by_figure,
        by_paragraph,
        diagnostics,
    })
}
