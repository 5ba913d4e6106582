//! Documents, figures, gold annotations and rankings.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Research-field tag carried by each document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Nlp,
    Cv,
    Ai,
    Ml,
    PubMed,
    Other(String),
}

impl Domain {
    pub fn as_str(&self) -> &str {
        match self {
            Domain::Nlp => "NLP",
            Domain::Cv => "CV",
            Domain::Ai => "AI",
            Domain::Ml => "ML",
            Domain::PubMed => "PubMed",
            Domain::Other(s) => s,
        }
    }
}

impl Default for Domain {
    fn default() -> Self {
        Domain::Other("unknown".into())
    }
}

impl From<&str> for Domain {
    fn from(s: &str) -> Self {
        match s.to_ascii_lowercase().as_str() {
            "nlp" => Domain::Nlp,
            "cv" => Domain::Cv,
            "ai" => Domain::Ai,
            "ml" => Domain::Ml,
            "pubmed" => Domain::PubMed,
            _ => Domain::Other(s.to_string()),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Domain {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Domain {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Domain::from(s.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure {
    pub id: String,
    /// 0-based position in the document's figure sequence.
    pub order_index: usize,
    /// The printed number of the figure ("3" of "Figure 3"), when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_number: Option<u32>,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub domain: Domain,
    #[serde(default)]
    pub paragraphs: Vec<Paragraph>,
    #[serde(default)]
    pub figures: Vec<Figure>,
}

impl Document {
    /// Figures sorted by `order_index`.
    pub fn figures_in_order(&self) -> Vec<&Figure> {
        let mut figs: Vec<&Figure> = self.figures.iter().collect();
        figs.sort_by_key(|f| f.order_index);
        figs
    }

    pub fn figure(&self, id: &str) -> Option<&Figure> {
        self.figures.iter().find(|f| f.id == id)
    }

    /// Collapses whitespace runs in every text field and sorts figures by
    /// `order_index`.
    pub fn normalized(mut self) -> Self {
        self.id = self.id.trim().to_string();
        self.title = normalize_whitespace(&self.title);
        self.abstract_text = normalize_whitespace(&self.abstract_text);
        for p in &mut self.paragraphs {
            p.text = normalize_whitespace(&p.text);
            p.heading = p.heading.as_deref().map(normalize_whitespace);
        }
        for f in &mut self.figures {
            f.caption = normalize_whitespace(&f.caption);
        }
        self.figures.sort_by_key(|f| f.order_index);
        self
    }
}

pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One broken invariant: the offending field and the rule it breaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Checks every document invariant and returns what is broken; an empty
/// list means the document is valid.
pub fn validate_document(doc: &Document) -> Vec<Violation> {
    let mut out = Vec::new();
    if doc.id.trim().is_empty() {
        out.push(Violation::new("id", "empty"));
    }
    if doc.abstract_text.trim().is_empty() {
        out.push(Violation::new("abstract", "empty"));
    }

    let mut para_ids = HashSet::new();
    for (i, p) in doc.paragraphs.iter().enumerate() {
        if p.id.trim().is_empty() {
            out.push(Violation::new(format!("paragraphs[{i}].id"), "empty"));
        } else if !para_ids.insert(p.id.as_str()) {
            out.push(Violation::new(
                format!("paragraphs[{i}].id"),
                format!("duplicate '{}'", p.id),
            ));
        }
        if p.text.trim().is_empty() {
            out.push(Violation::new(format!("paragraphs[{i}].text"), "empty"));
        }
    }

    let mut fig_ids = HashSet::new();
    for (i, f) in doc.figures.iter().enumerate() {
        if f.id.trim().is_empty() {
            out.push(Violation::new(format!("figures[{i}].id"), "empty"));
        } else if !fig_ids.insert(f.id.as_str()) {
            out.push(Violation::new(
                format!("figures[{i}].id"),
                format!("duplicate '{}'", f.id),
            ));
        }
        if f.caption.trim().is_empty() {
            out.push(Violation::new(format!("figures[{i}].caption"), "empty"));
        }
        if f.label_number == Some(0) {
            out.push(Violation::new(
                format!("figures[{i}].label_number"),
                "must be >= 1",
            ));
        }
    }

    let mut indices: Vec<usize> = doc.figures.iter().map(|f| f.order_index).collect();
    indices.sort_unstable();
    if indices.iter().enumerate().any(|(i, &idx)| i != idx) {
        out.push(Violation::new(
            "figures.order_index",
            format!(
                "expected 0..{} without gaps, found {:?}",
                doc.figures.len(),
                indices
            ),
        ));
    }
    out
}

/// A validated collection of documents addressable by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            let violations = validate_document(doc);
            if !violations.is_empty() {
                return Err(Error::InvalidDocument {
                    id: doc.id.clone(),
                    violations,
                });
            }
            if by_id.insert(doc.id.clone(), i).is_some() {
                return Err(Error::DuplicateDocument(doc.id.clone()));
            }
        }
        Ok(Self { docs, by_id })
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// A human ranking of a paper's best figures (K = 1 or K = 3 entries).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub paper_id: String,
    pub annotator_id: String,
    pub ranking: Vec<String>,
    /// UTC seconds.
    pub ts: i64,
}

impl GoldAnnotation {
    pub fn k(&self) -> usize {
        self.ranking.len()
    }
}

/// Checks a gold annotation against the paper it names.
pub fn validate_gold(ann: &GoldAnnotation, doc: &Document) -> Vec<Violation> {
    let mut out = Vec::new();
    if ann.paper_id != doc.id {
        out.push(Violation::new(
            "paper_id",
            format!("does not match '{}'", doc.id),
        ));
    }
    if ann.annotator_id.trim().is_empty() {
        out.push(Violation::new("annotator_id", "empty"));
    }
    if !matches!(ann.ranking.len(), 1 | 3) {
        out.push(Violation::new(
            "ranking",
            format!("length must be 1 or 3, found {}", ann.ranking.len()),
        ));
    }
    let mut seen = HashSet::new();
    for (i, id) in ann.ranking.iter().enumerate() {
        if !seen.insert(id.as_str()) {
            out.push(Violation::new(
                format!("ranking[{i}]"),
                format!("repeated figure '{id}'"),
            ));
        }
        if doc.figure(id).is_none() {
            out.push(Violation::new(
                format!("ranking[{i}]"),
                format!("unknown figure '{id}'"),
            ));
        }
    }
    out
}

/// A predicted ordering of all of a paper's figures, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub paper_id: String,
    pub ordering: Vec<String>,
    /// Per-figure costs aligned with `ordering`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<f64>>,
}

impl RankedList {
    /// Sorts figures ascending by cost, ties by `order_index`. `costs` is
    /// indexed like `doc.figures`.
    pub fn from_costs(doc: &Document, costs: &[f64]) -> Self {
        assert_eq!(costs.len(), doc.figures.len(), "one cost per figure");
        let mut idx: Vec<usize> = (0..doc.figures.len()).collect();
        idx.sort_by(|&a, &b| {
            costs[a]
                .total_cmp(&costs[b])
                .then(doc.figures[a].order_index.cmp(&doc.figures[b].order_index))
        });
        Self {
            paper_id: doc.id.clone(),
            ordering: idx.iter().map(|&i| doc.figures[i].id.clone()).collect(),
            costs: Some(idx.iter().map(|&i| costs[i]).collect()),
        }
    }

    pub fn rank_of(&self, figure_id: &str) -> Option<usize> {
        self.ordering
            .iter()
            .position(|f| f == figure_id)
            .map(|p| p + 1)
    }

    /// Checks the permutation invariant and, when costs are present, the
    /// ascending-cost order.
    pub fn validate(&self, doc: &Document) -> Vec<Violation> {
        let mut out = Vec::new();
        let expected: HashSet<&str> = doc.figures.iter().map(|f| f.id.as_str()).collect();
        let actual: HashSet<&str> = self.ordering.iter().map(String::as_str).collect();
        if actual.len() != self.ordering.len() || actual != expected {
            out.push(Violation::new(
                "ordering",
                "not a permutation of the paper's figures",
            ));
        }
        if let Some(costs) = &self.costs {
            if costs.len() != self.ordering.len() {
                out.push(Violation::new("costs", "length differs from ordering"));
            } else if costs.windows(2).any(|w| w[0] > w[1]) {
                out.push(Violation::new("costs", "not ascending"));
            }
        }
        out
    }
}
