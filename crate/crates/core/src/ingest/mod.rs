//! Document loading, sentence segmentation and figure-mention linking.

mod index;
mod mentions;
mod sentences;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use index::{build_mention_index, MentionDiagnostics, MentionIndex};
pub use mentions::{
    extract_figure_mentions, parse_caption_label, FigureMention, MAX_FIGURE_NUMBER,
};
pub use sentences::{split_sentences, SentenceSpan};

use crate::corpus::{validate_document, Document};
use crate::{jsonl, Error, Result};

pub const DEFAULT_MIN_FIGURES: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestDiagnostics {
    pub documents_read: usize,
    pub documents_kept: usize,
    pub dropped_invalid: usize,
    pub dropped_duplicate_id: usize,
    pub dropped_too_few_figures: usize,
    pub mentions_found: usize,
    pub mention_numbers_resolved: usize,
    pub mention_numbers_unresolved: usize,
    /// `(document id, reason)` for every dropped document.
    pub dropped: Vec<(String, String)>,
}

/// Reads documents from a `.json` file (one document), a `.jsonl` file
/// (one per line), or a directory of such files (sorted by name).
pub fn load_documents(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("json" | "jsonl")
                )
            })
            .collect();
        files.sort();
        let mut docs = Vec::new();
        for file in files {
            docs.extend(load_file(&file)?);
        }
        Ok(docs)
    } else {
        load_file(path)
    }
}

fn load_file(path: &Path) -> Result<Vec<Document>> {
    if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        return jsonl::read_jsonl(path);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc = serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        line: source.line(),
        source,
    })?;
    Ok(vec![doc])
}

/// Normalizes, validates and filters documents.
///
/// Missing `label_number`s are filled from caption prefixes. Documents with
/// fewer than `min_figures` figures, invalid documents and repeated ids are
/// dropped and reported.
pub fn ingest(docs: Vec<Document>, min_figures: usize) -> (Vec<Document>, IngestDiagnostics) {
    let mut diag = IngestDiagnostics::default();
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    for doc in docs {
        diag.documents_read += 1;
        let mut doc = doc.normalized();
        for f in &mut doc.figures {
            if f.label_number.is_none() {
                f.label_number = parse_caption_label(&f.caption);
            }
        }
        let violations = validate_document(&doc);
        if !violations.is_empty() {
            diag.dropped_invalid += 1;
            let reason = violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            diag.dropped.push((doc.id, reason));
            continue;
        }
        if doc.figures.len() < min_figures {
            diag.dropped_too_few_figures += 1;
            diag.dropped.push((
                doc.id,
                format!("{} figures < {min_figures}", doc.figures.len()),
            ));
            continue;
        }
        if !seen.insert(doc.id.clone()) {
            diag.dropped_duplicate_id += 1;
            diag.dropped.push((doc.id, "duplicate id".into()));
            continue;
        }
        let index = build_mention_index(&doc).expect("validated document");
        diag.mentions_found += index.diagnostics.mentions_found;
        diag.mention_numbers_resolved += index.diagnostics.numbers_resolved;
        diag.mention_numbers_unresolved += index.diagnostics.unresolved_count;
        kept.push(doc);
    }
    diag.documents_kept = kept.len();
    (kept, diag)
}
