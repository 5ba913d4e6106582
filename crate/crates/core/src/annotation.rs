//! Annotation sessions and the append-only store behind the labeling service.
//!
//! Every submission is one JSON line `{"seq":N,"annotation":{..}}` appended
//! and synced before it is acknowledged. The in-memory index is rebuilt by
//! replaying the log; a torn final line (a crash mid-append) is discarded.
//! Writers are serialized by one mutex; readers take an immutable snapshot.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{validate_gold, Corpus, Document, GoldAnnotation, Violation};
use crate::jsonl::to_jsonl_string;
use crate::seed::{derive_seed, rng_for};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionFigure {
    pub figure_id: String,
    pub caption: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
}

/// What an annotator sees for one paper: figures in a shuffled order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub paper_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub figures: Vec<SessionFigure>,
    pub session_seed: u64,
}

/// Session seed for one annotator under the service's base seed.
pub fn session_seed(base_seed: u64, annotator_id: &str) -> u64 {
    derive_seed(base_seed, annotator_id)
}

/// Uniform permutation of the figures, fixed per `(paper id, session seed)`.
pub fn shuffle_figures(doc: &Document, session_seed: u64) -> SessionView {
    let mut figures: Vec<SessionFigure> = doc
        .figures_in_order()
        .into_iter()
        .map(|f| SessionFigure {
            figure_id: f.id.clone(),
            caption: f.caption.clone(),
            image_ref: f.image_ref.clone(),
        })
        .collect();
    figures.shuffle(&mut rng_for(session_seed, &doc.id));
    SessionView {
        paper_id: doc.id.clone(),
        title: doc.title.clone(),
        abstract_text: doc.abstract_text.clone(),
        figures,
        session_seed,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Event {
    seq: u64,
    annotation: GoldAnnotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Ack {
    pub seq: u64,
    /// Byte offset of the record in the log.
    pub offset: u64,
}

/// Papers by number of distinct annotators in the export.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CoverageStats {
    pub records: usize,
    pub papers_total: usize,
    pub unannotated: usize,
    pub single_annotator: usize,
    pub multiple_annotators: usize,
}

#[derive(Debug, Default)]
struct Snapshot {
    events: usize,
    latest: BTreeMap<(String, String), GoldAnnotation>,
}

impl Snapshot {
    fn apply(&mut self, ann: GoldAnnotation) {
        self.events += 1;
        self.latest
            .insert((ann.paper_id.clone(), ann.annotator_id.clone()), ann);
    }
}

struct Writer {
    file: File,
    next_seq: u64,
    offset: u64,
}

pub struct AnnotationStore {
    path: PathBuf,
    corpus: Arc<Corpus>,
    required_k: Option<usize>,
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl AnnotationStore {
    /// Opens (creating if needed) the log at `path` and replays it. With
    /// `required_k`, every submission must rank exactly that many figures.
    pub fn open(
        path: impl AsRef<Path>,
        corpus: Arc<Corpus>,
        required_k: Option<usize>,
    ) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw)
            .map_err(|e| Error::io(&path, e))?;

        let complete = raw.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if complete < raw.len() {
            file.set_len(complete as u64)
                .map_err(|e| Error::io(&path, e))?;
        }
        let mut snapshot = Snapshot::default();
        let mut next_seq = 0;
        for (i, line) in raw[..complete].split(|&b| b == b'\n').enumerate() {
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let event: Event = serde_json::from_slice(line).map_err(|source| Error::Parse {
                path: path.clone(),
                line: i + 1,
                source,
            })?;
            next_seq = event.seq + 1;
            snapshot.apply(event.annotation);
        }
        Ok(Self {
            path,
            corpus,
            required_k,
            writer: Mutex::new(Writer {
                file,
                next_seq,
                offset: complete as u64,
            }),
            snapshot: RwLock::new(Arc::new(snapshot)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    /// Checks the submission against the corpus without recording it.
    pub fn check(&self, ann: &GoldAnnotation) -> Vec<Violation> {
        let Some(doc) = self.corpus.get(&ann.paper_id) else {
            return vec![Violation::new(
                "paper_id",
                format!("unknown paper '{}'", ann.paper_id),
            )];
        };
        let mut out = validate_gold(ann, doc);
        if let Some(k) = self.required_k {
            if ann.k() != k && !out.iter().any(|v| v.field == "ranking") {
                out.push(Violation::new(
                    "ranking",
                    format!("length must be {k}, found {}", ann.k()),
                ));
            }
        }
        out
    }

    /// Validates, appends and syncs the record, then publishes it to readers.
    pub fn record_annotation(&self, ann: GoldAnnotation) -> Result<Ack> {
        let violations = self.check(&ann);
        if !violations.is_empty() {
            return Err(Error::InvalidAnnotation(violations));
        }
        let mut w = self.writer.lock().expect("store writer poisoned");
        let event = Event {
            seq: w.next_seq,
            annotation: ann,
        };
        let mut line = serde_json::to_string(&event).expect("serializable event");
        line.push('\n');
        w.file
            .write_all(line.as_bytes())
            .map_err(|e| Error::io(&self.path, e))?;
        w.file.sync_data().map_err(|e| Error::io(&self.path, e))?;
        let ack = Ack {
            seq: event.seq,
            offset: w.offset,
        };
        w.next_seq += 1;
        w.offset += line.len() as u64;

        let mut guard = self.snapshot.write().expect("snapshot lock poisoned");
        let mut next = Snapshot {
            events: guard.events,
            latest: guard.latest.clone(),
        };
        next.apply(event.annotation);
        *guard = Arc::new(next);
        Ok(ack)
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.snapshot.read().expect("snapshot lock poisoned"))
    }

    /// Number of events in the log, superseded ones included.
    pub fn event_count(&self) -> usize {
        self.snapshot().events
    }

    /// Latest record per annotator for one paper.
    pub fn annotations_for(&self, paper_id: &str) -> Vec<GoldAnnotation> {
        self.snapshot()
            .latest
            .iter()
            .filter(|((p, _), _)| p == paper_id)
            .map(|(_, a)| a.clone())
            .collect()
    }

    /// Latest record per `(paper, annotator)`, sorted by that key.
    pub fn latest(&self) -> Vec<GoldAnnotation> {
        self.snapshot().latest.values().cloned().collect()
    }

    /// Gold JSONL (one latest record per paper and annotator) and coverage.
    pub fn export_gold(&self) -> (String, CoverageStats) {
        let records = self.latest();
        let mut per_paper: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &records {
            *per_paper.entry(r.paper_id.as_str()).or_default() += 1;
        }
        let mut stats = CoverageStats {
            records: records.len(),
            papers_total: self.corpus.len(),
            ..Default::default()
        };
        for doc in self.corpus.docs() {
            match per_paper.get(doc.id.as_str()).copied().unwrap_or(0) {
                0 => stats.unannotated += 1,
                1 => stats.single_annotator += 1,
                _ => stats.multiple_annotators += 1,
            }
        }
        (to_jsonl_string(&records), stats)
    }
}
