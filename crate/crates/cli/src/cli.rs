//! Subcommand definitions and their implementations.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use figsum_core::annotation::AnnotationStore;
use figsum_core::attention::{
    attention_cosine, finetune_vs_freeze_report, inspect_pair, sample_pairs, DEFAULT_SAMPLE_SIZE,
};
use figsum_core::corpus::{Corpus, Document, Domain, GoldAnnotation, RankedList};
use figsum_core::ingest::{ingest, load_documents, DEFAULT_MIN_FIGURES};
use figsum_core::jsonl::{read_jsonl, write_json, write_jsonl};
use figsum_core::pairs::{build_corpus_triplets, PairGenConfig, TrainingTriplet};
use figsum_core::ranking::{
    agreement_summary, baseline_pick_first, baseline_random, cross_domain_eval, evaluate,
    rank_corpus, EvalReport, MetricSet,
};
use figsum_core::scoring::neural::{load_model, save_model};
use figsum_core::scoring::{
    fit_tfidf, train_neural, ModelConfig, NeuralScorer, Scorer, TrainConfig,
};
use figsum_core::synthetic::{separable_corpus, SyntheticConfig};

use crate::service::{router, AppState, StaticDirs};

#[derive(Debug, Parser)]
#[command(
    name = "figsum",
    version,
    about = "Rank a paper's figures against its abstract"
)]
pub struct Cli {
    /// File of `key = value` lines supplying option defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for every seeded step of the subcommand.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate documents and write a corpus JSONL plus diagnostics.
    Ingest(IngestArgs),
    /// Mine training triplets from a corpus.
    Pairs(PairsArgs),
    /// Train the neural scorer on triplets.
    Train(TrainArgs),
    /// Rank every paper's figures.
    Rank(RankArgs),
    /// Score rankings against gold annotations.
    Eval(EvalArgs),
    /// Inter-annotator agreement of a gold file.
    Agreement(AgreementArgs),
    /// Attention similarity between two models.
    AttnSim(AttnSimArgs),
    /// Most-attended cross-segment token pairs for one input.
    AttnTop(AttnTopArgs),
    /// Train-domain by test-domain evaluation grid.
    Xdomain(XdomainArgs),
    /// Fine-tuned against frozen encoder on the same triplets.
    FreezeReport(FreezeReportArgs),
    /// Write a synthetic corpus with known answers.
    Synth(SynthArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Document JSON file, JSONL file, or a directory of them.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_FIGURES)]
    pub min_figures: usize,
    /// Diagnostics path; defaults to `<out>.diagnostics.json`.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub neg_per_pos: usize,
    #[arg(long)]
    pub max_pairs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    #[arg(long, default_value_t = 5.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    #[arg(long, default_value_t = 128)]
    pub ff_width: usize,
    #[arg(long, default_value_t = 128)]
    pub max_len: usize,
}

impl HyperArgs {
    fn model(&self) -> ModelConfig {
        ModelConfig {
            vocab_size: 0,
            hidden: self.hidden,
            layers: self.layers,
            heads: self.heads,
            ff_width: self.ff_width,
            max_len: self.max_len,
        }
    }

    fn train(&self, seed: u64, freeze_encoder: bool) -> TrainConfig {
        TrainConfig {
            alpha: self.alpha,
            learning_rate: self.lr,
            batch_size: self.batch,
            epochs: self.epochs,
            dropout_rate: self.dropout,
            grad_clip_norm: self.clip,
            rng_seed: seed,
            freeze_encoder,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Update only the output head.
    #[arg(long)]
    pub freeze_encoder: bool,
    /// Per-batch loss log (JSONL).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerKind {
    Neural,
    Tfidf,
    Random,
    First,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long, value_enum, default_value_t = ScorerKind::Neural)]
    pub scorer: ScorerKind,
    /// Model file; required for the neural scorer.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ranks: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// Comma-separated subset of acc@1, acc@3, map, mrr.
    #[arg(long, default_value = "acc@1,acc@3,map,mrr")]
    pub metrics: String,
    /// Also report each domain; needs `--corpus`.
    #[arg(long)]
    pub by_domain: bool,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[arg(long)]
    pub gold: PathBuf,
    /// Corpus listing every figure of each paper. Without it, a paper's
    /// figures are those ranked by any of its annotators.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttnSimArgs {
    #[arg(long)]
    pub model_a: PathBuf,
    #[arg(long)]
    pub model_b: PathBuf,
    /// Triplets to sample `(sentence, caption)` pairs from.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    pub n: usize,
    #[arg(long)]
    pub per_layer: bool,
}

#[derive(Debug, Args)]
pub struct AttnTopArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub text: String,
    #[arg(long)]
    pub caption: String,
    #[arg(short, long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct XdomainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// `DOMAIN=model-file`, once per training domain.
    #[arg(long = "model", value_name = "DOMAIN=FILE", required = true)]
    pub models: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FreezeReportArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_corpus: PathBuf,
    #[arg(long)]
    pub out_gold: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub papers: usize,
    #[arg(long, default_value_t = 5)]
    pub figures: usize,
    /// Comma-separated domains, assigned round-robin.
    #[arg(long, default_value = "synthetic")]
    pub domains: String,
    #[arg(long, default_value = "syn")]
    pub id_prefix: String,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory served under `/images`.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Append-only annotation log.
    #[arg(long)]
    pub store: PathBuf,
    /// Built UI bundle served at `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Figures per ranking: 3, or 1 for single-gold corpora.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Pairs(a) => cmd_pairs(a, seed.unwrap_or(17)),
        Command::Train(a) => cmd_train(a, seed.unwrap_or(7)),
        Command::Rank(a) => cmd_rank(a, seed.unwrap_or(0)),
        Command::Eval(a) => cmd_eval(a),
        Command::Agreement(a) => cmd_agreement(a),
        Command::AttnSim(a) => cmd_attn_sim(a, seed.unwrap_or(0)),
        Command::AttnTop(a) => cmd_attn_top(a),
        Command::Xdomain(a) => cmd_xdomain(a, seed.unwrap_or(0)),
        Command::FreezeReport(a) => cmd_freeze(a, seed.unwrap_or(7)),
        Command::Synth(a) => cmd_synth(a, seed.unwrap_or(1)),
        Command::Serve(a) => cmd_serve(a, seed.unwrap_or(0)),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    read_jsonl(path).with_context(|| format!("reading corpus {}", path.display()))
}

fn read_gold(path: &Path) -> Result<Vec<GoldAnnotation>> {
    read_jsonl(path).with_context(|| format!("reading gold {}", path.display()))
}

fn read_triplets(path: &Path) -> Result<Vec<TrainingTriplet>> {
    read_jsonl(path).with_context(|| format!("reading triplets {}", path.display()))
}

fn read_model(path: &Path) -> Result<NeuralScorer> {
    load_model(path).with_context(|| format!("loading model {}", path.display()))
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let docs = load_documents(&a.input)?;
    let (kept, diag) = ingest(docs, a.min_figures);
    write_jsonl(&a.out, &kept)?;
    let diag_path = a.diagnostics.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".diagnostics.json");
        p.into()
    });
    write_json(&diag_path, &diag)?;
    print_json(&serde_json::json!({
        "documents_read": diag.documents_read,
        "documents_kept": diag.documents_kept,
        "mentions_found": diag.mentions_found,
        "mention_numbers_unresolved": diag.mention_numbers_unresolved,
        "diagnostics": diag_path,
    }))
}

fn cmd_pairs(a: PairsArgs, seed: u64) -> Result<()> {
    let docs = read_corpus(&a.corpus)?;
    let cfg = PairGenConfig {
        negatives_per_positive: a.neg_per_pos,
        rng_seed: seed,
        max_pairs: a.max_pairs,
    };
    let (triplets, stats) = build_corpus_triplets(&docs, &cfg)?;
    write_jsonl(&a.out, &triplets)?;
    print_json(&stats)
}

#[derive(Serialize)]
struct TrainSummary {
    triplets: usize,
    vocab_size: usize,
    batches: usize,
    skipped: usize,
    first_loss: Option<f64>,
    last_loss: Option<f64>,
    mean_loss: f64,
}

fn cmd_train(a: TrainArgs, seed: u64) -> Result<()> {
    let triplets = read_triplets(&a.pairs)?;
    let (model, log) = train_neural(
        &triplets,
        &a.hyper.model(),
        &a.hyper.train(seed, a.freeze_encoder),
    )?;
    save_model(&model, &a.out)?;
    if let Some(path) = &a.log {
        write_jsonl(path, &log.batches)?;
    }
    print_json(&TrainSummary {
        triplets: triplets.len(),
        vocab_size: model.vocab.len(),
        batches: log.batches.len(),
        skipped: log.skipped,
        first_loss: log.batches.first().map(|b| b.loss),
        last_loss: log.batches.last().map(|b| b.loss),
        mean_loss: log.mean_loss(),
    })
}

fn rank_with(
    kind: ScorerKind,
    model: Option<&Path>,
    docs: &[Document],
    seed: u64,
) -> Result<Vec<RankedList>> {
    Ok(match kind {
        ScorerKind::Neural => {
            let path = model.context("--model is required for the neural scorer")?;
            rank_corpus(&read_model(path)?, docs)?
        }
        ScorerKind::Tfidf => rank_corpus(&fit_tfidf(docs)?, docs)?,
        ScorerKind::Random => docs.iter().map(|d| baseline_random(d, seed)).collect(),
        ScorerKind::First => docs.iter().map(baseline_pick_first).collect(),
    })
}

fn cmd_rank(a: RankArgs, seed: u64) -> Result<()> {
    let docs = read_corpus(&a.corpus)?;
    let ranked = rank_with(a.scorer, a.model.as_deref(), &docs, seed)?;
    write_jsonl(&a.out, &ranked)?;
    print_json(&serde_json::json!({ "papers": ranked.len(), "out": a.out }))
}

const METRIC_NAMES: [&str; 4] = ["acc@1", "acc@3", "map", "mrr"];

fn select(m: &MetricSet, names: &[&str]) -> serde_json::Value {
    let mut out = serde_json::Map::new();
    for &n in names {
        out.insert(
            n.to_string(),
            m.get(n)
                .map_or(serde_json::Value::Null, serde_json::Value::from),
        );
    }
    out.insert("paper_count".into(), m.paper_count.into());
    out.into()
}

fn report_json(report: &EvalReport, names: &[&str]) -> serde_json::Value {
    let mut out = serde_json::json!({ "overall": select(&report.overall, names) });
    if !report.by_domain.is_empty() {
        let by: serde_json::Map<String, serde_json::Value> = report
            .by_domain
            .iter()
            .map(|(d, m)| (d.clone(), select(m, names)))
            .collect();
        out["by_domain"] = by.into();
    }
    out
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let names: Vec<&str> = a
        .metrics
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if let Some(bad) = names.iter().find(|n| !METRIC_NAMES.contains(n)) {
        bail!(
            "unknown metric '{bad}'; expected a subset of {}",
            METRIC_NAMES.join(",")
        );
    }
    let ranked: Vec<RankedList> = read_jsonl(&a.ranks)?;
    let gold = read_gold(&a.gold)?;
    let domains = if a.by_domain {
        let path = a.corpus.as_deref().context("--by-domain needs --corpus")?;
        let docs = read_corpus(path)?;
        Some(
            docs.iter()
                .map(|d| (d.id.clone(), d.domain.as_str().to_string()))
                .collect::<HashMap<_, _>>(),
        )
    } else {
        None
    };
    let report = evaluate(&ranked, &gold, domains.as_ref())?;
    let json = report_json(&report, &names);
    if let Some(out) = &a.out {
        write_json(out, &json)?;
    }
    print_json(&json)
}

fn cmd_agreement(a: AgreementArgs) -> Result<()> {
    let gold = read_gold(&a.gold)?;
    let figures: HashMap<String, Vec<String>> = match &a.corpus {
        Some(path) => read_corpus(path)?
            .into_iter()
            .map(|d| (d.id, d.figures.into_iter().map(|f| f.id).collect()))
            .collect(),
        None => {
            let mut m: HashMap<String, Vec<String>> = HashMap::new();
            for g in &gold {
                let figs = m.entry(g.paper_id.clone()).or_default();
                for f in &g.ranking {
                    if !figs.contains(f) {
                        figs.push(f.clone());
                    }
                }
            }
            m
        }
    };
    print_json(&agreement_summary(&gold, &figures)?)
}

fn cmd_attn_sim(a: AttnSimArgs, seed: u64) -> Result<()> {
    let (ma, mb) = (read_model(&a.model_a)?, read_model(&a.model_b)?);
    let samples = sample_pairs(&read_triplets(&a.pairs)?, a.n, seed);
    print_json(&attention_cosine(&ma, &mb, &samples, a.per_layer)?)
}

fn cmd_attn_top(a: AttnTopArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    print_json(&inspect_pair(&model, &a.text, &a.caption, a.k)?)
}

fn cmd_xdomain(a: XdomainArgs, seed: u64) -> Result<()> {
    let docs = read_corpus(&a.corpus)?;
    let gold = read_gold(&a.gold)?;
    let mut models: Vec<(String, NeuralScorer)> = Vec::new();
    for spec in &a.models {
        let (name, path) = spec
            .split_once('=')
            .with_context(|| format!("expected DOMAIN=FILE, got '{spec}'"))?;
        models.push((name.to_string(), read_model(Path::new(path))?));
    }
    let refs: Vec<(String, &dyn Scorer)> = models
        .iter()
        .map(|(n, m)| (n.clone(), m as &dyn Scorer))
        .collect();
    print_json(&cross_domain_eval(&refs, &docs, &gold, seed)?)
}

fn cmd_freeze(a: FreezeReportArgs, seed: u64) -> Result<()> {
    let triplets = read_triplets(&a.pairs)?;
    let docs = read_corpus(&a.corpus)?;
    let gold = read_gold(&a.gold)?;
    let report = finetune_vs_freeze_report(
        &triplets,
        &docs,
        &gold,
        &a.hyper.model(),
        &a.hyper.train(seed, false),
        a.n,
    )?;
    print_json(&report)
}

fn cmd_synth(a: SynthArgs, seed: u64) -> Result<()> {
    let domains: Vec<Domain> = a
        .domains
        .split(',')
        .map(|d| Domain::from(d.trim()))
        .collect();
    let corpus = separable_corpus(&SyntheticConfig {
        papers: a.papers,
        figures_per_paper: a.figures,
        seed,
        domains,
        id_prefix: a.id_prefix,
    });
    write_jsonl(&a.out_corpus, &corpus.docs)?;
    write_jsonl(&a.out_gold, &corpus.gold)?;
    print_json(&serde_json::json!({ "papers": corpus.docs.len() }))
}

fn cmd_serve(a: ServeArgs, seed: u64) -> Result<()> {
    if !matches!(a.k, 1 | 3) {
        bail!("--k must be 1 or 3");
    }
    let corpus = Arc::new(Corpus::new(read_corpus(&a.corpus)?)?);
    let store = Arc::new(AnnotationStore::open(&a.store, corpus, Some(a.k))?);
    let app = router(
        AppState {
            store,
            base_seed: seed,
        },
        StaticDirs {
            images: a.images,
            ui: a.ui,
        },
    );
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .context("invalid --host/--port")?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
