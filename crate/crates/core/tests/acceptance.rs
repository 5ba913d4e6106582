//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on
//! any failure.

use std::collections::HashMap;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use figsum_core::annotation::AnnotationStore;
use figsum_core::attention::{attention_cosine, finetune_vs_freeze_report, sample_pairs};
use figsum_core::corpus::{
    Corpus, Document, Domain, Figure, GoldAnnotation, Paragraph, RankedList,
};
use figsum_core::ingest::build_mention_index;
use figsum_core::pairs::{
    build_corpus_triplets, generate_triplets, PairGenConfig, TrainingTriplet,
};
use figsum_core::ranking::{
    accuracy_at_k, average_precision, baseline_pick_first, baseline_random,
    krippendorff_alpha_ordinal, mean_average_precision, mean_reciprocal_rank, rank_corpus,
    rank_figures, reciprocal_rank,
};
use figsum_core::scoring::{
    fit_tfidf, grad_check, sample_training_example, train_neural, vocabulary_from_triplets,
    ModelConfig, NeuralScorer, Scorer, TrainConfig,
};
use figsum_core::synthetic::{separable_corpus, SyntheticConfig};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(budget: Duration, start: Instant) -> Result<(), String> {
    let spent = start.elapsed();
    ensure(spent < budget, || {
        format!("took {spent:.1?}, budget {budget:?}")
    })
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn doc_with_figures(id: &str, n: usize) -> Document {
    Document {
        id: id.into(),
        title: id.into(),
        abstract_text: "An abstract sentence.".into(),
        domain: Domain::Other("test".into()),
        paragraphs: vec![Paragraph {
            id: "p1".into(),
            heading: None,
            text: "Body text.".into(),
        }],
        figures: (0..n)
            .map(|i| Figure {
                id: format!("f{}", i + 1),
                order_index: i,
                label_number: Some(i as u32 + 1),
                caption: format!("Caption {}", i + 1),
                image_ref: None,
            })
            .collect(),
    }
}

fn gold(paper: &str, annotator: &str, ranking: &[String]) -> GoldAnnotation {
    GoldAnnotation {
        paper_id: paper.into(),
        annotator_id: annotator.into(),
        ranking: ranking.to_vec(),
        ts: 0,
    }
}

// Definitional oracles, written position by position.

fn oracle_acc(ordering: &[String], relevant: &str, k: usize) -> f64 {
    if ordering.iter().take(k).any(|f| f == relevant) {
        1.0
    } else {
        0.0
    }
}

fn oracle_ap(ordering: &[String], relevant: &[String]) -> f64 {
    let mut hits = 0;
    let mut sum = 0.0;
    for (i, f) in ordering.iter().enumerate() {
        if relevant.contains(f) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

fn oracle_rr(ordering: &[String], relevant: &[String]) -> f64 {
    for (i, f) in ordering.iter().enumerate() {
        if relevant.contains(f) {
            return 1.0 / (i + 1) as f64;
        }
    }
    0.0
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let n = rng.random_range(1..=8);
        let doc = doc_with_figures(&format!("c{case}"), n);
        let mut ordering: Vec<String> = doc.figures.iter().map(|f| f.id.clone()).collect();
        ordering.shuffle(&mut rng);
        let k = rng.random_range(1..=n.min(3));
        let mut relevant = ordering.clone();
        relevant.shuffle(&mut rng);
        relevant.truncate(k);
        let ranked = vec![RankedList {
            paper_id: doc.id.clone(),
            ordering: ordering.clone(),
            costs: None,
        }];

        let ap = average_precision(&ordering, &relevant).map_err(err)?;
        let rr = reciprocal_rank(&ordering, &relevant).map_err(err)?;
        let g = vec![gold(&doc.id, "a", &relevant)];
        let map = mean_average_precision(&ranked, &g).map_err(err)?;
        let mrr = mean_reciprocal_rank(&ranked, &g).map_err(err)?;
        let pairs = [
            (ap, oracle_ap(&ordering, &relevant)),
            (map, oracle_ap(&ordering, &relevant)),
            (rr, oracle_rr(&ordering, &relevant)),
            (mrr, oracle_rr(&ordering, &relevant)),
        ];
        for (got, want) in pairs {
            worst = worst.max((got - want).abs());
        }
        let single = vec![gold(&doc.id, "a", &relevant[..1])];
        for acc_k in 1..=n {
            let got = accuracy_at_k(&ranked, &single, acc_k).map_err(err)?;
            worst = worst.max((got - oracle_acc(&ordering, &relevant[0], acc_k)).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    within(Duration::from_secs(5), start)?;
    Ok(format!("200 cases, max deviation {worst:e}"))
}

fn random_baseline() -> Outcome {
    let start = Instant::now();
    let corpus = separable_corpus(&SyntheticConfig {
        papers: 10_000,
        seed: 11,
        ..Default::default()
    });
    let ranked: Vec<RankedList> = corpus.docs.iter().map(|d| baseline_random(d, 5)).collect();
    let acc1 = accuracy_at_k(&ranked, &corpus.gold, 1).map_err(err)?;
    let acc3 = accuracy_at_k(&ranked, &corpus.gold, 3).map_err(err)?;
    ensure((acc1 - 0.2).abs() <= 0.02, || format!("acc@1 {acc1}"))?;
    ensure((acc3 - 0.6).abs() <= 0.02, || format!("acc@3 {acc3}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let top3: Vec<GoldAnnotation> = corpus
        .docs
        .iter()
        .map(|d| {
            let mut ids: Vec<String> = d.figures.iter().map(|f| f.id.clone()).collect();
            ids.shuffle(&mut rng);
            gold(&d.id, "a", &ids[..3])
        })
        .collect();
    let map = mean_average_precision(&ranked, &top3).map_err(err)?;
    let mrr = mean_reciprocal_rank(&ranked, &top3).map_err(err)?;

    let ids: Vec<String> = (1..=5).map(|i| format!("f{i}")).collect();
    let relevant = &ids[..3];
    let mut perm = ids.clone();
    let (mut sim_map, mut sim_mrr) = (0.0, 0.0);
    let draws = 1_000_000;
    for _ in 0..draws {
        perm.shuffle(&mut rng);
        sim_map += oracle_ap(&perm, relevant);
        sim_mrr += oracle_rr(&perm, relevant);
    }
    sim_map /= draws as f64;
    sim_mrr /= draws as f64;
    ensure((map - sim_map).abs() <= 0.01, || {
        format!("MAP {map} vs simulated {sim_map}")
    })?;
    ensure((mrr - sim_mrr).abs() <= 0.01, || {
        format!("MRR {mrr} vs simulated {sim_mrr}")
    })?;
    within(Duration::from_secs(60), start)?;
    Ok(format!(
        "acc@1 {acc1:.4}, acc@3 {acc3:.4}, MAP {map:.4} (sim {sim_map:.4}), MRR {mrr:.4} (sim {sim_mrr:.4})"
    ))
}

fn pick_first() -> Outcome {
    let corpus = separable_corpus(&SyntheticConfig {
        papers: 300,
        seed: 4,
        ..Default::default()
    });
    let ranked: Vec<RankedList> = corpus.docs.iter().map(baseline_pick_first).collect();
    let first: Vec<GoldAnnotation> = corpus
        .docs
        .iter()
        .map(|d| gold(&d.id, "a", &[d.figures_in_order()[0].id.clone()]))
        .collect();
    let acc = accuracy_at_k(&ranked, &first, 1).map_err(err)?;
    let map = mean_average_precision(&ranked, &first).map_err(err)?;
    let mrr = mean_reciprocal_rank(&ranked, &first).map_err(err)?;
    ensure(acc == 1.0 && map == 1.0 && mrr == 1.0, || {
        format!("acc@1 {acc}, MAP {map}, MRR {mrr}")
    })?;
    Ok("acc@1 = MAP = MRR = 1.0".into())
}

fn mention_fixture() -> Document {
    Document {
        id: "fixture".into(),
        title: "Fixture".into(),
        abstract_text: "We study figures.".into(),
        domain: Domain::Nlp,
        paragraphs: vec![
            Paragraph {
                id: "p1".into(),
                heading: None,
                text: "The encoder is shown in Figure 1.".into(),
            },
            Paragraph {
                id: "p2".into(),
                heading: None,
                text: "Figures 1 and 2 compare both variants.".into(),
            },
            Paragraph {
                id: "p3".into(),
                heading: None,
                text: "Fig. 3 reports the ablation.".into(),
            },
        ],
        figures: (1..=3)
            .map(|i| Figure {
                id: format!("fig{i}"),
                order_index: i - 1,
                label_number: Some(i as u32),
                caption: format!("Figure {i}: panel {i}."),
                image_ref: None,
            })
            .collect(),
    }
}

fn render(triplets: &[TrainingTriplet]) -> String {
    triplets
        .iter()
        .map(|t| serde_json::to_string(t).expect("serializable"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn mention_mining() -> Outcome {
    let doc = mention_fixture();
    let index = build_mention_index(&doc).map_err(err)?;
    let expected: [(&str, &[&str]); 3] = [
        ("fig1", &["p1", "p2"]),
        ("fig2", &["p2"]),
        ("fig3", &["p3"]),
    ];
    for (fig, paras) in expected {
        let got = index.paragraphs_mentioning(fig);
        ensure(got == paras, || {
            format!("{fig} -> {got:?}, expected {paras:?}")
        })?;
    }
    let cfg = PairGenConfig::default();
    let first = generate_triplets(&doc, &index, &cfg).map_err(err)?;
    ensure(first.len() == 4, || format!("{} triplets", first.len()))?;
    let anchor1: Vec<&str> = first
        .iter()
        .filter(|t| t.anchor_figure_id == "fig1")
        .map(|t| t.negative_paragraph_id.as_str())
        .collect();
    ensure(anchor1 == ["p3", "p3"], || {
        format!("negatives for fig1: {anchor1:?}")
    })?;
    let bytes = render(&first);
    for _ in 0..5 {
        let again =
            generate_triplets(&doc, &build_mention_index(&doc).map_err(err)?, &cfg).map_err(err)?;
        ensure(render(&again) == bytes, || {
            "output differs between runs".into()
        })?;
    }
    Ok("index matches, 4 triplets, stable bytes".into())
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let doc = mention_fixture();
    let (triplets, _) =
        build_corpus_triplets(&[doc.clone(), doc], &PairGenConfig::default()).map_err(err)?;
    let cfg = ModelConfig {
        hidden: 4,
        layers: 1,
        heads: 2,
        ff_width: 8,
        max_len: 32,
        ..Default::default()
    };
    let model =
        NeuralScorer::initialize(vocabulary_from_triplets(&triplets), cfg, 3).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let batch: Vec<_> = triplets
        .iter()
        .map(|t| sample_training_example(t, &mut rng))
        .collect();
    let report = grad_check(&model, &batch, 1.0, 1e-5, 300, 1).map_err(err)?;
    ensure(report.max_relative_error < 1e-4, || format!("{report:?}"))?;
    within(Duration::from_secs(10), start)?;
    Ok(format!(
        "max relative error {:.2e} over {} coordinates",
        report.max_relative_error, report.coordinates_checked
    ))
}

fn learning_signal() -> Outcome {
    let start = Instant::now();
    let train = separable_corpus(&SyntheticConfig {
        papers: 1200,
        seed: 1,
        ..Default::default()
    });
    let test = separable_corpus(&SyntheticConfig {
        papers: 200,
        seed: 2,
        id_prefix: "test".into(),
        ..Default::default()
    });
    let (triplets, _) =
        build_corpus_triplets(&train.docs, &PairGenConfig::default()).map_err(err)?;
    let model_cfg = ModelConfig {
        hidden: 16,
        layers: 2,
        heads: 4,
        ff_width: 32,
        max_len: 64,
        ..Default::default()
    };
    let train_cfg = TrainConfig {
        epochs: 15,
        learning_rate: 2e-3,
        dropout_rate: 0.1,
        ..Default::default()
    };
    let (model, _) = train_neural(&triplets, &model_cfg, &train_cfg).map_err(err)?;
    let trained_in = start.elapsed();
    within(Duration::from_secs(300), start)?;

    let neural = accuracy_at_k(
        &rank_corpus(&model, &test.docs).map_err(err)?,
        &test.gold,
        1,
    )
    .map_err(err)?;
    let random_ranked: Vec<RankedList> = test.docs.iter().map(|d| baseline_random(d, 5)).collect();
    let random = accuracy_at_k(&random_ranked, &test.gold, 1).map_err(err)?;
    let tfidf = fit_tfidf(&test.docs).map_err(err)?;
    let lexical = accuracy_at_k(
        &rank_corpus(&tfidf, &test.docs).map_err(err)?,
        &test.gold,
        1,
    )
    .map_err(err)?;
    ensure(neural >= 0.9, || {
        format!("neural acc@1 {neural} (random {random})")
    })?;
    ensure(lexical == 1.0, || format!("tf-idf acc@1 {lexical}"))?;

    let freeze = finetune_vs_freeze_report(
        &triplets, &test.docs, &test.gold, &model_cfg, &train_cfg, 50,
    )
    .map_err(err)?;
    let (fine, frozen) = (freeze.finetuned.overall.map, freeze.frozen.overall.map);
    ensure(fine >= frozen, || {
        format!("fine-tuned MAP {fine} < frozen MAP {frozen}")
    })?;
    Ok(format!(
        "neural acc@1 {neural:.3}, random {random:.3}, tf-idf {lexical:.3}, \
         fine-tuned MAP {fine:.3} vs frozen {frozen:.3}, trained in {trained_in:.1?}"
    ))
}

struct Adjusted<S> {
    base: S,
    target_caption: Option<String>,
    shift: f64,
}

impl<S: Scorer> Scorer for Adjusted<S> {
    fn cost(&self, text: &str, caption: &str) -> figsum_core::Result<f64> {
        let bonus = if self.target_caption.as_deref() == Some(caption) {
            1e3
        } else {
            0.0
        };
        Ok(self.base.cost(text, caption)? + self.shift - bonus)
    }
}

fn ranking_convention() -> Outcome {
    let corpus = separable_corpus(&SyntheticConfig {
        papers: 100,
        seed: 6,
        ..Default::default()
    });
    let tfidf = fit_tfidf(&corpus.docs).map_err(err)?;
    let mut checked = 0;
    for doc in &corpus.docs {
        let base = rank_figures(&tfidf, doc).map_err(err)?.ordering;
        for shift in [-3.5, 1.0, 250.0] {
            let shifted = Adjusted {
                base: &tfidf,
                target_caption: None,
                shift,
            };
            let got = rank_figures(&shifted, doc).map_err(err)?.ordering;
            ensure(got == base, || {
                format!("{}: shift {shift} reordered", doc.id)
            })?;
        }
        for fig in &doc.figures {
            let boosted = Adjusted {
                base: &tfidf,
                target_caption: Some(fig.caption.clone()),
                shift: 0.0,
            };
            let got = rank_figures(&boosted, doc).map_err(err)?;
            ensure(got.rank_of(&fig.id) == Some(1), || {
                format!("{}/{} not first", doc.id, fig.id)
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} lowered figures ranked first, shifts preserved order"
    ))
}

/// Pairable-value definition of ordinal alpha: observed disagreement over
/// within-unit pairs against expected disagreement over all value pairs.
fn oracle_alpha(units: &[Vec<u32>]) -> f64 {
    let values: Vec<(usize, u32)> = units
        .iter()
        .enumerate()
        .filter(|(_, u)| u.len() >= 2)
        .flat_map(|(i, u)| u.iter().map(move |&v| (i, v)))
        .collect();
    let n = values.len() as f64;
    let count = |c: u32| values.iter().filter(|(_, v)| *v == c).count() as f64;
    let delta = |a: u32, b: u32| {
        let (lo, hi) = (a.min(b), a.max(b));
        let between: f64 = (lo..=hi).map(count).sum();
        (between - (count(a) + count(b)) / 2.0).powi(2)
    };
    let (mut observed, mut expected) = (0.0, 0.0);
    for (i, &(ui, a)) in values.iter().enumerate() {
        for (j, &(uj, b)) in values.iter().enumerate() {
            if i == j {
                continue;
            }
            expected += delta(a, b);
            if ui == uj {
                observed += delta(a, b) / (units[ui].len() - 1) as f64;
            }
        }
    }
    1.0 - (observed / n) / (expected / (n * (n - 1.0)))
}

fn krippendorff() -> Outcome {
    let figs: HashMap<String, Vec<String>> = ["q1", "q2", "q3"]
        .iter()
        .map(|p| (p.to_string(), (1..=5).map(|i| format!("f{i}")).collect()))
        .collect();
    let r = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    let same: Vec<GoldAnnotation> = ["q1", "q2", "q3"]
        .iter()
        .flat_map(|p| ["x", "y"].map(|a| gold(p, a, &r(&["f2", "f1", "f5"]))))
        .collect();
    let perfect = krippendorff_alpha_ordinal(&same, &figs).map_err(err)?;
    ensure(perfect == 1.0, || {
        format!("perfect agreement gave {perfect}")
    })?;

    let rankings = [
        ("q1", ["f1", "f2", "f3"], ["f1", "f3", "f2"]),
        ("q2", ["f2", "f4", "f5"], ["f4", "f2", "f1"]),
        ("q3", ["f5", "f1", "f3"], ["f3", "f5", "f4"]),
    ];
    let mut anns = Vec::new();
    let mut units = Vec::new();
    for (paper, x, y) in rankings {
        anns.push(gold(paper, "x", &r(&x)));
        anns.push(gold(paper, "y", &r(&y)));
        for f in 1..=5 {
            let id = format!("f{f}");
            let value = |ranking: &[&str; 3]| {
                ranking
                    .iter()
                    .position(|g| *g == id)
                    .map_or(4, |p| p as u32 + 1)
            };
            units.push(vec![value(&x), value(&y)]);
        }
    }
    let alpha = krippendorff_alpha_ordinal(&anns, &figs).map_err(err)?;
    let oracle = oracle_alpha(&units);
    ensure((alpha - oracle).abs() < 1e-9, || {
        format!("alpha {alpha} vs oracle {oracle}")
    })?;
    // Reference value from an independent implementation on the same data.
    let reference = 0.6269005847953217;
    ensure((alpha - reference).abs() < 1e-9, || {
        format!("alpha {alpha} vs reference {reference}")
    })?;
    Ok(format!(
        "perfect 1.0, fixture {alpha:.12} (oracle {oracle:.12})"
    ))
}

fn attention_self_similarity() -> Outcome {
    let corpus = separable_corpus(&SyntheticConfig {
        papers: 40,
        seed: 3,
        ..Default::default()
    });
    let (triplets, _) =
        build_corpus_triplets(&corpus.docs, &PairGenConfig::default()).map_err(err)?;
    let layers = 3;
    let cfg = ModelConfig {
        hidden: 8,
        layers,
        heads: 2,
        ff_width: 16,
        max_len: 64,
        ..Default::default()
    };
    let model =
        NeuralScorer::initialize(vocabulary_from_triplets(&triplets), cfg, 21).map_err(err)?;
    let samples = sample_pairs(&triplets, 100, 5);
    let report = attention_cosine(&model, &model, &samples, true).map_err(err)?;
    ensure(report.overall_mean == 1.0, || {
        format!("overall {}", report.overall_mean)
    })?;
    ensure(report.per_layer.len() == layers, || {
        format!("{} layer entries", report.per_layer.len())
    })?;
    ensure(report.per_layer.iter().all(|&v| v == 1.0), || {
        format!("{:?}", report.per_layer)
    })?;
    Ok(format!(
        "1.0 over {} samples, {} layers",
        report.sample_count, layers
    ))
}

fn store_replay() -> Outcome {
    let corpus = separable_corpus(&SyntheticConfig {
        papers: 6,
        seed: 9,
        ..Default::default()
    });
    let corpus = Arc::new(Corpus::new(corpus.docs).map_err(err)?);
    let dir = tempfile::tempdir().map_err(err)?;
    let log = dir.path().join("events.jsonl");
    let store = AnnotationStore::open(&log, Arc::clone(&corpus), Some(3)).map_err(err)?;

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut exports = vec![store.export_gold().0];
    let mut boundaries = vec![0u64];
    for i in 0..24 {
        let doc = &corpus.docs()[rng.random_range(0..corpus.len())];
        let mut ids: Vec<String> = doc.figures.iter().map(|f| f.id.clone()).collect();
        ids.shuffle(&mut rng);
        let ann = GoldAnnotation {
            paper_id: doc.id.clone(),
            annotator_id: ["ann-a", "ann-b", "ann-c"][rng.random_range(0..3)].into(),
            ranking: ids[..3].to_vec(),
            ts: i,
        };
        store.record_annotation(ann).map_err(err)?;
        exports.push(store.export_gold().0);
        boundaries.push(std::fs::metadata(&log).map_err(err)?.len());
    }
    drop(store);
    let bytes = std::fs::read(&log).map_err(err)?;

    for (i, &b) in boundaries.iter().enumerate() {
        let cut = dir.path().join(format!("cut-{i}.jsonl"));
        std::fs::write(&cut, &bytes[..b as usize]).map_err(err)?;
        let replayed = AnnotationStore::open(&cut, Arc::clone(&corpus), Some(3)).map_err(err)?;
        ensure(replayed.export_gold().0 == exports[i], || {
            format!("boundary {i} differs")
        })?;

        if let Some(&next) = boundaries.get(i + 1) {
            let torn = dir.path().join(format!("torn-{i}.jsonl"));
            let mid = (b + next) / 2;
            std::fs::write(&torn, &bytes[..mid as usize]).map_err(err)?;
            let replayed =
                AnnotationStore::open(&torn, Arc::clone(&corpus), Some(3)).map_err(err)?;
            ensure(replayed.export_gold().0 == exports[i], || {
                format!("torn record after {i} differs")
            })?;
        }
    }
    Ok(format!(
        "{} boundaries and {} torn tails replayed",
        boundaries.len(),
        boundaries.len() - 1
    ))
}

fn main() -> ExitCode {
    let checks: [Check; 10] = [
        ("metric oracles", metric_oracles),
        ("random baseline", random_baseline),
        ("pick-first", pick_first),
        ("mention mining fixture", mention_mining),
        ("gradient check", gradient_check),
        ("learning signal", learning_signal),
        ("ranking convention", ranking_convention),
        ("krippendorff alpha", krippendorff),
        ("attention self-similarity", attention_self_similarity),
        ("store replay", store_replay),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let spent = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {name} [{spent:.2?}] {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} [{spent:.2?}] {reason}");
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
