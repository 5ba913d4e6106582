use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use figsum_cli::service::{router, AppState, StaticDirs};
use figsum_core::annotation::AnnotationStore;
use figsum_core::corpus::{Corpus, Document, Domain, Figure, Paragraph};

fn paper(id: &str, figures: usize) -> Document {
    Document {
        id: id.into(),
        title: format!("Title {id}"),
        abstract_text: "We present a tracker. It is fast.".into(),
        domain: Domain::Cv,
        paragraphs: vec![Paragraph {
            id: "p1".into(),
            heading: None,
            text: "Figure 1 shows the tracker.".into(),
        }],
        figures: (0..figures)
            .map(|i| Figure {
                id: format!("fig{}", i + 1),
                order_index: i,
                label_number: Some(i as u32 + 1),
                caption: format!("Figure {}: panel.", i + 1),
                image_ref: Some(format!("/images/{id}-{}.png", i + 1)),
            })
            .collect(),
    }
}

struct Harness {
    _dir: tempfile::TempDir,
    app: Router,
    store: Arc<AnnotationStore>,
}

fn harness() -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    std::fs::create_dir(&images).unwrap();
    std::fs::write(images.join("a-1.png"), b"png-bytes").unwrap();
    let ui = dir.path().join("ui");
    std::fs::create_dir(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<html>ui</html>").unwrap();

    let corpus = Arc::new(Corpus::new(vec![paper("a", 6), paper("b", 5), paper("c", 5)]).unwrap());
    let store =
        Arc::new(AnnotationStore::open(dir.path().join("events.jsonl"), corpus, Some(3)).unwrap());
    let app = router(
        AppState {
            store: Arc::clone(&store),
            base_seed: 11,
        },
        StaticDirs {
            images: Some(images),
            ui: Some(ui),
        },
    );
    Harness {
        _dir: dir,
        app,
        store,
    }
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (
        status,
        resp.into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec(),
    )
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = get(app, uri).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, b) = call(app, req).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn figure_order(view: &Value) -> Vec<String> {
    view["figures"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["figure_id"].as_str().unwrap().to_string())
        .collect()
}

#[tokio::test]
async fn papers_list_puts_unannotated_first() {
    let h = harness();
    let (s, _) = post(
        &h.app,
        "/api/papers/a/annotations",
        json!({"annotator_id": "x", "ranking": ["fig1", "fig2", "fig3"]}),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, papers) = get_json(&h.app, "/api/papers").await;
    assert_eq!(s, StatusCode::OK);
    let ids: Vec<&str> = papers
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["paper_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["b", "c", "a"]);
    assert_eq!(papers[0]["annotation_status"], "unannotated");
    assert_eq!(papers[2]["annotation_status"], "single");
    assert_eq!(papers[2]["n_figures"], 6);
}

#[tokio::test]
async fn session_view_is_a_stable_shuffle() {
    let h = harness();
    let (s, view) = get_json(&h.app, "/api/papers/a?annotator=alice").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(view["paper_id"], "a");
    assert!(view["abstract"].as_str().unwrap().starts_with("We present"));
    let order = figure_order(&view);
    assert_eq!(order.len(), 6);
    let (_, again) = get_json(&h.app, "/api/papers/a?annotator=alice").await;
    assert_eq!(figure_order(&again), order);
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(sorted, ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6"]);
}

#[tokio::test]
async fn unknown_paper_and_missing_annotator() {
    let h = harness();
    assert_eq!(
        get(&h.app, "/api/papers/zzz?annotator=alice").await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        get(&h.app, "/api/papers/a").await.0,
        StatusCode::BAD_REQUEST
    );
    let (s, _) = post(
        &h.app,
        "/api/papers/zzz/annotations",
        json!({"annotator_id": "x", "ranking": ["fig1", "fig2", "fig3"]}),
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_rankings_get_field_errors() {
    let h = harness();
    let cases = [
        (
            json!({"annotator_id": "x", "ranking": ["fig1", "fig2"]}),
            "ranking",
        ),
        (
            json!({"annotator_id": "x", "ranking": ["fig1", "fig1", "fig2"]}),
            "ranking[1]",
        ),
        (
            json!({"annotator_id": "x", "ranking": ["fig1", "fig2", "fig99"]}),
            "ranking[2]",
        ),
        (json!({"ranking": ["fig1", "fig2", "fig3"]}), "body"),
    ];
    for (body, field) in cases {
        let (s, v) = post(&h.app, "/api/papers/a/annotations", body).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
        let fields: Vec<&str> = v["errors"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["field"].as_str().unwrap())
            .collect();
        assert!(fields.contains(&field), "{v}");
    }
    assert_eq!(h.store.event_count(), 0);
}

#[tokio::test]
async fn submission_round_trips_through_export() {
    let h = harness();
    let (_, view) = get_json(&h.app, "/api/papers/a?annotator=bob").await;
    let pick: Vec<String> = figure_order(&view).into_iter().rev().take(3).collect();
    let (s, ack) = post(
        &h.app,
        "/api/papers/a/annotations",
        json!({"annotator_id": "bob", "ranking": pick}),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(ack["seq"], 0);
    assert_eq!(ack["offset"], 0);

    let resubmit: Vec<String> = figure_order(&view).into_iter().take(3).collect();
    let (s, ack) = post(
        &h.app,
        "/api/papers/a/annotations",
        json!({"annotator_id": "bob", "ranking": resubmit}),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(ack["seq"], 1);

    let (s, body) = get(&h.app, "/api/export").await;
    assert_eq!(s, StatusCode::OK);
    let text = String::from_utf8(body).unwrap();
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["ranking"], json!(resubmit));
    assert_eq!(lines[0]["annotator_id"], "bob");

    let (_, view) = get_json(&h.app, "/api/papers/a?annotator=bob").await;
    assert_eq!(view["previous_ranking"], json!(resubmit));
    assert_eq!(h.store.event_count(), 2);
}

#[tokio::test]
async fn agreement_is_null_until_two_annotators() {
    let h = harness();
    let (s, v) = get_json(&h.app, "/api/agreement").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["alpha"], Value::Null);
    assert_eq!(v["n_doubly_annotated"], 0);

    for who in ["x", "y"] {
        let (s, _) = post(
            &h.app,
            "/api/papers/b/annotations",
            json!({"annotator_id": who, "ranking": ["fig1", "fig2", "fig3"]}),
        )
        .await;
        assert_eq!(s, StatusCode::CREATED);
    }
    let (_, v) = get_json(&h.app, "/api/agreement").await;
    assert_eq!(v["alpha"], 1.0);
    assert_eq!(v["n_doubly_annotated"], 1);
    let (_, cov) = get_json(&h.app, "/api/coverage").await;
    assert_eq!(cov["multiple_annotators"], 1);
    assert_eq!(cov["unannotated"], 2);
}

#[tokio::test]
async fn serves_images_and_ui() {
    let h = harness();
    let (s, body) = get(&h.app, "/images/a-1.png").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, b"png-bytes");
    let (s, body) = get(&h.app, "/").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, b"<html>ui</html>");
    assert_eq!(
        get(&h.app, "/images/missing.png").await.0,
        StatusCode::NOT_FOUND
    );
}
