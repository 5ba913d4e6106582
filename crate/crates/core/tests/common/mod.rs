#![allow(dead_code)]

use figsum_core::corpus::{Document, Domain, Figure, GoldAnnotation, Paragraph};

pub fn paragraph(id: &str, text: &str) -> Paragraph {
    Paragraph {
        id: id.into(),
        heading: None,
        text: text.into(),
    }
}

pub fn figure(i: usize, caption: &str) -> Figure {
    Figure {
        id: format!("fig{}", i + 1),
        order_index: i,
        label_number: None,
        caption: caption.into(),
        image_ref: Some(format!("img/fig{}.png", i + 1)),
    }
}

pub fn document(id: &str, paragraphs: Vec<Paragraph>, figures: Vec<Figure>) -> Document {
    Document {
        id: id.into(),
        title: format!("Paper {id}"),
        abstract_text: "We introduce a parser. It beats the baseline.".into(),
        domain: Domain::Nlp,
        paragraphs,
        figures,
    }
}

/// Figures 1-3 with mentions p1 -> {1}, p2 -> {1, 2}, p3 -> {3}.
pub fn mention_fixture(id: &str) -> Document {
    document(
        id,
        vec![
            paragraph("p1", "Figure 1 shows the parser."),
            paragraph("p2", "Figures 1 and 2 compare the variants."),
            paragraph("p3", "Training curves appear in Fig. 3."),
        ],
        vec![
            figure(0, "Figure 1: Parser overview."),
            figure(1, "Figure 2: Variant comparison."),
            figure(2, "Figure 3: Training curves."),
        ],
    )
}

pub fn gold(paper: &str, annotator: &str, ranking: &[&str], ts: i64) -> GoldAnnotation {
    GoldAnnotation {
        paper_id: paper.into(),
        annotator_id: annotator.into(),
        ranking: ranking.iter().map(|s| s.to_string()).collect(),
        ts,
    }
}
