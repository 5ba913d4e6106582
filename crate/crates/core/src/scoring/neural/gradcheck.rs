use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use super::model::{forward, ForwardMode};
use super::train::{batch_loss_and_grad, encode_example, EncodedExample, TrainingExample};
use super::NeuralScorer;
use crate::seed::rng_for;
use crate::{Error, Result};

/// Margins closer than this to the hinge are treated as sitting on the kink.
const KINK_GAP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub coordinates_checked: usize,
    /// Margin actually used after moving it off the hinge kink.
    pub alpha_used: f64,
    pub max_abs_gradient: f64,
}

/// Compares the analytic gradient of the batch loss (dropout off) to
/// central finite differences on a seeded sample of coordinates. Every
/// tensor contributes coordinates; at least `min_coordinates` are checked
/// when the model has that many.
///
/// The relative error per coordinate is
/// `|g_a - g_n| / max(1e-8, |g_a| + |g_n|)`.
pub fn grad_check(
    model: &NeuralScorer,
    batch: &[TrainingExample],
    alpha: f64,
    epsilon: f64,
    min_coordinates: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("gradient-check batch"));
    }
    let encoded: Vec<EncodedExample> = batch
        .iter()
        .map(|ex| encode_example(model, ex))
        .collect::<Result<_>>()?;
    let alpha_used = off_kink_alpha(model, &encoded, alpha)?;

    let mut grads = model.params.zeros_like();
    batch_loss_and_grad(
        &model.params,
        &encoded,
        alpha_used,
        &mut ForwardMode::Infer,
        Some((&mut grads, true)),
    )?;
    let names: Vec<String> = grads.tensors().into_iter().map(|(n, _, _)| n).collect();
    let analytic: Vec<Vec<f64>> = grads
        .tensors()
        .into_iter()
        .map(|(_, _, t)| t.to_vec())
        .collect();
    let last = model.params.config.layers - 1;
    let eligible: Vec<bool> = names.iter().map(|n| !is_loss_invariant(n, last)).collect();

    let mut rng = rng_for(seed, "grad-check");
    let coords = pick_coordinates(&analytic, &eligible, min_coordinates, &mut rng);

    let mut work = model.params.clone();
    let mut loss_at = |tensor: usize, i: usize, delta: f64| -> Result<f64> {
        let original = {
            let mut ts = work.tensors_mut();
            let v = ts[tensor].2[i];
            ts[tensor].2[i] = v + delta;
            v
        };
        let loss = batch_loss_and_grad(&work, &encoded, alpha_used, &mut ForwardMode::Infer, None);
        work.tensors_mut()[tensor].2[i] = original;
        loss
    };

    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for &(t, i) in &coords {
        let plus = loss_at(t, i, epsilon)?;
        let minus = loss_at(t, i, -epsilon)?;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[t][i];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
        max_abs = max_abs.max(a.abs());
    }
    Ok(GradCheckReport {
        max_relative_error: max_rel,
        coordinates_checked: coords.len(),
        alpha_used,
        max_abs_gradient: max_abs,
    })
}

fn off_kink_alpha(model: &NeuralScorer, encoded: &[EncodedExample], alpha: f64) -> Result<f64> {
    let mut gaps = Vec::with_capacity(encoded.len());
    for ex in encoded {
        let pos = forward(&model.params, &ex.positive, &mut ForwardMode::Infer)?.score;
        let neg = forward(&model.params, &ex.negative, &mut ForwardMode::Infer)?.score;
        gaps.push(pos - neg);
    }
    let mut a = alpha;
    for _ in 0..10_000 {
        if gaps.iter().all(|g| (g + a).abs() >= KINK_GAP) {
            return Ok(a);
        }
        a += KINK_GAP;
    }
    Err(Error::Config(
        "could not move the margin off the hinge kink".into(),
    ))
}

/// Tensors the margin loss cannot depend on: softmax ignores the key bias,
/// and a shift shared by every score cancels in `s_p - s_n`. Their true
/// gradient is zero, so finite differences there measure only roundoff.
pub(crate) fn is_loss_invariant(name: &str, last_layer: usize) -> bool {
    name.ends_with(".bk") || name == "head.bias" || name == format!("layer{last_layer}.ln2_beta")
}

fn pick_coordinates(
    tensors: &[Vec<f64>],
    eligible: &[bool],
    min_total: usize,
    rng: &mut impl Rng,
) -> Vec<(usize, usize)> {
    let pool: Vec<usize> = (0..tensors.len()).filter(|&t| eligible[t]).collect();
    let total: usize = pool.iter().map(|&t| tensors[t].len()).sum();
    let per_tensor = min_total.div_ceil(pool.len().max(1)) + 1;
    let mut chosen: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &t in &pool {
        let values = &tensors[t];
        let take = per_tensor.min(values.len());
        for i in index::sample(rng, values.len(), take) {
            chosen.insert((t, i));
        }
    }
    while chosen.len() < min_total.min(total) {
        let mut k = rng.random_range(0..total);
        for &t in &pool {
            let values = &tensors[t];
            if k < values.len() {
                chosen.insert((t, k));
                break;
            }
            k -= values.len();
        }
    }
    chosen.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::neural::ModelConfig;
    use crate::scoring::tokenize::Vocab;

    fn tiny(seed: u64) -> NeuralScorer {
        let vocab = Vocab::build(
            ["kernel graph tracking model", "kernel graph tracking model"],
            2,
        );
        let cfg = ModelConfig {
            hidden: 4,
            layers: 1,
            heads: 2,
            ff_width: 6,
            max_len: 12,
            ..Default::default()
        };
        NeuralScorer::initialize(vocab, cfg, seed).unwrap()
    }

    fn batch() -> Vec<TrainingExample> {
        vec![
            TrainingExample {
                caption: "tracking model".into(),
                positive: "graph tracking".into(),
                negative: "kernel model other".into(),
            },
            TrainingExample {
                caption: "kernel graph".into(),
                positive: "kernel".into(),
                negative: "tracking unknown".into(),
            },
        ]
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let report = grad_check(&tiny(5), &batch(), 1.0, 1e-5, 200, 1).unwrap();
        assert!(report.coordinates_checked >= 200);
        assert!(report.max_relative_error < 1e-4, "{report:?}");
        assert!(report.max_abs_gradient > 0.0);
    }

    #[test]
    fn invariant_tensors_get_zero_gradient() {
        let model = tiny(5);
        let encoded: Vec<EncodedExample> = batch()
            .iter()
            .map(|ex| encode_example(&model, ex).unwrap())
            .collect();
        let mut grads = model.params.zeros_like();
        batch_loss_and_grad(
            &model.params,
            &encoded,
            1.0,
            &mut ForwardMode::Infer,
            Some((&mut grads, true)),
        )
        .unwrap();
        let mut seen = 0;
        for (name, _, g) in grads.tensors() {
            if is_loss_invariant(&name, 0) {
                seen += 1;
                assert!(g.iter().all(|v| v.abs() < 1e-12), "{name}: {g:?}");
            }
        }
        assert_eq!(seen, 3);
    }

    #[test]
    fn satisfied_margin_has_zero_gradient() {
        let report = grad_check(&tiny(5), &batch(), -50.0, 1e-5, 200, 1).unwrap();
        assert_eq!(report.max_abs_gradient, 0.0);
        assert_eq!(report.max_relative_error, 0.0);
    }
}
