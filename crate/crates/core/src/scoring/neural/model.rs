//! Forward pass with activation caching and the matching reverse pass.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{LayerParams, NeuralScorerParams};
use crate::scoring::tokenize::EncodedPair;
use crate::{Error, Result};

const LN_EPS: f64 = 1e-6;

pub enum ForwardMode<'a> {
    /// Deterministic, no dropout.
    Infer,
    /// Inverted dropout at `rate` on the embedding output and on both
    /// sublayer outputs before their residual additions.
    Train { rate: f64, rng: &'a mut ChaCha8Rng },
}

impl ForwardMode<'_> {
    fn mask(&mut self, rows: usize, cols: usize) -> Option<Array2<f64>> {
        match self {
            ForwardMode::Train { rate, rng } if *rate > 0.0 => {
                let keep = 1.0 / (1.0 - *rate);
                let p = *rate;
                Some(Array2::from_shape_fn((rows, cols), |_| {
                    if rng.random::<f64>() < p {
                        0.0
                    } else {
                        keep
                    }
                }))
            }
            _ => None,
        }
    }
}

pub(crate) struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

pub(crate) struct LayerCache {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    pub(crate) probs: Vec<Array2<f64>>,
    context: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    ln1: LnCache,
    h1: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
    ff_mask: Option<Array2<f64>>,
    ln2: LnCache,
}

pub(crate) struct ForwardCache {
    ids: Vec<u32>,
    segments: Vec<u8>,
    emb_mask: Option<Array2<f64>>,
    pub(crate) layers: Vec<LayerCache>,
    output: Array2<f64>,
    pub(crate) score: f64,
}

fn apply_mask(x: Array2<f64>, mask: &Option<Array2<f64>>) -> Array2<f64> {
    match mask {
        Some(m) => x * m,
        None => x,
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

pub(crate) fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn layer_norm(x: &Array2<f64>, gamma: &Array1<f64>, beta: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let mean = x.mean_axis(Axis(1)).expect("nonempty rows");
    let centered = x - &mean.clone().insert_axis(Axis(1));
    let var = centered
        .mapv(|v| v * v)
        .mean_axis(Axis(1))
        .expect("nonempty rows");
    let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = centered * &inv_std.clone().insert_axis(Axis(1));
    let out = &xhat * gamma + beta;
    (out, LnCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    gamma: &Array1<f64>,
    d_gamma: &mut Array1<f64>,
    d_beta: &mut Array1<f64>,
) -> Array2<f64> {
    *d_gamma += &(dy * &cache.xhat).sum_axis(Axis(0));
    *d_beta += &dy.sum_axis(Axis(0));
    let dxhat = dy * gamma;
    let mean_d = dxhat
        .mean_axis(Axis(1))
        .expect("nonempty rows")
        .insert_axis(Axis(1));
    let mean_dx = (&dxhat * &cache.xhat)
        .mean_axis(Axis(1))
        .expect("nonempty rows")
        .insert_axis(Axis(1));
    (dxhat - &mean_d - &(&cache.xhat * &mean_dx)) * &cache.inv_std.clone().insert_axis(Axis(1))
}

fn layer_forward(
    l: &LayerParams,
    x: Array2<f64>,
    heads: usize,
    mode: &mut ForwardMode<'_>,
) -> (Array2<f64>, LayerCache) {
    let (t, e) = x.dim();
    let dh = e / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = x.dot(&l.wq) + &l.bq;
    let k = x.dot(&l.wk) + &l.bk;
    let v = x.dot(&l.wv) + &l.bv;

    let mut context = Array2::zeros((t, e));
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        softmax_rows(&mut scores);
        context.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        probs.push(scores);
    }
    let attn_mask = mode.mask(t, e);
    let attn_out = apply_mask(context.dot(&l.wo) + &l.bo, &attn_mask);
    let (h1, ln1) = layer_norm(&(&x + &attn_out), &l.ln1_gamma, &l.ln1_beta);

    let ff_pre = h1.dot(&l.w_ff1) + &l.b_ff1;
    let ff_act = ff_pre.mapv(gelu);
    let ff_mask = mode.mask(t, e);
    let ff_out = apply_mask(ff_act.dot(&l.w_ff2) + &l.b_ff2, &ff_mask);
    let (out, ln2) = layer_norm(&(&h1 + &ff_out), &l.ln2_gamma, &l.ln2_beta);

    let cache = LayerCache {
        input: x,
        q,
        k,
        v,
        probs,
        context,
        attn_mask,
        ln1,
        h1,
        ff_pre,
        ff_act,
        ff_mask,
        ln2,
    };
    (out, cache)
}

pub(crate) fn forward(
    params: &NeuralScorerParams,
    enc: &EncodedPair,
    mode: &mut ForwardMode<'_>,
) -> Result<ForwardCache> {
    let cfg = &params.config;
    let t = enc.len();
    if t == 0 || t > cfg.max_len {
        return Err(Error::ShapeMismatch(format!(
            "sequence length {t} outside 1..={}",
            cfg.max_len
        )));
    }
    if let Some(&bad) = enc.ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(Error::ShapeMismatch(format!(
            "token id {bad} outside vocabulary of {}",
            cfg.vocab_size
        )));
    }
    let mut x = Array2::zeros((t, cfg.hidden));
    for (pos, mut row) in x.rows_mut().into_iter().enumerate() {
        row.assign(&params.token_emb.row(enc.ids[pos] as usize));
        row += &params.position_emb.row(pos);
        row += &params.segment_emb.row(enc.segments[pos] as usize);
    }
    let emb_mask = mode.mask(t, cfg.hidden);
    let mut x = apply_mask(x, &emb_mask);

    let mut layers = Vec::with_capacity(params.layers.len());
    for l in &params.layers {
        let (out, cache) = layer_forward(l, x, cfg.heads, mode);
        layers.push(cache);
        x = out;
    }
    let score = x.row(0).dot(&params.head_weight) + params.head_bias;
    Ok(ForwardCache {
        ids: enc.ids.clone(),
        segments: enc.segments.clone(),
        emb_mask,
        layers,
        output: x,
        score,
    })
}

fn layer_backward(
    l: &LayerParams,
    g: &mut LayerParams,
    c: &LayerCache,
    d_out: &Array2<f64>,
    heads: usize,
) -> Array2<f64> {
    let (t, e) = c.input.dim();
    let dh = e / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let d_h2 = layer_norm_backward(
        d_out,
        &c.ln2,
        &l.ln2_gamma,
        &mut g.ln2_gamma,
        &mut g.ln2_beta,
    );
    let d_ff_out = apply_mask(d_h2.clone(), &c.ff_mask);
    g.w_ff2 += &c.ff_act.t().dot(&d_ff_out);
    g.b_ff2 += &d_ff_out.sum_axis(Axis(0));
    let d_ff_pre = d_ff_out.dot(&l.w_ff2.t()) * &c.ff_pre.mapv(gelu_grad);
    g.w_ff1 += &c.h1.t().dot(&d_ff_pre);
    g.b_ff1 += &d_ff_pre.sum_axis(Axis(0));
    let d_h1 = d_h2 + &d_ff_pre.dot(&l.w_ff1.t());

    let d_h1_pre = layer_norm_backward(
        &d_h1,
        &c.ln1,
        &l.ln1_gamma,
        &mut g.ln1_gamma,
        &mut g.ln1_beta,
    );
    let d_attn_out = apply_mask(d_h1_pre.clone(), &c.attn_mask);
    g.wo += &c.context.t().dot(&d_attn_out);
    g.bo += &d_attn_out.sum_axis(Axis(0));
    let d_ctx = d_attn_out.dot(&l.wo.t());

    let mut d_q = Array2::zeros((t, e));
    let mut d_k = Array2::zeros((t, e));
    let mut d_v = Array2::zeros((t, e));
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let p = &c.probs[h];
        let d_ctx_h = d_ctx.slice(cols);
        let d_p = d_ctx_h.dot(&c.v.slice(cols).t());
        d_v.slice_mut(cols).assign(&p.t().dot(&d_ctx_h));
        let row_dot = (&d_p * p).sum_axis(Axis(1)).insert_axis(Axis(1));
        let d_scores = (d_p - &row_dot) * p * scale;
        d_q.slice_mut(cols).assign(&d_scores.dot(&c.k.slice(cols)));
        d_k.slice_mut(cols)
            .assign(&d_scores.t().dot(&c.q.slice(cols)));
    }

    let mut d_x = d_h1_pre;
    for (d_proj, w, gw, gb) in [
        (&d_q, &l.wq, &mut g.wq, &mut g.bq),
        (&d_k, &l.wk, &mut g.wk, &mut g.bk),
        (&d_v, &l.wv, &mut g.wv, &mut g.bv),
    ] {
        *gw += &c.input.t().dot(d_proj);
        *gb += &d_proj.sum_axis(Axis(0));
        d_x += &d_proj.dot(&w.t());
    }
    d_x
}

/// Accumulates `d_score * d(score)/d(params)` into `grads`. With
/// `encoder = false` only the head receives gradient.
pub(crate) fn backward(
    params: &NeuralScorerParams,
    cache: &ForwardCache,
    d_score: f64,
    grads: &mut NeuralScorerParams,
    encoder: bool,
) {
    grads.head_weight.scaled_add(d_score, &cache.output.row(0));
    grads.head_bias += d_score;
    if !encoder {
        return;
    }
    let mut d_x = Array2::zeros(cache.output.dim());
    d_x.row_mut(0).scaled_add(d_score, &params.head_weight);
    for (i, l) in params.layers.iter().enumerate().rev() {
        d_x = layer_backward(
            l,
            &mut grads.layers[i],
            &cache.layers[i],
            &d_x,
            params.config.heads,
        );
    }
    let d_emb = apply_mask(d_x, &cache.emb_mask);
    for (pos, row) in d_emb.rows().into_iter().enumerate() {
        let mut tok = grads.token_emb.row_mut(cache.ids[pos] as usize);
        tok += &row;
        let mut p = grads.position_emb.row_mut(pos);
        p += &row;
        let mut seg = grads.segment_emb.row_mut(cache.segments[pos] as usize);
        seg += &row;
    }
}
