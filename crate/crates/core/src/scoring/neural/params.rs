use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Encoder hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_width: usize,
    pub max_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 0,
            hidden: 64,
            layers: 2,
            heads: 2,
            ff_width: 128,
            max_len: 128,
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn check(&self) -> Result<()> {
        if self.hidden == 0 || self.heads == 0 || self.layers == 0 || self.ff_width == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "hidden size {} is not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        if self.vocab_size < 4 {
            return Err(Error::Config(
                "vocabulary must hold the special tokens".into(),
            ));
        }
        if self.max_len < 5 {
            return Err(Error::Config("max_len must be at least 5".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln1_gamma: Array1<f64>,
    pub ln1_beta: Array1<f64>,
    pub w_ff1: Array2<f64>,
    pub b_ff1: Array1<f64>,
    pub w_ff2: Array2<f64>,
    pub b_ff2: Array1<f64>,
    pub ln2_gamma: Array1<f64>,
    pub ln2_beta: Array1<f64>,
}

/// Post-layer-norm transformer encoder plus a linear head on the first
/// (`[CLS]`) position: `score = h_cls · head_weight + head_bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralScorerParams {
    pub config: ModelConfig,
    pub token_emb: Array2<f64>,
    pub position_emb: Array2<f64>,
    pub segment_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub head_weight: Array1<f64>,
    pub head_bias: f64,
}

/// Whether a tensor belongs to the encoder or to the regression head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Encoder,
    Head,
}

fn proj(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    normal_matrix(rng, rows, cols, (1.0 / rows as f64).sqrt())
}

fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("valid std");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

impl NeuralScorerParams {
    /// Seeded random initialization. Embeddings ~ N(0, 0.1), projections
    /// ~ N(0, 1/fan_in), biases 0, layer-norm gains 1.
    pub fn init(config: ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        config.check()?;
        let e = config.hidden;
        let f = config.ff_width;
        let token_emb = normal_matrix(rng, config.vocab_size, e, 0.1);
        let position_emb = normal_matrix(rng, config.max_len, e, 0.1);
        let segment_emb = normal_matrix(rng, 2, e, 0.1);
        let mut layers = Vec::with_capacity(config.layers);
        for _ in 0..config.layers {
            layers.push(LayerParams {
                wq: proj(rng, e, e),
                bq: Array1::zeros(e),
                wk: proj(rng, e, e),
                bk: Array1::zeros(e),
                wv: proj(rng, e, e),
                bv: Array1::zeros(e),
                wo: proj(rng, e, e),
                bo: Array1::zeros(e),
                ln1_gamma: Array1::ones(e),
                ln1_beta: Array1::zeros(e),
                w_ff1: proj(rng, e, f),
                b_ff1: Array1::zeros(f),
                w_ff2: proj(rng, f, e),
                b_ff2: Array1::zeros(e),
                ln2_gamma: Array1::ones(e),
                ln2_beta: Array1::zeros(e),
            });
        }
        let head_weight = normal_matrix(rng, 1, e, (1.0 / e as f64).sqrt())
            .row(0)
            .to_owned();
        Ok(Self {
            config,
            token_emb,
            position_emb,
            segment_emb,
            layers,
            head_weight,
            head_bias: 0.0,
        })
    }

    /// Same shapes, every value zero (gradient and moment buffers).
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, _, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Every tensor as `(name, group, values)` in a fixed order: embeddings,
    /// then layers in order, then the head.
    pub fn tensors(&self) -> Vec<(String, ParamGroup, &[f64])> {
        let mut out: Vec<(String, ParamGroup, &[f64])> = vec![
            (
                "embeddings.token".into(),
                ParamGroup::Encoder,
                slice(&self.token_emb),
            ),
            (
                "embeddings.position".into(),
                ParamGroup::Encoder,
                slice(&self.position_emb),
            ),
            (
                "embeddings.segment".into(),
                ParamGroup::Encoder,
                slice(&self.segment_emb),
            ),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            let named: [(&str, &[f64]); 16] = [
                ("wq", slice(&l.wq)),
                ("bq", slice1(&l.bq)),
                ("wk", slice(&l.wk)),
                ("bk", slice1(&l.bk)),
                ("wv", slice(&l.wv)),
                ("bv", slice1(&l.bv)),
                ("wo", slice(&l.wo)),
                ("bo", slice1(&l.bo)),
                ("ln1_gamma", slice1(&l.ln1_gamma)),
                ("ln1_beta", slice1(&l.ln1_beta)),
                ("w_ff1", slice(&l.w_ff1)),
                ("b_ff1", slice1(&l.b_ff1)),
                ("w_ff2", slice(&l.w_ff2)),
                ("b_ff2", slice1(&l.b_ff2)),
                ("ln2_gamma", slice1(&l.ln2_gamma)),
                ("ln2_beta", slice1(&l.ln2_beta)),
            ];
            out.extend(
                named
                    .into_iter()
                    .map(|(n, t)| (format!("layer{i}.{n}"), ParamGroup::Encoder, t)),
            );
        }
        out.push((
            "head.weight".into(),
            ParamGroup::Head,
            slice1(&self.head_weight),
        ));
        out.push((
            "head.bias".into(),
            ParamGroup::Head,
            std::slice::from_ref(&self.head_bias),
        ));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ParamGroup, &mut [f64])> {
        let mut out: Vec<(String, ParamGroup, &mut [f64])> = vec![
            (
                "embeddings.token".into(),
                ParamGroup::Encoder,
                slice_mut(&mut self.token_emb),
            ),
            (
                "embeddings.position".into(),
                ParamGroup::Encoder,
                slice_mut(&mut self.position_emb),
            ),
            (
                "embeddings.segment".into(),
                ParamGroup::Encoder,
                slice_mut(&mut self.segment_emb),
            ),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            let named: [(&str, &mut [f64]); 16] = [
                ("wq", slice_mut(&mut l.wq)),
                ("bq", slice1_mut(&mut l.bq)),
                ("wk", slice_mut(&mut l.wk)),
                ("bk", slice1_mut(&mut l.bk)),
                ("wv", slice_mut(&mut l.wv)),
                ("bv", slice1_mut(&mut l.bv)),
                ("wo", slice_mut(&mut l.wo)),
                ("bo", slice1_mut(&mut l.bo)),
                ("ln1_gamma", slice1_mut(&mut l.ln1_gamma)),
                ("ln1_beta", slice1_mut(&mut l.ln1_beta)),
                ("w_ff1", slice_mut(&mut l.w_ff1)),
                ("b_ff1", slice1_mut(&mut l.b_ff1)),
                ("w_ff2", slice_mut(&mut l.w_ff2)),
                ("b_ff2", slice1_mut(&mut l.b_ff2)),
                ("ln2_gamma", slice1_mut(&mut l.ln2_gamma)),
                ("ln2_beta", slice1_mut(&mut l.ln2_beta)),
            ];
            out.extend(
                named
                    .into_iter()
                    .map(|(n, t)| (format!("layer{i}.{n}"), ParamGroup::Encoder, t)),
            );
        }
        out.push((
            "head.weight".into(),
            ParamGroup::Head,
            slice1_mut(&mut self.head_weight),
        ));
        out.push((
            "head.bias".into(),
            ParamGroup::Head,
            std::slice::from_mut(&mut self.head_bias),
        ));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, _, t)| t.iter().all(|v| v.is_finite()))
    }

    /// SHA-256 over the bit patterns of every tensor in `group` (all tensors
    /// when `None`).
    pub fn checksum(&self, group: Option<ParamGroup>) -> String {
        let mut hasher = Sha256::new();
        for (name, g, t) in self.tensors() {
            if group.is_some_and(|want| want != g) {
                continue;
            }
            hasher.update(name.as_bytes());
            for v in t {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    pub fn encoder_checksum(&self) -> String {
        self.checksum(Some(ParamGroup::Encoder))
    }
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

fn slice1_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}
