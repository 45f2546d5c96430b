//! Parameter layout of one seq2seq agent.
//!
//! All parameters live in one flat `Vec<f64>`; [`Param`] names the blocks.
//! Matrices are row-major. LSTM weight matrices are `4h x (d + h)` with gate
//! rows ordered input, forget, cell, output and columns `[x; h_prev]`.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::token::VOCAB_SIZE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl ModelDims {
    /// Tied embeddings with `embed == hidden`.
    pub fn with_hidden(hidden: usize) -> Self {
        ModelDims {
            vocab: VOCAB_SIZE,
            embed: hidden,
            hidden,
        }
    }
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims::with_hidden(20)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Param {
    Embedding,
    EncoderWeights,
    EncoderBias,
    DecoderWeights,
    DecoderBias,
    AttnEncoder,
    AttnDecoder,
    AttnVector,
    Bridge,
    OutputBias,
}

impl Param {
    pub const ALL: [Param; 10] = [
        Param::Embedding,
        Param::EncoderWeights,
        Param::EncoderBias,
        Param::DecoderWeights,
        Param::DecoderBias,
        Param::AttnEncoder,
        Param::AttnDecoder,
        Param::AttnVector,
        Param::Bridge,
        Param::OutputBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Embedding => "embedding",
            Param::EncoderWeights => "encoder.weights",
            Param::EncoderBias => "encoder.bias",
            Param::DecoderWeights => "decoder.weights",
            Param::DecoderBias => "decoder.bias",
            Param::AttnEncoder => "attention.w_enc",
            Param::AttnDecoder => "attention.w_dec",
            Param::AttnVector => "attention.v",
            Param::Bridge => "output.bridge",
            Param::OutputBias => "output.bias",
        }
    }

    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == name)
    }

    /// `(rows, cols)`; vectors are a single row.
    pub fn shape(self, d: ModelDims) -> (usize, usize) {
        let h = d.hidden;
        match self {
            Param::Embedding => (d.vocab, d.embed),
            Param::EncoderWeights | Param::DecoderWeights => (4 * h, d.embed + h),
            Param::EncoderBias | Param::DecoderBias => (1, 4 * h),
            Param::AttnEncoder | Param::AttnDecoder => (h, h),
            Param::AttnVector => (1, h),
            Param::Bridge => (d.embed, 2 * h),
            Param::OutputBias => (1, d.vocab),
        }
    }

    fn is_lstm_bias(self) -> bool {
        matches!(self, Param::EncoderBias | Param::DecoderBias)
    }
}

/// Offsets of every block within the flat vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    dims: ModelDims,
    offsets: [usize; 11],
}

impl Layout {
    pub fn new(dims: ModelDims) -> Self {
        let mut offsets = [0; 11];
        for (i, p) in Param::ALL.iter().enumerate() {
            let (r, c) = p.shape(dims);
            offsets[i + 1] = offsets[i] + r * c;
        }
        Layout { dims, offsets }
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn total(&self) -> usize {
        self.offsets[10]
    }

    pub fn range(&self, p: Param) -> std::ops::Range<usize> {
        let i = p as usize;
        self.offsets[i]..self.offsets[i + 1]
    }
}

/// `bias + W_x E[t]` for every token `t`, per LSTM: the input half of the
/// gate pre-activations only depends on the token.
#[derive(Clone, Debug)]
pub(crate) struct InputTables {
    pub encoder: Vec<f64>,
    pub decoder: Vec<f64>,
}

/// All learnable parameters of one agent.
#[derive(Clone, Debug)]
pub struct AgentModel {
    layout: Layout,
    values: Vec<f64>,
    /// Derived from `values`; reset by every `&mut` accessor.
    tables: OnceLock<InputTables>,
}

impl PartialEq for AgentModel {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout && self.values == other.values
    }
}

impl AgentModel {
    pub fn zeros(dims: ModelDims) -> Self {
        let layout = Layout::new(dims);
        let values = vec![0.0; layout.total()];
        AgentModel {
            layout,
            values,
            tables: OnceLock::new(),
        }
    }

    /// Uniform in `[-scale, scale]`; LSTM forget-gate biases start at 1.
    pub fn random<R: Rng>(dims: ModelDims, scale: f64, rng: &mut R) -> Self {
        let mut m = AgentModel::zeros(dims);
        for v in m.values.iter_mut() {
            *v = rng.gen_range(-scale..=scale);
        }
        let h = dims.hidden;
        for p in [Param::EncoderBias, Param::DecoderBias] {
            debug_assert!(p.is_lstm_bias());
            let b = m.block_mut(p);
            b[h..2 * h].iter_mut().for_each(|x| *x = 1.0);
        }
        m
    }

    pub fn from_values(dims: ModelDims, values: Vec<f64>) -> Option<Self> {
        let layout = Layout::new(dims);
        (values.len() == layout.total()).then_some(AgentModel {
            layout,
            values,
            tables: OnceLock::new(),
        })
    }

    pub fn dims(&self) -> ModelDims {
        self.layout.dims
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.tables = OnceLock::new();
        &mut self.values
    }

    pub fn block(&self, p: Param) -> &[f64] {
        &self.values[self.layout.range(p)]
    }

    pub fn block_mut(&mut self, p: Param) -> &mut [f64] {
        self.tables = OnceLock::new();
        let r = self.layout.range(p);
        &mut self.values[r]
    }

    pub(crate) fn input_tables(&self) -> &InputTables {
        self.tables.get_or_init(|| InputTables {
            encoder: self.input_table(Param::EncoderWeights, Param::EncoderBias),
            decoder: self.input_table(Param::DecoderWeights, Param::DecoderBias),
        })
    }

    fn input_table(&self, weights: Param, bias: Param) -> Vec<f64> {
        let d = self.dims();
        let (e, h) = (d.embed, d.hidden);
        let w = self.block(weights);
        let b = self.block(bias);
        let emb = self.block(Param::Embedding);
        let mut table = Vec::with_capacity(d.vocab * 4 * h);
        for x in emb.chunks_exact(e) {
            for (row, bi) in w.chunks_exact(e + h).zip(b) {
                table.push(bi + super::kernels::dot(&row[..e], x));
            }
        }
        table
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }
}

/// Gradient buffer with the same layout as [`AgentModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    layout: Layout,
    values: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &AgentModel) -> Self {
        Gradients {
            layout: model.layout.clone(),
            values: vec![0.0; model.values.len()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn block(&self, p: Param) -> &[f64] {
        &self.values[self.layout.range(p)]
    }

    pub fn block_mut(&mut self, p: Param) -> &mut [f64] {
        let r = self.layout.range(p);
        &mut self.values[r]
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|g| *g *= s);
    }
}
