//! Forward pass: LSTM encoder and additive-attention decoder.
//!
//! Every forward step keeps the activations its backward step needs, so the
//! decoding and training paths run the same arithmetic.

use super::kernels::{axpy, dot, matvec, sigmoid, softmax_in_place, tanh};
use super::model::{AgentModel, Param};
use super::NetError;

/// Activations of one LSTM step.
#[derive(Clone, Debug)]
pub(crate) struct LstmCache {
    pub token: usize,
    /// `[x; h_prev]`
    pub input: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i; f; g; o]`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

fn lstm_step(
    model: &AgentModel,
    weights: Param,
    token: usize,
    h_prev: &[f64],
    c_prev: &[f64],
) -> LstmCache {
    let dims = model.dims();
    let (d, h) = (dims.embed, dims.hidden);
    let emb = &model.block(Param::Embedding)[token * d..(token + 1) * d];
    let mut input = Vec::with_capacity(d + h);
    input.extend_from_slice(emb);
    input.extend_from_slice(h_prev);

    let tables = model.input_tables();
    let table = if weights == Param::EncoderWeights {
        &tables.encoder
    } else {
        &tables.decoder
    };
    let mut gates = table[token * 4 * h..(token + 1) * 4 * h].to_vec();
    let w = model.block(weights);
    for (g, row) in gates.iter_mut().zip(w.chunks_exact(d + h)) {
        *g += dot(&row[d..], h_prev);
    }
    for k in 0..h {
        gates[k] = sigmoid(gates[k]);
        gates[h + k] = sigmoid(gates[h + k]);
        gates[2 * h + k] = tanh(gates[2 * h + k]);
        gates[3 * h + k] = sigmoid(gates[3 * h + k]);
    }
    let mut c = vec![0.0; h];
    let mut tanh_c = vec![0.0; h];
    let mut hs = vec![0.0; h];
    for k in 0..h {
        c[k] = gates[h + k] * c_prev[k] + gates[k] * gates[2 * h + k];
        tanh_c[k] = tanh(c[k]);
        hs[k] = gates[3 * h + k] * tanh_c[k];
    }
    LstmCache {
        token,
        input,
        c_prev: c_prev.to_vec(),
        gates,
        c,
        tanh_c,
        h: hs,
    }
}

/// Recurrent decoder state `(h, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// Encoder output: one hidden state per input position plus the
/// precomputed attention keys `W_enc h_j`.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub(crate) steps: Vec<LstmCache>,
    /// `n x h`
    states: Vec<f64>,
    /// `n x h`
    keys: Vec<f64>,
    hidden: usize,
}

impl Encoded {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn hidden_state(&self, j: usize) -> &[f64] {
        &self.states[j * self.hidden..(j + 1) * self.hidden]
    }

    pub(crate) fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn final_state(&self) -> DecoderState {
        let last = self.steps.last().expect("encoded sequences are non-empty");
        DecoderState {
            h: last.h.clone(),
            c: last.c.clone(),
        }
    }
}

pub(crate) fn check_tokens(model: &AgentModel, input: &[usize]) -> Result<(), NetError> {
    if input.is_empty() {
        return Err(NetError::EmptySequence);
    }
    let v = model.dims().vocab;
    match input.iter().find(|&&t| t >= v) {
        Some(&t) => Err(NetError::UnknownToken(t)),
        None => Ok(()),
    }
}

/// Runs the encoder LSTM over `input` token indices.
pub fn encode(model: &AgentModel, input: &[usize]) -> Result<Encoded, NetError> {
    check_tokens(model, input)?;
    let h = model.dims().hidden;
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut steps = Vec::with_capacity(input.len());
    let mut states = Vec::with_capacity(input.len() * h);
    for &tok in input {
        let step = lstm_step(model, Param::EncoderWeights, tok, &h_prev, &c_prev);
        h_prev.copy_from_slice(&step.h);
        c_prev.copy_from_slice(&step.c);
        states.extend_from_slice(&step.h);
        steps.push(step);
    }
    let w_enc = model.block(Param::AttnEncoder);
    let mut keys = vec![0.0; states.len()];
    for (key, state) in keys.chunks_exact_mut(h).zip(states.chunks_exact(h)) {
        matvec(w_enc, state, key);
    }
    Ok(Encoded {
        steps,
        states,
        keys,
        hidden: h,
    })
}

/// Activations of one decoder step.
#[derive(Clone, Debug)]
pub(crate) struct StepCache {
    pub lstm: LstmCache,
    /// `tanh(W_enc h_j + W_dec s)`, `n x h`
    pub scores_hidden: Vec<f64>,
    pub attention: Vec<f64>,
    /// `[s; context]`
    pub joint: Vec<f64>,
    /// `B [s; context]`, the vector scored against the embeddings.
    pub projected: Vec<f64>,
    pub logits: Vec<f64>,
}

pub(crate) fn decoder_step_cached(
    model: &AgentModel,
    state: &DecoderState,
    prev: usize,
    enc: &Encoded,
) -> StepCache {
    let dims = model.dims();
    let (d, h, v) = (dims.embed, dims.hidden, dims.vocab);
    let lstm = lstm_step(model, Param::DecoderWeights, prev, &state.h, &state.c);

    let mut query = vec![0.0; h];
    matvec(model.block(Param::AttnDecoder), &lstm.h, &mut query);
    let att_v = model.block(Param::AttnVector);
    let n = enc.len();
    let mut scores_hidden = vec![0.0; n * h];
    let mut attention = vec![0.0; n];
    for j in 0..n {
        let key = &enc.keys[j * h..(j + 1) * h];
        let a = &mut scores_hidden[j * h..(j + 1) * h];
        for k in 0..h {
            a[k] = tanh(key[k] + query[k]);
        }
        attention[j] = dot(att_v, a);
    }
    softmax_in_place(&mut attention);

    let mut joint = vec![0.0; 2 * h];
    joint[..h].copy_from_slice(&lstm.h);
    for (j, &a) in attention.iter().enumerate().take(n) {
        axpy(a, enc.hidden_state(j), &mut joint[h..]);
    }
    let mut projected = vec![0.0; d];
    matvec(model.block(Param::Bridge), &joint, &mut projected);
    let mut logits = model.block(Param::OutputBias).to_vec();
    let emb = model.block(Param::Embedding);
    for (l, row) in logits.iter_mut().zip(emb.chunks_exact(d)).take(v) {
        *l += dot(row, &projected);
    }
    StepCache {
        lstm,
        scores_hidden,
        attention,
        joint,
        projected,
        logits,
    }
}

/// Output of one decoder step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub logits: Vec<f64>,
    pub state: DecoderState,
    pub attention: Vec<f64>,
}

/// Feeds `prev` to the decoder, attends over `enc` and scores every
/// vocabulary entry against the tied embedding matrix.
pub fn decode_step(
    model: &AgentModel,
    state: &DecoderState,
    prev: usize,
    enc: &Encoded,
) -> StepOutput {
    let cache = decoder_step_cached(model, state, prev, enc);
    StepOutput {
        state: DecoderState {
            h: cache.lstm.h,
            c: cache.lstm.c,
        },
        logits: cache.logits,
        attention: cache.attention,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::kernels::softmax_in_place;
    use crate::neuralnet::model::ModelDims;
    use crate::token::Token;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(h: usize, seed: u64) -> AgentModel {
        AgentModel::random(
            ModelDims::with_hidden(h),
            0.5,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
    }

    #[test]
    fn encode_shapes_and_errors() {
        let m = model(20, 1);
        let enc = encode(&m, &[3, 4, 5, 7]).unwrap();
        assert_eq!(enc.len(), 4);
        assert!((0..4).all(|j| enc.hidden_state(j).len() == 20));
        assert_eq!(encode(&m, &[]).unwrap_err(), NetError::EmptySequence);
        assert_eq!(
            encode(&m, &[3, 99]).unwrap_err(),
            NetError::UnknownToken(99)
        );
    }

    #[test]
    fn encode_is_bitwise_deterministic() {
        let m = model(20, 2);
        let a = encode(&m, &[3, 3, 6, 9]).unwrap();
        let b = encode(&m, &[3, 3, 6, 9]).unwrap();
        assert_eq!(a.states(), b.states());
    }

    #[test]
    fn single_state_gets_all_attention() {
        let m = model(6, 3);
        let enc = encode(&m, &[4]).unwrap();
        let out = decode_step(&m, &enc.final_state(), Token::Bos.index(), &enc);
        assert_eq!(out.attention, vec![1.0]);
    }

    #[test]
    fn identical_states_split_attention_evenly() {
        let m = model(6, 4);
        let enc = encode(&m, &[4]).unwrap();
        // Duplicate the single encoder state to get two identical positions.
        let twin = Encoded {
            steps: vec![enc.steps[0].clone(), enc.steps[0].clone()],
            states: [enc.states.clone(), enc.states.clone()].concat(),
            keys: [enc.keys.clone(), enc.keys.clone()].concat(),
            hidden: enc.hidden,
        };
        let out = decode_step(&m, &twin.final_state(), Token::Bos.index(), &twin);
        assert_eq!(out.attention, vec![0.5, 0.5]);
    }

    #[test]
    fn attention_and_output_are_distributions() {
        let m = model(20, 5);
        let enc = encode(&m, &[3, 5, 5, 6, 4, 4]).unwrap();
        let mut state = enc.final_state();
        let mut prev = Token::Bos.index();
        for _ in 0..5 {
            let out = decode_step(&m, &state, prev, &enc);
            assert!(out.attention.iter().all(|&a| a >= 0.0));
            assert!((out.attention.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            let mut p = out.logits.clone();
            softmax_in_place(&mut p);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prev = (prev + 3) % 15;
            state = out.state;
        }
    }
}
