//! Autoregressive decoding.
//!
//! `pad` and `bos` are never valid outputs, so their logits are masked
//! before the argmax or the draw. Decoding stops at `eos` or `max_len`, and
//! `eos` is not part of the result.

use rand::Rng;

use super::forward::{decode_step, encode, Encoded};
use super::kernels::softmax_in_place;
use super::model::AgentModel;
use super::NetError;
use crate::token::Token;

fn mask_control(logits: &mut [f64]) {
    logits[Token::Pad.index()] = f64::NEG_INFINITY;
    logits[Token::Bos.index()] = f64::NEG_INFINITY;
}

/// Output distribution after masking, at temperature `temperature`.
pub fn output_distribution(logits: &[f64], temperature: f64) -> Vec<f64> {
    let mut p: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    mask_control(&mut p);
    softmax_in_place(&mut p);
    p
}

/// Index of the largest logit, lowest index on ties.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

fn run<F>(model: &AgentModel, enc: &Encoded, max_len: usize, mut choose: F) -> Vec<usize>
where
    F: FnMut(&mut [f64]) -> usize,
{
    let mut state = enc.final_state();
    let mut prev = Token::Bos.index();
    let mut out = Vec::with_capacity(max_len);
    for _ in 0..max_len {
        let mut step = decode_step(model, &state, prev, enc);
        mask_control(&mut step.logits);
        let tok = choose(&mut step.logits);
        if tok == Token::Eos.index() {
            break;
        }
        out.push(tok);
        state = step.state;
        prev = tok;
    }
    out
}

pub fn greedy_sequence(
    model: &AgentModel,
    input: &[usize],
    max_len: usize,
) -> Result<Vec<usize>, NetError> {
    let enc = encode(model, input)?;
    Ok(run(model, &enc, max_len, |logits| argmax(logits)))
}

/// Multinomial sampling from the decoder's softmax.
pub fn sample_sequence<R: Rng>(
    model: &AgentModel,
    input: &[usize],
    temperature: f64,
    max_len: usize,
    rng: &mut R,
) -> Result<Vec<usize>, NetError> {
    let enc = encode(model, input)?;
    Ok(sample_from_encoded(model, &enc, temperature, max_len, rng))
}

/// Draws `count` sequences sharing one encoder pass.
pub fn sample_many<R: Rng>(
    model: &AgentModel,
    input: &[usize],
    temperature: f64,
    max_len: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>, NetError> {
    let enc = encode(model, input)?;
    Ok((0..count)
        .map(|_| sample_from_encoded(model, &enc, temperature, max_len, rng))
        .collect())
}

fn sample_from_encoded<R: Rng>(
    model: &AgentModel,
    enc: &Encoded,
    temperature: f64,
    max_len: usize,
    rng: &mut R,
) -> Vec<usize> {
    run(model, enc, max_len, |logits| {
        for l in logits.iter_mut() {
            *l /= temperature;
        }
        softmax_in_place(logits);
        draw(logits, rng)
    })
}

/// Inverse-CDF draw from a normalized distribution.
fn draw<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}
