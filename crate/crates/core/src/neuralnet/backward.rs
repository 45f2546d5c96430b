//! Teacher-forced cross-entropy and backpropagation through time.

use super::forward::{decoder_step_cached, encode, LstmCache, StepCache};
use super::kernels::{axpy, dot, matvec_t_acc, outer_acc, softmax_in_place};
use super::model::{AgentModel, Gradients, Param};
use super::NetError;
use crate::token::Token;

/// Disjoint mutable views of every gradient block.
struct GradBlocks<'a> {
    emb: &'a mut [f64],
    enc_w: &'a mut [f64],
    enc_b: &'a mut [f64],
    dec_w: &'a mut [f64],
    dec_b: &'a mut [f64],
    att_enc: &'a mut [f64],
    att_dec: &'a mut [f64],
    att_v: &'a mut [f64],
    bridge: &'a mut [f64],
    out_b: &'a mut [f64],
}

impl<'a> GradBlocks<'a> {
    fn new(grads: &'a mut Gradients, model: &AgentModel) -> Self {
        let layout = model.layout();
        let mut rest: &'a mut [f64] = grads.values_mut();
        let mut take = |p: Param| {
            let len = layout.range(p).len();
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(len);
            rest = tail;
            head
        };
        // Must follow `Param::ALL` order.
        GradBlocks {
            emb: take(Param::Embedding),
            enc_w: take(Param::EncoderWeights),
            enc_b: take(Param::EncoderBias),
            dec_w: take(Param::DecoderWeights),
            dec_b: take(Param::DecoderBias),
            att_enc: take(Param::AttnEncoder),
            att_dec: take(Param::AttnDecoder),
            att_v: take(Param::AttnVector),
            bridge: take(Param::Bridge),
            out_b: take(Param::OutputBias),
        }
    }
}

/// Returns `(d[x; h_prev], dc_prev)`.
fn lstm_backward(
    cache: &LstmCache,
    w: &[f64],
    dh: &[f64],
    dc: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
) -> (Vec<f64>, Vec<f64>) {
    let h = dh.len();
    let g = &cache.gates;
    let mut dz = vec![0.0; 4 * h];
    let mut dc_prev = vec![0.0; h];
    for k in 0..h {
        let (i, f, c_hat, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
        let tc = cache.tanh_c[k];
        let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
        dz[k] = dct * c_hat * i * (1.0 - i);
        dz[h + k] = dct * cache.c_prev[k] * f * (1.0 - f);
        dz[2 * h + k] = dct * i * (1.0 - c_hat * c_hat);
        dz[3 * h + k] = dh[k] * tc * o * (1.0 - o);
        dc_prev[k] = dct * f;
    }
    axpy(1.0, &dz, gb);
    outer_acc(gw, &dz, &cache.input);
    let mut dinput = vec![0.0; cache.input.len()];
    matvec_t_acc(w, &dz, &mut dinput);
    (dinput, dc_prev)
}

/// Forward teacher-forced pass. `target` excludes control tokens; the
/// decoder is fed `bos, target...` and must predict `target..., eos`.
fn forward(
    model: &AgentModel,
    input: &[usize],
    target: &[usize],
) -> Result<(super::forward::Encoded, Vec<StepCache>, Vec<usize>, f64), NetError> {
    super::forward::check_tokens(model, input)?;
    if let Some(&t) = target.iter().find(|&&t| t >= model.dims().vocab) {
        return Err(NetError::UnknownToken(t));
    }
    let enc = encode(model, input)?;
    let mut gold: Vec<usize> = target.to_vec();
    gold.push(Token::Eos.index());
    let mut state = enc.final_state();
    let mut prev = Token::Bos.index();
    let mut caches = Vec::with_capacity(gold.len());
    let mut loss = 0.0;
    for &y in &gold {
        let mut cache = decoder_step_cached(model, &state, prev, &enc);
        // Logits become probabilities from here on.
        softmax_in_place(&mut cache.logits);
        loss -= cache.logits[y].ln();
        state.h.copy_from_slice(&cache.lstm.h);
        state.c.copy_from_slice(&cache.lstm.c);
        caches.push(cache);
        prev = y;
    }
    Ok((enc, caches, gold, loss))
}

/// Summed cross-entropy over the `target.len() + 1` predicted tokens.
pub fn sequence_loss_sum(
    model: &AgentModel,
    input: &[usize],
    target: &[usize],
) -> Result<f64, NetError> {
    forward(model, input, target).map(|r| r.3)
}

/// Adds `weight * d(loss_sum)/d(params)` into `grads`; returns the summed
/// cross-entropy of the sequence.
pub fn accumulate_gradients(
    model: &AgentModel,
    input: &[usize],
    target: &[usize],
    weight: f64,
    grads: &mut Gradients,
) -> Result<f64, NetError> {
    let (enc, caches, gold, loss) = forward(model, input, target)?;
    let dims = model.dims();
    let (d, h) = (dims.embed, dims.hidden);
    let n = enc.len();
    let emb = model.block(Param::Embedding);
    let bridge = model.block(Param::Bridge);
    let att_v = model.block(Param::AttnVector);
    let att_dec = model.block(Param::AttnDecoder);
    let att_enc = model.block(Param::AttnEncoder);
    let dec_w = model.block(Param::DecoderWeights);
    let enc_w = model.block(Param::EncoderWeights);
    let g = &mut GradBlocks::new(grads, model);

    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dstates = vec![0.0; n * h];
    let mut dkeys = vec![0.0; n * h];
    let mut dproj = vec![0.0; d];
    let mut djoint = vec![0.0; 2 * h];
    let mut dquery = vec![0.0; h];
    let mut dalpha = vec![0.0; n];

    for (cache, &y) in caches.iter().zip(&gold).rev() {
        let mut dlogits: Vec<f64> = cache.logits.iter().map(|p| weight * p).collect();
        dlogits[y] -= weight;
        axpy(1.0, &dlogits, g.out_b);
        outer_acc(g.emb, &dlogits, &cache.projected);
        dproj.iter_mut().for_each(|x| *x = 0.0);
        matvec_t_acc(emb, &dlogits, &mut dproj);

        outer_acc(g.bridge, &dproj, &cache.joint);
        djoint.iter_mut().for_each(|x| *x = 0.0);
        matvec_t_acc(bridge, &dproj, &mut djoint);
        let (dstate_out, dctx) = djoint.split_at(h);
        let mut dh: Vec<f64> = dstate_out
            .iter()
            .zip(&dh_next)
            .map(|(a, b)| a + b)
            .collect();

        for j in 0..n {
            dalpha[j] = dot(dctx, enc.hidden_state(j));
            axpy(cache.attention[j], dctx, &mut dstates[j * h..(j + 1) * h]);
        }
        let mean = dot(&cache.attention, &dalpha);
        dquery.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..n {
            let de = cache.attention[j] * (dalpha[j] - mean);
            if de == 0.0 {
                continue;
            }
            let a = &cache.scores_hidden[j * h..(j + 1) * h];
            axpy(de, a, g.att_v);
            let dk = &mut dkeys[j * h..(j + 1) * h];
            for k in 0..h {
                let dpre = de * att_v[k] * (1.0 - a[k] * a[k]);
                dk[k] += dpre;
                dquery[k] += dpre;
            }
        }
        outer_acc(g.att_dec, &dquery, &cache.lstm.h);
        matvec_t_acc(att_dec, &dquery, &mut dh);

        let (dinput, dc_prev) = lstm_backward(&cache.lstm, dec_w, &dh, &dc_next, g.dec_w, g.dec_b);
        let tok = cache.lstm.token;
        axpy(1.0, &dinput[..d], &mut g.emb[tok * d..(tok + 1) * d]);
        dh_next.copy_from_slice(&dinput[d..]);
        dc_next = dc_prev;
    }

    let states = enc.states();
    for j in 0..n {
        let dk = &dkeys[j * h..(j + 1) * h];
        outer_acc(g.att_enc, dk, &states[j * h..(j + 1) * h]);
        matvec_t_acc(att_enc, dk, &mut dstates[j * h..(j + 1) * h]);
    }

    // The decoder starts from the final encoder state.
    let mut dh_rec = dh_next;
    let mut dc_rec = dc_next;
    for (j, step) in enc.steps.iter().enumerate().rev() {
        let dh: Vec<f64> = dstates[j * h..(j + 1) * h]
            .iter()
            .zip(&dh_rec)
            .map(|(a, b)| a + b)
            .collect();
        let (dinput, dc_prev) = lstm_backward(step, enc_w, &dh, &dc_rec, g.enc_w, g.enc_b);
        let tok = step.token;
        axpy(1.0, &dinput[..d], &mut g.emb[tok * d..(tok + 1) * d]);
        dh_rec = dinput[d..].to_vec();
        dc_rec = dc_prev;
    }
    Ok(loss)
}

/// Mean token-level cross-entropy under teacher forcing and its gradient.
pub fn loss_and_gradients(
    model: &AgentModel,
    input: &[usize],
    target: &[usize],
) -> Result<(f64, Gradients), NetError> {
    let mut grads = Gradients::zeros_like(model);
    let tokens = (target.len() + 1) as f64;
    let sum = accumulate_gradients(model, input, target, 1.0 / tokens, &mut grads)?;
    Ok((sum / tokens, grads))
}

/// Mean token-level cross-entropy, forward only.
pub fn sequence_loss(
    model: &AgentModel,
    input: &[usize],
    target: &[usize],
) -> Result<f64, NetError> {
    Ok(sequence_loss_sum(model, input, target)? / (target.len() + 1) as f64)
}
