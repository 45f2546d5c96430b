//! Shared oracles and generators for integration tests.

#![allow(dead_code)]

use iterlearn::grammar::{
    identity_order, render, MarkerMask, Trajectory, Utterance, UtteranceType,
};
use iterlearn::token::{Command, Token};
use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;

/// Brute-force label: the type whose rendering family produces `u` from `t`,
/// preferring temporal order over any other order.
pub fn oracle_type(t: &Trajectory, u: &Utterance) -> UtteranceType {
    let n = t.len();
    let id = identity_order(n);
    let full = (1u32 << n) - 1;
    let mut found = [false; 7];
    for perm in (0..n).permutations(n) {
        for bits in 0..=full {
            if render(t, &perm, MarkerMask::from_bits(bits)).unwrap() != *u {
                continue;
            }
            let ty = match (bits, perm == id) {
                (0, true) => UtteranceType::Fix,
                (0, false) => UtteranceType::Free,
                (b, true) if b == full => UtteranceType::FixMarker,
                (b, false) if b == full => UtteranceType::FreeMarker,
                (_, true) => UtteranceType::FixDrop,
                (_, false) => UtteranceType::FreeDrop,
            };
            found[ty.index()] = true;
        }
    }
    let prefer = [
        UtteranceType::FixMarker,
        UtteranceType::Fix,
        UtteranceType::FixDrop,
        UtteranceType::FreeMarker,
        UtteranceType::Free,
        UtteranceType::FreeDrop,
    ];
    prefer
        .into_iter()
        .find(|ty| found[ty.index()])
        .unwrap_or(UtteranceType::Other)
}

/// Uniform length, then uniform phrases with no command repeated back to back.
pub fn random_trajectory<R: Rng>(rng: &mut R, i_max: usize) -> Trajectory {
    let n = rng.gen_range(1..=i_max);
    let mut pairs: Vec<(Command, u8)> = Vec::with_capacity(n);
    while pairs.len() < n {
        let c = *Command::ALL.choose(rng).unwrap();
        if pairs.last().is_none_or(|&(prev, _)| prev != c) {
            pairs.push((c, rng.gen_range(1..=3)));
        }
    }
    Trajectory::from_pairs(&pairs).unwrap()
}

pub fn random_rendering<R: Rng>(rng: &mut R, t: &Trajectory) -> Utterance {
    let mut order = identity_order(t.len());
    if rng.gen_bool(0.5) {
        order.shuffle(rng);
    }
    let bits = match rng.gen_range(0..3) {
        0 => 0,
        1 => (1u32 << t.len()) - 1,
        _ => rng.gen_range(0..1u32 << t.len()),
    };
    render(t, &order, MarkerMask::from_bits(bits)).unwrap()
}

fn random_word<R: Rng>(rng: &mut R) -> Token {
    match rng.gen_range(0..3) {
        0 => Token::Command(*Command::ALL.choose(rng).unwrap()),
        1 => Token::Quantity(rng.gen_range(1..=3)),
        _ => Token::Marker(rng.gen_range(1..=5)),
    }
}

/// Applies one random edit: substitution, deletion, insertion or swap.
pub fn mutate<R: Rng>(rng: &mut R, u: &Utterance) -> Utterance {
    let mut toks = u.tokens().to_vec();
    match rng.gen_range(0..4) {
        0 if !toks.is_empty() => {
            let i = rng.gen_range(0..toks.len());
            toks[i] = random_word(rng);
        }
        1 if toks.len() > 1 => {
            toks.remove(rng.gen_range(0..toks.len()));
        }
        2 => {
            let i = rng.gen_range(0..=toks.len());
            toks.insert(i, random_word(rng));
        }
        _ if toks.len() > 1 => {
            let i = rng.gen_range(0..toks.len());
            let j = rng.gen_range(0..toks.len());
            toks.swap(i, j);
        }
        _ => {}
    }
    Utterance::new(toks).unwrap()
}

/// A (trajectory, utterance) pair drawn from a mixture of faithful
/// renderings, mutated renderings and renderings of other trajectories.
pub fn random_case<R: Rng>(rng: &mut R, i_max: usize) -> (Trajectory, Utterance) {
    let t = random_trajectory(rng, i_max);
    let u = match rng.gen_range(0..4) {
        0 => random_rendering(rng, &t),
        1 => {
            let other = random_trajectory(rng, i_max);
            random_rendering(rng, &other)
        }
        _ => {
            let mut u = random_rendering(rng, &t);
            for _ in 0..rng.gen_range(1..=2) {
                u = mutate(rng, &u);
            }
            u
        }
    };
    (t, u)
}
