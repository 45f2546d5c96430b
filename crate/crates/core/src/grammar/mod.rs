//! Meaning space and miniature languages.
//!
//! A trajectory is a list of phrases `(command, quantifier)`; adjacent phrases
//! never repeat a command, so the flattened action sequence splits back into
//! phrases unambiguously.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::token::{
    join_tokens, parse_tokens, Command, Token, TokenError, MAX_MARKER, MAX_QUANTIFIER,
};

mod classify;
mod corpus;
mod language;

pub use classify::{chunk_utterance, classify_utterance, Chunk, UtteranceType};
pub use corpus::{build_corpus, Corpus, CorpusError, Pair, Split};
pub use language::{enumerate_valid_utterances, LanguageKind, LanguageSpec};

/// Most phrases any trajectory may have (one per marker).
pub const MAX_PHRASES: usize = MAX_MARKER as usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("trajectory must have between 1 and {MAX_PHRASES} phrases, got {0}")]
    Length(usize),
    #[error("quantifier {0} outside 1..={MAX_QUANTIFIER}")]
    Quantifier(u8),
    #[error("adjacent phrases {0} and {1} share a command")]
    RepeatedCommand(usize, usize),
    #[error("order is not a permutation of 0..{0}")]
    BadOrder(usize),
    #[error("utterances cannot contain control token {0}")]
    ControlToken(Token),
    #[error(transparent)]
    Token(#[from] TokenError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phrase {
    pub command: Command,
    pub quantifier: u8,
}

impl Phrase {
    pub fn new(command: Command, quantifier: u8) -> Self {
        Phrase {
            command,
            quantifier,
        }
    }
}

/// A meaning: 1..=5 phrases, adjacent commands distinct, quantifiers in 1..=3.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trajectory {
    phrases: Vec<Phrase>,
}

impl Trajectory {
    pub fn new(phrases: Vec<Phrase>) -> Result<Self, GrammarError> {
        if phrases.is_empty() || phrases.len() > MAX_PHRASES {
            return Err(GrammarError::Length(phrases.len()));
        }
        for (i, p) in phrases.iter().enumerate() {
            if !(1..=MAX_QUANTIFIER).contains(&p.quantifier) {
                return Err(GrammarError::Quantifier(p.quantifier));
            }
            if i > 0 && phrases[i - 1].command == p.command {
                return Err(GrammarError::RepeatedCommand(i - 1, i));
            }
        }
        Ok(Trajectory { phrases })
    }

    /// Convenience constructor used heavily by tests and fixtures.
    pub fn from_pairs(pairs: &[(Command, u8)]) -> Result<Self, GrammarError> {
        Trajectory::new(pairs.iter().map(|&(c, q)| Phrase::new(c, q)).collect())
    }

    pub fn phrases(&self) -> &[Phrase] {
        &self.phrases
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Each phrase `(c, q)` becomes `q` copies of action `c`.
    pub fn flatten(&self) -> Vec<Token> {
        self.phrases
            .iter()
            .flat_map(|p| std::iter::repeat_n(Token::Command(p.command), p.quantifier as usize))
            .collect()
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&join_tokens(&self.flatten()))
    }
}

/// Why an action sequence is not a trajectory.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SegmentError {
    #[error("empty action sequence")]
    Empty,
    #[error("token {0} is not an action")]
    NotAnAction(Token),
    #[error("run of {0} identical actions exceeds {MAX_QUANTIFIER}")]
    RunTooLong(usize),
    #[error("{0} phrases exceed the limit of {1}")]
    TooManyPhrases(usize, usize),
}

/// Inverse of [`Trajectory::flatten`]: maximal runs of one action become phrases.
pub fn segment(actions: &[Token], i_max: usize) -> Result<Trajectory, SegmentError> {
    if actions.is_empty() {
        return Err(SegmentError::Empty);
    }
    let mut phrases: Vec<Phrase> = Vec::new();
    let mut run = 0usize;
    let mut current: Option<Command> = None;
    for &tok in actions {
        let Token::Command(c) = tok else {
            return Err(SegmentError::NotAnAction(tok));
        };
        if current == Some(c) {
            run += 1;
        } else {
            if let Some(prev) = current {
                phrases.push(Phrase::new(prev, run as u8));
            }
            current = Some(c);
            run = 1;
        }
        if run > MAX_QUANTIFIER as usize {
            return Err(SegmentError::RunTooLong(run));
        }
    }
    if let Some(prev) = current {
        phrases.push(Phrase::new(prev, run as u8));
    }
    if phrases.len() > i_max.min(MAX_PHRASES) {
        return Err(SegmentError::TooManyPhrases(phrases.len(), i_max));
    }
    Ok(Trajectory { phrases })
}

/// Every trajectory with at most `i_max` phrases and `max_steps` steps per
/// phrase, ordered by length, then lexicographically by (command, quantifier)
/// with commands ordered left < right < up < down.
pub fn enumerate_trajectories(i_max: usize, max_steps: u8) -> Vec<Trajectory> {
    let i_max = i_max.min(MAX_PHRASES);
    let max_steps = max_steps.min(MAX_QUANTIFIER);
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(i_max);
    for len in 1..=i_max {
        extend_trajectories(&mut prefix, len, max_steps, &mut out);
    }
    out
}

fn extend_trajectories(
    prefix: &mut Vec<Phrase>,
    len: usize,
    max_steps: u8,
    out: &mut Vec<Trajectory>,
) {
    if prefix.len() == len {
        out.push(Trajectory {
            phrases: prefix.clone(),
        });
        return;
    }
    for c in Command::ALL {
        if prefix.last().is_some_and(|p| p.command == c) {
            continue;
        }
        for q in 1..=max_steps {
            prefix.push(Phrase::new(c, q));
            extend_trajectories(prefix, len, max_steps, out);
            prefix.pop();
        }
    }
}

/// A signal: optional markers, commands and quantifiers. Never holds control tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Utterance(Vec<Token>);

impl Utterance {
    pub fn new(tokens: Vec<Token>) -> Result<Self, GrammarError> {
        if let Some(&t) = tokens.iter().find(|t| t.is_control()) {
            return Err(GrammarError::ControlToken(t));
        }
        Ok(Utterance(tokens))
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn marker_count(&self) -> usize {
        self.0
            .iter()
            .filter(|t| matches!(t, Token::Marker(_)))
            .count()
    }
}

impl fmt::Display for Utterance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&join_tokens(&self.0))
    }
}

impl FromStr for Utterance {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, GrammarError> {
        Utterance::new(parse_tokens(s)?)
    }
}

/// Which temporal indices (0-based) carry their marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MarkerMask(u32);

impl MarkerMask {
    pub fn all(len: usize) -> Self {
        MarkerMask((1u32 << len) - 1)
    }

    pub fn none() -> Self {
        MarkerMask(0)
    }

    pub fn from_bits(bits: u32) -> Self {
        MarkerMask(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, index: usize) -> bool {
        self.0 & (1 << index) != 0
    }

    pub fn without(self, index: usize) -> Self {
        MarkerMask(self.0 & !(1 << index))
    }
}

/// Emits phrases in `order` (0-based temporal indices); phrase `j` is written
/// `m{j+1} c q` when `markers` contains `j`, else `c q`.
pub fn render(
    t: &Trajectory,
    order: &[usize],
    markers: MarkerMask,
) -> Result<Utterance, GrammarError> {
    let n = t.len();
    let mut seen = [false; MAX_PHRASES];
    if order.len() != n {
        return Err(GrammarError::BadOrder(n));
    }
    for &j in order {
        if j >= n || seen[j] {
            return Err(GrammarError::BadOrder(n));
        }
        seen[j] = true;
    }
    let mut tokens = Vec::with_capacity(3 * n);
    for &j in order {
        let p = t.phrases[j];
        if markers.contains(j) {
            tokens.push(Token::Marker(j as u8 + 1));
        }
        tokens.push(Token::Command(p.command));
        tokens.push(Token::Quantity(p.quantifier));
    }
    Ok(Utterance(tokens))
}

/// Temporal-order rendering.
pub fn identity_order(len: usize) -> Vec<usize> {
    (0..len).collect()
}
