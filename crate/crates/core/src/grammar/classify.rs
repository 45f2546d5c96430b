//! Utterance-type labelling and chunk readings.

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::{Phrase, Trajectory, Utterance, MAX_PHRASES};
use crate::token::Token;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceType {
    Fix,
    FixMarker,
    Free,
    FreeMarker,
    FixDrop,
    FreeDrop,
    Other,
}

impl UtteranceType {
    /// Column order of the metrics schema.
    pub const ALL: [UtteranceType; 7] = [
        UtteranceType::Fix,
        UtteranceType::FixMarker,
        UtteranceType::Free,
        UtteranceType::FreeMarker,
        UtteranceType::FixDrop,
        UtteranceType::FreeDrop,
        UtteranceType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UtteranceType::Fix => "fix",
            UtteranceType::FixMarker => "fix_marker",
            UtteranceType::Free => "free",
            UtteranceType::FreeMarker => "free_marker",
            UtteranceType::FixDrop => "fix_drop",
            UtteranceType::FreeDrop => "free_drop",
            UtteranceType::Other => "other",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for UtteranceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One `[marker] command quantifier` group. `marker` is 1-based as spoken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Chunk {
    pub marker: Option<u8>,
    pub phrase: Phrase,
}

/// Splits an utterance into `[m] c q` chunks, or `None` if it does not parse.
pub fn chunk_utterance(u: &Utterance) -> Option<Vec<Chunk>> {
    let toks = u.tokens();
    let mut chunks = Vec::with_capacity(toks.len() / 2);
    let mut i = 0;
    while i < toks.len() {
        let marker = toks[i].marker_index();
        if marker.is_some() {
            i += 1;
        }
        match (toks.get(i), toks.get(i + 1)) {
            (Some(Token::Command(c)), Some(Token::Quantity(q))) => {
                chunks.push(Chunk {
                    marker,
                    phrase: Phrase::new(*c, *q),
                });
                i += 2;
            }
            _ => return None,
        }
    }
    if chunks.is_empty() {
        None
    } else {
        Some(chunks)
    }
}

/// Labels `u` as a description of `t`.
///
/// Four cases after chunking: every chunk marked (markers must name the
/// matching phrase; ascending order is `fix_marker`), no chunk marked
/// (`fix` if order is temporal, `free` if only the multiset matches), and
/// partially marked, where marked chunks are pinned to their index and the
/// unmarked ones may fill the remaining indices in any order. Anything that
/// admits no consistent reading of `t` is `other`.
pub fn classify_utterance(t: &Trajectory, u: &Utterance) -> UtteranceType {
    let Some(chunks) = chunk_utterance(u) else {
        return UtteranceType::Other;
    };
    let n = t.len();
    if chunks.len() != n {
        return UtteranceType::Other;
    }
    let phrases = t.phrases();

    let mut used = [false; MAX_PHRASES];
    for chunk in &chunks {
        if let Some(m) = chunk.marker {
            let j = m as usize - 1;
            if j >= n || used[j] || phrases[j] != chunk.phrase {
                return UtteranceType::Other;
            }
            used[j] = true;
        }
    }
    let marked = chunks.iter().filter(|c| c.marker.is_some()).count();

    if marked == n {
        let ascending = chunks
            .iter()
            .enumerate()
            .all(|(pos, c)| c.marker == Some(pos as u8 + 1));
        return if ascending {
            UtteranceType::FixMarker
        } else {
            UtteranceType::FreeMarker
        };
    }

    let (ascending, any) = assignments_exist(&chunks, phrases, &used);
    match (marked, ascending, any) {
        (0, true, _) => UtteranceType::Fix,
        (0, false, true) => UtteranceType::Free,
        (_, true, _) => UtteranceType::FixDrop,
        (_, false, true) => UtteranceType::FreeDrop,
        _ => UtteranceType::Other,
    }
}

/// Tries every bijection from unmarked chunks to free indices. Returns
/// (an ascending assignment exists, any assignment exists).
fn assignments_exist(
    chunks: &[Chunk],
    phrases: &[Phrase],
    used: &[bool; MAX_PHRASES],
) -> (bool, bool) {
    let n = phrases.len();
    // Ascending means unmarked chunk at position p reads as phrase p.
    let ascending = chunks.iter().enumerate().all(|(pos, c)| {
        c.marker
            .map_or(phrases[pos] == c.phrase, |m| m as usize == pos + 1)
    });
    if ascending {
        return (true, true);
    }
    let unmarked: Vec<Phrase> = chunks
        .iter()
        .filter(|c| c.marker.is_none())
        .map(|c| c.phrase)
        .collect();
    let free: Vec<usize> = (0..n).filter(|&j| !used[j]).collect();
    let any = free
        .iter()
        .permutations(free.len())
        .any(|perm| perm.iter().zip(&unmarked).all(|(&&j, p)| phrases[j] == *p));
    (false, any)
}

/// All trajectories an utterance can be read as: marked chunks sit at their
/// named index, unmarked chunks fill the rest in any order. Readings that
/// violate the trajectory invariants are discarded.
pub(crate) fn readings(chunks: &[Chunk]) -> Vec<Trajectory> {
    let n = chunks.len();
    if n > MAX_PHRASES {
        return Vec::new();
    }
    let mut slots: Vec<Option<Phrase>> = vec![None; n];
    for c in chunks {
        if let Some(m) = c.marker {
            let j = m as usize - 1;
            if j >= n || slots[j].is_some() {
                return Vec::new();
            }
            slots[j] = Some(c.phrase);
        }
    }
    let unmarked: Vec<Phrase> = chunks
        .iter()
        .filter(|c| c.marker.is_none())
        .map(|c| c.phrase)
        .collect();
    let free: Vec<usize> = (0..n).filter(|&j| slots[j].is_none()).collect();
    let mut out: Vec<Trajectory> = Vec::new();
    for perm in free.iter().permutations(free.len()) {
        let mut filled = slots.clone();
        for (&&j, p) in perm.iter().zip(&unmarked) {
            filled[j] = Some(*p);
        }
        let phrases: Vec<Phrase> = filled
            .into_iter()
            .map(|p| p.expect("every slot filled"))
            .collect();
        if let Ok(t) = Trajectory::new(phrases) {
            if !out.contains(&t) {
                out.push(t);
            }
        }
    }
    out
}
