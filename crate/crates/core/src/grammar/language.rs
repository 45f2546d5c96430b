use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::classify::{chunk_utterance, readings};
use super::{identity_order, render, MarkerMask, Trajectory, Utterance};

/// Which regime generates a corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageKind {
    FixMarker,
    Fix,
    FreeMarker,
    Mix,
    MixDrop,
}

impl LanguageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LanguageKind::FixMarker => "fix_marker",
            LanguageKind::Fix => "fix",
            LanguageKind::FreeMarker => "free_marker",
            LanguageKind::Mix => "mix",
            LanguageKind::MixDrop => "mix_drop",
        }
    }

    /// Utterances generated per trajectory unless configured otherwise.
    pub fn default_multiplicity(self) -> usize {
        match self {
            LanguageKind::FixMarker | LanguageKind::Fix => 1,
            LanguageKind::FreeMarker | LanguageKind::Mix | LanguageKind::MixDrop => 6,
        }
    }

    pub fn default_i_max(self) -> usize {
        match self {
            LanguageKind::MixDrop => 4,
            _ => 5,
        }
    }
}

impl fmt::Display for LanguageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LanguageKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.replace('-', "_").as_str() {
            "fix_marker" => LanguageKind::FixMarker,
            "fix" => LanguageKind::Fix,
            "free_marker" => LanguageKind::FreeMarker,
            "mix" => LanguageKind::Mix,
            "mix_drop" => LanguageKind::MixDrop,
            other => return Err(format!("unknown language kind {other:?}")),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanguageSpec {
    pub kind: LanguageKind,
    pub i_max: usize,
    /// Per-marker deletion probability; only read by `mix_drop`.
    pub drop_probability: f64,
    pub utterances_per_trajectory: usize,
    pub rng_seed: u64,
}

impl LanguageSpec {
    pub fn new(kind: LanguageKind, rng_seed: u64) -> Self {
        LanguageSpec {
            kind,
            i_max: kind.default_i_max(),
            drop_probability: 0.10,
            utterances_per_trajectory: kind.default_multiplicity(),
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(format!(
                "drop_probability {} outside [0, 1]",
                self.drop_probability
            ));
        }
        if self.utterances_per_trajectory == 0 {
            return Err("utterances_per_trajectory must be at least 1".into());
        }
        if self.i_max == 0 || self.i_max > super::MAX_PHRASES {
            return Err(format!(
                "i_max {} outside 1..={}",
                self.i_max,
                super::MAX_PHRASES
            ));
        }
        Ok(())
    }
}

/// Every grammar-acceptable utterance for `t` under `kind`.
///
/// For `mix_drop` a permutation/marker-mask combination is kept only when the
/// resulting utterance has exactly one trajectory reading.
pub fn enumerate_valid_utterances(t: &Trajectory, kind: LanguageKind) -> BTreeSet<Utterance> {
    let n = t.len();
    let id = identity_order(n);
    let mut out = BTreeSet::new();
    let all = MarkerMask::all(n);
    let render_ok = |order: &[usize], mask| render(t, order, mask).expect("valid permutation");
    match kind {
        LanguageKind::FixMarker => {
            out.insert(render_ok(&id, all));
        }
        LanguageKind::Fix => {
            out.insert(render_ok(&id, MarkerMask::none()));
        }
        LanguageKind::FreeMarker => {
            for perm in (0..n).permutations(n) {
                out.insert(render_ok(&perm, all));
            }
        }
        LanguageKind::Mix => {
            out.insert(render_ok(&id, MarkerMask::none()));
            for perm in (0..n).permutations(n) {
                out.insert(render_ok(&perm, all));
            }
        }
        LanguageKind::MixDrop => {
            for perm in (0..n).permutations(n) {
                for bits in 0..(1u32 << n) {
                    let u = render_ok(&perm, MarkerMask::from_bits(bits));
                    if out.contains(&u) {
                        continue;
                    }
                    let chunks = chunk_utterance(&u).expect("rendered utterances chunk");
                    let r = readings(&chunks);
                    if r.len() == 1 && r[0] == *t {
                        out.insert(u);
                    }
                }
            }
        }
    }
    out
}
