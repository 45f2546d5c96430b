//! Corpus generation, the train/validation/test split and the TSV format.
//!
//! One pair per line: `<action tokens>\t<utterance tokens>\t<split>`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{
    identity_order, render, segment, LanguageKind, LanguageSpec, MarkerMask, Trajectory, Utterance,
};
use crate::token::parse_tokens;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "dev" | "valid" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pair {
    pub trajectory: Trajectory,
    pub utterance: Utterance,
    pub split: Split,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub pairs: Vec<Pair>,
}

impl Corpus {
    pub fn new(pairs: Vec<Pair>) -> Self {
        Corpus { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Pair> {
        self.pairs.iter().filter(move |p| p.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// Distinct trajectories of one split, in first-appearance order.
    pub fn trajectories(&self, split: Split) -> Vec<Trajectory> {
        let mut seen = std::collections::HashSet::new();
        self.split(split)
            .filter(|p| seen.insert(p.trajectory.clone()))
            .map(|p| p.trajectory.clone())
            .collect()
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for p in &self.pairs {
            writeln!(w, "{}\t{}\t{}", p.trajectory, p.utterance, p.split)?;
        }
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("tokens are ASCII")
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Corpus, CorpusError> {
        let mut pairs = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| CorpusError::Parse { line: i + 1, msg };
            let mut cols = line.split('\t');
            let (Some(a), Some(u), Some(s), None) =
                (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                return Err(err("expected three tab-separated columns".into()));
            };
            let actions = parse_tokens(a).map_err(|e| err(e.to_string()))?;
            let trajectory =
                segment(&actions, super::MAX_PHRASES).map_err(|e| err(e.to_string()))?;
            let utterance = u.parse::<Utterance>().map_err(|e| err(e.to_string()))?;
            let split = s.parse::<Split>().map_err(err)?;
            pairs.push(Pair {
                trajectory,
                utterance,
                split,
            });
        }
        Ok(Corpus { pairs })
    }
}

/// Split sizes: floor(80%) train, floor(10%) validation, remainder test.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 8 / 10;
    let dev = n / 10;
    (train, dev, n - train - dev)
}

/// Assigns 80/10/10 split tags at the pair level using `rng`.
pub(crate) fn assign_splits<R: Rng>(n: usize, rng: &mut R) -> Vec<Split> {
    let (train, dev, _) = split_sizes(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut tags = vec![Split::Test; n];
    for (rank, &i) in idx.iter().enumerate() {
        tags[i] = if rank < train {
            Split::Train
        } else if rank < train + dev {
            Split::Validation
        } else {
            Split::Test
        };
    }
    tags
}

fn random_permutation<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p = identity_order(n);
    p.shuffle(rng);
    p
}

fn drop_markers<R: Rng>(n: usize, p: f64, rng: &mut R) -> MarkerMask {
    let mut mask = MarkerMask::all(n);
    for j in 0..n {
        if rng.gen_bool(p) {
            mask = mask.without(j);
        }
    }
    mask
}

/// Generates the grammar corpus for `trajectories`. Deterministic in
/// `spec.rng_seed`.
pub fn build_corpus(spec: &LanguageSpec, trajectories: &[Trajectory]) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let per = spec.utterances_per_trajectory;
    let mut utterances = Vec::with_capacity(trajectories.len() * per);
    for t in trajectories {
        let n = t.len();
        let id = identity_order(n);
        for j in 0..per {
            let u = match spec.kind {
                LanguageKind::FixMarker => render(t, &id, MarkerMask::all(n)),
                LanguageKind::Fix => render(t, &id, MarkerMask::none()),
                LanguageKind::FreeMarker => {
                    render(t, &random_permutation(n, &mut rng), MarkerMask::all(n))
                }
                // Slots are grouped evenly: fix_marker, fix, free_marker.
                LanguageKind::Mix => match j * 3 / per {
                    0 => render(t, &id, MarkerMask::all(n)),
                    1 => render(t, &id, MarkerMask::none()),
                    _ => render(t, &random_permutation(n, &mut rng), MarkerMask::all(n)),
                },
                // First half fixed order, second half free order.
                LanguageKind::MixDrop => {
                    let order = if j * 2 / per == 0 {
                        id.clone()
                    } else {
                        random_permutation(n, &mut rng)
                    };
                    let mask = drop_markers(n, spec.drop_probability, &mut rng);
                    render(t, &order, mask)
                }
            }
            .expect("orders are permutations by construction");
            utterances.push((t.clone(), u));
        }
    }
    let tags = assign_splits(utterances.len(), &mut rng);
    Corpus {
        pairs: utterances
            .into_iter()
            .zip(tags)
            .map(|((trajectory, utterance), split)| Pair {
                trajectory,
                utterance,
                split,
            })
            .collect(),
    }
}
