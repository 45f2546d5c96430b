//! Speaking and listening accuracy, utterance length and type histograms.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::grammar::{
    classify_utterance, enumerate_valid_utterances, LanguageKind, Trajectory, Utterance,
    UtteranceType,
};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Grammar,
    ParentSamples,
}

/// Acceptable speaker outputs for one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub trajectory: Trajectory,
    pub targets: BTreeSet<Utterance>,
    pub provenance: Provenance,
    /// Number of draws before deduplication; the set size for grammar sets.
    pub k: usize,
}

impl CandidateSet {
    pub fn from_grammar(trajectory: &Trajectory, kind: LanguageKind) -> Self {
        let targets = enumerate_valid_utterances(trajectory, kind);
        CandidateSet {
            trajectory: trajectory.clone(),
            k: targets.len(),
            targets,
            provenance: Provenance::Grammar,
        }
    }

    /// `k` parent samples, deduplicated.
    pub fn from_parent<R: rand::Rng>(
        parent: &Agent,
        trajectory: &Trajectory,
        k: usize,
        rng: &mut R,
    ) -> Self {
        let targets = parent
            .speak_sampled(trajectory, k, rng)
            .into_iter()
            .collect();
        CandidateSet {
            trajectory: trajectory.clone(),
            targets,
            provenance: Provenance::ParentSamples,
            k,
        }
    }

    pub fn contains(&self, u: &Utterance) -> bool {
        self.targets.contains(u)
    }
}

pub fn grammar_candidates(trajectories: &[Trajectory], kind: LanguageKind) -> Vec<CandidateSet> {
    trajectories
        .iter()
        .map(|t| CandidateSet::from_grammar(t, kind))
        .collect()
}

/// One rng stream per trajectory, derived from `seed` and its position.
pub fn parent_candidates(
    parent: &Agent,
    trajectories: &[Trajectory],
    k: usize,
    base_seed: u64,
) -> Vec<CandidateSet> {
    trajectories
        .iter()
        .enumerate()
        .map(|(i, t)| {
            CandidateSet::from_parent(parent, t, k, &mut seed::rng(base_seed, &[i as u64]))
        })
        .collect()
}

/// `i_max!`, the parent sample count per trajectory.
pub fn parent_sample_count(i_max: usize) -> usize {
    (1..=i_max).product()
}

fn fraction(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Fraction of trajectories whose greedy utterance is in the candidate set.
pub fn speaking_accuracy(agent: &Agent, candidates: &[CandidateSet]) -> f64 {
    let hits = candidates
        .iter()
        .filter(|c| c.contains(&agent.speak_greedy(&c.trajectory)))
        .count();
    fraction(hits, candidates.len())
}

/// Fraction of utterances whose greedy action sequence equals the
/// flattened trajectory exactly.
pub fn listening_accuracy(agent: &Agent, pairs: &[(Utterance, Trajectory)]) -> f64 {
    let hits = pairs
        .iter()
        .filter(|(u, t)| agent.listen(u) == t.flatten())
        .count();
    fraction(hits, pairs.len())
}

/// Mean greedy utterance length in tokens.
pub fn average_length(agent: &Agent, trajectories: &[Trajectory]) -> f64 {
    let total: usize = trajectories
        .iter()
        .map(|t| agent.speak_greedy(t).len())
        .sum();
    fraction(total, trajectories.len())
}

/// Counts per utterance type, indexed by [`UtteranceType::index`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TypeHistogram {
    pub counts: [usize; 7],
}

impl TypeHistogram {
    pub fn add(&mut self, ty: UtteranceType) {
        self.counts[ty.index()] += 1;
    }

    pub fn count(&self, ty: UtteranceType) -> usize {
        self.counts[ty.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn share(&self, ty: UtteranceType) -> f64 {
        fraction(self.count(ty), self.total())
    }

    /// Most frequent type; earlier column wins ties.
    pub fn modal(&self) -> UtteranceType {
        let mut best = UtteranceType::ALL[0];
        for ty in UtteranceType::ALL {
            if self.count(ty) > self.count(best) {
                best = ty;
            }
        }
        best
    }

    /// Half the L1 distance between the normalized histograms.
    pub fn total_variation(&self, other: &TypeHistogram) -> f64 {
        UtteranceType::ALL
            .iter()
            .map(|&t| (self.share(t) - other.share(t)).abs())
            .sum::<f64>()
            / 2.0
    }
}

impl FromIterator<UtteranceType> for TypeHistogram {
    fn from_iter<I: IntoIterator<Item = UtteranceType>>(iter: I) -> Self {
        let mut h = TypeHistogram::default();
        iter.into_iter().for_each(|t| h.add(t));
        h
    }
}

/// Classifies `samples` speaker samples per trajectory, one rng stream per
/// trajectory.
pub fn type_distribution(
    agent: &Agent,
    trajectories: &[Trajectory],
    samples: usize,
    base_seed: u64,
) -> TypeHistogram {
    trajectories
        .iter()
        .enumerate()
        .flat_map(|(i, t)| {
            let mut rng = seed::rng(base_seed, &[i as u64]);
            agent
                .speak_sampled(t, samples, &mut rng)
                .into_iter()
                .map(move |u| classify_utterance(t, &u))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationMetrics {
    pub speak_acc: f64,
    pub listen_acc: f64,
    pub avg_len: f64,
    pub types: TypeHistogram,
}

/// One line of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub generation: usize,
    pub seed: u64,
    pub experiment: String,
    pub speak_acc: f64,
    pub listen_acc: f64,
    pub avg_len: f64,
    pub fix: f64,
    pub fix_marker: f64,
    pub free: f64,
    pub free_marker: f64,
    pub fix_drop: f64,
    pub free_drop: f64,
    pub other: f64,
}

pub const METRICS_HEADER: &str =
    "generation,seed,experiment,speak_acc,listen_acc,avg_len,fix,fix_marker,free,free_marker,fix_drop,free_drop,other";

impl MetricsRow {
    pub fn new(generation: usize, seed: u64, experiment: &str, m: &GenerationMetrics) -> Self {
        let c = |t: UtteranceType| m.types.count(t) as f64;
        MetricsRow {
            generation,
            seed,
            experiment: experiment.to_string(),
            speak_acc: m.speak_acc,
            listen_acc: m.listen_acc,
            avg_len: m.avg_len,
            fix: c(UtteranceType::Fix),
            fix_marker: c(UtteranceType::FixMarker),
            free: c(UtteranceType::Free),
            free_marker: c(UtteranceType::FreeMarker),
            fix_drop: c(UtteranceType::FixDrop),
            free_drop: c(UtteranceType::FreeDrop),
            other: c(UtteranceType::Other),
        }
    }

    /// Type columns in [`UtteranceType::ALL`] order.
    pub fn type_columns(&self) -> [f64; 7] {
        [
            self.fix,
            self.fix_marker,
            self.free,
            self.free_marker,
            self.fix_drop,
            self.free_drop,
            self.other,
        ]
    }

    /// Share of one type among the row's type columns.
    pub fn share(&self, ty: UtteranceType) -> f64 {
        let cols = self.type_columns();
        let total: f64 = cols.iter().sum();
        if total == 0.0 {
            0.0
        } else {
            cols[ty.index()] / total
        }
    }
}

pub fn write_metrics<W: Write>(rows: &[MetricsRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(r: R) -> csv::Result<Vec<MetricsRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}
