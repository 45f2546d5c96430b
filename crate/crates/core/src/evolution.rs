//! Iterated learning: each generation's child learns only from utterances its
//! parent produces for the fixed generation-0 slots.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{train_agent, Agent, EvalContext, TrainError, TrainingConfig, TrainingLog};
use crate::evaluation::{
    average_length, grammar_candidates, listening_accuracy, parent_candidates, parent_sample_count,
    speaking_accuracy, type_distribution, write_metrics, CandidateSet, GenerationMetrics,
    MetricsRow,
};
use crate::grammar::{
    build_corpus, enumerate_trajectories, Corpus, LanguageSpec, Pair, Split, Trajectory, Utterance,
};
use crate::neuralnet::checkpoint;
use crate::seed::{self, purpose};
use crate::token::MAX_QUANTIFIER;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransmissionConfig {
    /// Generations after generation 0.
    pub generations: usize,
    /// Utterances per trajectory handed to the child; `None` keeps the
    /// generation-0 multiplicity.
    pub samples_per_trajectory: Option<usize>,
    /// Draws per slot from which the shortest is kept.
    pub selection_strength: usize,
    /// Fraction of transmitted train pairs the child sees.
    pub bottleneck_ratio: f64,
}

impl Default for TransmissionConfig {
    fn default() -> Self {
        TransmissionConfig {
            generations: 20,
            samples_per_trajectory: None,
            selection_strength: 1,
            bottleneck_ratio: 1.0,
        }
    }
}

impl TransmissionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.selection_strength == 0 {
            return Err("selection_strength (ell) must be at least 1".into());
        }
        if self.samples_per_trajectory == Some(0) {
            return Err("samples_per_trajectory must be at least 1".into());
        }
        if !(self.bottleneck_ratio > 0.0 && self.bottleneck_ratio <= 1.0) {
            return Err(format!(
                "bottleneck_ratio {} outside (0, 1]",
                self.bottleneck_ratio
            ));
        }
        Ok(())
    }
}

/// Index of the shortest utterance; a later draw wins ties.
pub fn select_shortest(draws: &[Utterance]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, u) in draws.iter().enumerate() {
        if best.is_none_or(|b| u.len() <= draws[b].len()) {
            best = Some(i);
        }
    }
    best
}

/// The draws of one transmission slot and which one was kept.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotTrace {
    pub trajectory: Trajectory,
    pub draws: Vec<Utterance>,
    pub selected: usize,
}

/// Generation-0 `(trajectory, split)` slots grouped per trajectory, in
/// first-appearance order.
#[derive(Clone, Debug, PartialEq)]
pub struct Slots {
    groups: Vec<(Trajectory, Vec<Split>)>,
}

impl Slots {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut index: HashMap<&Trajectory, usize> = HashMap::new();
        let mut groups: Vec<(Trajectory, Vec<Split>)> = Vec::new();
        for p in &corpus.pairs {
            let i = *index.entry(&p.trajectory).or_insert_with(|| {
                groups.push((p.trajectory.clone(), Vec::new()));
                groups.len() - 1
            });
            groups[i].1.push(p.split);
        }
        Slots { groups }
    }

    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.groups.iter().map(|(t, _)| t)
    }

    /// Split tags for `n` utterances of group `i`, cycling through the
    /// generation-0 tags.
    fn splits(&self, i: usize, n: usize) -> impl Iterator<Item = Split> + '_ {
        let tags = &self.groups[i].1;
        (0..n).map(move |j| tags[j % tags.len()])
    }

    pub fn multiplicity(&self, i: usize) -> usize {
        self.groups[i].1.len()
    }
}

/// The parent labels every slot. With `selection_strength == 1` every slot
/// is a single plain sample. Each trajectory has its own rng stream derived
/// from `rng_seed`.
pub fn transmit_traced(
    parent: &Agent,
    slots: &Slots,
    cfg: &TransmissionConfig,
    rng_seed: u64,
) -> (Corpus, Vec<SlotTrace>) {
    let mut pairs = Vec::new();
    let mut traces = Vec::new();
    for (i, (t, _)) in slots.groups.iter().enumerate() {
        let mut rng = seed::rng(rng_seed, &[i as u64]);
        let n = cfg
            .samples_per_trajectory
            .unwrap_or_else(|| slots.multiplicity(i));
        for split in slots.splits(i, n) {
            let draws = parent.speak_sampled(t, cfg.selection_strength, &mut rng);
            let selected = select_shortest(&draws).expect("at least one draw");
            pairs.push(Pair {
                trajectory: t.clone(),
                utterance: draws[selected].clone(),
                split,
            });
            traces.push(SlotTrace {
                trajectory: t.clone(),
                draws,
                selected,
            });
        }
    }
    (Corpus::new(pairs), traces)
}

pub fn transmit(parent: &Agent, slots: &Slots, cfg: &TransmissionConfig, rng_seed: u64) -> Corpus {
    transmit_traced(parent, slots, cfg, rng_seed).0
}

/// Keeps `floor(ratio * train)` uniformly chosen train pairs; validation and
/// test pairs are untouched. Order is preserved.
pub fn apply_bottleneck<R: Rng>(corpus: &Corpus, ratio: f64, rng: &mut R) -> Corpus {
    if ratio >= 1.0 {
        return corpus.clone();
    }
    let train: Vec<usize> = (0..corpus.len())
        .filter(|&i| corpus.pairs[i].split == Split::Train)
        .collect();
    let keep_count = (ratio * train.len() as f64).floor() as usize;
    let mut keep = vec![false; corpus.len()];
    for j in sample(rng, train.len(), keep_count) {
        keep[train[j]] = true;
    }
    Corpus::new(
        corpus
            .pairs
            .iter()
            .enumerate()
            .filter(|(i, p)| p.split != Split::Train || keep[*i])
            .map(|(_, p)| p.clone())
            .collect(),
    )
}

/// Everything one chain needs; every rng stream is derived from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub experiment: String,
    pub seed: u64,
    pub language: LanguageSpec,
    pub transmission: TransmissionConfig,
    pub training: TrainingConfig,
    /// Parent samples per trajectory for speaking candidates; `None` means
    /// `i_max!`.
    pub candidate_samples: Option<usize>,
    /// Speaker samples per trajectory for the type histogram; `None` means
    /// the transmission multiplicity.
    pub type_samples: Option<usize>,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.language.validate()?;
        self.transmission.validate()?;
        self.training.validate()?;
        if self.candidate_samples == Some(0) || self.type_samples == Some(0) {
            return Err("sample counts must be at least 1".into());
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.candidate_samples
            .unwrap_or_else(|| parent_sample_count(self.language.i_max))
    }

    pub fn type_sample_count(&self) -> usize {
        self.type_samples
            .or(self.transmission.samples_per_trajectory)
            .unwrap_or(self.language.utterances_per_trajectory)
    }

    /// Derived seed for one purpose in one generation.
    pub fn derived_seed(&self, purpose: u64, generation: usize) -> u64 {
        seed::derive(self.seed, &[purpose, generation as u64])
    }
}

#[derive(Clone, Debug)]
pub struct GenerationRecord {
    pub generation: usize,
    pub corpus: Corpus,
    pub agent: Agent,
    pub log: TrainingLog,
    pub metrics: GenerationMetrics,
}

impl GenerationRecord {
    pub fn row(&self, cfg: &ChainConfig) -> MetricsRow {
        MetricsRow::new(self.generation, cfg.seed, &cfg.experiment, &self.metrics)
    }
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("generation {generation}: {source}")]
    Training {
        generation: usize,
        source: TrainError,
    },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ChainError + '_ {
    move |source| ChainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn pairs_of(corpus: &Corpus, split: Split) -> Vec<(Utterance, Trajectory)> {
    corpus
        .split(split)
        .map(|p| (p.utterance.clone(), p.trajectory.clone()))
        .collect()
}

/// Test-set metrics of a trained agent.
pub fn evaluate_generation(
    agent: &Agent,
    corpus: &Corpus,
    test: &[Trajectory],
    candidates: &[CandidateSet],
    type_samples: usize,
    type_seed: u64,
) -> GenerationMetrics {
    GenerationMetrics {
        speak_acc: speaking_accuracy(agent, candidates),
        listen_acc: listening_accuracy(agent, &pairs_of(corpus, Split::Test)),
        avg_len: average_length(agent, test),
        types: type_distribution(agent, test, type_samples, type_seed),
    }
}

/// Writes `corpus.tsv`, `model.ckpt`, `metrics.csv` and `training_log.csv`.
pub fn write_generation(
    dir: &Path,
    record: &GenerationRecord,
    cfg: &ChainConfig,
) -> Result<(), ChainError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("corpus.tsv");
    fs::write(&path, record.corpus.to_tsv_string()).map_err(io_err(&path))?;
    let path = dir.join("model.ckpt");
    checkpoint::save(&record.agent.model, &path).map_err(io_err(&path))?;
    let path = dir.join("metrics.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_metrics(&[record.row(cfg)], file).map_err(|source| ChainError::Csv {
        path: path.clone(),
        source,
    })?;
    let path = dir.join("training_log.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    record
        .log
        .write_csv(file)
        .map_err(|source| ChainError::Csv {
            path: path.clone(),
            source,
        })?;
    Ok(())
}

/// Generation-0 corpus of a chain.
pub fn initial_corpus(cfg: &ChainConfig) -> Corpus {
    let mut spec = cfg.language.clone();
    spec.rng_seed = seed::derive(cfg.seed, &[purpose::CORPUS]);
    build_corpus(&spec, &enumerate_trajectories(spec.i_max, MAX_QUANTIFIER))
}

/// Runs generation 0 and `cfg.transmission.generations` further
/// generations. With `out` set, each generation is written to
/// `out/gen<k>/` as soon as it finishes.
pub fn run_chain(
    cfg: &ChainConfig,
    out: Option<&Path>,
) -> Result<Vec<GenerationRecord>, ChainError> {
    run_chain_with(cfg, out, |_| {})
}

/// [`run_chain`] with a callback after every generation.
pub fn run_chain_with<F>(
    cfg: &ChainConfig,
    out: Option<&Path>,
    mut on_generation: F,
) -> Result<Vec<GenerationRecord>, ChainError>
where
    F: FnMut(&GenerationRecord),
{
    cfg.validate().map_err(ChainError::Config)?;
    let kind = cfg.language.kind;
    let i_max = cfg.language.i_max;
    let gen0 = initial_corpus(cfg);
    let slots = Slots::from_corpus(&gen0);
    let dev = gen0.trajectories(Split::Validation);
    let test = gen0.trajectories(Split::Test);
    let k = cfg.k();

    let mut records: Vec<GenerationRecord> = Vec::with_capacity(cfg.transmission.generations + 1);
    for g in 0..=cfg.transmission.generations {
        let (corpus, dev_candidates, test_candidates) = match records.last() {
            None => (
                gen0.clone(),
                grammar_candidates(&dev, kind),
                grammar_candidates(&test, kind),
            ),
            Some(parent) => {
                let parent = &parent.agent;
                let transmitted = transmit(
                    parent,
                    &slots,
                    &cfg.transmission,
                    cfg.derived_seed(purpose::TRANSMIT, g),
                );
                let mut rng = seed::rng(cfg.derived_seed(purpose::BOTTLENECK, g), &[]);
                let corpus =
                    apply_bottleneck(&transmitted, cfg.transmission.bottleneck_ratio, &mut rng);
                let dev_c = parent_candidates(
                    parent,
                    &dev,
                    k,
                    cfg.derived_seed(purpose::DEV_CANDIDATES, g),
                );
                let test_c =
                    parent_candidates(parent, &test, k, cfg.derived_seed(purpose::CANDIDATES, g));
                (corpus, dev_c, test_c)
            }
        };
        let ctx = EvalContext::new(dev_candidates, &corpus);
        let training = TrainingConfig {
            rng_seed: cfg.derived_seed(purpose::SHUFFLE, g),
            ..cfg.training
        };
        let mut init_rng = seed::rng(cfg.derived_seed(purpose::INIT, g), &[]);
        let child = Agent::fresh(&training, i_max, &mut init_rng);
        let outcome = train_agent(child, &corpus, &ctx, &training).map_err(|source| {
            ChainError::Training {
                generation: g,
                source,
            }
        })?;
        let metrics = evaluate_generation(
            &outcome.agent,
            &corpus,
            &test,
            &test_candidates,
            cfg.type_sample_count(),
            cfg.derived_seed(purpose::TYPES, g),
        );
        let record = GenerationRecord {
            generation: g,
            corpus,
            agent: outcome.agent,
            log: outcome.log,
            metrics,
        };
        log::info!(
            "{} seed {} gen {g}: speak {:.3} listen {:.3} len {:.2} epochs {}",
            cfg.experiment,
            cfg.seed,
            metrics.speak_acc,
            metrics.listen_acc,
            metrics.avg_len,
            record.log.epochs.len()
        );
        if let Some(dir) = out {
            write_generation(&dir.join(format!("gen{g}")), &record, cfg)?;
        }
        on_generation(&record);
        records.push(record);
    }
    if let Some(dir) = out {
        let rows: Vec<MetricsRow> = records.iter().map(|r| r.row(cfg)).collect();
        let path = dir.join("metrics.csv");
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        write_metrics(&rows, file).map_err(|source| ChainError::Csv {
            path: path.clone(),
            source,
        })?;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(s: &str) -> Utterance {
        s.parse().unwrap()
    }

    #[test]
    fn shortest_wins_and_later_ties_win() {
        let draws = [
            u("m1 up 2 m2 left 3 m3 down 1"),
            u("up 2 left 3 down 1"),
            u("m1 up 2 m2 left 3 m3 down 1"),
        ];
        assert_eq!(select_shortest(&draws), Some(1));
        let tie = [u("up 2 left 3"), u("left 3 up 2")];
        assert_eq!(select_shortest(&tie), Some(1));
        assert_eq!(select_shortest(&[]), None);
        assert_eq!(select_shortest(&draws[..1]), Some(0));
    }

    #[test]
    fn bottleneck_halves_train_only() {
        let t = Trajectory::from_pairs(&[(crate::token::Command::Up, 2)]).unwrap();
        let mut pairs = Vec::new();
        for i in 0..14 {
            let split = match i {
                0..10 => Split::Train,
                10..12 => Split::Validation,
                _ => Split::Test,
            };
            pairs.push(Pair {
                trajectory: t.clone(),
                utterance: u("up 2"),
                split,
            });
        }
        let c = Corpus::new(pairs);
        let mut rng = seed::rng(3, &[]);
        let b = apply_bottleneck(&c, 0.5, &mut rng);
        assert_eq!(b.count(Split::Train), 5);
        assert_eq!(b.count(Split::Validation), 2);
        assert_eq!(b.count(Split::Test), 2);
        assert_eq!(apply_bottleneck(&c, 1.0, &mut rng), c);
    }

    #[test]
    fn config_rejects_zero_ell() {
        let cfg = TransmissionConfig {
            selection_strength: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(TransmissionConfig {
            bottleneck_ratio: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TransmissionConfig::default().validate().is_ok());
    }
}
