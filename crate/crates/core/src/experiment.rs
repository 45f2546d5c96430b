//! Named experiment presets, the flat JSON config and multi-seed execution.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::TrainingConfig;
use crate::evaluation::{write_metrics, MetricsRow};
use crate::evolution::{run_chain, ChainConfig, ChainError, GenerationRecord, TransmissionConfig};
use crate::grammar::{LanguageKind, LanguageSpec};
use crate::neuralnet::AmsGradConfig;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "ITERLEARN_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "fix-marker-pressure")]
    FixMarkerPressure,
    #[serde(rename = "mix")]
    Mix,
    #[serde(rename = "mix-pressure")]
    MixPressure,
    #[serde(rename = "mix-drop")]
    MixDrop,
    #[serde(rename = "mix-bottleneck")]
    MixBottleneck,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::FixMarkerPressure,
        Preset::Mix,
        Preset::MixPressure,
        Preset::MixDrop,
        Preset::MixBottleneck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::FixMarkerPressure => "fix-marker-pressure",
            Preset::Mix => "mix",
            Preset::MixPressure => "mix-pressure",
            Preset::MixDrop => "mix-drop",
            Preset::MixBottleneck => "mix-bottleneck",
        }
    }

    /// Selection strengths the preset sweeps over.
    pub fn selection_strengths(self) -> &'static [usize] {
        match self {
            Preset::FixMarkerPressure => &[1, 3, 5, 8],
            Preset::MixPressure => &[3],
            _ => &[1],
        }
    }

    pub fn language(self) -> LanguageKind {
        match self {
            Preset::FixMarkerPressure => LanguageKind::FixMarker,
            Preset::MixDrop => LanguageKind::MixDrop,
            _ => LanguageKind::Mix,
        }
    }

    /// One config per swept selection strength.
    pub fn configs(self, scale: Scale) -> Vec<ExperimentConfig> {
        self.selection_strengths()
            .iter()
            .map(|&ell| {
                let kind = self.language();
                let mut c = ExperimentConfig::for_language(kind);
                c.experiment = match self {
                    Preset::FixMarkerPressure => format!("{}-ell{ell}", self.name()),
                    _ => self.name().to_string(),
                };
                c.selection_strength = ell;
                c.generations = if self == Preset::FixMarkerPressure {
                    10
                } else {
                    20
                };
                if self == Preset::MixBottleneck {
                    c.bottleneck_ratio = 0.5;
                }
                scale.apply(&mut c);
                c
            })
            .collect()
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown preset {s:?}; expected one of {}",
                    preset_names().join(", ")
                )
            })
    }
}

pub fn preset_names() -> Vec<&'static str> {
    Preset::ALL.iter().map(|p| p.name()).collect()
}

/// Full scale uses the default settings. Smoke scale shrinks the meaning
/// space to three phrases and compensates the smaller corpus with a larger
/// learning rate and several sweeps per epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Full,
    Smoke,
}

impl Scale {
    pub const SMOKE_I_MAX: usize = 3;
    pub const SMOKE_LEARNING_RATE: f64 = 0.01;
    /// Sweeps per epoch for a one-utterance-per-trajectory corpus; larger
    /// corpora get proportionally fewer.
    pub const SMOKE_SWEEPS: usize = 20;

    pub fn apply(self, c: &mut ExperimentConfig) {
        if self == Scale::Smoke {
            c.i_max = Scale::SMOKE_I_MAX;
            c.learning_rate = Scale::SMOKE_LEARNING_RATE;
            c.passes_per_epoch = Scale::SMOKE_SWEEPS.div_ceil(c.utterances_per_trajectory);
        }
    }
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Scale::Full),
            "smoke" => Ok(Scale::Smoke),
            _ => Err(format!("unknown scale {s:?}")),
        }
    }
}

/// One experiment as a flat JSON object; omitted fields take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seeds: Vec<u64>,
    pub language: LanguageKind,
    pub i_max: usize,
    pub drop_probability: f64,
    pub utterances_per_trajectory: usize,
    pub generations: usize,
    pub samples_per_trajectory: Option<usize>,
    pub selection_strength: usize,
    pub bottleneck_ratio: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub passes_per_epoch: usize,
    pub hidden: usize,
    pub init_scale: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub candidate_samples: Option<usize>,
    pub type_samples: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::for_language(LanguageKind::FixMarker)
    }
}

impl ExperimentConfig {
    pub fn for_language(kind: LanguageKind) -> Self {
        let lang = LanguageSpec::new(kind, 0);
        let train = TrainingConfig::default();
        let trans = TransmissionConfig::default();
        let opt = AmsGradConfig::default();
        ExperimentConfig {
            experiment: kind.as_str().replace('_', "-"),
            seeds: vec![1, 2, 3],
            language: kind,
            i_max: lang.i_max,
            drop_probability: lang.drop_probability,
            utterances_per_trajectory: lang.utterances_per_trajectory,
            generations: trans.generations,
            samples_per_trajectory: trans.samples_per_trajectory,
            selection_strength: trans.selection_strength,
            bottleneck_ratio: trans.bottleneck_ratio,
            batch_size: train.batch_size,
            max_epochs: train.max_epochs,
            patience: train.patience,
            passes_per_epoch: train.passes_per_epoch,
            hidden: train.hidden,
            init_scale: train.init_scale,
            learning_rate: opt.learning_rate,
            beta1: opt.beta1,
            beta2: opt.beta2,
            epsilon: opt.epsilon,
            candidate_samples: None,
            type_samples: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let c: ExperimentConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        ExperimentConfig::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn chain(&self, seed: u64) -> ChainConfig {
        ChainConfig {
            experiment: self.experiment.clone(),
            seed,
            language: LanguageSpec {
                kind: self.language,
                i_max: self.i_max,
                drop_probability: self.drop_probability,
                utterances_per_trajectory: self.utterances_per_trajectory,
                rng_seed: 0,
            },
            transmission: TransmissionConfig {
                generations: self.generations,
                samples_per_trajectory: self.samples_per_trajectory,
                selection_strength: self.selection_strength,
                bottleneck_ratio: self.bottleneck_ratio,
            },
            training: TrainingConfig {
                batch_size: self.batch_size,
                max_epochs: self.max_epochs,
                patience: self.patience,
                passes_per_epoch: self.passes_per_epoch,
                rng_seed: 0,
                hidden: self.hidden,
                init_scale: self.init_scale,
                optimizer: AmsGradConfig {
                    learning_rate: self.learning_rate,
                    beta1: self.beta1,
                    beta2: self.beta2,
                    epsilon: self.epsilon,
                },
            },
            candidate_samples: self.candidate_samples,
            type_samples: self.type_samples,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.experiment.is_empty() || self.experiment.contains(['/', '\\']) {
            return Err(format!(
                "experiment name {:?} must be a non-empty path component",
                self.experiment
            ));
        }
        if self.seeds.is_empty() {
            return Err("at least one seed is required".into());
        }
        self.chain(self.seeds[0]).validate()
    }
}

/// Per-generation means over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub generation: usize,
    pub seeds: usize,
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

/// Arithmetic means per `(experiment, generation)`.
pub fn mean_rows(rows: &[MetricsRow]) -> Vec<MeanRow> {
    let mut groups: BTreeMap<(String, usize), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.experiment.clone(), r.generation))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((experiment, generation), rs)| {
            let n = rs.len() as f64;
            let mean = |f: fn(&MetricsRow) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
            MeanRow {
                generation,
                seeds: rs.len(),
                experiment,
                speak_acc: mean(|r| r.speak_acc),
                listen_acc: mean(|r| r.listen_acc),
                avg_len: mean(|r| r.avg_len),
                fix: mean(|r| r.fix),
                fix_marker: mean(|r| r.fix_marker),
                free: mean(|r| r.free),
                free_marker: mean(|r| r.free_marker),
                fix_drop: mean(|r| r.fix_drop),
                free_drop: mean(|r| r.free_drop),
                other: mean(|r| r.other),
            }
        })
        .collect()
}

pub fn write_means<W: std::io::Write>(rows: &[MeanRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Everything needed to re-run a set of chains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub experiments: Vec<ExperimentConfig>,
    pub chains: Vec<ChainConfig>,
}

impl Manifest {
    pub fn new(experiments: &[ExperimentConfig]) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            experiments: experiments.to_vec(),
            chains: experiments
                .iter()
                .flat_map(|e| e.seeds.iter().map(|&s| e.chain(s)))
                .collect(),
        }
    }
}

#[derive(Debug)]
pub struct ChainResult {
    pub config: ChainConfig,
    pub records: Vec<GenerationRecord>,
}

impl ChainResult {
    pub fn rows(&self) -> Vec<MetricsRow> {
        self.records.iter().map(|r| r.row(&self.config)).collect()
    }
}

/// `requested` (else `default`), capped by `ITERLEARN_THREADS` when set.
pub fn worker_count(requested: Option<usize>, default: usize) -> usize {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    let n = requested.unwrap_or(default);
    cap.map_or(n, |c| n.min(c)).max(1)
}

/// Runs every `(experiment, seed)` chain on a bounded pool. Each chain is
/// single-threaded, so results do not depend on the pool size.
pub fn run_chains(
    chains: &[ChainConfig],
    out: Option<&Path>,
    workers: usize,
) -> Result<Vec<ChainResult>, ChainError> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        chains
            .par_iter()
            .map(|cfg| {
                let dir = out.map(|o| chain_dir(o, cfg));
                let records = run_chain(cfg, dir.as_deref())?;
                Ok(ChainResult {
                    config: cfg.clone(),
                    records,
                })
            })
            .collect()
    })
}

pub fn chain_dir(out: &Path, cfg: &ChainConfig) -> PathBuf {
    out.join(&cfg.experiment).join(cfg.seed.to_string())
}

/// Runs `experiments` into `out`: the manifest, one directory per chain and
/// per experiment `metrics_all.csv` and `metrics_mean.csv`.
pub fn run_experiments(
    experiments: &[ExperimentConfig],
    out: &Path,
    workers: usize,
) -> Result<Vec<ChainResult>, ChainError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ChainError::Io { path, source }
    };
    fs::create_dir_all(out).map_err(io(out))?;
    let manifest = Manifest::new(experiments);
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("configs serialize");
    fs::write(&path, text).map_err(io(&path))?;
    let results = run_chains(&manifest.chains, Some(out), workers)?;
    for e in experiments {
        let rows: Vec<MetricsRow> = results
            .iter()
            .filter(|r| r.config.experiment == e.experiment)
            .flat_map(|r| r.rows())
            .collect();
        write_aggregates(&out.join(&e.experiment), &rows)?;
    }
    Ok(results)
}

pub fn write_aggregates(dir: &Path, rows: &[MetricsRow]) -> Result<(), ChainError> {
    fs::create_dir_all(dir).map_err(|source| ChainError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ChainError::Csv { path, source }
    };
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ChainError::Io { path, source }
    };
    let path = dir.join("metrics_all.csv");
    write_metrics(rows, fs::File::create(&path).map_err(io_err(&path))?).map_err(csv_err(&path))?;
    let path = dir.join("metrics_mean.csv");
    write_means(
        &mean_rows(rows),
        fs::File::create(&path).map_err(io_err(&path))?,
    )
    .map_err(csv_err(&path))?;
    Ok(())
}
