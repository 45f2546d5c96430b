//! `iterlearn`: corpus generation, single-agent training and iterated
//! learning chains from the command line.
//!
//! Logs go to stderr (`RUST_LOG` controls the level); results go to files,
//! except for `sample-utterances`, which prints its table.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use iterlearn::agent::{train_agent, Agent, EvalContext, TrainingConfig};
use iterlearn::evaluation::{grammar_candidates, read_metrics, write_metrics, MetricsRow};
use iterlearn::evolution::evaluate_generation;
use iterlearn::experiment::{run_experiments, worker_count, ExperimentConfig, Preset, Scale};
use iterlearn::grammar::{
    build_corpus, classify_utterance, enumerate_trajectories, segment, Corpus, LanguageKind,
    LanguageSpec, Split, MAX_PHRASES,
};
use iterlearn::neuralnet::checkpoint;
use iterlearn::seed;
use iterlearn::token::{parse_tokens, MAX_QUANTIFIER};

#[derive(Parser)]
#[command(
    name = "iterlearn",
    version,
    about = "Iterated learning of miniature languages"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a grammar corpus as TSV.
    GenCorpus(GenCorpusArgs),
    /// Train one agent on a corpus file.
    Train(TrainArgs),
    /// Run iterated-learning chains for a preset or config file.
    #[command(alias = "run")]
    Evolve(EvolveArgs),
    /// Score a checkpoint on a corpus's test split.
    Eval(EvalArgs),
    /// Print six deduplicated speaker samples for one trajectory.
    SampleUtterances(SampleArgs),
    /// Concatenate every chain's metrics.csv under a run directory.
    ExportPlotsData(ExportArgs),
}

#[derive(Args)]
struct GenCorpusArgs {
    #[arg(long, default_value = "fix_marker")]
    language: LanguageKind,
    /// Maximum phrases per trajectory; defaults per language.
    #[arg(long)]
    i_max: Option<usize>,
    #[arg(long)]
    utterances_per_trajectory: Option<usize>,
    #[arg(long)]
    drop_probability: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Language whose grammar supplies the dev speaking candidates.
    #[arg(long)]
    language: LanguageKind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// JSON object with training fields (batch_size, max_epochs, ...).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    passes_per_epoch: Option<usize>,
    /// Output directory for model.ckpt and training_log.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvolveArgs {
    #[arg(long, conflicts_with = "config")]
    preset: Option<Preset>,
    /// Flat JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Selection strength; replaces a preset's sweep.
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    bottleneck: Option<f64>,
    /// Reduced meaning space for quick runs.
    #[arg(long)]
    smoke: bool,
    /// Worker threads; defaults to the number of seeds.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    language: LanguageKind,
    #[arg(long, default_value_t = 0)]
    generation: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "eval")]
    experiment: String,
    /// Speaker samples per trajectory for the type histogram.
    #[arg(long, default_value_t = 1)]
    type_samples: usize,
    /// metrics.csv to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// A chain directory `<out>/<experiment>/<seed>`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    generation: usize,
    /// Action tokens, e.g. "right up up down right right right".
    #[arg(long)]
    trajectory: String,
    #[arg(long, default_value_t = 6)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExportArgs {
    /// Run directory written by `evolve`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCorpus(a) => gen_corpus(a),
        Command::Train(a) => train(a),
        Command::Evolve(a) => evolve(a),
        Command::Eval(a) => eval(a),
        Command::SampleUtterances(a) => sample_utterances(a),
        Command::ExportPlotsData(a) => export_plots_data(a),
    }
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Corpus::read_tsv(std::io::BufReader::new(f))
        .with_context(|| format!("reading {}", path.display()))
}

fn gen_corpus(a: GenCorpusArgs) -> Result<()> {
    let mut spec = LanguageSpec::new(a.language, a.seed);
    if let Some(i) = a.i_max {
        spec.i_max = i;
    }
    if let Some(n) = a.utterances_per_trajectory {
        spec.utterances_per_trajectory = n;
    }
    if let Some(p) = a.drop_probability {
        spec.drop_probability = p;
    }
    spec.validate().map_err(anyhow::Error::msg)?;
    let corpus = build_corpus(&spec, &enumerate_trajectories(spec.i_max, MAX_QUANTIFIER));
    fs::write(&a.out, corpus.to_tsv_string())
        .with_context(|| format!("writing {}", a.out.display()))?;
    log::info!("wrote {} pairs to {}", corpus.len(), a.out.display());
    Ok(())
}

/// i_max implied by the longest trajectory of a corpus.
fn corpus_i_max(corpus: &Corpus) -> usize {
    corpus
        .pairs
        .iter()
        .map(|p| p.trajectory.len())
        .max()
        .unwrap_or(MAX_PHRASES)
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg: TrainingConfig = match &a.config {
        Some(p) => serde_json::from_str(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )
        .with_context(|| format!("parsing {}", p.display()))?,
        None => TrainingConfig::default(),
    };
    cfg.rng_seed = seed::derive(a.seed, &[seed::purpose::SHUFFLE]);
    if let Some(lr) = a.learning_rate {
        cfg.optimizer.learning_rate = lr;
    }
    if let Some(e) = a.max_epochs {
        cfg.max_epochs = e;
    }
    if let Some(p) = a.passes_per_epoch {
        cfg.passes_per_epoch = p;
    }
    cfg.validate().map_err(anyhow::Error::msg)?;
    let corpus = read_corpus(&a.corpus)?;
    let i_max = corpus_i_max(&corpus);
    let ctx = EvalContext::new(
        grammar_candidates(&corpus.trajectories(Split::Validation), a.language),
        &corpus,
    );
    let agent = Agent::fresh(&cfg, i_max, &mut seed::rng(a.seed, &[seed::purpose::INIT]));
    let outcome = train_agent(agent, &corpus, &ctx, &cfg)?;
    fs::create_dir_all(&a.out)?;
    checkpoint::save(&outcome.agent.model, &a.out.join("model.ckpt"))?;
    outcome
        .log
        .write_csv(fs::File::create(a.out.join("training_log.csv"))?)?;
    log::info!(
        "best epoch {} of {}; wrote {}",
        outcome.log.best_epoch,
        outcome.log.epochs.len(),
        a.out.display()
    );
    Ok(())
}

fn evolve(a: EvolveArgs) -> Result<()> {
    let scale = if a.smoke { Scale::Smoke } else { Scale::Full };
    let mut configs = match (&a.preset, &a.config) {
        (Some(p), None) => p.configs(scale),
        (None, Some(path)) => {
            let mut c = ExperimentConfig::load(path).map_err(anyhow::Error::msg)?;
            scale.apply(&mut c);
            vec![c]
        }
        _ => bail!("exactly one of --preset or --config is required"),
    };
    if let Some(ell) = a.ell {
        configs.truncate(1);
        let c = &mut configs[0];
        if a.preset == Some(Preset::FixMarkerPressure) {
            c.experiment = format!("{}-ell{ell}", Preset::FixMarkerPressure.name());
        }
        c.selection_strength = ell;
    }
    for c in &mut configs {
        if let Some(s) = &a.seeds {
            c.seeds = s.clone();
        }
        if let Some(g) = a.generations {
            c.generations = g;
        }
        if let Some(b) = a.bottleneck {
            c.bottleneck_ratio = b;
        }
        c.validate()
            .map_err(|e| anyhow::anyhow!("invalid configuration for {}: {e}", c.experiment))?;
    }
    let jobs: usize = configs.iter().map(|c| c.seeds.len()).sum();
    let default_workers = configs.iter().map(|c| c.seeds.len()).max().unwrap_or(1);
    let workers = worker_count(a.threads, default_workers);
    log::info!(
        "running {jobs} chains on {workers} workers into {}",
        a.out.display()
    );
    run_experiments(&configs, &a.out, workers)?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let model =
        checkpoint::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let agent = Agent::new(model, corpus_i_max(&corpus));
    let test = corpus.trajectories(Split::Test);
    let candidates = grammar_candidates(&test, a.language);
    let metrics = evaluate_generation(&agent, &corpus, &test, &candidates, a.type_samples, a.seed);
    let row = MetricsRow::new(a.generation, a.seed, &a.experiment, &metrics);
    write_metrics(
        &[row],
        fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?,
    )?;
    log::info!(
        "speak {:.3} listen {:.3} avg_len {:.2}",
        metrics.speak_acc,
        metrics.listen_acc,
        metrics.avg_len
    );
    Ok(())
}

fn sample_utterances(a: SampleArgs) -> Result<()> {
    if a.count == 0 {
        bail!("--count must be at least 1");
    }
    let path = a
        .run
        .join(format!("gen{}", a.generation))
        .join("model.ckpt");
    if !path.exists() {
        bail!("no checkpoint at {}", path.display());
    }
    let model = checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let actions = parse_tokens(&a.trajectory)?;
    let trajectory = segment(&actions, MAX_PHRASES)?;
    let agent = Agent::new(model, MAX_PHRASES);
    let mut rng = seed::rng(a.seed, &[seed::purpose::TYPES]);
    let mut seen = BTreeSet::new();
    let mut out = std::io::stdout().lock();
    for u in agent.speak_sampled(&trajectory, a.count, &mut rng) {
        if seen.insert(u.clone()) {
            writeln!(
                out,
                "{}\t{}",
                u,
                classify_utterance(&trajectory, &u).as_str()
            )?;
        }
    }
    Ok(())
}

fn export_plots_data(a: ExportArgs) -> Result<()> {
    let mut rows = Vec::new();
    let mut experiments: Vec<PathBuf> = fs::read_dir(&a.run)
        .with_context(|| format!("reading {}", a.run.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    experiments.sort();
    for exp in experiments {
        let mut seeds: Vec<PathBuf> = fs::read_dir(&exp)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("metrics.csv").is_file())
            .collect();
        seeds.sort();
        for s in seeds {
            let path = s.join("metrics.csv");
            rows.extend(
                read_metrics(fs::File::open(&path)?)
                    .with_context(|| format!("reading {}", path.display()))?,
            );
        }
    }
    if rows.is_empty() {
        bail!("no metrics.csv files under {}", a.run.display());
    }
    write_metrics(
        &rows,
        fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?,
    )?;
    log::info!("exported {} rows to {}", rows.len(), a.out.display());
    Ok(())
}
