//! One model used as both speaker and listener, and its individual learning
//! with early stopping.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{listening_accuracy, speaking_accuracy, CandidateSet};
use crate::grammar::{Corpus, Split, Trajectory, Utterance};
use crate::neuralnet::{
    accumulate_gradients, greedy_sequence, sample_many, AgentModel, AmsGrad, AmsGradConfig,
    Gradients, ModelDims, NetError,
};
use crate::seed;
use crate::token::Token;

/// Decoding never runs past three tokens per allowed phrase plus slack.
pub fn max_decode_len(i_max: usize) -> usize {
    3 * i_max + 3
}

fn indices(tokens: &[Token]) -> Vec<usize> {
    tokens.iter().map(|t| t.index()).collect()
}

fn tokens(indices: &[usize]) -> Vec<Token> {
    indices
        .iter()
        .map(|&i| Token::from_index(i).expect("decoder emits vocabulary indices"))
        .collect()
}

fn utterance(indices: &[usize]) -> Utterance {
    Utterance::new(tokens(indices)).expect("control tokens are masked or terminate decoding")
}

/// A trained or untrained agent: the shared model plus the decoding cap.
#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub model: AgentModel,
    pub i_max: usize,
}

impl Agent {
    pub fn new(model: AgentModel, i_max: usize) -> Self {
        Agent { model, i_max }
    }

    /// Freshly initialized parameters.
    pub fn fresh<R: Rng>(cfg: &TrainingConfig, i_max: usize, rng: &mut R) -> Self {
        Agent::new(
            AgentModel::random(ModelDims::with_hidden(cfg.hidden), cfg.init_scale, rng),
            i_max,
        )
    }

    fn max_len(&self) -> usize {
        max_decode_len(self.i_max)
    }

    pub fn speak_greedy(&self, t: &Trajectory) -> Utterance {
        let out = greedy_sequence(&self.model, &indices(&t.flatten()), self.max_len())
            .expect("trajectories are non-empty");
        utterance(&out)
    }

    /// `n` independent samples at temperature 1.
    pub fn speak_sampled<R: Rng>(&self, t: &Trajectory, n: usize, rng: &mut R) -> Vec<Utterance> {
        let out = sample_many(
            &self.model,
            &indices(&t.flatten()),
            1.0,
            self.max_len(),
            n,
            rng,
        )
        .expect("trajectories are non-empty");
        out.iter().map(|u| utterance(u)).collect()
    }

    /// Greedy action sequence; may not segment into a trajectory. The empty
    /// utterance decodes to nothing.
    pub fn listen(&self, u: &Utterance) -> Vec<Token> {
        if u.is_empty() {
            return Vec::new();
        }
        tokens(
            &greedy_sequence(&self.model, &indices(u.tokens()), self.max_len())
                .expect("checked non-empty"),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Shuffled sweeps over the train split between dev evaluations.
    pub passes_per_epoch: usize,
    pub rng_seed: u64,
    pub hidden: usize,
    pub init_scale: f64,
    pub optimizer: AmsGradConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 16,
            max_epochs: 100,
            patience: 5,
            passes_per_epoch: 1,
            rng_seed: 0,
            hidden: 20,
            init_scale: 0.1,
            optimizer: AmsGradConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_size == 0 {
            return Err("batch_size must be at least 1".into());
        }
        if self.patience == 0 {
            return Err("patience must be at least 1".into());
        }
        if self.passes_per_epoch == 0 {
            return Err("passes_per_epoch must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return Err("max_epochs must be at least 1".into());
        }
        if self.hidden == 0 {
            return Err("hidden must be at least 1".into());
        }
        if self.optimizer.learning_rate.is_nan() || self.optimizer.learning_rate <= 0.0 {
            return Err("learning_rate must be positive".into());
        }
        Ok(())
    }
}

/// What dev evaluation scores against after each epoch.
#[derive(Clone, Debug, Default)]
pub struct EvalContext {
    pub speaking: Vec<CandidateSet>,
    pub listening: Vec<(Utterance, Trajectory)>,
}

impl EvalContext {
    /// Listening targets are the validation pairs of `corpus`.
    pub fn new(speaking: Vec<CandidateSet>, corpus: &Corpus) -> Self {
        let listening = corpus
            .split(Split::Validation)
            .map(|p| (p.utterance.clone(), p.trajectory.clone()))
            .collect();
        EvalContext {
            speaking,
            listening,
        }
    }
}

/// Stops once neither tracked score has exceeded its best for `patience`
/// consecutive epochs.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best_speak: f64,
    best_listen: f64,
    best_sum: f64,
    stale: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StopDecision {
    /// The epoch ties or beats the best `speak + listen` so far.
    pub new_best: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best_speak: f64::NEG_INFINITY,
            best_listen: f64::NEG_INFINITY,
            best_sum: f64::NEG_INFINITY,
            stale: 0,
        }
    }

    pub fn observe(&mut self, speak: f64, listen: f64) -> StopDecision {
        let improved = speak > self.best_speak || listen > self.best_listen;
        self.best_speak = self.best_speak.max(speak);
        self.best_listen = self.best_listen.max(listen);
        self.stale = if improved { 0 } else { self.stale + 1 };
        let new_best = speak + listen >= self.best_sum;
        if new_best {
            self.best_sum = speak + listen;
        }
        StopDecision {
            new_best,
            stop: self.stale >= self.patience,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_speak_acc: f64,
    pub dev_listen_acc: f64,
    pub stopped: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
}

impl TrainingLog {
    pub const HEADER: &'static str = "epoch,train_loss,dev_speak_acc,dev_listen_acc,stopped";

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for e in &self.epochs {
            out.serialize(e)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> csv::Result<Vec<EpochLog>> {
        csv::Reader::from_reader(r).deserialize().collect()
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("the corpus has no training pairs")]
    EmptyTrain,
    #[error("the corpus has no validation pairs")]
    EmptyValidation,
    #[error("no speaking candidates to validate against")]
    EmptyCandidates,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

pub struct TrainingOutcome {
    pub agent: Agent,
    pub log: TrainingLog,
}

/// Teacher-forced training in both directions on the train split.
///
/// Every pair yields a speaking example (actions to utterance) and a
/// listening example (utterance to actions) in the same batch, and the batch
/// loss is the mean cross-entropy over all predicted tokens. The returned
/// agent is the epoch with the highest dev `speak + listen` accuracy.
pub fn train_agent(
    initial: Agent,
    corpus: &Corpus,
    ctx: &EvalContext,
    cfg: &TrainingConfig,
) -> Result<TrainingOutcome, TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    let examples: Vec<(Vec<usize>, Vec<usize>)> = corpus
        .split(Split::Train)
        .map(|p| {
            (
                indices(&p.trajectory.flatten()),
                indices(p.utterance.tokens()),
            )
        })
        .collect();
    if examples.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    if ctx.listening.is_empty() {
        return Err(TrainError::EmptyValidation);
    }
    if ctx.speaking.is_empty() {
        return Err(TrainError::EmptyCandidates);
    }

    let mut rng = seed::rng(cfg.rng_seed, &[seed::purpose::SHUFFLE]);
    let mut agent = initial;
    let mut best = agent.clone();
    let mut optimizer = AmsGrad::new(cfg.optimizer, agent.model.num_params());
    let mut grads = Gradients::zeros_like(&agent.model);
    let mut stopping = EarlyStopping::new(cfg.patience);
    let mut log = TrainingLog::default();
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let mut loss_sum = 0.0;
        let mut seen = 0;
        for _ in 0..cfg.passes_per_epoch {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                grads.clear();
                // An empty utterance can be spoken but not listened to.
                let tokens: usize = batch
                    .iter()
                    .map(|&i| {
                        let (actions, words) = &examples[i];
                        let listen = if words.is_empty() {
                            0
                        } else {
                            actions.len() + 1
                        };
                        words.len() + 1 + listen
                    })
                    .sum();
                let per_token = 1.0 / tokens as f64;
                seen += tokens;
                for &i in batch {
                    let (actions, words) = &examples[i];
                    for (input, target) in [(actions, words), (words, actions)] {
                        if input.is_empty() {
                            continue;
                        }
                        loss_sum += accumulate_gradients(
                            &agent.model,
                            input,
                            target,
                            per_token,
                            &mut grads,
                        )?;
                    }
                }
                optimizer.step(agent.model.values_mut(), grads.values());
            }
        }
        let speak = speaking_accuracy(&agent, &ctx.speaking);
        let listen = listening_accuracy(&agent, &ctx.listening);
        let decision = stopping.observe(speak, listen);
        if decision.new_best {
            best = agent.clone();
            log.best_epoch = epoch;
        }
        let stopped = decision.stop || epoch == cfg.max_epochs;
        let train_loss = loss_sum / seen as f64;
        log::debug!("epoch {epoch}: loss {train_loss:.4} dev speak {speak:.3} listen {listen:.3}");
        log.epochs.push(EpochLog {
            epoch,
            train_loss,
            dev_speak_acc: speak,
            dev_listen_acc: listen,
            stopped,
        });
        if stopped {
            break;
        }
    }
    Ok(TrainingOutcome { agent: best, log })
}
