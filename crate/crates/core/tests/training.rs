use iterlearn::agent::{train_agent, Agent, EvalContext, TrainError, TrainingConfig, TrainingLog};
use iterlearn::evaluation::{grammar_candidates, listening_accuracy, speaking_accuracy};
use iterlearn::grammar::{
    build_corpus, enumerate_trajectories, Corpus, LanguageKind, LanguageSpec, Pair, Split,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_corpus(kind: LanguageKind) -> Corpus {
    let mut spec = LanguageSpec::new(kind, 5);
    spec.i_max = 2;
    build_corpus(&spec, &enumerate_trajectories(2, 3))
}

fn quick_config() -> TrainingConfig {
    let mut cfg = TrainingConfig {
        max_epochs: 40,
        passes_per_epoch: 10,
        rng_seed: 11,
        ..TrainingConfig::default()
    };
    cfg.optimizer.learning_rate = 0.01;
    cfg
}

fn context(corpus: &Corpus, kind: LanguageKind) -> EvalContext {
    EvalContext::new(
        grammar_candidates(&corpus.trajectories(Split::Validation), kind),
        corpus,
    )
}

fn fresh(cfg: &TrainingConfig) -> Agent {
    Agent::fresh(cfg, 2, &mut ChaCha8Rng::seed_from_u64(3))
}

#[test]
fn fix_marker_two_phrase_corpus_is_fitted() {
    let corpus = small_corpus(LanguageKind::FixMarker);
    let cfg = quick_config();
    let ctx = context(&corpus, LanguageKind::FixMarker);
    let out = train_agent(fresh(&cfg), &corpus, &ctx, &cfg).unwrap();
    let train = corpus.trajectories(Split::Train);
    let pairs: Vec<_> = corpus
        .split(Split::Train)
        .map(|p| (p.utterance.clone(), p.trajectory.clone()))
        .collect();
    let speak = speaking_accuracy(
        &out.agent,
        &grammar_candidates(&train, LanguageKind::FixMarker),
    );
    assert!(speak >= 0.95, "speak {speak}");
    assert!(listening_accuracy(&out.agent, &pairs) >= 0.95);
    let losses: Vec<f64> = out.log.epochs.iter().map(|e| e.train_loss).collect();
    assert!(losses.last().unwrap() < &losses[0]);
}

#[test]
fn training_is_deterministic_in_its_seeds() {
    let corpus = small_corpus(LanguageKind::Mix);
    let mut cfg = quick_config();
    cfg.max_epochs = 3;
    cfg.passes_per_epoch = 1;
    let ctx = context(&corpus, LanguageKind::Mix);
    let a = train_agent(fresh(&cfg), &corpus, &ctx, &cfg).unwrap();
    let b = train_agent(fresh(&cfg), &corpus, &ctx, &cfg).unwrap();
    assert_eq!(a.agent.model, b.agent.model);
    assert_eq!(a.log, b.log);
    cfg.rng_seed += 1;
    let c = train_agent(fresh(&cfg), &corpus, &ctx, &cfg).unwrap();
    assert_ne!(a.agent.model, c.agent.model);
}

#[test]
fn kept_epoch_has_the_best_combined_dev_score() {
    let corpus = small_corpus(LanguageKind::FixMarker);
    let mut cfg = quick_config();
    cfg.passes_per_epoch = 2;
    let ctx = context(&corpus, LanguageKind::FixMarker);
    let out = train_agent(fresh(&cfg), &corpus, &ctx, &cfg).unwrap();
    let score = |e: &iterlearn::agent::EpochLog| e.dev_speak_acc + e.dev_listen_acc;
    let best = out
        .log
        .epochs
        .iter()
        .map(score)
        .fold(f64::NEG_INFINITY, f64::max);
    let kept = &out.log.epochs[out.log.best_epoch - 1];
    assert_eq!(score(kept), best);
    assert_eq!(
        speaking_accuracy(&out.agent, &ctx.speaking),
        kept.dev_speak_acc
    );
    assert_eq!(
        listening_accuracy(&out.agent, &ctx.listening),
        kept.dev_listen_acc
    );
    assert!(out.log.epochs.last().unwrap().stopped);
    assert_eq!(out.log.epochs.iter().filter(|e| e.stopped).count(), 1);
}

#[test]
fn an_untrainable_signal_stops_after_patience() {
    let corpus = small_corpus(LanguageKind::FixMarker);
    let mut cfg = quick_config();
    cfg.optimizer.learning_rate = 1e-9;
    cfg.passes_per_epoch = 1;
    cfg.patience = 3;
    let ctx = context(&corpus, LanguageKind::FixMarker);
    let out = train_agent(fresh(&cfg), &corpus, &ctx, &cfg).unwrap();
    assert_eq!(out.log.epochs.len(), 1 + cfg.patience);
}

#[test]
fn degenerate_inputs_are_rejected() {
    let corpus = small_corpus(LanguageKind::FixMarker);
    let cfg = quick_config();
    let ctx = context(&corpus, LanguageKind::FixMarker);
    let no_train = Corpus::new(
        corpus
            .pairs
            .iter()
            .filter(|p| p.split != Split::Train)
            .cloned()
            .collect::<Vec<Pair>>(),
    );
    assert!(matches!(
        train_agent(fresh(&cfg), &no_train, &ctx, &cfg),
        Err(TrainError::EmptyTrain)
    ));
    let bad = TrainingConfig {
        batch_size: 0,
        ..cfg
    };
    assert!(matches!(
        train_agent(fresh(&cfg), &corpus, &ctx, &bad),
        Err(TrainError::Config(_))
    ));
    let empty = EvalContext::default();
    assert!(train_agent(fresh(&cfg), &corpus, &empty, &cfg).is_err());
}

#[test]
fn empty_utterances_are_trained_as_speech_only() {
    let mut corpus = small_corpus(LanguageKind::FixMarker);
    for p in corpus.pairs.iter_mut().step_by(5) {
        if p.split == Split::Train {
            p.utterance = Default::default();
        }
    }
    let mut cfg = quick_config();
    cfg.max_epochs = 2;
    let ctx = context(&corpus, LanguageKind::FixMarker);
    let out = train_agent(fresh(&cfg), &corpus, &ctx, &cfg).unwrap();
    assert!(out.log.epochs.iter().all(|e| e.train_loss.is_finite()));
}

#[test]
fn training_log_csv_round_trips() {
    let corpus = small_corpus(LanguageKind::FixMarker);
    let mut cfg = quick_config();
    cfg.max_epochs = 2;
    let ctx = context(&corpus, LanguageKind::FixMarker);
    let out = train_agent(fresh(&cfg), &corpus, &ctx, &cfg).unwrap();
    let mut buf = Vec::new();
    out.log.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some(TrainingLog::HEADER));
    assert_eq!(
        TrainingLog::read_csv(text.as_bytes()).unwrap(),
        out.log.epochs
    );
}
