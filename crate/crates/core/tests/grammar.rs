mod common;

use std::collections::BTreeSet;

use iterlearn::grammar::{
    build_corpus, classify_utterance, enumerate_trajectories, enumerate_valid_utterances, segment,
    Corpus, LanguageKind, LanguageSpec, Split, UtteranceType,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const KINDS: [LanguageKind; 5] = [
    LanguageKind::FixMarker,
    LanguageKind::Fix,
    LanguageKind::FreeMarker,
    LanguageKind::Mix,
    LanguageKind::MixDrop,
];

fn expected_types(kind: LanguageKind) -> &'static [UtteranceType] {
    match kind {
        LanguageKind::FixMarker => &[UtteranceType::FixMarker],
        LanguageKind::Fix => &[UtteranceType::Fix],
        LanguageKind::FreeMarker => &[UtteranceType::FixMarker, UtteranceType::FreeMarker],
        LanguageKind::Mix => &[
            UtteranceType::Fix,
            UtteranceType::FixMarker,
            UtteranceType::FreeMarker,
        ],
        LanguageKind::MixDrop => &[
            UtteranceType::Fix,
            UtteranceType::FixMarker,
            UtteranceType::Free,
            UtteranceType::FreeMarker,
            UtteranceType::FixDrop,
            UtteranceType::FreeDrop,
        ],
    }
}

#[test]
fn trajectory_space_sizes() {
    assert_eq!(enumerate_trajectories(3, 3).len(), 1_092);
    assert_eq!(enumerate_trajectories(4, 3).len(), 9_840);
    assert_eq!(enumerate_trajectories(5, 3).len(), 88_572);
}

#[test]
fn classifier_matches_brute_force_on_random_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..3_000 {
        let (t, u) = common::random_case(&mut rng, 5);
        assert_eq!(
            classify_utterance(&t, &u),
            common::oracle_type(&t, &u),
            "{t} / {u}"
        );
    }
}

#[test]
fn grammar_sets_classify_into_their_family() {
    for t in enumerate_trajectories(3, 3).into_iter().step_by(7) {
        for kind in KINDS {
            for u in enumerate_valid_utterances(&t, kind) {
                let ty = classify_utterance(&t, &u);
                assert!(expected_types(kind).contains(&ty), "{kind} {t} {u} {ty}");
            }
        }
    }
}

#[test]
fn corpus_splits_are_eighty_ten_ten_by_pair() {
    for kind in KINDS {
        let mut spec = LanguageSpec::new(kind, 3);
        spec.i_max = 3;
        let corpus = build_corpus(&spec, &enumerate_trajectories(3, 3));
        let n = corpus.len();
        assert_eq!(n, 1_092 * spec.utterances_per_trajectory);
        let test = corpus.count(Split::Test);
        let dev = corpus.count(Split::Validation);
        assert_eq!(corpus.count(Split::Train) + dev + test, n);
        assert!(
            test.abs_diff(n / 10) <= 1 && dev.abs_diff(n / 10) <= 1,
            "{kind}"
        );
        for p in &corpus.pairs {
            if kind == LanguageKind::MixDrop {
                let ty = classify_utterance(&p.trajectory, &p.utterance);
                assert!(
                    expected_types(kind).contains(&ty),
                    "{} {}",
                    p.trajectory,
                    p.utterance
                );
            } else {
                assert!(enumerate_valid_utterances(&p.trajectory, kind).contains(&p.utterance));
            }
        }
    }
}

#[test]
fn fix_marker_corpus_is_one_utterance_per_trajectory() {
    let mut spec = LanguageSpec::new(LanguageKind::FixMarker, 0);
    spec.i_max = 3;
    let corpus = build_corpus(&spec, &enumerate_trajectories(3, 3));
    let ts: BTreeSet<_> = corpus.pairs.iter().map(|p| p.trajectory.clone()).collect();
    assert_eq!(ts.len(), corpus.len());
}

#[test]
fn corpus_tsv_round_trips() {
    let mut spec = LanguageSpec::new(LanguageKind::MixDrop, 9);
    spec.i_max = 2;
    let corpus = build_corpus(&spec, &enumerate_trajectories(2, 3));
    let text = corpus.to_tsv_string();
    assert_eq!(Corpus::read_tsv(text.as_bytes()).unwrap(), corpus);
}

fn arb_case() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 1usize..=5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn classifier_agrees_with_oracle((seed, i_max) in arb_case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t, u) = common::random_case(&mut rng, i_max);
        prop_assert_eq!(classify_utterance(&t, &u), common::oracle_type(&t, &u));
    }

    #[test]
    fn segmentation_inverts_flattening((seed, i_max) in arb_case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = common::random_trajectory(&mut rng, i_max);
        prop_assert_eq!(segment(&t.flatten(), i_max).unwrap(), t);
    }

    #[test]
    fn every_rendering_is_readable((seed, i_max) in arb_case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = common::random_trajectory(&mut rng, i_max);
        let u = common::random_rendering(&mut rng, &t);
        prop_assert_ne!(classify_utterance(&t, &u), UtteranceType::Other);
    }

    #[test]
    fn mix_drop_contains_every_unambiguous_marked_rendering((seed, i_max) in arb_case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = common::random_trajectory(&mut rng, i_max.min(4));
        let drop = enumerate_valid_utterances(&t, LanguageKind::MixDrop);
        for u in enumerate_valid_utterances(&t, LanguageKind::FreeMarker) {
            prop_assert!(drop.contains(&u));
        }
    }
}
