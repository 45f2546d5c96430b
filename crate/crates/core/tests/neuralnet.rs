use iterlearn::neuralnet::checkpoint::{load, save};
use iterlearn::neuralnet::gradcheck::check_gradients;
use iterlearn::neuralnet::{
    argmax, decode_step, encode, greedy_sequence, loss_and_gradients, output_distribution,
    sample_sequence, AgentModel, AmsGrad, AmsGradConfig, ModelDims,
};
use iterlearn::token::{Token, VOCAB_SIZE};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn word_sequence<R: Rng>(rng: &mut R, max_len: usize) -> Vec<usize> {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| rng.gen_range(3..VOCAB_SIZE)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn analytic_gradients_match_finite_differences(seed in any::<u64>(), h in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = AgentModel::random(ModelDims::with_hidden(h), 0.5, &mut rng);
        let input = word_sequence(&mut rng, 5);
        let target = word_sequence(&mut rng, 5);
        let r = check_gradients(&model, &input, &target, 1e-5).unwrap();
        prop_assert!(r.max_relative_error < 1e-4, "{:?}", r);
    }

    #[test]
    fn output_distribution_masks_control_tokens(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits: Vec<f64> = (0..VOCAB_SIZE).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let p = output_distribution(&logits, 1.0);
        prop_assert_eq!(p[Token::Pad.index()], 0.0);
        prop_assert_eq!(p[Token::Bos.index()], 0.0);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decoded_sequences_contain_only_words(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = AgentModel::random(ModelDims::with_hidden(6), 1.0, &mut rng);
        let input = word_sequence(&mut rng, 6);
        let g = greedy_sequence(&model, &input, 12).unwrap();
        let s = sample_sequence(&model, &input, 1.0, 12, &mut rng).unwrap();
        prop_assert!(g.len() <= 12 && s.len() <= 12);
        for t in g.iter().chain(&s) {
            prop_assert!(*t > Token::Eos.index() && *t < VOCAB_SIZE);
        }
    }
}

#[test]
fn greedy_follows_the_stepwise_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = AgentModel::random(ModelDims::with_hidden(5), 1.0, &mut rng);
    let input = [3, 7, 10, 4, 8];
    let out = greedy_sequence(&model, &input, 10).unwrap();
    let enc = encode(&model, &input).unwrap();
    let mut state = enc.final_state();
    let mut prev = Token::Bos.index();
    for &tok in &out {
        let step = decode_step(&model, &state, prev, &enc);
        let p = output_distribution(&step.logits, 1.0);
        assert_eq!(argmax(&p), tok);
        state = step.state;
        prev = tok;
    }
}

#[test]
fn optimizer_reduces_the_loss_on_one_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut model = AgentModel::random(ModelDims::with_hidden(20), 0.1, &mut rng);
    let (input, target) = ([3, 4, 5], [10, 3, 7, 11, 4, 8]);
    let mut opt = AmsGrad::new(
        AmsGradConfig {
            learning_rate: 0.01,
            ..AmsGradConfig::default()
        },
        model.num_params(),
    );
    let (first, _) = loss_and_gradients(&model, &input, &target).unwrap();
    for _ in 0..200 {
        let (_, g) = loss_and_gradients(&model, &input, &target).unwrap();
        opt.step(model.values_mut(), g.values());
    }
    let (last, _) = loss_and_gradients(&model, &input, &target).unwrap();
    assert!(last < 0.05 * first, "{first} -> {last}");
    assert_eq!(greedy_sequence(&model, &input, 10).unwrap(), target);
}

#[test]
fn checkpoint_file_round_trip_preserves_behaviour() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = AgentModel::random(ModelDims::with_hidden(20), 0.3, &mut rng);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save(&model, &path).unwrap();
    let back = load(&path).unwrap();
    assert_eq!(back, model);
    let input = [5, 9, 12];
    assert_eq!(
        greedy_sequence(&back, &input, 12).unwrap(),
        greedy_sequence(&model, &input, 12).unwrap()
    );
}
