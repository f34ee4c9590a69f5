use rand::Rng;
use robustxfer::classifier::{format_model, ModelParams};
use robustxfer::dataset::{Dataset, Example};
use robustxfer::embedding::{EmbeddingSpace, SynonymSet};
use robustxfer::rng::{stream, Stream};
use robustxfer::synthetic::{make_toy_task, mean_pool, ToyTaskSpec};
use robustxfer::training::*;

/// 20 two-token examples in d=4, labelled by which side of a fixed plane the
/// pooled vector lies on.
fn separable_toy() -> (EmbeddingSpace, Dataset) {
    let mut rng = stream(11, Stream::Generator, &[]);
    let centre = [0.6, -0.4, 0.5, 0.3];
    let rows = (0..20)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let v = centre.iter().map(|c| sign * c + rng.random_range(-0.1..0.1)).collect();
            (format!("t{i}"), v)
        })
        .collect();
    let space = EmbeddingSpace::from_pairs(rows).unwrap();
    let examples = (0..20)
        .map(|i| {
            let a = (i * 2) % 20;
            let b = (i * 2 + 4 * (i % 3) + 2) % 20;
            let tokens = if i % 2 == 0 { vec![a, b] } else { vec![a + 1, b + 1] };
            Example { tokens, label: i % 2 }
        })
        .collect();
    (space, Dataset::new(examples, 2, "src").unwrap())
}

/// Runs the perceptron on pooled vectors; returns true once an epoch makes
/// no mistake.
fn perceptron_separates(space: &EmbeddingSpace, data: &Dataset) -> bool {
    let mut w = vec![0.0; space.dim() + 1];
    for _ in 0..1000 {
        let mut mistakes = 0;
        for ex in &data.examples {
            let mut x = mean_pool(&ex.tokens, &space.emb);
            x.push(1.0);
            let y = if ex.label == 1 { 1.0 } else { -1.0 };
            let score: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
            if y * score <= 0.0 {
                mistakes += 1;
                w.iter_mut().zip(&x).for_each(|(a, b)| *a += y * b);
            }
        }
        if mistakes == 0 {
            return true;
        }
    }
    false
}

fn linear_cfg(method: Method) -> TrainingConfig {
    TrainingConfig {
        hidden_dims: vec![],
        batch_size: 4,
        learning_rate: 0.5,
        epochs: 50,
        ..TrainingConfig::new(method)
    }
}

#[test]
fn separable_toy_is_fit_within_fifty_epochs() {
    let (space, data) = separable_toy();
    assert!(perceptron_separates(&space, &data));
    let params = train_normal(&data, &linear_cfg(Method::Normal), &space).unwrap();
    assert_eq!(accuracy(&params, &data).unwrap(), 1.0);

    let mlp = TrainingConfig { hidden_dims: vec![8], ..linear_cfg(Method::Normal) };
    assert_eq!(accuracy(&train_normal(&data, &mlp, &space).unwrap(), &data).unwrap(), 1.0);
}

#[test]
fn zero_epochs_returns_initialisation() {
    let (space, data) = separable_toy();
    let cfg = TrainingConfig { epochs: 0, seed: 9, ..TrainingConfig::default() };
    let params = train_normal(&data, &cfg, &space).unwrap();
    let mut rng = stream(9, Stream::Init, &[]);
    let init = ModelParams::init(&space, &cfg.hidden_dims, 2, true, &mut rng);
    assert_eq!(params, init);
}

#[test]
fn training_is_deterministic() {
    let (space, data) = separable_toy();
    let syn = SynonymSet::from_lists(space.vocab.len(), (0..20).map(|t| (t, vec![(t + 2) % 20])));
    for method in Method::ALL {
        let cfg = TrainingConfig { seed: 3, ..linear_cfg(method) };
        let a = format_model(&train(&data, &cfg, &space, Some(&syn)).unwrap());
        let b = format_model(&train(&data, &cfg, &space, Some(&syn)).unwrap());
        assert_eq!(a, b, "{method}");
    }
}

#[test]
fn degenerate_robust_runs_match_normal_training() {
    let (space, data) = separable_toy();
    let normal = train_normal(&data, &TrainingConfig { hidden_dims: vec![6], ..TrainingConfig::default() }, &space).unwrap();
    for method in [Method::Adv, Method::RsRandom] {
        let cfg = TrainingConfig { hidden_dims: vec![6], ..TrainingConfig::new(method) }.with_epsilon(0.0);
        assert_eq!(train(&data, &cfg, &space, None).unwrap(), normal, "{method} at ε=0");
    }
    let no_variants = TrainingConfig { hidden_dims: vec![6], augment_m: 0, ..TrainingConfig::new(Method::RsAugment) };
    let syn = SynonymSet::from_lists(space.vocab.len(), (0..20).map(|t| (t, vec![(t + 1) % 20])));
    assert_eq!(train_rs_augment(&data, &no_variants, &space, &syn).unwrap(), normal);
}

#[test]
fn empty_synonyms_equal_repeated_data() {
    let (space, data) = separable_toy();
    let cfg = TrainingConfig { hidden_dims: vec![6], augment_m: 2, ..TrainingConfig::new(Method::RsAugment) };
    let augmented = train_rs_augment(&data, &cfg, &space, &SynonymSet::empty(space.vocab.len())).unwrap();

    let repeated = Dataset::new(
        data.examples.iter().flat_map(|ex| std::iter::repeat_n(ex.clone(), 3)).collect(),
        2,
        "src",
    )
    .unwrap();
    let plain = cfg.clone().with_method(Method::Normal);
    assert_eq!(augmented, train_normal(&repeated, &plain, &space).unwrap());
}

#[test]
fn method_mismatch_is_rejected() {
    let (space, data) = separable_toy();
    assert!(train_adversarial(&data, &TrainingConfig::new(Method::Normal), &space).is_err());
    assert!(train(&data, &TrainingConfig::new(Method::RsAugment), &space, None).is_err());
}

#[test]
fn divergence_names_the_step() {
    let (space, data) = separable_toy();
    let cfg = TrainingConfig { learning_rate: 1e300, ..linear_cfg(Method::Normal) };
    match train_normal(&data, &cfg, &space) {
        Err(robustxfer::Error::Divergence { step }) => assert!(step < 10),
        other => panic!("expected divergence, got {other:?}"),
    }
}

/// Worst-case accuracy: fraction of examples still classified correctly
/// after the inner-max attack.
fn attacked_accuracy(params: &ModelParams, data: &Dataset, eps: f64, seed: u64) -> f64 {
    let spec = PerturbationSpec::adversarial(eps, 10);
    let correct = data
        .examples
        .iter()
        .enumerate()
        .filter(|(i, ex)| {
            let input = params.encode(&ex.tokens).unwrap();
            let mut rng = stream(seed, Stream::Example, &[*i as u64]);
            let delta = inner_max_perturbation(params, &input, ex.label, &spec, &mut rng).unwrap();
            params.predict(&input.perturbed(&delta)).unwrap() == ex.label
        })
        .count();
    correct as f64 / data.len() as f64
}

#[test]
fn adversarial_training_holds_under_attack_on_separable_toy() {
    // pooled class means sit ≈ 0.5 from the plane per axis, so ε = 0.05
    // leaves ample margin for the L1 norm of a unit-scale weight vector
    let (space, data) = separable_toy();
    let cfg = linear_cfg(Method::Adv).with_epsilon(0.05);
    let params = train_adversarial(&data, &cfg, &space).unwrap();
    assert_eq!(attacked_accuracy(&params, &data, 0.05, 1), 1.0);
}

fn small_toy(seed: u64) -> robustxfer::synthetic::ToyTask {
    make_toy_task(&ToyTaskSpec {
        vocab_size: 128,
        examples_per_class: 50,
        seed,
        ..ToyTaskSpec::default()
    })
    .unwrap()
}

#[test]
fn adversarial_training_beats_normal_under_attack() {
    let eps = 0.1;
    let (mut adv_total, mut normal_total) = (0.0, 0.0);
    for seed in 0..5 {
        let task = small_toy(seed);
        let base = TrainingConfig { seed, train_embeddings: false, ..TrainingConfig::default() };
        let normal = train_normal(&task.train, &base, &task.space).unwrap();
        let adv = train_adversarial(&task.train, &base.clone().with_method(Method::Adv).with_epsilon(eps), &task.space).unwrap();
        normal_total += attacked_accuracy(&normal, &task.test, eps, seed);
        adv_total += attacked_accuracy(&adv, &task.test, eps, seed);
    }
    assert!(adv_total >= normal_total, "adv {adv_total} vs normal {normal_total}");
}

#[test]
fn noise_trained_predictions_are_stable_under_training_noise() {
    let eps = 0.1;
    let task = small_toy(2);
    let cfg = TrainingConfig { train_embeddings: false, ..TrainingConfig::new(Method::RsRandom) }.with_epsilon(eps);
    let params = train_rs_random(&task.train, &cfg, &task.space).unwrap();
    let stable = task
        .test
        .examples
        .iter()
        .enumerate()
        .filter(|(i, ex)| {
            let input = params.encode(&ex.tokens).unwrap();
            let base = params.predict(&input).unwrap();
            (0..100).all(|k| {
                let mut rng = stream(77, Stream::Smoothing, &[*i as u64, k]);
                let delta = sample_masked_uniform(&input, eps, &mut rng);
                params.predict(&input.perturbed(&delta)).unwrap() == base
            })
        })
        .count();
    let rate = stable as f64 / task.test.len() as f64;
    assert!(rate >= 0.95, "stable on {rate}");
}

#[test]
fn grid_search_rules() {
    let (space, data) = separable_toy();
    let base = linear_cfg(Method::RsRandom);
    let one = grid_search(&data, &data, &base, &[0.01], &space, None).unwrap();
    assert_eq!(one.best_epsilon, 0.01);
    assert_eq!(one.table.len(), 1);

    // both cells fit the separable toy perfectly, so the tie goes to the smaller ε
    let tie = grid_search(&data, &data, &base, &[0.01, 0.001], &space, None).unwrap();
    assert_eq!(tie.table.iter().map(|c| c.dev_accuracy).collect::<Vec<_>>(), vec![Some(1.0), Some(1.0)]);
    assert_eq!(tie.best_epsilon, 0.001);

    assert!(grid_search(&data, &data, &base, &[], &space, None).is_err());
}

#[test]
fn failed_grid_cells_are_recorded_and_skipped() {
    let (space, data) = separable_toy();
    let base = linear_cfg(Method::Adv);
    let found = grid_search(&data, &data, &base, &[-1.0, 0.01], &space, None).unwrap();
    assert!(found.table[0].error.is_some());
    assert_eq!(found.best_epsilon, 0.01);
}
