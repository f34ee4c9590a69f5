//! Train with uniform L∞ noise, then compare single-pass predictions with
//! the Monte Carlo smoothed classifier, and check the sampled synonym
//! smoothing against exact enumeration on one short input.
//!
//! cargo run --release --example randomized_smoothing

use robustxfer::embedding::build_synonyms_knn;
use robustxfer::rng::{stream, Stream};
use robustxfer::smoothing::{enumerate_smoothed_predict, smoothed_predict, smoothed_predict_synonyms};
use robustxfer::synthetic::{make_toy_task, ToyTaskSpec};
use robustxfer::training::{accuracy, train, Method, PerturbationSpec, TrainingConfig};
use robustxfer::transfer::{zero_shot_eval, InferenceMode};

fn main() -> robustxfer::Result<()> {
    let task = make_toy_task(&ToyTaskSpec::default())?;
    let eps = 0.5;
    let cfg = TrainingConfig {
        train_embeddings: false,
        ..TrainingConfig::new(Method::RsRandom)
    }
    .with_epsilon(eps);
    let params = train(&task.train, &cfg, &task.space, None)?;

    let smoothed = InferenceMode::Smoothed {
        spec: PerturbationSpec::uniform_ball(eps),
        n_samples: 200,
        seed: 7,
    };
    println!("plain test accuracy    {:.4}", accuracy(&params, &task.test)?);
    println!("smoothed test accuracy {:.4}", zero_shot_eval(&params, &task.test, &task.space, smoothed)?);

    let ex = &task.test.examples[0];
    let input = params.encode(&ex.tokens)?;
    let mut rng = stream(1, Stream::Smoothing, &[]);
    let votes = smoothed_predict(&params, &input, &PerturbationSpec::uniform_ball(eps), 1000, &mut rng)?;
    println!("first test example (label {}): votes {:?}", ex.label, votes.votes);

    // exact synonym smoothing over the first four tokens
    let syn = build_synonyms_knn(&task.space, 2, f64::INFINITY)?;
    let short = &ex.tokens[..4];
    let exact = enumerate_smoothed_predict(&params, short, &syn, 0.5, &task.space.emb, 1000)?;
    let sampled = smoothed_predict_synonyms(&params, short, &syn, 0.5, &task.space.emb, 20_000, &mut rng)?;
    println!("exact masses over {} patterns: {:.4?}", exact.variants, exact.mass);
    let fractions: Vec<f64> = (0..params.n_classes()).map(|c| sampled.fraction(c)).collect();
    println!("sampled fractions:               {fractions:.4?}");
    Ok(())
}
