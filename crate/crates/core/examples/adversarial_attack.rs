//! Attack a normally trained and an adversarially trained model with the
//! projected sign-gradient inner maximisation, across attack radii.
//!
//! cargo run --release --example adversarial_attack

use robustxfer::classifier::ModelParams;
use robustxfer::dataset::Dataset;
use robustxfer::rng::{stream, Stream};
use robustxfer::synthetic::{make_toy_task, ToyTaskSpec};
use robustxfer::training::{accuracy, inner_max_perturbation, train, Method, PerturbationSpec, TrainingConfig};

fn attacked_accuracy(params: &ModelParams, data: &Dataset, eps: f64) -> robustxfer::Result<f64> {
    let spec = PerturbationSpec::adversarial(eps, 10);
    let mut correct = 0;
    for (i, ex) in data.examples.iter().enumerate() {
        let input = params.encode(&ex.tokens)?;
        let mut rng = stream(0, Stream::Example, &[i as u64]);
        let delta = inner_max_perturbation(params, &input, ex.label, &spec, &mut rng)?;
        assert!(delta.max_abs() <= eps);
        correct += usize::from(params.predict(&input.perturbed(&delta))? == ex.label);
    }
    Ok(correct as f64 / data.len() as f64)
}

fn main() -> robustxfer::Result<()> {
    let task = make_toy_task(&ToyTaskSpec::default())?;
    let base = TrainingConfig {
        train_embeddings: false,
        ..TrainingConfig::default()
    };
    let normal = train(&task.train, &base, &task.space, None)?;
    let adv = train(&task.train, &base.clone().with_method(Method::Adv).with_epsilon(0.1), &task.space, None)?;

    println!("clean test accuracy: normal {:.4}, adv {:.4}", accuracy(&normal, &task.test)?, accuracy(&adv, &task.test)?);
    println!("{:>8} {:>8} {:>8}", "radius", "normal", "adv");
    for eps in [0.01, 0.05, 0.1, 0.2, 0.4] {
        println!(
            "{eps:>8} {:>8.4} {:>8.4}",
            attacked_accuracy(&normal, &task.test, eps)?,
            attacked_accuracy(&adv, &task.test, eps)?
        );
    }
    Ok(())
}
