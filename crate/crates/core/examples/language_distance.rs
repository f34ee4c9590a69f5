//! Measure source-target distance from aligned word pairs for synthetic
//! languages of growing noise, and relate a robust model's gain to it.
//!
//! cargo run --release --example language_distance

use std::collections::BTreeMap;

use robustxfer::synthetic::{derive_language, make_toy_task, translate_corpus, NoiseKind, SyntheticLanguageSpec, ToyTaskSpec};
use robustxfer::training::{train, Method, TrainingConfig};
use robustxfer::transfer::{improvement_vs_distance, language_distance, zero_shot_eval, InferenceMode, TransferResult};

fn main() -> robustxfer::Result<()> {
    let task = make_toy_task(&ToyTaskSpec::default())?;
    let base = TrainingConfig {
        train_embeddings: false,
        ..TrainingConfig::default()
    };
    let normal = train(&task.train, &base, &task.space, None)?;
    let robust = train(&task.train, &base.clone().with_method(Method::RsRandom).with_epsilon(1.0), &task.space, None)?;

    let mut results = [("normal", &normal), ("rs_random", &robust)].map(|(name, _)| TransferResult {
        model: name.into(),
        accuracy: BTreeMap::new(),
        distance: BTreeMap::new(),
    });
    let d = task.space.dim() as f64;
    for (k, eta) in [0.1, 0.5, 1.0, 2.0, 3.0].into_iter().enumerate() {
        let tag = format!("lang{k}");
        let spec = SyntheticLanguageSpec {
            noise_kind: NoiseKind::UniformLinf,
            eta,
            seed: k as u64,
            tag: tag.clone(),
        };
        let (target, pairs) = derive_language(&task.space, &spec)?;
        let distance = language_distance(&pairs, &task.space.emb, &target.emb)?;
        println!("{tag}: eta={eta:<4} distance={distance:.4} (eta*sqrt(d/3) = {:.4})", eta * (d / 3.0).sqrt());
        let test = translate_corpus(&task.test, &task.space.vocab, &target.vocab, &tag)?;
        for (result, params) in results.iter_mut().zip([&normal, &robust]) {
            result.accuracy.insert(tag.clone(), zero_shot_eval(params, &test, &target, InferenceMode::Plain)?);
            result.distance.insert(tag.clone(), distance);
        }
    }
    let table = improvement_vs_distance(&results[0], &results[1])?;
    print!("{}", table.to_csv());
    println!("spearman rho = {:.3}{}", table.spearman, if table.degenerate { " (degenerate)" } else { "" });
    Ok(())
}
