//! Train a classifier on the toy task, round-trip it through a checkpoint,
//! and evaluate it in-language and zero-shot on a noisier target language.
//!
//! cargo run --release --example train_and_eval

use robustxfer::classifier::{format_model, parse_model};
use robustxfer::synthetic::{derive_language, make_toy_task, translate_corpus, NoiseKind, SyntheticLanguageSpec, ToyTaskSpec};
use robustxfer::training::{accuracy, train, Method, TrainingConfig};
use robustxfer::transfer::{zero_shot_eval, InferenceMode};

fn main() -> robustxfer::Result<()> {
    let task = make_toy_task(&ToyTaskSpec::default())?;
    println!(
        "toy task: {} tokens, d={}, {} / {} / {} examples",
        task.space.vocab.len(),
        task.space.dim(),
        task.train.len(),
        task.dev.len(),
        task.test.len()
    );

    let cfg = TrainingConfig {
        train_embeddings: false,
        ..TrainingConfig::new(Method::Normal)
    };
    let params = train(&task.train, &cfg, &task.space, None)?;
    let restored = parse_model(&format_model(&params), "checkpoint")?;
    assert_eq!(restored, params);

    println!("train accuracy {:.4}", accuracy(&restored, &task.train)?);
    println!("test accuracy  {:.4}", accuracy(&restored, &task.test)?);

    for eta in [0.0, 0.5, 1.0, 2.0] {
        let spec = SyntheticLanguageSpec {
            noise_kind: NoiseKind::UniformLinf,
            eta,
            seed: 1,
            tag: "tgt".into(),
        };
        let (target, _) = derive_language(&task.space, &spec)?;
        let test = translate_corpus(&task.test, &task.space.vocab, &target.vocab, "tgt")?;
        let acc = zero_shot_eval(&restored, &test, &target, InferenceMode::Plain)?;
        println!("zero-shot at eta={eta:<4} accuracy {acc:.4}");
    }
    Ok(())
}
