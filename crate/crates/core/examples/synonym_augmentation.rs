//! Build a nearest-neighbour synonym set, augment a corpus with m variants
//! per example, and train the synonym-smoothed classifier on it.
//!
//! cargo run --release --example synonym_augmentation

use robustxfer::embedding::build_synonyms_knn;
use robustxfer::rng::{stream, Stream};
use robustxfer::synthetic::{make_toy_task, ToyTaskSpec};
use robustxfer::training::{accuracy, augment_dataset, train, Method, TrainingConfig, DEFAULT_AUGMENT_M, DEFAULT_AUGMENT_P};

fn main() -> robustxfer::Result<()> {
    let task = make_toy_task(&ToyTaskSpec::default())?;
    let syn = build_synonyms_knn(&task.space, 8, f64::INFINITY)?;
    let vocab = &task.space.vocab;
    let w = vocab.lookup("w0").expect("toy vocabulary");
    let names: Vec<&str> = syn.get(w).iter().filter_map(|&s| vocab.token(s)).collect();
    println!("synonyms of w0: {}", names.join(", "));

    let mut rng = stream(0, Stream::Augment, &[]);
    let augmented = augment_dataset(&task.train, &syn, DEFAULT_AUGMENT_M, DEFAULT_AUGMENT_P, &mut rng)?;
    println!("{} examples -> {} after augmentation", task.train.len(), augmented.len());
    let show = |ids: &[usize]| ids.iter().filter_map(|&t| vocab.token(t)).collect::<Vec<_>>().join(" ");
    println!("original: {}", show(&augmented.examples[0].tokens));
    for v in &augmented.examples[1..4] {
        println!("variant:  {}", show(&v.tokens));
    }

    let base = TrainingConfig {
        train_embeddings: false,
        ..TrainingConfig::default()
    };
    let normal = train(&task.train, &base, &task.space, None)?;
    let smooth = train(&task.train, &base.clone().with_method(Method::RsAugment), &task.space, Some(&syn))?;
    println!("test accuracy: normal {:.4}, rs_augment {:.4}", accuracy(&normal, &task.test)?, accuracy(&smooth, &task.test)?);
    Ok(())
}
