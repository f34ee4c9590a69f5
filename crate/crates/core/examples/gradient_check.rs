//! Compare analytic gradients with central finite differences on random
//! models of a few shapes.
//!
//! cargo run --release --example gradient_check

use rand::Rng;
use robustxfer::classifier::{grad_check, ModelParams};
use robustxfer::embedding::EmbeddingSpace;
use robustxfer::rng::{stream, Stream};

fn main() -> robustxfer::Result<()> {
    for (k, hidden) in [vec![], vec![4], vec![8, 8]].into_iter().enumerate() {
        let mut rng = stream(k as u64, Stream::Init, &[]);
        let dim = 6;
        let rows = (0..10)
            .map(|i| (format!("t{i}"), (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let space = EmbeddingSpace::from_pairs(rows)?;
        let params = ModelParams::init(&space, &hidden, 3, true, &mut rng);
        let input = params.encode(&[0, 3, 3, 7])?;
        let err = grad_check(&params, &input, 1, 1e-5)?;
        println!("hidden {hidden:?}: max relative error {err:.2e}");
    }
    Ok(())
}
