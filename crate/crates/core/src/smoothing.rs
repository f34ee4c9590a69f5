//! The smoothed classifier `g(x) = argmax_c P_δ(f(x + δ) = c)`, estimated by
//! Monte Carlo voting, plus exact enumeration over the discrete synonym
//! substitution distribution for small inputs.

use rand::Rng;
use rayon::prelude::*;

use crate::classifier::{argmax, ModelParams};
use crate::embedding::{encode, EmbeddedSequence, EmbeddingMatrix, SynonymSet};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::training::{sample_masked_uniform, substitute, PerturbationKind, PerturbationSpec};

pub const DEFAULT_SMOOTHING_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmoothedPrediction {
    pub predicted_class: usize,
    pub votes: Vec<u64>,
    pub n_samples: u64,
}

impl SmoothedPrediction {
    fn from_votes(votes: Vec<u64>) -> Self {
        let n_samples = votes.iter().sum();
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        Self {
            predicted_class: best,
            votes,
            n_samples,
        }
    }

    pub fn fraction(&self, class: usize) -> f64 {
        self.votes[class] as f64 / self.n_samples as f64
    }
}

fn tally(n_classes: usize, predictions: impl IntoIterator<Item = usize>) -> Vec<u64> {
    let mut votes = vec![0u64; n_classes];
    for c in predictions {
        votes[c] += 1;
    }
    votes
}

/// Majority vote of `predict` over `n_samples` draws of δ. Each draw has its
/// own stream derived from one base seed taken from `rng`.
pub fn smoothed_predict(
    params: &ModelParams,
    input: &EmbeddedSequence,
    spec: &PerturbationSpec,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<SmoothedPrediction> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be ≥ 1".into()));
    }
    spec.validate()?;
    if spec.kind == PerturbationKind::Adversarial {
        return Err(Error::InvalidArgument("smoothing needs a random perturbation family".into()));
    }
    let base: u64 = rng.random();
    let eps = match spec.kind {
        PerturbationKind::None => 0.0,
        _ => spec.epsilon,
    };
    let predictions = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = stream(base, Stream::Smoothing, &[i]);
            let delta = sample_masked_uniform(input, eps, &mut r);
            params.predict(&input.perturbed(&delta))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SmoothedPrediction::from_votes(tally(params.n_classes(), predictions)))
}

/// Majority vote over random synonym substitutions of `token_ids`.
pub fn smoothed_predict_synonyms(
    params: &ModelParams,
    token_ids: &[usize],
    syn: &SynonymSet,
    p: f64,
    emb: &EmbeddingMatrix,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<SmoothedPrediction> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be ≥ 1".into()));
    }
    let base: u64 = rng.random();
    let pad = Some(params.vocab.pad_id());
    let predictions = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = stream(base, Stream::Smoothing, &[i]);
            let variant = substitute(token_ids, syn, p, &mut r);
            params.predict(&encode(&variant, emb, params.max_len, pad)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SmoothedPrediction::from_votes(tally(params.n_classes(), predictions)))
}

/// Exact class masses of the smoothed classifier under synonym substitution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSmoothedPrediction {
    pub predicted_class: usize,
    pub mass: Vec<f64>,
    pub variants: usize,
}

/// Enumerates every substitution pattern with its probability under
/// independent replacement (probability `p`, uniform synonym choice).
/// Refuses when `Π(1 + |syn_i|)` exceeds `max_variants`.
pub fn enumerate_smoothed_predict(
    params: &ModelParams,
    token_ids: &[usize],
    syn: &SynonymSet,
    p: f64,
    emb: &EmbeddingMatrix,
    max_variants: usize,
) -> Result<ExactSmoothedPrediction> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument("replacement probability must lie in [0, 1]".into()));
    }
    // per position: (token, weight) alternatives, the original first
    let choices: Vec<Vec<(usize, f64)>> = token_ids
        .iter()
        .map(|&t| {
            let options = syn.get(t);
            if options.is_empty() {
                vec![(t, 1.0)]
            } else {
                let share = p / options.len() as f64;
                std::iter::once((t, 1.0 - p))
                    .chain(options.iter().map(|&o| (o, share)))
                    .collect()
            }
        })
        .collect();
    let count = choices
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
        .unwrap_or(u128::MAX);
    if count > max_variants as u128 {
        return Err(Error::TooManyVariants {
            count,
            limit: max_variants as u128,
        });
    }

    let pad = Some(params.vocab.pad_id());
    let mut mass = vec![0.0; params.n_classes()];
    let mut digits = vec![0usize; choices.len()];
    let mut tokens: Vec<usize> = choices.iter().map(|c| c[0].0).collect();
    let mut variants = 0;
    loop {
        let weight: f64 = digits.iter().zip(&choices).map(|(&k, c)| c[k].1).product();
        let class = params.predict(&encode(&tokens, emb, params.max_len, pad)?)?;
        mass[class] += weight;
        variants += 1;

        // odometer increment
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                let predicted_class = argmax(&mass);
                return Ok(ExactSmoothedPrediction {
                    predicted_class,
                    mass,
                    variants,
                });
            }
            digits[pos] += 1;
            if digits[pos] < choices[pos].len() {
                tokens[pos] = choices[pos][digits[pos]].0;
                break;
            }
            digits[pos] = 0;
            tokens[pos] = choices[pos][0].0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Dense;
    use crate::embedding::EmbeddingSpace;
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    /// Linear model over 2-d tokens `t0..t{n}` placed at `points`.
    fn linear(points: &[[f64; 2]], weights: &[[f64; 2]], bias: &[f64]) -> ModelParams {
        let space = EmbeddingSpace::from_pairs(
            points.iter().enumerate().map(|(i, p)| (format!("t{i}"), p.to_vec())).collect(),
        )
        .unwrap();
        let layer = Dense {
            weights: Matrix::from_rows(&weights.iter().map(|w| w.to_vec()).collect::<Vec<_>>()),
            bias: bias.to_vec(),
        };
        ModelParams::from_layers(&space, vec![layer], false).unwrap()
    }

    #[test]
    fn no_noise_reproduces_base_prediction() {
        let m = linear(&[[0.3, 0.1], [-0.2, 0.4]], &[[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]], &[0.0, 0.0, 0.0]);
        let mut rng = stream(0, Stream::Smoothing, &[]);
        for ids in [vec![0], vec![1], vec![0, 1]] {
            let input = m.encode(&ids).unwrap();
            let base = m.predict(&input).unwrap();
            let s = smoothed_predict(&m, &input, &PerturbationSpec::none(), 37, &mut rng).unwrap();
            assert_eq!(s.predicted_class, base);
            assert_eq!(s.votes[base], 37);

            let tiny = smoothed_predict(&m, &input, &PerturbationSpec::uniform_ball(1e-12), 1000, &mut rng).unwrap();
            assert_eq!(tiny.predicted_class, base);
        }
        let input = m.encode(&[0]).unwrap();
        assert!(smoothed_predict(&m, &input, &PerturbationSpec::none(), 0, &mut rng).is_err());
        assert!(smoothed_predict(&m, &input, &PerturbationSpec::adversarial(0.1, 1), 5, &mut rng).is_err());
    }

    #[test]
    fn vote_fraction_matches_ball_quadrature() {
        // class 1 wins where 1.5·x₀ − x₁ + 0.05 > 0 for x = (0.1, 0.2) + δ
        let x = [0.1, 0.2];
        let (w, c) = ([1.5, -1.0], 0.05);
        let m = linear(&[x], &[[0.0, 0.0], w], &[0.0, c]);
        let eps = 0.3;

        let n = 1000;
        let h = 2.0 * eps / n as f64;
        let mut inside = 0usize;
        for i in 0..n {
            for j in 0..n {
                let d0 = -eps + (i as f64 + 0.5) * h;
                let d1 = -eps + (j as f64 + 0.5) * h;
                if w[0] * (x[0] + d0) + w[1] * (x[1] + d1) + c > 0.0 {
                    inside += 1;
                }
            }
        }
        let exact = inside as f64 / (n * n) as f64;
        assert!(exact > 0.2 && exact < 0.8, "decision must flip inside the ball");

        let input = m.encode(&[0]).unwrap();
        let mut rng = stream(4, Stream::Smoothing, &[]);
        let s = smoothed_predict(&m, &input, &PerturbationSpec::uniform_ball(eps), 100_000, &mut rng).unwrap();
        assert!((s.fraction(1) - exact).abs() < 0.02, "{} vs {exact}", s.fraction(1));
    }

    #[test]
    fn vote_fraction_variance_shrinks_with_samples() {
        let m = linear(&[[0.1, 0.2]], &[[0.0, 0.0], [1.5, -1.0]], &[0.0, 0.05]);
        let input = m.encode(&[0]).unwrap();
        let spec = PerturbationSpec::uniform_ball(0.3);
        let variance = |n: usize| {
            let fr: Vec<f64> = (0..40)
                .map(|r| {
                    let mut rng = stream(r, Stream::Smoothing, &[n as u64]);
                    smoothed_predict(&m, &input, &spec, n, &mut rng).unwrap().fraction(1)
                })
                .collect();
            let mean = fr.iter().sum::<f64>() / fr.len() as f64;
            fr.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (fr.len() - 1) as f64
        };
        let (v2, v3, v4) = (variance(100), variance(1000), variance(10_000));
        // 1/n scaling predicts ratios of 10; allow sampling slack on 40 repeats
        for ratio in [v2 / v3, v3 / v4] {
            assert!((4.0..25.0).contains(&ratio), "ratio {ratio} ({v2}, {v3}, {v4})");
        }
    }

    /// Tokens 0..3 sit near the origin; each has synonyms pushed towards
    /// class 1 or class 2 of a 3-class linear model.
    fn synonym_model() -> (ModelParams, SynonymSet) {
        let points = [
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.1],
            [1.0, 0.2],
            [0.9, -0.3],
            [-0.2, 1.1],
            [0.3, 0.8],
            [1.2, 1.0],
            [-1.0, 0.9],
        ];
        let m = linear(&points, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[0.3, 0.0, 0.0]);
        let syn = SynonymSet::from_lists(m.vocab.len(), [(0, vec![3, 4]), (1, vec![5, 6]), (2, vec![7, 8])]);
        (m, syn)
    }

    #[test]
    fn enumeration_base_cases() {
        let (m, syn) = synonym_model();
        let base = m.predict(&m.encode(&[0, 1, 2]).unwrap()).unwrap();
        let none = enumerate_smoothed_predict(&m, &[0, 1, 2], &syn, 0.0, &m.emb, 1000).unwrap();
        assert_eq!(none.predicted_class, base);
        assert_eq!(none.mass[base], 1.0);

        // one position, one synonym that flips the prediction
        let single = SynonymSet::from_lists(m.vocab.len(), [(0, vec![3])]);
        let e = enumerate_smoothed_predict(&m, &[0], &single, 0.1, &m.emb, 10).unwrap();
        assert_eq!(e.variants, 2);
        assert!((e.mass[0] - 0.9).abs() < 1e-15 && (e.mass[1] - 0.1).abs() < 1e-15);

        match enumerate_smoothed_predict(&m, &[0, 1, 2], &syn, 0.5, &m.emb, 26) {
            Err(Error::TooManyVariants { count: 27, limit: 26 }) => {}
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn enumeration_agrees_with_sampling() {
        let (m, syn) = synonym_model();
        let ids = [0, 1, 2];
        let exact = enumerate_smoothed_predict(&m, &ids, &syn, 0.5, &m.emb, 27).unwrap();
        assert_eq!(exact.variants, 27);
        assert!((exact.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(exact.mass.iter().filter(|&&v| v > 0.0).count() >= 2);

        let mut rng = stream(8, Stream::Smoothing, &[]);
        let mc = smoothed_predict_synonyms(&m, &ids, &syn, 0.5, &m.emb, 100_000, &mut rng).unwrap();
        for c in 0..3 {
            assert!((mc.fraction(c) - exact.mass[c]).abs() < 0.01, "class {c}: {} vs {}", mc.fraction(c), exact.mass[c]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn votes_are_conserved(n in 1usize..300, eps in 0.0f64..1.0, seed: u64) {
            let (m, _) = synonym_model();
            let input = m.encode(&[0, 4]).unwrap();
            let mut rng = stream(seed, Stream::Smoothing, &[]);
            let s = smoothed_predict(&m, &input, &PerturbationSpec::uniform_ball(eps), n, &mut rng).unwrap();
            prop_assert_eq!(s.votes.iter().sum::<u64>(), n as u64);
            prop_assert_eq!(s.n_samples, n as u64);
            let top = *s.votes.iter().max().unwrap();
            prop_assert_eq!(s.predicted_class, s.votes.iter().position(|&v| v == top).unwrap());
        }

        #[test]
        fn sampled_majority_matches_enumeration(ids in prop::collection::vec(0usize..9, 1..4), p in 0.0f64..1.0, seed: u64) {
            let (m, syn) = synonym_model();
            let exact = enumerate_smoothed_predict(&m, &ids, &syn, p, &m.emb, 1000).unwrap();
            let mut sorted = exact.mass.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            prop_assume!(sorted[0] - sorted[1] >= 0.05);
            let mut rng = stream(seed, Stream::Smoothing, &[]);
            let mc = smoothed_predict_synonyms(&m, &ids, &syn, p, &m.emb, 10_000, &mut rng).unwrap();
            prop_assert_eq!(mc.predicted_class, exact.predicted_class);
        }
    }
}
