//! Desk-scale stand-ins for a cross-lingual benchmark: a toy classification
//! task over a static embedding space, and synthetic target languages whose
//! embeddings are noisy copies of the source rows.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::classifier::ModelParams;
use crate::dataset::{Dataset, Example};
use crate::embedding::{build_synonyms_knn, euclidean, EmbeddingMatrix, EmbeddingSpace, SynonymSet, Vocabulary};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, stream, Stream};
use crate::training::{accuracy, grid_search, train, Method, TrainingConfig, DEFAULT_EPSILON_GRID};
use crate::transfer::{language_distance, zero_shot_eval, AlignedPairs, InferenceMode};

pub const SOURCE_LANGUAGE: &str = "src";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    UniformLinf,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLanguageSpec {
    pub noise_kind: NoiseKind,
    pub eta: f64,
    pub seed: u64,
    pub tag: String,
}

/// Geometry of the toy task. Class prototypes are Gaussian with per-axis
/// standard deviation `prototype_scale` and pairwise distance at least
/// `4 · margin`; each token vector is its class prototype plus uniform
/// jitter of half-width `spread`. An example draws `tokens_per_example`
/// tokens from one class pool and is kept only when its pooled vector lies
/// at least `margin` from every Voronoi face of the prototypes.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTaskSpec {
    pub n_classes: usize,
    pub vocab_size: usize,
    pub dim: usize,
    pub examples_per_class: usize,
    pub tokens_per_example: usize,
    pub margin: f64,
    pub spread: f64,
    pub prototype_scale: f64,
    /// Prototypes vary only on the first `signal_dims` axes (0 = all axes);
    /// the remaining axes carry jitter of half-width `residual_spread`.
    pub signal_dims: usize,
    pub residual_spread: f64,
    pub seed: u64,
}

impl Default for ToyTaskSpec {
    fn default() -> Self {
        Self {
            n_classes: 4,
            vocab_size: 512,
            dim: 16,
            examples_per_class: 200,
            tokens_per_example: 8,
            margin: 0.05,
            spread: 1.0,
            prototype_scale: 0.15,
            signal_dims: 0,
            residual_spread: 1.0,
            seed: 0,
        }
    }
}

impl ToyTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::InvalidArgument("toy task needs at least 2 classes".into()));
        }
        if self.vocab_size < self.n_classes {
            return Err(Error::InvalidArgument("vocab_size must cover every class".into()));
        }
        if self.dim == 0 || self.tokens_per_example == 0 {
            return Err(Error::InvalidArgument("dim and tokens_per_example must be ≥ 1".into()));
        }
        if !(self.margin > 0.0) || !(self.spread >= 0.0) || !(self.prototype_scale > 0.0) {
            return Err(Error::InvalidArgument("margin and prototype_scale must be > 0, spread ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ToyTask {
    pub space: EmbeddingSpace,
    pub prototypes: Vec<Vec<f64>>,
    /// Class of each regular token id (None for specials).
    pub token_class: Vec<Option<usize>>,
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
}

/// Distance from `x` to the nearest Voronoi face of its nearest prototype,
/// together with that prototype's index.
pub fn prototype_margin(x: &[f64], prototypes: &[Vec<f64>]) -> (usize, f64) {
    let sq = |p: &[f64]| x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let d2: Vec<f64> = prototypes.iter().map(|p| sq(p)).collect();
    let own = crate::classifier::argmax(&d2.iter().map(|v| -v).collect::<Vec<_>>());
    let margin = (0..prototypes.len())
        .filter(|&c| c != own)
        .map(|c| (d2[c] - d2[own]) / (2.0 * euclidean(&prototypes[c], &prototypes[own])))
        .fold(f64::INFINITY, f64::min);
    (own, margin)
}

pub fn mean_pool(tokens: &[usize], emb: &EmbeddingMatrix) -> Vec<f64> {
    let mut pooled = vec![0.0; emb.dim()];
    for &t in tokens {
        for (p, v) in pooled.iter_mut().zip(emb.row(t)) {
            *p += v;
        }
    }
    pooled.iter_mut().for_each(|p| *p /= tokens.len() as f64);
    pooled
}

/// The analytic decision rule of the toy task: nearest prototype of the
/// pooled embedding.
pub fn prototype_rule(tokens: &[usize], emb: &EmbeddingMatrix, prototypes: &[Vec<f64>]) -> usize {
    prototype_margin(&mean_pool(tokens, emb), prototypes).0
}

const MAX_PROTOTYPE_ATTEMPTS: usize = 1000;
const MAX_DRAWS_PER_EXAMPLE: usize = 200;

pub fn make_toy_task(spec: &ToyTaskSpec) -> Result<ToyTask> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Stream::Generator, &[]);
    let normal = Normal::new(0.0, spec.prototype_scale).expect("positive scale");

    let signal = if spec.signal_dims == 0 { spec.dim } else { spec.signal_dims.min(spec.dim) };
    let prototypes = (0..MAX_PROTOTYPE_ATTEMPTS)
        .map(|_| {
            (0..spec.n_classes)
                .map(|_| {
                    (0..spec.dim)
                        .map(|k| if k < signal { normal.sample(&mut rng) } else { 0.0 })
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>()
        })
        .find(|ps| {
            ps.iter()
                .enumerate()
                .all(|(i, a)| ps[i + 1..].iter().all(|b| euclidean(a, b) >= 4.0 * spec.margin))
        })
        .ok_or_else(|| Error::Generation("could not place prototypes 4·margin apart".into()))?;

    let names: Vec<String> = (0..spec.vocab_size).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::new(names)?;
    let mut values = Matrix::zeros(vocab.len(), spec.dim);
    let mut token_class = vec![None; vocab.len()];
    let mut pools = vec![Vec::new(); spec.n_classes];
    for t in 0..spec.vocab_size {
        let c = t % spec.n_classes;
        token_class[t] = Some(c);
        pools[c].push(t);
        for (k, (v, p)) in values.row_mut(t).iter_mut().zip(&prototypes[c]).enumerate() {
            let half = if k < signal { spec.spread } else { spec.residual_spread };
            *v = p + if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };
        }
    }
    let emb = EmbeddingMatrix::new(values)?;

    let n_train = spec.examples_per_class * 3 / 5;
    let n_dev = spec.examples_per_class / 5;
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut splits = [Vec::new(), Vec::new(), Vec::new()];
    for i in 0..spec.examples_per_class {
        for (c, pool) in pools.iter().enumerate() {
            let mut accepted = None;
            for _ in 0..MAX_DRAWS_PER_EXAMPLE {
                let tokens: Vec<usize> = (0..spec.tokens_per_example)
                    .map(|_| pool[rng.random_range(0..pool.len())])
                    .collect();
                let (own, m) = prototype_margin(&mean_pool(&tokens, &emb), &prototypes);
                let mut key = tokens.clone();
                key.sort_unstable();
                if own == c && m >= spec.margin && seen.insert(key) {
                    accepted = Some(tokens);
                    break;
                }
            }
            let tokens = accepted.ok_or_else(|| {
                Error::Generation(format!("class {c}: no example met the margin after {MAX_DRAWS_PER_EXAMPLE} draws"))
            })?;
            let split = if i < n_train {
                0
            } else if i < n_train + n_dev {
                1
            } else {
                2
            };
            splits[split].push(Example { tokens, label: c });
        }
    }
    let [train, dev, test] = splits.map(|ex| Dataset {
        examples: ex,
        n_classes: spec.n_classes,
        language: SOURCE_LANGUAGE.into(),
    });
    Ok(ToyTask {
        space: EmbeddingSpace::new(vocab, emb)?,
        prototypes,
        token_class,
        train,
        dev,
        test,
    })
}

/// A synthetic target language: every regular token `w` becomes `w@tag`
/// with its vector displaced by noise of scale η; specials are copied.
pub fn derive_language(
    source: &EmbeddingSpace,
    spec: &SyntheticLanguageSpec,
) -> Result<(EmbeddingSpace, AlignedPairs)> {
    if !(spec.eta >= 0.0) {
        return Err(Error::InvalidArgument("eta must be ≥ 0".into()));
    }
    let vocab = &source.vocab;
    let tokens: Vec<String> = vocab
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if vocab.is_special(i) {
                t.clone()
            } else {
                format!("{t}@{}", spec.tag)
            }
        })
        .collect();
    let vocab_tgt = Vocabulary::new(tokens)?;
    let mut rng = stream(spec.seed, Stream::Language, &[]);
    let mut values = source.emb.as_matrix().clone();
    if spec.eta > 0.0 {
        let gaussian = Normal::new(0.0, spec.eta).expect("positive eta");
        for id in vocab.regular_ids() {
            for v in values.row_mut(id) {
                *v += match spec.noise_kind {
                    NoiseKind::UniformLinf => rng.random_range(-spec.eta..=spec.eta),
                    NoiseKind::Gaussian => gaussian.sample(&mut rng),
                };
            }
        }
    }
    let pairs = AlignedPairs {
        pairs: vocab.regular_ids().map(|i| (i, i)).collect(),
        source_lang: SOURCE_LANGUAGE.into(),
        target_lang: spec.tag.clone(),
    };
    Ok((EmbeddingSpace::new(vocab_tgt, EmbeddingMatrix::new(values)?)?, pairs))
}

/// Maps every token to its `@tag` twin in `vocab_tgt`.
pub fn translate_corpus(data: &Dataset, vocab: &Vocabulary, vocab_tgt: &Vocabulary, tag: &str) -> Result<Dataset> {
    let examples = data
        .examples
        .iter()
        .map(|ex| {
            let tokens = ex
                .tokens
                .iter()
                .map(|&t| {
                    let name = vocab.token(t).ok_or(Error::IndexOutOfRange { id: t, size: vocab.len() })?;
                    let twin = if vocab.is_special(t) {
                        name.to_string()
                    } else {
                        format!("{name}@{tag}")
                    };
                    vocab_tgt
                        .lookup(&twin)
                        .ok_or_else(|| Error::Mismatch(format!("no target twin for token {name:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Example { tokens, label: ex.label })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        examples,
        n_classes: data.n_classes,
        language: tag.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub task: ToyTaskSpec,
    pub etas: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub grid: Vec<f64>,
    pub noise_kind: NoiseKind,
    /// Template for every method; method and ε are filled per cell.
    pub base: TrainingConfig,
    pub synonym_k: usize,
    pub synonym_max_dist: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let base = TrainingConfig {
            train_embeddings: false,
            ..TrainingConfig::default()
        };
        Self {
            task: ToyTaskSpec::default(),
            etas: vec![0.0, 0.25, 0.5, 1.0, 2.0],
            methods: Method::ALL.to_vec(),
            seeds: (0..5).collect(),
            grid: DEFAULT_EPSILON_GRID.to_vec(),
            noise_kind: NoiseKind::UniformLinf,
            base,
            synonym_k: 8,
            synonym_max_dist: 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub seed: u64,
    pub method: Method,
    pub epsilon: f64,
    pub eta: f64,
    pub distance: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub seed: u64,
    pub method: Method,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
    /// In-language test accuracy per (seed, method).
    pub in_language: Vec<(u64, Method, f64)>,
}

pub const SWEEP_CSV_HEADER: &str = "seed,method,epsilon,eta,distance,accuracy";

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SWEEP_CSV_HEADER}\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6}\n",
                r.seed, r.method, r.epsilon, r.eta, r.distance, r.accuracy
            ));
        }
        out
    }

    /// Mean accuracy over seeds for `(method, eta)`.
    pub fn mean_accuracy(&self, method: Method, eta: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.eta == eta)
            .map(|r| r.accuracy)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn mean_distance(&self, eta: f64) -> Option<f64> {
        let vals: Vec<f64> = self.rows.iter().filter(|r| r.eta == eta).map(|r| r.distance).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

pub fn language_tag(eta_index: usize) -> String {
    format!("eta{eta_index}")
}

/// The `k`-th synthetic language of a sweep over the task built from `seed`.
pub fn sweep_language(
    source: &EmbeddingSpace,
    seed: u64,
    k: usize,
    eta: f64,
    noise_kind: NoiseKind,
) -> Result<(EmbeddingSpace, AlignedPairs)> {
    derive_language(
        source,
        &SyntheticLanguageSpec {
            noise_kind,
            eta,
            seed: derive_seed(seed, Stream::Language, &[k as u64]),
            tag: language_tag(k),
        },
    )
}

struct SeedOutcome {
    rows: Vec<SweepRow>,
    failures: Vec<SweepFailure>,
    in_language: Vec<(u64, Method, f64)>,
}

fn fit_method(
    cfg: &SweepConfig,
    task: &ToyTask,
    syn: &SynonymSet,
    method: Method,
    seed: u64,
) -> Result<(f64, ModelParams)> {
    let mut base = cfg.base.clone().with_method(method);
    base.seed = seed;
    if method.uses_epsilon() {
        let found = grid_search(&task.train, &task.dev, &base, &cfg.grid, &task.space, Some(syn))?;
        Ok((found.best_epsilon, found.best_params))
    } else {
        // ε is unused, so every grid cell would train the same model
        Ok((0.0, train(&task.train, &base, &task.space, Some(syn))?))
    }
}

fn run_seed(cfg: &SweepConfig, seed: u64) -> Result<SeedOutcome> {
    let task = make_toy_task(&ToyTaskSpec {
        seed,
        ..cfg.task.clone()
    })?;
    let syn = build_synonyms_knn(&task.space, cfg.synonym_k, cfg.synonym_max_dist)?;

    let mut languages = Vec::with_capacity(cfg.etas.len());
    for (k, &eta) in cfg.etas.iter().enumerate() {
        let tag = language_tag(k);
        let (space, pairs) = sweep_language(&task.space, seed, k, eta, cfg.noise_kind)?;
        let distance = language_distance(&pairs, &task.space.emb, &space.emb)?;
        let test = translate_corpus(&task.test, &task.space.vocab, &space.vocab, &tag)?;
        languages.push((eta, distance, space, test));
    }

    let mut out = SeedOutcome {
        rows: Vec::new(),
        failures: Vec::new(),
        in_language: Vec::new(),
    };
    for &method in &cfg.methods {
        let (epsilon, params) = match fit_method(cfg, &task, &syn, method, seed) {
            Ok(v) => v,
            Err(e) => {
                out.failures.push(SweepFailure {
                    seed,
                    method,
                    message: e.to_string(),
                });
                continue;
            }
        };
        out.in_language.push((seed, method, accuracy(&params, &task.test)?));
        for (eta, distance, space, test) in &languages {
            let acc = zero_shot_eval(&params, test, space, InferenceMode::Plain)?;
            out.rows.push(SweepRow {
                seed,
                method,
                epsilon,
                eta: *eta,
                distance: *distance,
                accuracy: acc,
            });
        }
    }
    Ok(out)
}

/// For every seed: build the toy task, train each method (grid-searching ε
/// on the dev split where the method has one), and evaluate zero-shot on one
/// synthetic language per η. Seeds run in parallel; rows come back in
/// (seed, method, η) order.
pub fn noise_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.etas.is_empty() || cfg.methods.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("sweep needs etas, methods and seeds".into()));
    }
    let outcomes = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut report = SweepReport::default();
    for o in outcomes {
        report.rows.extend(o.rows);
        report.failures.extend(o.failures);
        report.in_language.extend(o.in_language);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(seed: u64) -> ToyTaskSpec {
        ToyTaskSpec {
            vocab_size: 128,
            examples_per_class: 40,
            seed,
            ..ToyTaskSpec::default()
        }
    }

    #[test]
    fn prototype_rule_solves_every_split() {
        for seed in 0..4 {
            let task = make_toy_task(&small_spec(seed)).unwrap();
            for split in [&task.train, &task.dev, &task.test] {
                for ex in &split.examples {
                    assert_eq!(prototype_rule(&ex.tokens, &task.space.emb, &task.prototypes), ex.label);
                    let (_, m) = prototype_margin(&mean_pool(&ex.tokens, &task.space.emb), &task.prototypes);
                    assert!(m >= 0.05);
                }
            }
            for (i, a) in task.prototypes.iter().enumerate() {
                for b in &task.prototypes[i + 1..] {
                    assert!(euclidean(a, b) >= 0.2);
                }
            }
        }
    }

    #[test]
    fn splits_are_disjoint_and_sized() {
        let task = make_toy_task(&small_spec(1)).unwrap();
        assert_eq!((task.train.len(), task.dev.len(), task.test.len()), (96, 32, 32));
        let mut keys = HashSet::new();
        for ex in task.train.examples.iter().chain(&task.dev.examples).chain(&task.test.examples) {
            let mut k = ex.tokens.clone();
            k.sort_unstable();
            assert!(keys.insert(k));
        }
    }

    #[test]
    fn generation_is_deterministic_and_seeded() {
        let a = make_toy_task(&small_spec(5)).unwrap();
        let b = make_toy_task(&small_spec(5)).unwrap();
        let c = make_toy_task(&small_spec(6)).unwrap();
        assert_eq!(a.space, b.space);
        assert_eq!(a.train, b.train);
        assert_ne!(a.space, c.space);
    }

    #[test]
    fn impossible_margin_is_a_generation_error() {
        let spec = ToyTaskSpec {
            margin: 10.0,
            ..small_spec(0)
        };
        assert!(matches!(make_toy_task(&spec), Err(Error::Generation(_))));
    }

    fn lang(eta: f64, kind: NoiseKind) -> SyntheticLanguageSpec {
        SyntheticLanguageSpec {
            noise_kind: kind,
            eta,
            seed: 3,
            tag: "x".into(),
        }
    }

    #[test]
    fn zero_noise_language_is_an_exact_copy() {
        let task = make_toy_task(&small_spec(2)).unwrap();
        let (space, pairs) = derive_language(&task.space, &lang(0.0, NoiseKind::UniformLinf)).unwrap();
        assert_eq!(space.emb, task.space.emb);
        assert_eq!(space.vocab.token(0), Some("w0@x"));
        assert_eq!(language_distance(&pairs, &task.space.emb, &space.emb).unwrap(), 0.0);

        let cfg = TrainingConfig {
            train_embeddings: false,
            epochs: 3,
            ..TrainingConfig::default()
        };
        let params = train(&task.train, &cfg, &task.space, None).unwrap();
        let test = translate_corpus(&task.test, &task.space.vocab, &space.vocab, "x").unwrap();
        assert_eq!(test.language, "x");
        assert_eq!(
            zero_shot_eval(&params, &test, &space, InferenceMode::Plain).unwrap(),
            accuracy(&params, &task.test).unwrap()
        );
    }

    #[test]
    fn uniform_noise_is_bounded_and_specials_are_kept() {
        let task = make_toy_task(&small_spec(2)).unwrap();
        let (space, pairs) = derive_language(&task.space, &lang(0.3, NoiseKind::UniformLinf)).unwrap();
        for id in task.space.vocab.regular_ids() {
            for (a, b) in task.space.emb.row(id).iter().zip(space.emb.row(id)) {
                assert!((a - b).abs() <= 0.3);
            }
        }
        let pad = task.space.vocab.pad_id();
        assert_eq!(space.vocab.token(pad), task.space.vocab.token(pad));
        assert_eq!(space.emb.row(pad), task.space.emb.row(pad));
        assert_eq!(pairs.pairs.len(), 128);
        assert!(derive_language(&task.space, &lang(-1.0, NoiseKind::Gaussian)).is_err());
    }

    #[test]
    fn distance_of_uniform_noise_matches_monte_carlo() {
        let (n, d, eta) = (10_000, 16, 0.2);
        let rows = (0..n).map(|i| (format!("v{i}"), vec![0.0; d])).collect();
        let source = EmbeddingSpace::from_pairs(rows).unwrap();
        let (target, pairs) = derive_language(&source, &lang(eta, NoiseKind::UniformLinf)).unwrap();
        let measured = language_distance(&pairs, &source.emb, &target.emb).unwrap();

        // independent draw of E‖u‖₂ for u uniform on [−η, η]^d
        let mut rng = stream(99, Stream::Example, &[]);
        let mc = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-eta..=eta).powi(2)).sum::<f64>().sqrt())
            .sum::<f64>()
            / n as f64;
        assert!((measured / mc - 1.0).abs() < 0.05, "{measured} vs {mc}");
        // and the √(d/3) scaling
        assert!((measured / (eta * (d as f64 / 3.0).sqrt()) - 1.0).abs() < 0.05);
    }

    #[test]
    fn translation_round_trips() {
        let task = make_toy_task(&small_spec(3)).unwrap();
        let (space, _) = derive_language(&task.space, &lang(0.1, NoiseKind::Gaussian)).unwrap();
        let there = translate_corpus(&task.dev, &task.space.vocab, &space.vocab, "x").unwrap();
        for (a, b) in there.examples.iter().zip(&task.dev.examples) {
            for (&t, &s) in a.tokens.iter().zip(&b.tokens) {
                assert_eq!(space.vocab.token(t).unwrap(), format!("{}@x", task.space.vocab.token(s).unwrap()));
            }
        }
        assert!(translate_corpus(&task.dev, &task.space.vocab, &space.vocab, "y").is_err());
    }

    #[test]
    fn sweep_rows_cover_the_grid() {
        let cfg = SweepConfig {
            task: small_spec(0),
            etas: vec![0.0, 0.5],
            seeds: vec![0, 1],
            grid: vec![0.01],
            base: TrainingConfig {
                train_embeddings: false,
                epochs: 2,
                ..TrainingConfig::default()
            },
            ..SweepConfig::default()
        };
        let report = noise_sweep(&cfg).unwrap();
        assert!(report.failures.is_empty());
        assert_eq!(report.rows.len(), 2 * 4 * 2);
        for &(seed, method, acc) in &report.in_language {
            let row = report
                .rows
                .iter()
                .find(|r| r.seed == seed && r.method == method && r.eta == 0.0)
                .unwrap();
            assert_eq!(row.accuracy, acc);
            assert_eq!(row.distance, 0.0);
        }
        assert_eq!(noise_sweep(&cfg).unwrap().to_csv(), report.to_csv());
        assert!(report.to_csv().starts_with("seed,method,epsilon,eta,distance,accuracy\n0,normal,0,0,"));
    }
}
