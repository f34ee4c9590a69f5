//! Training regimes: normal empirical risk minimisation, min-max adversarial
//! training, and randomized smoothing through either uniform L∞ noise or
//! synonym-substitution augmentation. Also the ε grid search.
//!
//! All randomness is drawn from streams keyed by `(seed, epoch, batch,
//! example)`, so a run is a pure function of its inputs and the ε = 0 and
//! m = 0 degenerate runs reproduce normal training bit for bit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::classifier::{loss, Gradients, ModelParams};
use crate::dataset::{Dataset, Example};
use crate::embedding::{EmbeddedSequence, EmbeddingSpace, SynonymSet, DEFAULT_MAX_LEN};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{stream, Stream};

/// ε values searched for the robust-region size.
pub const DEFAULT_EPSILON_GRID: [f64; 4] = [0.001, 0.01, 0.1, 1.0];
pub const DEFAULT_AUGMENT_M: usize = 10;
pub const DEFAULT_AUGMENT_P: f64 = 0.1;
pub const DEFAULT_INNER_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    None,
    Adversarial,
    UniformBall,
}

/// A perturbation family: per-token L∞ radius `epsilon`, and the number of
/// ascent steps for the adversarial kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub epsilon: f64,
    pub steps: usize,
}

impl PerturbationSpec {
    pub fn none() -> Self {
        Self {
            kind: PerturbationKind::None,
            epsilon: 0.0,
            steps: 1,
        }
    }

    pub fn adversarial(epsilon: f64, steps: usize) -> Self {
        Self {
            kind: PerturbationKind::Adversarial,
            epsilon,
            steps,
        }
    }

    pub fn uniform_ball(epsilon: f64) -> Self {
        Self {
            kind: PerturbationKind::UniformBall,
            epsilon,
            steps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!("epsilon must be ≥ 0, got {}", self.epsilon)));
        }
        if self.kind == PerturbationKind::Adversarial && self.steps == 0 {
            return Err(Error::InvalidArgument("adversarial steps must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Normal,
    Adv,
    RsRandom,
    RsAugment,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Normal, Method::Adv, Method::RsRandom, Method::RsAugment];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Normal => "normal",
            Method::Adv => "adv",
            Method::RsRandom => "rs_random",
            Method::RsAugment => "rs_augment",
        }
    }

    /// Whether the method has an ε to search over.
    pub fn uses_epsilon(self) -> bool {
        matches!(self, Method::Adv | Method::RsRandom)
    }

    fn perturbation_kind(self) -> PerturbationKind {
        match self {
            Method::Adv => PerturbationKind::Adversarial,
            Method::RsRandom => PerturbationKind::UniformBall,
            Method::Normal | Method::RsAugment => PerturbationKind::None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "normal" => Ok(Method::Normal),
            "adv" | "adversarial" => Ok(Method::Adv),
            "rs_random" => Ok(Method::RsRandom),
            "rs_augment" => Ok(Method::RsAugment),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub method: Method,
    pub perturb: PerturbationSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub augment_m: usize,
    pub augment_p: f64,
    pub hidden_dims: Vec<usize>,
    pub train_embeddings: bool,
    pub max_len: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            method: Method::Normal,
            perturb: PerturbationSpec::none(),
            epochs: 20,
            batch_size: 32,
            learning_rate: 0.1,
            seed: 0,
            augment_m: DEFAULT_AUGMENT_M,
            augment_p: DEFAULT_AUGMENT_P,
            hidden_dims: vec![16],
            train_embeddings: true,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

impl TrainingConfig {
    /// Defaults for `method` with its perturbation kind set; ε starts at 0.1.
    pub fn new(method: Method) -> Self {
        Self::default().with_method(method)
    }

    /// Switches method, keeping ε and step count.
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        let eps = if self.perturb.kind == PerturbationKind::None && self.perturb.epsilon == 0.0 {
            0.1
        } else {
            self.perturb.epsilon
        };
        let steps = if self.perturb.kind == PerturbationKind::Adversarial {
            self.perturb.steps
        } else {
            DEFAULT_INNER_STEPS
        };
        self.perturb = PerturbationSpec {
            kind: method.perturbation_kind(),
            epsilon: eps,
            steps: steps.max(1),
        };
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.perturb.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.perturb.validate()?;
        if self.perturb.kind != self.method.perturbation_kind() {
            return Err(Error::InvalidArgument(format!(
                "perturbation {:?} does not fit method {}",
                self.perturb.kind, self.method
            )));
        }
        if !(0.0..=1.0).contains(&self.augment_p) {
            return Err(Error::InvalidArgument("augment_p must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be ≥ 1".into()));
        }
        if self.max_len == 0 {
            return Err(Error::InvalidArgument("max_len must be ≥ 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        Ok(())
    }

    /// Applies flat `key = value` lines (`#` comments allowed). Keys match
    /// the field names; the perturbation is flattened to `epsilon`/`steps`.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        let path = "config";
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected key = value"))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidArgument(format!("invalid value {v:?} for {key}")))
        }
        match key {
            "method" => *self = self.clone().with_method(value.parse()?),
            "epsilon" => self.perturb.epsilon = num(key, value)?,
            "steps" => self.perturb.steps = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "augment_m" => self.augment_m = num(key, value)?,
            "augment_p" => self.augment_p = num(key, value)?,
            "train_embeddings" => self.train_embeddings = num(key, value)?,
            "max_len" => self.max_len = num(key, value)?,
            "hidden_dims" => {
                self.hidden_dims = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| num(key, s))
                    .collect::<Result<_>>()?
            }
            _ => return Err(Error::InvalidArgument(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Inverse of [`apply_config_text`](Self::apply_config_text).
    pub fn to_config_text(&self) -> String {
        let hidden: Vec<String> = self.hidden_dims.iter().map(usize::to_string).collect();
        format!(
            "method = {}\nepsilon = {}\nsteps = {}\nepochs = {}\nbatch_size = {}\nlearning_rate = {}\nseed = {}\naugment_m = {}\naugment_p = {}\nhidden_dims = {}\ntrain_embeddings = {}\nmax_len = {}\n",
            self.method,
            self.perturb.epsilon,
            self.perturb.steps,
            self.epochs,
            self.batch_size,
            self.learning_rate,
            self.seed,
            self.augment_m,
            self.augment_p,
            hidden.join(","),
            self.train_embeddings,
            self.max_len,
        )
    }
}

/// Entrywise clamp to `[−ε, ε]`, i.e. the Euclidean projection onto the
/// per-token L∞ ball.
pub fn project_linf(delta: &Matrix, epsilon: f64) -> Matrix {
    let mut out = delta.clone();
    for v in out.as_mut_slice() {
        *v = v.clamp(-epsilon, epsilon);
    }
    out
}

/// Independent uniform entries on `[−ε, ε]`.
pub fn sample_uniform_linf(n: usize, d: usize, epsilon: f64, rng: &mut impl Rng) -> Matrix {
    let mut m = Matrix::zeros(n, d);
    if epsilon > 0.0 {
        for v in m.as_mut_slice() {
            *v = rng.random_range(-epsilon..=epsilon);
        }
    }
    m
}

fn zero_padding_rows(delta: &mut Matrix, mask: &[bool]) {
    for (i, &real) in mask.iter().enumerate() {
        if !real {
            delta.row_mut(i).fill(0.0);
        }
    }
}

/// Uniform ball noise with padding rows zeroed.
pub fn sample_masked_uniform(input: &EmbeddedSequence, epsilon: f64, rng: &mut impl Rng) -> Matrix {
    let mut delta = sample_uniform_linf(input.len(), input.dim(), epsilon, rng);
    zero_padding_rows(&mut delta, &input.mask);
    delta
}

/// Approximates `argmax_{‖δ_i‖∞ ≤ ε} loss(f(input + δ), label)` by projected
/// sign-gradient ascent from a random start, returning the best iterate.
pub fn inner_max_perturbation(
    params: &ModelParams,
    input: &EmbeddedSequence,
    label: usize,
    spec: &PerturbationSpec,
    rng: &mut impl Rng,
) -> Result<Matrix> {
    if spec.kind != PerturbationKind::Adversarial {
        return Err(Error::InvalidArgument("inner maximisation needs an adversarial spec".into()));
    }
    spec.validate()?;
    if spec.epsilon == 0.0 {
        return Ok(Matrix::zeros(input.len(), input.dim()));
    }
    let start = sample_masked_uniform(input, spec.epsilon, rng);
    inner_max_from(params, input, label, spec, start)
}

/// [`inner_max_perturbation`] from an explicit starting point (tests pass a
/// zero start). The start is projected and its padding rows cleared.
pub fn inner_max_from(
    params: &ModelParams,
    input: &EmbeddedSequence,
    label: usize,
    spec: &PerturbationSpec,
    start: Matrix,
) -> Result<Matrix> {
    let eps = spec.epsilon;
    let step = eps / spec.steps.max(1) as f64;
    let mut delta = project_linf(&start, eps);
    zero_padding_rows(&mut delta, &input.mask);

    let (logits, mut trace) = params.forward(&input.perturbed(&delta))?;
    let mut best_loss = loss(&logits, label);
    let mut best = delta.clone();
    for _ in 0..spec.steps {
        let grad = params.backward(&trace, label).input;
        for (d, g) in delta.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            // sign(0) = 0 keeps padding rows (zero gradient) untouched
            let s = if *g > 0.0 {
                1.0
            } else if *g < 0.0 {
                -1.0
            } else {
                0.0
            };
            *d = (*d + step * s).clamp(-eps, eps);
        }
        let (logits, next) = params.forward(&input.perturbed(&delta))?;
        trace = next;
        let l = loss(&logits, label);
        if l > best_loss {
            best_loss = l;
            best.clone_from(&delta);
        }
    }
    Ok(best)
}

fn check_linf(delta: &Matrix, epsilon: f64) {
    assert!(
        delta.max_abs() <= epsilon,
        "perturbation escaped the ε-ball: {} > {epsilon}",
        delta.max_abs()
    );
}

/// Per-example perturbation rule used inside the training loop.
#[derive(Debug, Clone, Copy)]
enum Perturbation {
    None,
    Adversarial(PerturbationSpec),
    Uniform(f64),
}

struct StepOutput {
    grads: Gradients,
}

fn check_data(data: &Dataset, cfg: &TrainingConfig, space: &EmbeddingSpace) -> Result<()> {
    cfg.validate()?;
    data.validate()?;
    if data.n_classes == 0 {
        return Err(Error::InvalidArgument("dataset declares zero classes".into()));
    }
    for ex in &data.examples {
        if let Some(&bad) = ex.tokens.iter().find(|&&t| t >= space.vocab.len()) {
            return Err(Error::IndexOutOfRange {
                id: bad,
                size: space.vocab.len(),
            });
        }
    }
    Ok(())
}

fn example_step(
    params: &ModelParams,
    ex: &Example,
    perturb: Perturbation,
    rng_coords: [u64; 3],
    seed: u64,
) -> Result<(f64, StepOutput)> {
    let input = params.encode(&ex.tokens)?;
    let mut rng = stream(seed, Stream::Example, &rng_coords);
    let delta = match perturb {
        Perturbation::None => None,
        Perturbation::Adversarial(spec) => {
            let d = inner_max_perturbation(params, &input, ex.label, &spec, &mut rng)?;
            check_linf(&d, spec.epsilon);
            Some(d)
        }
        Perturbation::Uniform(eps) => {
            let d = sample_masked_uniform(&input, eps, &mut rng);
            check_linf(&d, eps);
            Some(d)
        }
    };
    let input = match &delta {
        Some(d) => input.perturbed(d),
        None => input,
    };
    let (logits, trace) = params.forward(&input)?;
    let l = loss(&logits, ex.label);
    Ok((
        l,
        StepOutput {
            grads: params.backward(&trace, ex.label),
        },
    ))
}

fn run_training(
    data: &Dataset,
    cfg: &TrainingConfig,
    space: &EmbeddingSpace,
    perturb: Perturbation,
) -> Result<ModelParams> {
    check_data(data, cfg, space)?;
    let mut init_rng = stream(cfg.seed, Stream::Init, &[]);
    let mut params = ModelParams::init(
        space,
        &cfg.hidden_dims,
        data.n_classes,
        cfg.train_embeddings,
        &mut init_rng,
    );
    params.max_len = cfg.max_len;

    let n = data.len();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffle_rng = stream(cfg.seed, Stream::Shuffle, &[epoch as u64]);
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut shuffle_rng);

        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let outputs: Vec<Result<(f64, StepOutput)>> = chunk
                .par_iter()
                .enumerate()
                .map(|(j, &idx)| {
                    example_step(
                        &params,
                        &data.examples[idx],
                        perturb,
                        [epoch as u64, batch as u64, j as u64],
                        cfg.seed,
                    )
                })
                .collect();

            let mut total: Option<Gradients> = None;
            let mut emb_grad: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for (out, &idx) in outputs.into_iter().zip(chunk) {
                let (l, out) = out?;
                if !l.is_finite() {
                    return Err(Error::Divergence { step });
                }
                if params.train_embeddings {
                    let ex = &data.examples[idx];
                    for (pos, &tok) in ex.tokens.iter().take(params.max_len).enumerate() {
                        if tok == params.vocab.pad_id() {
                            continue;
                        }
                        let g = emb_grad.entry(tok).or_insert_with(|| vec![0.0; params.dim()]);
                        for (a, b) in g.iter_mut().zip(out.grads.input.row(pos)) {
                            *a += b;
                        }
                    }
                }
                match &mut total {
                    None => total = Some(out.grads),
                    Some(t) => {
                        for (a, b) in t.params_mut().zip(out.grads.params()) {
                            *a += b;
                        }
                    }
                }
            }

            let scale = cfg.learning_rate / chunk.len() as f64;
            if let Some(total) = total {
                for (p, g) in params.params_mut().zip(total.params()) {
                    *p -= scale * g;
                }
            }
            for (tok, g) in emb_grad {
                for (p, g) in params.emb.row_mut(tok).iter_mut().zip(g) {
                    *p -= scale * g;
                }
            }
            if !params.is_finite() {
                return Err(Error::Divergence { step });
            }
            step += 1;
        }
    }
    Ok(params)
}

fn require_method(cfg: &TrainingConfig, method: Method) -> Result<()> {
    if cfg.method != method {
        return Err(Error::InvalidArgument(format!(
            "config method is {}, expected {method}",
            cfg.method
        )));
    }
    Ok(())
}

/// Plain minibatch SGD on cross-entropy.
pub fn train_normal(data: &Dataset, cfg: &TrainingConfig, space: &EmbeddingSpace) -> Result<ModelParams> {
    require_method(cfg, Method::Normal)?;
    run_training(data, cfg, space, Perturbation::None)
}

/// Min-max training: each example is replaced by its inner-max perturbation
/// before the parameter gradient is taken.
pub fn train_adversarial(data: &Dataset, cfg: &TrainingConfig, space: &EmbeddingSpace) -> Result<ModelParams> {
    require_method(cfg, Method::Adv)?;
    run_training(data, cfg, space, Perturbation::Adversarial(cfg.perturb))
}

/// Randomized smoothing by fresh uniform L∞ noise on every example.
pub fn train_rs_random(data: &Dataset, cfg: &TrainingConfig, space: &EmbeddingSpace) -> Result<ModelParams> {
    require_method(cfg, Method::RsRandom)?;
    run_training(data, cfg, space, Perturbation::Uniform(cfg.perturb.epsilon))
}

/// Randomized smoothing by static synonym-substitution augmentation.
pub fn train_rs_augment(
    data: &Dataset,
    cfg: &TrainingConfig,
    space: &EmbeddingSpace,
    syn: &SynonymSet,
) -> Result<ModelParams> {
    require_method(cfg, Method::RsAugment)?;
    let mut rng = stream(cfg.seed, Stream::Augment, &[]);
    let augmented = augment_dataset(data, syn, cfg.augment_m, cfg.augment_p, &mut rng)?;
    run_training(&augmented, cfg, space, Perturbation::None)
}

/// Dispatches on `cfg.method`. `syn` is required for `rs_augment`.
pub fn train(
    data: &Dataset,
    cfg: &TrainingConfig,
    space: &EmbeddingSpace,
    syn: Option<&SynonymSet>,
) -> Result<ModelParams> {
    match cfg.method {
        Method::Normal => train_normal(data, cfg, space),
        Method::Adv => train_adversarial(data, cfg, space),
        Method::RsRandom => train_rs_random(data, cfg, space),
        Method::RsAugment => {
            let syn = syn.ok_or_else(|| Error::InvalidArgument("rs_augment needs a synonym set".into()))?;
            train_rs_augment(data, cfg, space, syn)
        }
    }
}

/// One random substitution pattern: every position with synonyms is
/// independently replaced, with probability `p`, by a uniform choice.
pub fn substitute(tokens: &[usize], syn: &SynonymSet, p: f64, rng: &mut impl Rng) -> Vec<usize> {
    tokens
        .iter()
        .map(|&t| {
            let options = syn.get(t);
            if !options.is_empty() && rng.random::<f64>() < p {
                options[rng.random_range(0..options.len())]
            } else {
                t
            }
        })
        .collect()
}

/// Each original example followed by `m` substituted variants.
pub fn augment_dataset(
    data: &Dataset,
    syn: &SynonymSet,
    m: usize,
    p: f64,
    rng: &mut impl Rng,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument("replacement probability must lie in [0, 1]".into()));
    }
    let mut examples = Vec::with_capacity(data.len() * (m + 1));
    for ex in &data.examples {
        examples.push(ex.clone());
        for _ in 0..m {
            examples.push(Example {
                tokens: substitute(&ex.tokens, syn, p, rng),
                label: ex.label,
            });
        }
    }
    Ok(Dataset {
        examples,
        n_classes: data.n_classes,
        language: data.language.clone(),
    })
}

/// Accuracy of `params` on `data` using the model's own embedding table.
pub fn accuracy(params: &ModelParams, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let correct = data
        .examples
        .par_iter()
        .map(|ex| Ok(usize::from(params.predict(&params.encode(&ex.tokens)?)? == ex.label)))
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub epsilon: f64,
    pub dev_accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    pub best_epsilon: f64,
    pub best_params: ModelParams,
    pub table: Vec<GridCell>,
}

/// Trains once per ε (same seed) and keeps the best dev accuracy; ties go
/// to the smaller ε. Failed cells are recorded and skipped.
pub fn grid_search(
    train_data: &Dataset,
    dev: &Dataset,
    cfg_base: &TrainingConfig,
    grid: &[f64],
    space: &EmbeddingSpace,
    syn: Option<&SynonymSet>,
) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty ε grid".into()));
    }
    let mut table = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64, ModelParams)> = None;
    for &eps in grid {
        let cfg = cfg_base.clone().with_epsilon(eps);
        let outcome = train(train_data, &cfg, space, syn).and_then(|p| accuracy(&p, dev).map(|a| (a, p)));
        match outcome {
            Ok((acc, params)) => {
                table.push(GridCell {
                    epsilon: eps,
                    dev_accuracy: Some(acc),
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some((b_acc, b_eps, _)) => acc > *b_acc || (acc == *b_acc && eps < *b_eps),
                };
                if better {
                    best = Some((acc, eps, params));
                }
            }
            Err(e) => table.push(GridCell {
                epsilon: eps,
                dev_accuracy: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let (_, best_epsilon, best_params) = best.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "every grid cell failed: {}",
            table.iter().filter_map(|c| c.error.clone()).collect::<Vec<_>>().join("; ")
        ))
    })?;
    Ok(GridSearch {
        best_epsilon,
        best_params,
        table,
    })
}
