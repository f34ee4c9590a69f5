//! The `robustxfer` command line. Every command reads the library's plain
//! text formats, writes its outputs atomically next to a JSON run manifest,
//! and maps failures onto stable exit codes.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{format_model, parse_model, ModelParams};
use crate::dataset::{format_dataset, parse_dataset, Dataset};
use crate::embedding::{
    build_synonyms_knn, format_embeddings, format_synonyms, parse_synonyms, read_embeddings, EmbeddingSpace,
    SynonymSet, Vocabulary,
};
use crate::error::Error;
use crate::report::{aggregate, parse_sweep_csv};
use crate::rng::{stream, Stream};
use crate::smoothing::DEFAULT_SMOOTHING_SAMPLES;
use crate::synthetic::{
    language_tag, make_toy_task, noise_sweep, sweep_language, translate_corpus, NoiseKind, SweepConfig, ToyTaskSpec,
    SOURCE_LANGUAGE, SWEEP_CSV_HEADER,
};
use crate::training::{
    accuracy, augment_dataset, grid_search, train, Method, PerturbationSpec, TrainingConfig, DEFAULT_EPSILON_GRID,
};
use crate::transfer::{format_alignments, language_distance, parse_alignments, zero_shot_eval, InferenceMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_DATA: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "robustxfer",
    version,
    about = "Robust training and zero-shot cross-lingual evaluation over static embeddings",
    after_help = "Flag values take precedence over values read from --config.\n\
                  Exit codes: 0 ok, 2 usage or missing input, 3 training diverged, 4 data mismatch."
)]
pub struct Cli {
    /// More log output (-v info, -vv debug); warnings are always shown
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a classifier and write its checkpoint
    Train(TrainArgs),
    /// Accuracy of a checkpoint on a dataset, optionally in another language's embeddings
    Eval(EvalArgs),
    /// Grid-search ε on a dev set and write the dev table
    Sweep(SweepArgs),
    /// Write a synonym-augmented copy of a dataset
    Augment(AugmentArgs),
    /// Mean Euclidean distance over aligned word pairs
    Distance(DistanceArgs),
    /// Generate a toy task with synthetic target languages, optionally running the noise sweep
    Synth(SynthArgs),
    /// Aggregate sweep CSVs into trend.csv and trend.svg
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Training config file of `key = value` lines
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random choice the command makes
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (or directory for synth and report)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Overwrite existing outputs
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct TrainFlags {
    /// normal | adv | rs-random | rs-augment
    #[arg(long)]
    method: Option<Method>,
    /// Radius of the per-token L∞ ball
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sign-gradient steps of the inner maximisation
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Hidden layer widths, comma separated; empty for a linear model
    #[arg(long, value_name = "LIST")]
    hidden: Option<String>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Keep the embedding table fixed during training
    #[arg(long)]
    freeze_embeddings: bool,
    /// Augmented variants per example
    #[arg(long = "m")]
    augment_m: Option<usize>,
    /// Per-position replacement probability
    #[arg(long = "p")]
    augment_p: Option<f64>,
    #[command(flatten)]
    synonyms: SynonymFlags,
}

#[derive(Debug, Args)]
struct SynonymFlags {
    /// Synonym file (`token<TAB>syn,syn,…`); without it the k nearest neighbours are used
    #[arg(long, value_name = "FILE")]
    synonyms: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    synonym_k: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Training data (`label<TAB>tokens`)
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Embedding file (`V d` header, then `token v1 … vd`)
    #[arg(long, value_name = "FILE")]
    embeddings: PathBuf,
    #[arg(long)]
    n_classes: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Inference {
    Plain,
    Smoothed,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Target-language embeddings; defaults to the checkpoint's own table
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Inference::Plain)]
    inference: Inference,
    /// Votes per example in smoothed inference
    #[arg(long, default_value_t = DEFAULT_SMOOTHING_SAMPLES)]
    samples: usize,
    /// Uniform-ball radius for smoothed inference
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_name = "FILE")]
    train: PathBuf,
    #[arg(long, value_name = "FILE")]
    dev: PathBuf,
    #[arg(long, value_name = "FILE")]
    embeddings: PathBuf,
    /// Comma-separated positive ε values [default: 0.001,0.01,0.1,1]
    #[arg(long, value_name = "LIST")]
    grid: Option<String>,
    #[arg(long)]
    n_classes: Option<usize>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    #[arg(long, value_name = "FILE")]
    embeddings: PathBuf,
    #[arg(long = "m")]
    augment_m: Option<usize>,
    #[arg(long = "p")]
    augment_p: Option<f64>,
    #[command(flatten)]
    synonyms: SynonymFlags,
}

#[derive(Debug, Args)]
struct DistanceArgs {
    #[command(flatten)]
    common: Common,
    /// Aligned pairs (`src_token<TAB>tgt_token`)
    #[arg(long, value_name = "FILE")]
    alignments: PathBuf,
    #[arg(long, value_name = "FILE")]
    source: PathBuf,
    #[arg(long, value_name = "FILE")]
    target: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Noise {
    Uniform,
    Gaussian,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 512)]
    vocab_size: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 200)]
    examples_per_class: usize,
    #[arg(long, default_value_t = 8)]
    tokens: usize,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    prototype_scale: Option<f64>,
    /// Noise scales of the target languages [default: 0,0.25,0.5,1,2]
    #[arg(long, value_name = "LIST")]
    etas: Option<String>,
    #[arg(long, value_enum, default_value_t = Noise::Uniform)]
    noise: Noise,
    /// Also train every method on seeds seed..seed+N and write sweep.csv
    #[arg(long)]
    sweep: bool,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Methods for --sweep, comma separated [default: all]
    #[arg(long, value_name = "LIST")]
    methods: Option<String>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// A sweep CSV or a directory of them
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, default_value = "normal")]
    baseline: Method,
}

/// Reproducibility record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) => match e {
                Error::Divergence { .. } => EXIT_DIVERGENCE,
                Error::Io { .. } | Error::InvalidArgument(_) | Error::Generation(_) | Error::TooManyVariants { .. } => {
                    EXIT_USAGE
                }
                _ => EXIT_DATA,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => e.fmt(f),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn atomic_write(path: &Path, bytes: &[u8]) -> crate::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Book-keeping for one command: hashed inputs, claimed outputs, manifest.
struct Run {
    command: &'static str,
    started: Instant,
    force: bool,
    seed: Option<u64>,
    config: BTreeMap<String, String>,
    inputs: Vec<InputDigest>,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn new(command: &'static str, common: &Common) -> Self {
        Self {
            command,
            started: Instant::now(),
            force: common.force,
            seed: common.seed,
            config: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn read(&mut self, path: &Path) -> CliResult<String> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        String::from_utf8(bytes).map_err(|_| CliError::Lib(Error::parse(path, 1, "file is not UTF-8")))
    }

    fn embeddings(&mut self, path: &Path) -> CliResult<EmbeddingSpace> {
        let text = self.read(path)?;
        let (vocab, emb) = read_embeddings(text.as_bytes(), path)?;
        Ok(EmbeddingSpace::new(vocab, emb)?)
    }

    fn dataset(&mut self, path: &Path, vocab: &Vocabulary, n_classes: Option<usize>, lang: &str) -> CliResult<Dataset> {
        let text = self.read(path)?;
        Ok(parse_dataset(&text, vocab, n_classes, lang, path)?)
    }

    fn synonyms(&mut self, flags: &SynonymFlags, space: &EmbeddingSpace) -> CliResult<SynonymSet> {
        match &flags.synonyms {
            Some(path) => {
                let text = self.read(path)?;
                Ok(parse_synonyms(&text, &space.vocab, path)?.0)
            }
            None => Ok(build_synonyms_knn(space, flags.synonym_k, f64::INFINITY)?),
        }
    }

    /// Refuses to touch an existing path unless `--force` was given.
    fn claim(&self, path: &Path) -> CliResult<()> {
        if path.exists() && !self.force {
            return Err(usage(format!("{} already exists (pass --force to overwrite)", path.display())));
        }
        Ok(())
    }

    fn write(&mut self, path: &Path, contents: &str) -> CliResult<()> {
        atomic_write(path, contents.as_bytes())?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    fn finish(self, manifest: &Path) -> CliResult<()> {
        let record = RunManifest {
            command: self.command.to_string(),
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_string_pretty(&record).expect("manifest serialises");
        atomic_write(manifest, format!("{json}\n").as_bytes())?;
        Ok(())
    }
}

/// Manifest path for a single-file output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn config_map(cfg: &TrainingConfig) -> BTreeMap<String, String> {
    cfg.to_config_text()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| usage(format!("--{flag}: cannot parse {s:?}"))))
        .collect()
}

/// Defaults, then `--config`, then flags.
fn resolve_config(run: &mut Run, common: &Common, flags: &TrainFlags, default_method: Method) -> CliResult<TrainingConfig> {
    let mut cfg = TrainingConfig::new(default_method);
    if let Some(path) = &common.config {
        let text = run.read(path)?;
        cfg.apply_config_text(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    if let Some(m) = flags.method {
        cfg = cfg.with_method(m);
    }
    if let Some(v) = flags.epsilon {
        cfg.perturb.epsilon = v;
    }
    if let Some(v) = flags.steps {
        cfg.perturb.steps = v;
    }
    if let Some(v) = flags.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = flags.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.lr {
        cfg.learning_rate = v;
    }
    if let Some(h) = &flags.hidden {
        cfg.hidden_dims = parse_list("hidden", h)?;
    }
    if let Some(v) = flags.max_len {
        cfg.max_len = v;
    }
    if flags.freeze_embeddings {
        cfg.train_embeddings = false;
    }
    if let Some(v) = flags.augment_m {
        cfg.augment_m = v;
    }
    if let Some(v) = flags.augment_p {
        cfg.augment_p = v;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    run.seed = Some(cfg.seed);
    run.config = config_map(&cfg);
    Ok(cfg)
}

fn cmd_train(args: TrainArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut run = Run::new("train", &args.common);
    let cfg = resolve_config(&mut run, &args.common, &args.train, Method::Normal)?;
    let out = args.common.out.clone().unwrap_or_else(|| PathBuf::from("model.txt"));
    let manifest = manifest_path(&out);
    run.claim(&out)?;
    run.claim(&manifest)?;

    let space = run.embeddings(&args.embeddings)?;
    let data = run.dataset(&args.data, &space.vocab, args.n_classes, SOURCE_LANGUAGE)?;
    let syn = match cfg.method {
        Method::RsAugment => Some(run.synonyms(&args.train.synonyms, &space)?),
        _ => None,
    };
    let params = train(&data, &cfg, &space, syn.as_ref())?;
    run.write(&out, &format_model(&params))?;
    writeln!(stdout, "train_accuracy={:.6}", accuracy(&params, &data)?).ok();
    run.finish(&manifest)
}

fn cmd_eval(args: EvalArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut run = Run::new("eval", &args.common);
    if let Some(path) = &args.common.config {
        run.read(path)?;
    }
    if let Some(out) = &args.common.out {
        run.claim(out)?;
        run.claim(&manifest_path(out))?;
    }
    let model_text = run.read(&args.model)?;
    let params: ModelParams = parse_model(&model_text, &args.model)?;
    let target = match &args.embeddings {
        Some(path) => run.embeddings(path)?,
        None => params.space(),
    };
    let data = run.dataset(&args.data, &target.vocab, Some(params.n_classes()), "tgt")?;
    let mode = match args.inference {
        Inference::Plain => InferenceMode::Plain,
        Inference::Smoothed => {
            if args.samples == 0 {
                return Err(usage("--samples must be ≥ 1"));
            }
            if !(args.epsilon >= 0.0) {
                return Err(usage("--epsilon must be ≥ 0"));
            }
            InferenceMode::Smoothed {
                spec: PerturbationSpec::uniform_ball(args.epsilon),
                n_samples: args.samples,
                seed: args.common.seed.unwrap_or(0),
            }
        }
    };
    let acc = zero_shot_eval(&params, &data, &target, mode)?;
    writeln!(stdout, "accuracy={acc:.6}").ok();

    let inference = match args.inference {
        Inference::Plain => "plain",
        Inference::Smoothed => "smoothed",
    };
    run.config = BTreeMap::from([
        ("inference".to_string(), inference.to_string()),
        ("samples".to_string(), args.samples.to_string()),
        ("epsilon".to_string(), args.epsilon.to_string()),
    ]);
    if let Some(out) = &args.common.out {
        let csv = format!(
            "model,data,inference,samples,epsilon,accuracy\n{},{},{inference},{},{},{acc:.6}\n",
            args.model.display(),
            args.data.display(),
            args.samples,
            args.epsilon
        );
        run.write(out, &csv)?;
        run.finish(&manifest_path(out))?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut run = Run::new("sweep", &args.common);
    let cfg = resolve_config(&mut run, &args.common, &args.flags, Method::RsRandom)?;
    let grid: Vec<f64> = match &args.grid {
        Some(g) => parse_list("grid", g)?,
        None => DEFAULT_EPSILON_GRID.to_vec(),
    };
    if grid.is_empty() || grid.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(usage("--grid must list positive reals"));
    }
    let out = args.common.out.clone().unwrap_or_else(|| PathBuf::from("dev_table.csv"));
    let manifest = manifest_path(&out);
    run.claim(&out)?;
    run.claim(&manifest)?;

    let space = run.embeddings(&args.embeddings)?;
    let train_data = run.dataset(&args.train, &space.vocab, args.n_classes, SOURCE_LANGUAGE)?;
    let n_classes = args.n_classes.or(Some(train_data.n_classes));
    let dev = run.dataset(&args.dev, &space.vocab, n_classes, SOURCE_LANGUAGE)?;
    let syn = match cfg.method {
        Method::RsAugment => Some(run.synonyms(&args.flags.synonyms, &space)?),
        _ => None,
    };
    let found = grid_search(&train_data, &dev, &cfg, &grid, &space, syn.as_ref())?;

    let mut csv = String::from("epsilon,dev_accuracy,error\n");
    for cell in &found.table {
        let acc = cell.dev_accuracy.map(|a| format!("{a:.6}")).unwrap_or_default();
        let err = cell.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        csv.push_str(&format!("{},{acc},{err}\n", cell.epsilon));
    }
    run.write(&out, &csv)?;
    writeln!(stdout, "best_epsilon={}", found.best_epsilon).ok();
    run.config.insert("grid".into(), grid.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    run.config.insert("best_epsilon".into(), found.best_epsilon.to_string());
    run.finish(&manifest)
}

fn cmd_augment(args: AugmentArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut run = Run::new("augment", &args.common);
    let mut cfg = TrainingConfig::default();
    if let Some(path) = &args.common.config {
        let text = run.read(path)?;
        cfg.apply_config_text(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    let m = args.augment_m.unwrap_or(cfg.augment_m);
    let p = args.augment_p.unwrap_or(cfg.augment_p);
    let seed = args.common.seed.unwrap_or(cfg.seed);
    if !(0.0..=1.0).contains(&p) {
        return Err(usage("--p must lie in [0, 1]"));
    }
    let out = args.common.out.clone().unwrap_or_else(|| PathBuf::from("augmented.tsv"));
    let manifest = manifest_path(&out);
    run.claim(&out)?;
    run.claim(&manifest)?;

    let space = run.embeddings(&args.embeddings)?;
    let data = run.dataset(&args.data, &space.vocab, None, SOURCE_LANGUAGE)?;
    let syn = run.synonyms(&args.synonyms, &space)?;
    // the same stream rs-augment training draws from
    let mut rng = stream(seed, Stream::Augment, &[]);
    let augmented = augment_dataset(&data, &syn, m, p, &mut rng)?;
    run.write(&out, &format_dataset(&augmented, &space.vocab))?;
    writeln!(stdout, "examples={}", augmented.len()).ok();
    run.seed = Some(seed);
    run.config = BTreeMap::from([("augment_m".into(), m.to_string()), ("augment_p".into(), p.to_string())]);
    run.finish(&manifest)
}

fn cmd_distance(args: DistanceArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut run = Run::new("distance", &args.common);
    if let Some(path) = &args.common.config {
        run.read(path)?;
    }
    if let Some(out) = &args.common.out {
        run.claim(out)?;
        run.claim(&manifest_path(out))?;
    }
    let src = run.embeddings(&args.source)?;
    let tgt = run.embeddings(&args.target)?;
    let text = run.read(&args.alignments)?;
    let (pairs, dropped) = parse_alignments(&text, &src.vocab, &tgt.vocab, &args.alignments)?;
    let d = language_distance(&pairs, &src.emb, &tgt.emb)?;
    writeln!(stdout, "distance={d:.6}").ok();
    if let Some(out) = &args.common.out {
        run.write(out, &format!("pairs,dropped,distance\n{},{dropped},{d:.6}\n", pairs.pairs.len()))?;
        run.finish(&manifest_path(out))?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut run = Run::new("synth", &args.common);
    let mut sweep = SweepConfig::default();
    let seed = args.common.seed.unwrap_or(0);
    let defaults = ToyTaskSpec::default();
    sweep.task = ToyTaskSpec {
        n_classes: args.classes,
        vocab_size: args.vocab_size,
        dim: args.dim,
        examples_per_class: args.examples_per_class,
        tokens_per_example: args.tokens,
        margin: args.margin.unwrap_or(defaults.margin),
        spread: args.spread.unwrap_or(defaults.spread),
        prototype_scale: args.prototype_scale.unwrap_or(defaults.prototype_scale),
        seed,
        ..defaults
    };
    sweep.task.validate().map_err(|e| usage(e.to_string()))?;
    if let Some(e) = &args.etas {
        sweep.etas = parse_list("etas", e)?;
    }
    if sweep.etas.is_empty() || sweep.etas.iter().any(|e| !(*e >= 0.0)) {
        return Err(usage("--etas must list reals ≥ 0"));
    }
    sweep.noise_kind = match args.noise {
        Noise::Uniform => NoiseKind::UniformLinf,
        Noise::Gaussian => NoiseKind::Gaussian,
    };
    if let Some(m) = &args.methods {
        sweep.methods = parse_list("methods", m)?;
    }
    sweep.seeds = (seed..seed + args.seeds).collect();
    sweep.synonym_k = args.flags.synonyms.synonym_k;

    let mut flags = args.flags;
    flags.freeze_embeddings = true;
    sweep.base = resolve_config(&mut run, &args.common, &flags, Method::Normal)?;
    if sweep.base.train_embeddings {
        return Err(usage("synthetic sweeps keep embeddings frozen"));
    }
    run.config.insert("etas".into(), sweep.etas.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    run.seed = Some(seed);

    let dir = args.common.out.clone().unwrap_or_else(|| PathBuf::from("synth"));
    let mut files: Vec<(String, String)> = Vec::new();
    let task = make_toy_task(&sweep.task)?;
    files.push(("source.emb".into(), format_embeddings(&task.space)));
    for (name, split) in [("train", &task.train), ("dev", &task.dev), ("test", &task.test)] {
        files.push((format!("{name}.tsv"), format_dataset(split, &task.space.vocab)));
    }
    let syn = build_synonyms_knn(&task.space, sweep.synonym_k, sweep.synonym_max_dist)?;
    files.push(("synonyms.txt".into(), format_synonyms(&syn, &task.space.vocab)));
    let mut languages = String::from("language,eta,distance\n");
    for (k, &eta) in sweep.etas.iter().enumerate() {
        let tag = language_tag(k);
        let (space, pairs) = sweep_language(&task.space, seed, k, eta, sweep.noise_kind)?;
        let test = translate_corpus(&task.test, &task.space.vocab, &space.vocab, &tag)?;
        let d = language_distance(&pairs, &task.space.emb, &space.emb)?;
        languages.push_str(&format!("{tag},{eta},{d:.6}\n"));
        files.push((format!("{tag}.emb"), format_embeddings(&space)));
        files.push((format!("{tag}.test.tsv"), format_dataset(&test, &space.vocab)));
        files.push((format!("{tag}.align.tsv"), format_alignments(&pairs, &task.space.vocab, &space.vocab)));
    }
    files.push(("languages.csv".into(), languages));

    let sweep_csv = dir.join("sweep.csv");
    for (name, _) in &files {
        run.claim(&dir.join(name))?;
    }
    if args.sweep {
        run.claim(&sweep_csv)?;
    }
    run.claim(&dir.join("manifest.json"))?;
    for (name, contents) in &files {
        run.write(&dir.join(name), contents)?;
    }
    writeln!(stdout, "wrote {} files to {}", files.len(), dir.display()).ok();

    if args.sweep {
        let report = noise_sweep(&sweep)?;
        for f in &report.failures {
            log::warn!("seed {} {}: {}", f.seed, f.method, f.message);
        }
        run.write(&sweep_csv, &report.to_csv())?;
        for &m in &sweep.methods {
            let means: Vec<String> = sweep
                .etas
                .iter()
                .map(|&eta| report.mean_accuracy(m, eta).map_or("-".into(), |a| format!("{a:.4}")))
                .collect();
            writeln!(stdout, "{m}: {}", means.join(" ")).ok();
        }
    }
    run.finish(&dir.join("manifest.json"))
}

fn sweep_files(input: &Path) -> CliResult<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let entries = fs::read_dir(input).map_err(|e| Error::io(input, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(input, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let head = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            if head.lines().next().map(str::trim) == Some(SWEEP_CSV_HEADER) {
                files.push(path);
            }
        }
    }
    files.sort();
    Ok(files)
}

fn cmd_report(args: ReportArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut run = Run::new("report", &args.common);
    if let Some(path) = &args.common.config {
        run.read(path)?;
    }
    let dir = args.common.out.clone().unwrap_or_else(|| PathBuf::from("report"));
    let (csv_path, svg_path, manifest) = (dir.join("trend.csv"), dir.join("trend.svg"), dir.join("manifest.json"));
    for p in [&csv_path, &svg_path, &manifest] {
        run.claim(p)?;
    }
    let files = sweep_files(&args.input)?;
    if files.is_empty() {
        return Err(Error::Mismatch(format!("no sweep CSVs under {}", args.input.display())).into());
    }
    let mut rows = Vec::new();
    for f in &files {
        let text = run.read(f)?;
        rows.extend(parse_sweep_csv(&text, f)?);
    }
    let trend = aggregate(&rows, args.baseline)?;
    run.write(&csv_path, &trend.to_csv())?;
    run.write(&svg_path, &trend.to_svg())?;
    for m in &trend.methods {
        writeln!(stdout, "spearman[{}]={:.6}{}", m.method, m.spearman, if m.degenerate { " (degenerate)" } else { "" }).ok();
    }
    run.config.insert("baseline".into(), args.baseline.to_string());
    run.finish(&manifest)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| writeln!(buf, "{}: {}", record.level().as_str().to_lowercase(), record.args()))
        .try_init();
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Results go to `stdout`, diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
            } else {
                let _ = write!(stdout, "{text}");
            }
            return code;
        }
    };
    init_logging(cli.verbose);
    let result = match cli.command {
        Command::Train(a) => cmd_train(a, stdout),
        Command::Eval(a) => cmd_eval(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::Augment(a) => cmd_augment(a, stdout),
        Command::Distance(a) => cmd_distance(a, stdout),
        Command::Synth(a) => cmd_synth(a, stdout),
        Command::Report(a) => cmd_report(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// [`run`] on the process arguments and standard streams.
pub fn main_exit_code() -> i32 {
    run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock())
}
