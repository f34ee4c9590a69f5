//! Zero-shot transfer: apply a source-trained classifier to a target
//! language's embeddings, measure source–target distance from aligned word
//! pairs, and relate robustness gains to that distance.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use crate::classifier::ModelParams;
use crate::dataset::Dataset;
use crate::embedding::{encode, euclidean, EmbeddingMatrix, EmbeddingSpace, Vocabulary};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::smoothing::smoothed_predict;
use crate::training::PerturbationSpec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPairs {
    pub pairs: Vec<(usize, usize)>,
    pub source_lang: String,
    pub target_lang: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InferenceMode {
    /// Single forward pass of the classifier.
    Plain,
    /// Majority vote under random perturbations; per-example streams are
    /// derived from `seed`.
    Smoothed {
        spec: PerturbationSpec,
        n_samples: usize,
        seed: u64,
    },
}

/// Accuracy of `params` on `tgt`, encoding tokens with the target space.
/// The classifier head is used as trained.
pub fn zero_shot_eval(
    params: &ModelParams,
    tgt: &Dataset,
    target: &EmbeddingSpace,
    mode: InferenceMode,
) -> Result<f64> {
    if target.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            found: target.dim(),
        });
    }
    if let Some(ex) = tgt.examples.iter().find(|e| e.label >= params.n_classes()) {
        return Err(Error::LabelOutOfRange {
            label: ex.label,
            n_classes: params.n_classes(),
        });
    }
    if tgt.is_empty() {
        return Ok(0.0);
    }
    let pad = Some(target.vocab.pad_id());
    let correct: usize = tgt
        .examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let input = encode(&ex.tokens, &target.emb, params.max_len, pad)?;
            let predicted = match mode {
                InferenceMode::Plain => params.predict(&input)?,
                InferenceMode::Smoothed { spec, n_samples, seed } => {
                    let mut rng = stream(seed, Stream::Smoothing, &[u64::MAX, i as u64]);
                    smoothed_predict(params, &input, &spec, n_samples, &mut rng)?.predicted_class
                }
            };
            Ok(usize::from(predicted == ex.label))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(correct as f64 / tgt.len() as f64)
}

/// Mean Euclidean distance between aligned source and target vectors.
pub fn language_distance(pairs: &AlignedPairs, emb_src: &EmbeddingMatrix, emb_tgt: &EmbeddingMatrix) -> Result<f64> {
    if pairs.pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    if emb_src.dim() != emb_tgt.dim() {
        return Err(Error::DimensionMismatch {
            expected: emb_src.dim(),
            found: emb_tgt.dim(),
        });
    }
    let mut total = 0.0;
    for &(s, t) in &pairs.pairs {
        if s >= emb_src.rows() || t >= emb_tgt.rows() {
            return Err(Error::IndexOutOfRange {
                id: s.max(t),
                size: emb_src.rows().min(emb_tgt.rows()),
            });
        }
        total += euclidean(emb_src.row(s), emb_tgt.row(t));
    }
    Ok(total / pairs.pairs.len() as f64)
}

/// Reads `src_token<TAB>tgt_token` lines. Pairs with an unknown token are
/// dropped and counted.
pub fn load_alignments(
    path: impl AsRef<Path>,
    vocab_src: &Vocabulary,
    vocab_tgt: &Vocabulary,
) -> Result<(AlignedPairs, usize)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_alignments(&text, vocab_src, vocab_tgt, path)
}

pub fn parse_alignments(
    text: &str,
    vocab_src: &Vocabulary,
    vocab_tgt: &Vocabulary,
    path: impl AsRef<Path>,
) -> Result<(AlignedPairs, usize)> {
    let path = path.as_ref();
    let mut pairs = Vec::new();
    let mut dropped = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [src, tgt] = fields.as_slice() else {
            return Err(Error::parse(path, i + 1, "expected src_token<TAB>tgt_token"));
        };
        if src.is_empty() || tgt.is_empty() {
            return Err(Error::parse(path, i + 1, "empty token"));
        }
        match (vocab_src.lookup(src), vocab_tgt.lookup(tgt)) {
            (Some(s), Some(t)) => pairs.push((s, t)),
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        warn!("{}: dropped {dropped} out-of-vocabulary pairs", path.display());
    }
    Ok((
        AlignedPairs {
            pairs,
            source_lang: String::new(),
            target_lang: String::new(),
        },
        dropped,
    ))
}

pub fn format_alignments(pairs: &AlignedPairs, vocab_src: &Vocabulary, vocab_tgt: &Vocabulary) -> String {
    let mut out = String::new();
    for &(s, t) in &pairs.pairs {
        out.push_str(&format!(
            "{}\t{}\n",
            vocab_src.token(s).unwrap_or_default(),
            vocab_tgt.token(t).unwrap_or_default()
        ));
    }
    out
}

/// One model's accuracy (and distance, where known) per target language.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransferResult {
    pub model: String,
    pub accuracy: BTreeMap<String, f64>,
    pub distance: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementRow {
    pub language: String,
    pub distance: f64,
    pub acc_baseline: f64,
    pub acc_robust: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementTable {
    /// Sorted by distance ascending.
    pub rows: Vec<ImprovementRow>,
    /// Spearman rank correlation of (distance, Δ); 0 when degenerate.
    pub spearman: f64,
    /// Set when either column is constant and ρ is undefined.
    pub degenerate: bool,
}

pub const IMPROVEMENT_CSV_HEADER: &str = "language,distance,acc_baseline,acc_robust,delta";

impl ImprovementTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{IMPROVEMENT_CSV_HEADER}\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6}\n",
                r.language, r.distance, r.acc_baseline, r.acc_robust, r.delta
            ));
        }
        out
    }
}

/// Δaccuracy (robust − baseline) per language, ordered by distance, with the
/// rank correlation between distance and Δ. Languages without a distance
/// are left out.
pub fn improvement_vs_distance(baseline: &TransferResult, robust: &TransferResult) -> Result<ImprovementTable> {
    if baseline.accuracy.keys().ne(robust.accuracy.keys()) {
        return Err(Error::Mismatch(format!(
            "language sets differ between {} and {}",
            baseline.model, robust.model
        )));
    }
    let mut rows: Vec<ImprovementRow> = baseline
        .accuracy
        .iter()
        .filter_map(|(lang, &acc_b)| {
            let distance = *robust.distance.get(lang).or_else(|| baseline.distance.get(lang))?;
            let acc_r = robust.accuracy[lang];
            Some(ImprovementRow {
                language: lang.clone(),
                distance,
                acc_baseline: acc_b,
                acc_robust: acc_r,
                delta: acc_r - acc_b,
            })
        })
        .collect();
    rows.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.language.cmp(&b.language)));
    let xs: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let rho = spearman(&xs, &ys);
    Ok(ImprovementTable {
        rows,
        spearman: rho.unwrap_or(0.0),
        degenerate: rho.is_none(),
    })
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman ρ as the Pearson correlation of average ranks. `None` when fewer
/// than two points or either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
