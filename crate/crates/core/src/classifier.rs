//! The classifier: masked mean pooling over token vectors followed by a
//! tanh feedforward network with a linear output layer. Forward, exact
//! backward (parameters and input vectors), cross-entropy loss, a
//! finite-difference gradient checker, and the checkpoint format.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::embedding::{encode, EmbeddedSequence, EmbeddingMatrix, EmbeddingSpace, Vocabulary};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const CHECKPOINT_HEADER: &str = "robustxfer-model v1";

/// One affine layer, `weights` is out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.weights.mul_vec(x);
        for (z, b) in z.iter_mut().zip(&self.bias) {
            *z += b;
        }
        z
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.as_slice().iter().chain(&self.bias)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.as_mut_slice().iter_mut().chain(self.bias.iter_mut())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub vocab: Vocabulary,
    pub emb: EmbeddingMatrix,
    pub train_embeddings: bool,
    pub layers: Vec<Dense>,
    pub max_len: usize,
}

impl ModelParams {
    /// Weights uniform in ±1/√fan_in, zero biases; the embedding table is
    /// copied from `space`.
    pub fn init(
        space: &EmbeddingSpace,
        hidden_dims: &[usize],
        n_classes: usize,
        train_embeddings: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let mut widths = vec![space.dim()];
        widths.extend_from_slice(hidden_dims);
        widths.push(n_classes);
        let layers = widths
            .windows(2)
            .map(|w| {
                let mut layer = Dense::zeros(w[0], w[1]);
                let bound = 1.0 / (w[0].max(1) as f64).sqrt();
                for v in layer.weights.as_mut_slice() {
                    *v = rng.random_range(-bound..=bound);
                }
                layer
            })
            .collect();
        Self {
            vocab: space.vocab.clone(),
            emb: space.emb.clone(),
            train_embeddings,
            layers,
            max_len: crate::embedding::DEFAULT_MAX_LEN,
        }
    }

    /// Assembles a model from explicit layers, checking the shape chain
    /// `d → hidden… → n_classes`.
    pub fn from_layers(space: &EmbeddingSpace, layers: Vec<Dense>, train_embeddings: bool) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("model needs an output layer".into()));
        }
        let mut width = space.dim();
        for l in &layers {
            if l.inputs() != width || l.bias.len() != l.outputs() {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: l.inputs(),
                });
            }
            width = l.outputs();
        }
        if !layers.iter().all(|l| l.params().all(|v| v.is_finite())) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(Self {
            vocab: space.vocab.clone(),
            emb: space.emb.clone(),
            train_embeddings,
            layers,
            max_len: crate::embedding::DEFAULT_MAX_LEN,
        })
    }

    pub fn dim(&self) -> usize {
        self.emb.dim()
    }

    pub fn n_classes(&self) -> usize {
        self.layers.last().map_or(0, Dense::outputs)
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(Dense::outputs).collect()
    }

    pub fn space(&self) -> EmbeddingSpace {
        EmbeddingSpace {
            vocab: self.vocab.clone(),
            emb: self.emb.clone(),
        }
    }

    /// Encodes with the model's own embedding table.
    pub fn encode(&self, token_ids: &[usize]) -> Result<EmbeddedSequence> {
        encode(token_ids, &self.emb, self.max_len, Some(self.vocab.pad_id()))
    }

    pub fn forward(&self, input: &EmbeddedSequence) -> Result<(Vec<f64>, ForwardTrace)> {
        if input.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: input.dim(),
            });
        }
        let active = input.active();
        if active == 0 {
            return Err(Error::EmptyExample);
        }
        let mut pooled = vec![0.0; self.dim()];
        for (row, _) in input.vectors.iter_rows().zip(&input.mask).filter(|(_, &m)| m) {
            for (p, v) in pooled.iter_mut().zip(row) {
                *p += v;
            }
        }
        let scale = 1.0 / active as f64;
        for p in &mut pooled {
            *p *= scale;
        }

        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(pooled);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(activations.last().expect("nonempty"));
            if i < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(z);
        }
        let logits = activations.last().expect("nonempty").clone();
        Ok((
            logits,
            ForwardTrace {
                activations,
                mask: input.mask.clone(),
                active,
            },
        ))
    }

    pub fn logits(&self, input: &EmbeddedSequence) -> Result<Vec<f64>> {
        self.forward(input).map(|(l, _)| l)
    }

    pub fn predict(&self, input: &EmbeddedSequence) -> Result<usize> {
        self.logits(input).map(|l| argmax(&l))
    }

    /// Gradients of `loss(forward(input), label)` with respect to every
    /// layer parameter and every input row. Padding rows get exact zeros.
    pub fn backward(&self, trace: &ForwardTrace, label: usize) -> Gradients {
        let acts = &trace.activations;
        let logits = acts.last().expect("trace has logits");
        let mut delta = softmax(logits);
        delta[label] -= 1.0;

        let mut layer_grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let a_in = &acts[i];
            let mut g = Dense::zeros(layer.inputs(), layer.outputs());
            for (o, &d) in delta.iter().enumerate() {
                for (w, &a) in g.weights.row_mut(o).iter_mut().zip(a_in) {
                    *w = d * a;
                }
            }
            g.bias.copy_from_slice(&delta);
            layer_grads.push(g);

            let mut back = layer.weights.mul_vec_transposed(&delta);
            if i > 0 {
                for (b, &a) in back.iter_mut().zip(a_in) {
                    *b *= 1.0 - a * a;
                }
            }
            delta = back;
        }
        layer_grads.reverse();

        let scale = 1.0 / trace.active as f64;
        let dim = delta.len();
        let mut input = Matrix::zeros(trace.mask.len(), dim);
        for (i, &real) in trace.mask.iter().enumerate() {
            if real {
                for (g, &d) in input.row_mut(i).iter_mut().zip(&delta) {
                    *g = d * scale;
                }
            }
        }
        Gradients {
            layers: layer_grads,
            input,
        }
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Dense::params_mut)
    }

    pub fn is_finite(&self) -> bool {
        self.emb.as_matrix().is_finite() && self.layers.iter().all(|l| l.params().all(|v| v.is_finite()))
    }
}

/// Intermediate values kept by [`ModelParams::forward`] for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `activations[0]` is the pooled vector, the last entry the logits.
    pub activations: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    pub active: usize,
}

impl ForwardTrace {
    pub fn pooled(&self) -> &[f64] {
        &self.activations[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
    /// ∂loss/∂(input vectors), n×d.
    pub input: Matrix,
}

impl Gradients {
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Dense::params)
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Dense::params_mut)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy `−log softmax(logits)[label]`, max-shifted.
pub fn loss(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compares [`ModelParams::backward`] against central differences with step
/// `h`; returns the maximum relative error.
pub fn grad_check(params: &ModelParams, input: &EmbeddedSequence, label: usize, h: f64) -> Result<f64> {
    let (_, trace) = params.forward(input)?;
    let grads = params.backward(&trace, label);
    grad_check_against(params, input, label, h, &grads)
}

/// Like [`grad_check`] but scores caller-supplied gradients.
pub fn grad_check_against(
    params: &ModelParams,
    input: &EmbeddedSequence,
    label: usize,
    h: f64,
    grads: &Gradients,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let eval = |p: &ModelParams, x: &EmbeddedSequence| -> Result<f64> { Ok(loss(&p.logits(x)?, label)) };

    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    let analytic: Vec<f64> = grads.params().copied().collect();
    let count = analytic.len();
    for (k, &a) in analytic.iter().enumerate().take(count) {
        let orig = *probe.params_mut().nth(k).expect("index in range");
        *probe.params_mut().nth(k).expect("index in range") = orig + h;
        let up = eval(&probe, input)?;
        *probe.params_mut().nth(k).expect("index in range") = orig - h;
        let down = eval(&probe, input)?;
        *probe.params_mut().nth(k).expect("index in range") = orig;
        worst = worst.max(relative_error(a, (up - down) / (2.0 * h)));
    }

    let mut x = input.clone();
    for r in 0..input.len() {
        for c in 0..input.dim() {
            let orig = x.vectors[(r, c)];
            x.vectors[(r, c)] = orig + h;
            let up = eval(params, &x)?;
            x.vectors[(r, c)] = orig - h;
            let down = eval(params, &x)?;
            x.vectors[(r, c)] = orig;
            worst = worst.max(relative_error(grads.input[(r, c)], (up - down) / (2.0 * h)));
        }
    }
    Ok(worst)
}

fn push_floats(out: &mut String, values: &[f64]) {
    let text: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
    out.push_str(&text.join(" "));
    out.push('\n');
}

/// Serializes a model in the versioned text checkpoint format. Floats are
/// written with 17 significant digits, so loading is value-exact.
pub fn format_model(params: &ModelParams) -> String {
    let mut out = String::new();
    out.push_str(CHECKPOINT_HEADER);
    out.push('\n');
    out.push_str(&format!("train_embeddings {}\n", params.train_embeddings));
    out.push_str(&format!("max_len {}\n", params.max_len));
    out.push_str(&format!(
        "vocab {} unk {} pad {}\n",
        params.vocab.len(),
        params.vocab.unk_id(),
        params.vocab.pad_id()
    ));
    for t in params.vocab.tokens() {
        out.push_str(t);
        out.push('\n');
    }
    out.push_str(&format!("embedding {} {}\n", params.emb.rows(), params.emb.dim()));
    for row in params.emb.as_matrix().iter_rows() {
        push_floats(&mut out, row);
    }
    out.push_str(&format!("layers {}\n", params.layers.len()));
    for layer in &params.layers {
        out.push_str(&format!("layer {} {}\n", layer.outputs(), layer.inputs()));
        for row in layer.weights.iter_rows() {
            push_floats(&mut out, row);
        }
        push_floats(&mut out, &layer.bias);
    }
    out
}

pub fn save_model(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_model(params)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, path)
}

pub fn parse_model(text: &str, path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, format!("unexpected end of file, expected {what}")))
    };
    let bad = |line: usize, what: &str| Error::parse(path, line, format!("malformed {what}"));
    let fields = |line: &str| line.split_whitespace().map(str::to_string).collect::<Vec<_>>();
    let parse_usize = |s: &str, line: usize, what: &str| s.parse::<usize>().map_err(|_| bad(line, what));
    let parse_row = |line: &str, n: usize, lineno: usize| -> Result<Vec<f64>> {
        let row = line
            .split_whitespace()
            .map(|f| f.parse::<f64>().map_err(|_| bad(lineno, "number")))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != n {
            return Err(Error::parse(path, lineno, "dimension mismatch"));
        }
        Ok(row)
    };

    let (n, header) = next("header")?;
    if header.trim() != CHECKPOINT_HEADER {
        return Err(Error::parse(path, n, format!("expected header {CHECKPOINT_HEADER:?}")));
    }
    let (n, line) = next("train_embeddings")?;
    let train_embeddings = match fields(line).as_slice() {
        [k, v] if k == "train_embeddings" => v.parse::<bool>().map_err(|_| bad(n, "train_embeddings"))?,
        _ => return Err(bad(n, "train_embeddings")),
    };
    let (n, line) = next("max_len")?;
    let max_len = match fields(line).as_slice() {
        [k, v] if k == "max_len" => parse_usize(v, n, "max_len")?,
        _ => return Err(bad(n, "max_len")),
    };
    let (n, line) = next("vocab")?;
    let (v, unk, pad) = match fields(line).as_slice() {
        [k, v, u, uv, p, pv] if k == "vocab" && u == "unk" && p == "pad" => (
            parse_usize(v, n, "vocab")?,
            parse_usize(uv, n, "vocab")?,
            parse_usize(pv, n, "vocab")?,
        ),
        _ => return Err(bad(n, "vocab")),
    };
    let mut tokens = Vec::with_capacity(v);
    for _ in 0..v {
        tokens.push(next("token")?.1.to_string());
    }
    let vocab = Vocabulary::new(tokens)?;
    if vocab.len() != v || vocab.unk_id() != unk || vocab.pad_id() != pad {
        return Err(Error::parse(path, n, "inconsistent vocabulary block"));
    }
    let (n, line) = next("embedding")?;
    let (rows, dim) = match fields(line).as_slice() {
        [k, r, d] if k == "embedding" => (parse_usize(r, n, "embedding")?, parse_usize(d, n, "embedding")?),
        _ => return Err(bad(n, "embedding")),
    };
    let mut values = Vec::with_capacity(rows * dim);
    for _ in 0..rows {
        let (n, line) = next("embedding row")?;
        values.extend(parse_row(line, dim, n)?);
    }
    let emb = EmbeddingMatrix::new(Matrix::from_vec(rows, dim, values))?;
    let space = EmbeddingSpace::new(vocab, emb)?;

    let (n, line) = next("layers")?;
    let count = match fields(line).as_slice() {
        [k, c] if k == "layers" => parse_usize(c, n, "layers")?,
        _ => return Err(bad(n, "layers")),
    };
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, line) = next("layer")?;
        let (outs, ins) = match fields(line).as_slice() {
            [k, o, i] if k == "layer" => (parse_usize(o, n, "layer")?, parse_usize(i, n, "layer")?),
            _ => return Err(bad(n, "layer")),
        };
        let mut w = Vec::with_capacity(outs * ins);
        for _ in 0..outs {
            let (n, line) = next("weight row")?;
            w.extend(parse_row(line, ins, n)?);
        }
        let (n, line) = next("bias")?;
        let bias = parse_row(line, outs, n)?;
        layers.push(Dense {
            weights: Matrix::from_vec(outs, ins, w),
            bias,
        });
    }
    let mut model = ModelParams::from_layers(&space, layers, train_embeddings)?;
    model.max_len = max_len;
    Ok(model)
}
