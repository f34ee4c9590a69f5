//! Vocabularies, static embedding tables, synonym sets, and the lookup
//! encoder that turns token ids into embedded sequences.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const UNK: &str = "<unk>";
pub const PAD: &str = "<pad>";

/// Default truncation length for encoded sequences.
pub const DEFAULT_MAX_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    unk_id: usize,
    pad_id: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from ordered unique tokens, appending [`UNK`] and
    /// [`PAD`] when they are absent.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        let mut tokens = tokens;
        let mut index = HashMap::with_capacity(tokens.len() + 2);
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate token {t:?}")));
            }
        }
        for special in [UNK, PAD] {
            if !index.contains_key(special) {
                index.insert(special.to_string(), tokens.len());
                tokens.push(special.to_string());
            }
        }
        let unk_id = index[UNK];
        let pad_id = index[PAD];
        Ok(Self {
            tokens,
            index,
            unk_id,
            pad_id,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.lookup(token).unwrap_or(self.unk_id)
    }

    pub fn unk_id(&self) -> usize {
        self.unk_id
    }

    pub fn pad_id(&self) -> usize {
        self.pad_id
    }

    pub fn is_special(&self, id: usize) -> bool {
        id == self.unk_id || id == self.pad_id
    }

    /// Ids of all non-special tokens, ascending.
    pub fn regular_ids(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| !self.is_special(i))
    }
}

/// A V×d table of finite token vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix(Matrix);

impl EmbeddingMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        if !values.is_finite() {
            return Err(Error::InvalidArgument(
                "embedding matrix has non-finite entries".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.0.row(id)
    }

    pub(crate) fn row_mut(&mut self, id: usize) -> &mut [f64] {
        self.0.row_mut(id)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }
}

/// A vocabulary paired with its embedding table; one per language.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    pub vocab: Vocabulary,
    pub emb: EmbeddingMatrix,
}

impl EmbeddingSpace {
    pub fn new(vocab: Vocabulary, emb: EmbeddingMatrix) -> Result<Self> {
        if vocab.len() != emb.rows() {
            return Err(Error::DimensionMismatch {
                expected: vocab.len(),
                found: emb.rows(),
            });
        }
        Ok(Self { vocab, emb })
    }

    /// Builds a space from `(token, vector)` pairs; appended specials get
    /// zero vectors.
    pub fn from_pairs(pairs: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = pairs.first().map_or(0, |(_, v)| v.len());
        let (tokens, vectors): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let vocab = Vocabulary::new(tokens)?;
        let mut values = Matrix::zeros(vocab.len(), dim);
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            values.row_mut(i).copy_from_slice(v);
        }
        Self::new(vocab, EmbeddingMatrix::new(values)?)
    }

    pub fn dim(&self) -> usize {
        self.emb.dim()
    }

    pub fn encode(&self, token_ids: &[usize], max_len: usize) -> Result<EmbeddedSequence> {
        encode(token_ids, &self.emb, max_len, Some(self.vocab.pad_id()))
    }
}

/// An encoded example: one row per position, `mask[i] == false` for padding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSequence {
    pub vectors: Matrix,
    pub mask: Vec<bool>,
}

impl EmbeddedSequence {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn active(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Returns `self + delta` on real-token rows; padding rows are left as is.
    pub fn perturbed(&self, delta: &Matrix) -> EmbeddedSequence {
        assert_eq!(delta.rows(), self.len());
        assert_eq!(delta.cols(), self.dim());
        let mut out = self.clone();
        for (i, &real) in self.mask.iter().enumerate() {
            if real {
                for (v, d) in out.vectors.row_mut(i).iter_mut().zip(delta.row(i)) {
                    *v += d;
                }
            }
        }
        out
    }
}

/// Looks up each id in `emb`, truncating at `max_len`. Positions holding
/// `pad_id` are masked out.
pub fn encode(
    token_ids: &[usize],
    emb: &EmbeddingMatrix,
    max_len: usize,
    pad_id: Option<usize>,
) -> Result<EmbeddedSequence> {
    let ids = &token_ids[..token_ids.len().min(max_len)];
    if ids.is_empty() {
        return Err(Error::EmptyExample);
    }
    let mut vectors = Matrix::zeros(ids.len(), emb.dim());
    let mut mask = Vec::with_capacity(ids.len());
    for (i, &id) in ids.iter().enumerate() {
        if id >= emb.rows() {
            return Err(Error::IndexOutOfRange {
                id,
                size: emb.rows(),
            });
        }
        vectors.row_mut(i).copy_from_slice(emb.row(id));
        mask.push(Some(id) != pad_id);
    }
    Ok(EmbeddedSequence { vectors, mask })
}

/// Reads the text embedding format: a `V d` header followed by V lines of
/// `token f_1 … f_d`.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<(Vocabulary, EmbeddingMatrix)> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), path)
}

pub fn read_embeddings(
    reader: impl BufRead,
    path: impl AsRef<Path>,
) -> Result<(Vocabulary, EmbeddingMatrix)> {
    let path = path.as_ref();
    let mut lines = reader.lines().enumerate();
    let (rows, dim) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::parse(path, 1, "missing header"));
        };
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<_> = line.split_whitespace().collect();
        let parsed = match fields.as_slice() {
            [v, d] => v.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
            _ => None,
        };
        break parsed.ok_or_else(|| Error::parse(path, i + 1, "malformed header, expected \"V d\""))?;
    };

    let mut pairs = Vec::with_capacity(rows);
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::parse(path, lineno, format!("invalid number {f:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != dim {
            return Err(Error::parse(path, lineno, "dimension mismatch"));
        }
        if pairs.len() == rows {
            return Err(Error::parse(path, lineno, format!("more than {rows} rows")));
        }
        pairs.push((token, values, lineno));
    }
    if pairs.len() != rows {
        return Err(Error::parse(
            path,
            pairs.last().map_or(1, |p| p.2),
            format!("expected {rows} rows, found {}", pairs.len()),
        ));
    }

    let mut seen = HashMap::with_capacity(rows);
    for (token, _, lineno) in &pairs {
        if seen.insert(token.as_str(), ()).is_some() {
            return Err(Error::parse(path, *lineno, format!("duplicate token {token:?}")));
        }
    }
    let pairs = pairs.into_iter().map(|(t, v, _)| (t, v)).collect::<Vec<_>>();
    let vocab = Vocabulary::new(pairs.iter().map(|(t, _)| t.clone()).collect())?;
    let mut values = Matrix::zeros(vocab.len(), dim);
    for (i, (_, v)) in pairs.iter().enumerate() {
        values.row_mut(i).copy_from_slice(v);
    }
    Ok((vocab, EmbeddingMatrix::new(values)?))
}

/// Every row, specials included, in shortest round-trip float text.
pub fn format_embeddings(space: &EmbeddingSpace) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", space.vocab.len(), space.dim()));
    for (id, token) in space.vocab.tokens().iter().enumerate() {
        out.push_str(token);
        for v in space.emb.row(id) {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
    }
    out
}

pub fn write_embeddings(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_embeddings(space)).map_err(|e| Error::io(path, e))
}

/// Replacement candidates per token id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SynonymSet {
    neighbors: Vec<Vec<usize>>,
}

impl SynonymSet {
    pub fn empty(vocab_size: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); vocab_size],
        }
    }

    /// Builds a set from raw lists, dropping self references, out-of-range
    /// ids and duplicates (first occurrence wins).
    pub fn from_lists(vocab_size: usize, lists: impl IntoIterator<Item = (usize, Vec<usize>)>) -> Self {
        let mut set = Self::empty(vocab_size);
        for (key, candidates) in lists {
            if key >= vocab_size {
                continue;
            }
            for c in candidates {
                set.push(key, c);
            }
        }
        set
    }

    fn push(&mut self, key: usize, candidate: usize) -> bool {
        let size = self.neighbors.len();
        let list = &mut self.neighbors[key];
        if candidate == key || candidate >= size || list.contains(&candidate) {
            return false;
        }
        list.push(candidate);
        true
    }

    pub fn vocab_size(&self) -> usize {
        self.neighbors.len()
    }

    pub fn get(&self, id: usize) -> &[usize] {
        self.neighbors.get(id).map_or(&[], Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.iter().all(Vec::is_empty)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.neighbors
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, l)| (i, l.as_slice()))
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Nearest-neighbour synonym fallback: for every regular token, up to `k`
/// other regular tokens by Euclidean distance, kept only if within
/// `max_dist`. Ties go to the lower id.
pub fn build_synonyms_knn(space: &EmbeddingSpace, k: usize, max_dist: f64) -> Result<SynonymSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if !(max_dist > 0.0) {
        return Err(Error::InvalidArgument("max_dist must be positive".into()));
    }
    let ids: Vec<usize> = space.vocab.regular_ids().collect();
    let lists: Vec<(usize, Vec<usize>)> = ids
        .par_iter()
        .map(|&t| {
            let anchor = space.emb.row(t);
            let mut cands: Vec<(f64, usize)> = ids
                .iter()
                .filter(|&&j| j != t)
                .map(|&j| (euclidean(anchor, space.emb.row(j)), j))
                .collect();
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let list = cands
                .into_iter()
                .take(k)
                .filter(|&(d, _)| d <= max_dist)
                .map(|(_, j)| j)
                .collect();
            (t, list)
        })
        .collect();
    Ok(SynonymSet::from_lists(space.vocab.len(), lists))
}

/// Reads `token<TAB>syn,syn,…` lines. Returns the set and the number of
/// tokens dropped because they are not in `vocab`.
pub fn load_synonyms(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<(SynonymSet, usize)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_synonyms(&text, vocab, path)
}

pub fn parse_synonyms(
    text: &str,
    vocab: &Vocabulary,
    path: impl AsRef<Path>,
) -> Result<(SynonymSet, usize)> {
    let path = path.as_ref();
    let mut set = SynonymSet::empty(vocab.len());
    let mut dropped = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((key, rest)) = line.split_once('\t') else {
            return Err(Error::parse(path, i + 1, "expected token<TAB>synonyms"));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::parse(path, i + 1, "empty token"));
        }
        let Some(key_id) = vocab.lookup(key) else {
            dropped += 1;
            continue;
        };
        if vocab.is_special(key_id) {
            continue;
        }
        for syn in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match vocab.lookup(syn) {
                Some(id) if !vocab.is_special(id) => {
                    set.push(key_id, id);
                }
                Some(_) => {}
                None => dropped += 1,
            }
        }
    }
    if dropped > 0 {
        warn!("{}: dropped {dropped} out-of-vocabulary synonym entries", path.display());
    }
    Ok((set, dropped))
}

pub fn format_synonyms(set: &SynonymSet, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for (id, list) in set.iter() {
        let names: Vec<&str> = list.iter().filter_map(|&j| vocab.token(j)).collect();
        out.push_str(&format!("{}\t{}\n", vocab.token(id).unwrap_or(UNK), names.join(",")));
    }
    out
}

pub fn write_synonyms(set: &SynonymSet, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_synonyms(set, vocab)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space(rows: &[(&str, Vec<f64>)]) -> EmbeddingSpace {
        EmbeddingSpace::from_pairs(rows.iter().map(|(t, v)| (t.to_string(), v.clone())).collect())
            .unwrap()
    }

    fn read(text: &str) -> Result<(Vocabulary, EmbeddingMatrix)> {
        read_embeddings(text.as_bytes(), "mem.txt")
    }

    #[test]
    fn load_appends_specials_as_zero_rows() {
        let (vocab, emb) = read("3 2\ncat 0.1 0.2\ndog 1 2\nfish -3 4e-1\n").unwrap();
        assert_eq!(vocab.len(), 5);
        assert_eq!(emb.dim(), 2);
        assert_eq!(emb.row(vocab.lookup("cat").unwrap()), &[0.1, 0.2]);
        assert_eq!(emb.row(vocab.unk_id()), &[0.0, 0.0]);
        assert_eq!(emb.row(vocab.pad_id()), &[0.0, 0.0]);
        assert_ne!(vocab.unk_id(), vocab.pad_id());
    }

    #[test]
    fn load_reports_line_of_dimension_mismatch() {
        let err = read("2 2\na 1 2\nb 3\n").unwrap_err();
        assert_eq!(err.to_string(), "dimension mismatch at line 3 of mem.txt");
    }

    #[test]
    fn load_rejects_duplicates_and_bad_numbers() {
        assert!(read("2 1\na 1\na 2\n").unwrap_err().to_string().contains("line 3"));
        assert!(read("1 1\na x\n").unwrap_err().to_string().contains("line 2"));
        assert!(read("1 1\na NaN\n").is_err());
        assert!(read("2 1\na 1\n").is_err());
        assert!(read("oops\n").is_err());
    }

    #[test]
    fn existing_specials_are_not_duplicated() {
        let (vocab, _) = read("2 1\n<pad> 0\nx 1\n").unwrap();
        assert_eq!(vocab.len(), 3);
        assert_eq!(vocab.pad_id(), 0);
        assert_eq!(vocab.unk_id(), 2);
    }

    #[test]
    fn encode_stacks_rows_and_masks_padding() {
        let s = space(&[("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0]), ("c", vec![2.0, 3.0])]);
        let e = s.encode(&[0], 64).unwrap();
        assert_eq!(e.vectors.row(0), &[1.0, 0.0]);
        assert_eq!(e.mask, vec![true]);

        let e = s.encode(&[2, 1, s.vocab.pad_id()], 64).unwrap();
        assert_eq!(e.vectors.row(0), &[2.0, 3.0]);
        assert_eq!(e.vectors.row(1), &[0.0, 1.0]);
        assert_eq!(e.mask, vec![true, true, false]);

        assert!(matches!(s.encode(&[], 64), Err(Error::EmptyExample)));
        assert!(matches!(s.encode(&[9], 64), Err(Error::IndexOutOfRange { .. })));
        assert_eq!(s.encode(&[0, 1, 2, 0], 2).unwrap().len(), 2);
    }

    #[test]
    fn perturbation_skips_padding_rows() {
        let s = space(&[("a", vec![1.0, 1.0])]);
        let e = s.encode(&[0, s.vocab.pad_id()], 8).unwrap();
        let p = e.perturbed(&Matrix::from_rows(&[vec![0.5, -0.5], vec![9.0, 9.0]]));
        assert_eq!(p.vectors.row(0), &[1.5, 0.5]);
        assert_eq!(p.vectors.row(1), &[0.0, 0.0]);
    }

    /// Independent oracle: j belongs to t's list iff it is within `max_dist`
    /// and fewer than `k` other candidates precede it in (distance, id) order.
    fn knn_oracle(s: &EmbeddingSpace, k: usize, max_dist: f64) -> Vec<Vec<usize>> {
        let ids: Vec<usize> = s.vocab.regular_ids().collect();
        let mut out = vec![Vec::new(); s.vocab.len()];
        for &t in &ids {
            let d = |j: usize| euclidean(s.emb.row(t), s.emb.row(j));
            let mut chosen: Vec<usize> = ids
                .iter()
                .copied()
                .filter(|&j| j != t && d(j) <= max_dist)
                .filter(|&j| {
                    let ahead = ids
                        .iter()
                        .filter(|&&o| o != t && o != j && (d(o) < d(j) || (d(o) == d(j) && o < j)))
                        .count();
                    ahead < k
                })
                .collect();
            chosen.sort_by(|&a, &b| d(a).total_cmp(&d(b)).then(a.cmp(&b)));
            out[t] = chosen;
        }
        out
    }

    #[test]
    fn knn_three_point_case() {
        let s = space(&[("a", vec![0.0, 0.0]), ("b", vec![0.0, 0.5]), ("c", vec![9.0, 9.0])]);
        let syn = build_synonyms_knn(&s, 1, 1.0).unwrap();
        assert_eq!(syn.get(0), &[1]);
        assert_eq!(syn.get(1), &[0]);
        assert!(syn.get(2).is_empty());
        assert_eq!(knn_oracle(&s, 1, 1.0)[..3], [vec![1], vec![0], vec![]]);
    }

    #[test]
    fn knn_far_points_have_no_neighbours() {
        let s = space(&[("a", vec![0.0, 0.0]), ("b", vec![10.0, 0.0]), ("c", vec![5.0, 8.660254037844386])]);
        assert!(build_synonyms_knn(&s, 2, 1.0).unwrap().is_empty());
    }

    #[test]
    fn knn_duplicate_vectors_ordered_by_id() {
        let s = space(&[
            ("a", vec![1.0, 1.0]),
            ("b", vec![1.0, 1.0]),
            ("c", vec![1.0, 1.0]),
            ("d", vec![1.2, 1.0]),
        ]);
        let syn = build_synonyms_knn(&s, 2, 1.0).unwrap();
        let oracle = knn_oracle(&s, 2, 1.0);
        assert_eq!(syn.get(0), &[1, 2]);
        assert_eq!(syn.get(2), &[0, 1]);
        for id in 0..4 {
            assert_eq!(syn.get(id), oracle[id].as_slice());
        }
    }

    #[test]
    fn knn_rejects_bad_arguments() {
        let s = space(&[("a", vec![0.0])]);
        assert!(build_synonyms_knn(&s, 0, 1.0).is_err());
        assert!(build_synonyms_knn(&s, 1, 0.0).is_err());
    }

    #[test]
    fn synonym_file_parsing() {
        let s = space(&[("good", vec![0.0]), ("nice", vec![1.0]), ("fine", vec![2.0])]);
        let (syn, dropped) = parse_synonyms("good\tnice,fine\n", &s.vocab, "s.tsv").unwrap();
        assert_eq!(syn.get(0), &[1, 2]);
        assert_eq!(dropped, 0);

        let (syn, _) = parse_synonyms("good\tgood\n", &s.vocab, "s.tsv").unwrap();
        assert!(syn.get(0).is_empty());

        let (syn, dropped) = parse_synonyms("good\tnice,great\nbad\tfine\n", &s.vocab, "s.tsv").unwrap();
        assert_eq!(syn.get(0), &[1]);
        assert_eq!(dropped, 2);

        let err = parse_synonyms("good nice\n", &s.vocab, "s.tsv").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    proptest! {
        #[test]
        fn knn_matches_exhaustive_oracle(
            pts in prop::collection::vec(prop::collection::vec(-2i8..=2, 2), 2..50),
            k in 1usize..4,
            max_dist in 0.5f64..3.0,
        ) {
            // coarse integer grid to force plenty of exact ties
            let rows: Vec<(String, Vec<f64>)> = pts.iter().enumerate()
                .map(|(i, p)| (format!("t{i}"), p.iter().map(|&x| f64::from(x) * 0.5).collect()))
                .collect();
            let s = EmbeddingSpace::from_pairs(rows).unwrap();
            let syn = build_synonyms_knn(&s, k, max_dist).unwrap();
            let oracle = knn_oracle(&s, k, max_dist);
            for id in 0..s.vocab.len() {
                prop_assert_eq!(syn.get(id), oracle[id].as_slice());
            }
        }

        #[test]
        fn synonym_invariants_hold(
            size in 1usize..20,
            lists in prop::collection::vec((0usize..25, prop::collection::vec(0usize..25, 0..8)), 0..20),
        ) {
            let set = SynonymSet::from_lists(size, lists);
            for (key, list) in set.iter() {
                prop_assert!(!list.contains(&key));
                prop_assert!(list.iter().all(|&j| j < size));
                let mut sorted = list.to_vec();
                sorted.sort_unstable();
                sorted.dedup();
                prop_assert_eq!(sorted.len(), list.len());
            }
        }

        #[test]
        fn encode_returns_stored_rows_bit_exact(
            vals in prop::collection::vec(-1e6f64..1e6, 12),
            ids in prop::collection::vec(0usize..4, 1..10),
        ) {
            let rows: Vec<(String, Vec<f64>)> = vals.chunks(3).enumerate()
                .map(|(i, c)| (format!("w{i}"), c.to_vec())).collect();
            let s = EmbeddingSpace::from_pairs(rows).unwrap();
            let e = s.encode(&ids, 64).unwrap();
            for (pos, &id) in ids.iter().enumerate() {
                let got: Vec<u64> = e.vectors.row(pos).iter().map(|v| v.to_bits()).collect();
                let want: Vec<u64> = s.emb.row(id).iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(got, want);
            }
        }
    }
}
