//! Labelled token-id corpora and their TSV file format
//! (`label<TAB>token token …`, 0-based labels).

use std::fs;
use std::path::Path;

use crate::embedding::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub tokens: Vec<usize>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub n_classes: usize,
    /// Language tag, e.g. `"src"` or `"src@far"`.
    pub language: String,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, n_classes: usize, language: impl Into<String>) -> Result<Self> {
        let data = Self {
            examples,
            n_classes,
            language: language.into(),
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        for ex in &self.examples {
            if ex.tokens.is_empty() {
                return Err(Error::EmptyExample);
            }
            if ex.label >= self.n_classes {
                return Err(Error::LabelOutOfRange {
                    label: ex.label,
                    n_classes: self.n_classes,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Reads a dataset, mapping unknown tokens to UNK. `n_classes` defaults to
/// one more than the largest label seen.
pub fn load_dataset(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    n_classes: Option<usize>,
    language: &str,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, vocab, n_classes, language, path)
}

pub fn parse_dataset(
    text: &str,
    vocab: &Vocabulary,
    n_classes: Option<usize>,
    language: &str,
    path: impl AsRef<Path>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let mut examples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, body) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected label<TAB>tokens"))?;
        let label: usize = label
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("invalid label {label:?}")))?;
        let tokens: Vec<usize> = body.split_whitespace().map(|t| vocab.id_or_unk(t)).collect();
        if tokens.is_empty() {
            return Err(Error::parse(path, i + 1, "empty example"));
        }
        examples.push(Example { tokens, label });
    }
    let n_classes = n_classes.unwrap_or_else(|| examples.iter().map(|e| e.label + 1).max().unwrap_or(0));
    Dataset::new(examples, n_classes, language)
}

pub fn format_dataset(data: &Dataset, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for ex in &data.examples {
        let words: Vec<&str> = ex
            .tokens
            .iter()
            .map(|&t| vocab.token(t).unwrap_or(crate::embedding::UNK))
            .collect();
        out.push_str(&format!("{}\t{}\n", ex.label, words.join(" ")));
    }
    out
}

pub fn write_dataset(data: &Dataset, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_dataset(data, vocab)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::new(vec!["this".into(), "is".into(), "a".into(), "cat".into()]).unwrap()
    }

    #[test]
    fn parses_and_formats() {
        let v = vocab();
        let d = parse_dataset("1\tthis is a cat\n0\tcat dog\n", &v, None, "en", "d.tsv").unwrap();
        assert_eq!(d.n_classes, 2);
        assert_eq!(d.examples[0].tokens, vec![0, 1, 2, 3]);
        assert_eq!(d.examples[1].tokens, vec![3, v.unk_id()]);
        assert_eq!(format_dataset(&d, &v), "1\tthis is a cat\n0\tcat <unk>\n");
    }

    #[test]
    fn rejects_bad_lines() {
        let v = vocab();
        assert!(parse_dataset("x\tcat\n", &v, None, "en", "d").is_err());
        assert!(parse_dataset("0 cat\n", &v, None, "en", "d").is_err());
        assert!(parse_dataset("0\t \n", &v, None, "en", "d").is_err());
        assert!(matches!(
            parse_dataset("3\tcat\n", &v, Some(2), "en", "d"),
            Err(Error::LabelOutOfRange { .. })
        ));
    }
}
