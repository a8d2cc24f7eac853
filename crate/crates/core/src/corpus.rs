//! Monolingual sentence corpora.
//!
//! A [`Corpus`] is an ordered, immutable list of sentences in one language.
//! Rows are addressed by a dense [`SentenceId`] (the row ordinal) and carry an
//! external string id that survives subsampling and deduplication.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row ordinal within one corpus or embedding matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceId(pub u32);

impl SentenceId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for SentenceId {
    fn from(i: usize) -> Self {
        SentenceId(u32::try_from(i).expect("row ordinal exceeds u32"))
    }
}

impl fmt::Display for SentenceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// One sentence per LF-terminated line.
    #[default]
    Plain,
    /// One JSON object per line with string fields `id`, `text`, `lang`.
    Jsonl,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" | "txt" => Ok(CorpusFormat::Plain),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(Error::invalid(format!("unknown corpus format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    lang: String,
    ids: Vec<String>,
    sentences: Vec<String>,
}

impl Corpus {
    /// Builds a corpus, checking that ids are unique, counts agree, and no
    /// sentence is empty or contains a tab or newline.
    pub fn new(lang: impl Into<String>, ids: Vec<String>, sentences: Vec<String>) -> Result<Self> {
        let lang = lang.into();
        if ids.len() != sentences.len() {
            return Err(Error::invalid(format!(
                "corpus {lang}: {} ids for {} sentences",
                ids.len(),
                sentences.len()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for (row, (id, text)) in ids.iter().zip(&sentences).enumerate() {
            if text.trim().is_empty() {
                return Err(Error::invalid(format!("corpus {lang}: row {row} is empty")));
            }
            if let Some(c) = forbidden_char(text).or_else(|| forbidden_char(id)) {
                return Err(Error::invalid(format!(
                    "corpus {lang}: row {row} contains {c:?}"
                )));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!(
                    "corpus {lang}: duplicate id {id:?}"
                )));
            }
        }
        Ok(Corpus {
            lang,
            ids,
            sentences,
        })
    }

    /// Builds a corpus whose external ids are the row ordinals.
    pub fn from_sentences<I, S>(lang: impl Into<String>, sentences: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sentences: Vec<String> = sentences.into_iter().map(Into::into).collect();
        let ids = (0..sentences.len()).map(|i| i.to_string()).collect();
        Corpus::new(lang, ids, sentences)
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn text(&self, id: SentenceId) -> &str {
        &self.sentences[id.index()]
    }

    pub fn external_id(&self, id: SentenceId) -> &str {
        &self.ids[id.index()]
    }

    /// Keeps the rows at `ordinals`, which must be strictly increasing.
    fn select(&self, ordinals: impl IntoIterator<Item = usize>) -> Corpus {
        let mut ids = Vec::new();
        let mut sentences = Vec::new();
        for i in ordinals {
            ids.push(self.ids[i].clone());
            sentences.push(self.sentences[i].clone());
        }
        Corpus {
            lang: self.lang.clone(),
            ids,
            sentences,
        }
    }
}

fn forbidden_char(s: &str) -> Option<char> {
    s.chars().find(|c| matches!(c, '\t' | '\n' | '\r'))
}

#[derive(Deserialize)]
struct JsonlRow {
    id: String,
    text: String,
    lang: String,
}

/// Reads a corpus file. Blank lines are dropped; order is preserved.
///
/// Plain-format rows get the 1-based source line number as external id.
pub fn load_corpus(path: impl AsRef<Path>, lang: &str, format: CorpusFormat) -> Result<Corpus> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;

    let mut ids = Vec::new();
    let mut sentences = Vec::new();
    let mut seen = HashSet::new();
    let schema = |line: usize, message: String| Error::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };

    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = i + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw).map_err(|_| Error::Decode {
            path: path.to_path_buf(),
            line: line_no,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = match format {
            CorpusFormat::Plain => (line_no.to_string(), line.to_owned()),
            CorpusFormat::Jsonl => {
                let row: JsonlRow =
                    serde_json::from_str(line).map_err(|e| schema(line_no, e.to_string()))?;
                if row.lang != lang {
                    return Err(schema(
                        line_no,
                        format!("lang {:?} does not match declared {lang:?}", row.lang),
                    ));
                }
                if row.text.trim().is_empty() {
                    continue;
                }
                (row.id, row.text)
            }
        };
        if let Some(c) = forbidden_char(&text).or_else(|| forbidden_char(&id)) {
            return Err(schema(line_no, format!("text or id contains {c:?}")));
        }
        if !seen.insert(id.clone()) {
            return Err(schema(line_no, format!("duplicate id {id:?}")));
        }
        ids.push(id);
        sentences.push(text);
    }

    Ok(Corpus {
        lang: lang.to_owned(),
        ids,
        sentences,
    })
}

/// Returns at most `cap` sentences, chosen uniformly without replacement,
/// in their original relative order.
pub fn subsample(corpus: &Corpus, cap: usize, seed: u64) -> Result<Corpus> {
    if cap == 0 {
        return Err(Error::invalid("subsample cap must be at least 1"));
    }
    if corpus.len() <= cap {
        return Ok(corpus.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, corpus.len(), cap).into_vec();
    picked.sort_unstable();
    Ok(corpus.select(picked))
}

/// Drops exact byte-equal duplicate sentences, keeping the first occurrence.
pub fn dedup(corpus: &Corpus) -> Corpus {
    let mut seen = HashSet::with_capacity(corpus.len());
    let keep: Vec<usize> = corpus
        .sentences
        .iter()
        .enumerate()
        .filter(|(_, s)| seen.insert(s.as_str()))
        .map(|(i, _)| i)
        .collect();
    corpus.select(keep)
}
