use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::miner::MinedSet;

/// Marker naming the language a target sentence is written in.
pub fn target_token(lang: &str) -> String {
    format!("__{lang}__")
}

/// Prefixes `text` with the target-language token and a space.
pub fn augment_target(text: &str, tgt_lang: &str) -> String {
    format!("{} {text}", target_token(tgt_lang))
}

/// Splits a token-prefixed target back into `(lang, text)`.
pub fn strip_target_token(augmented: &str) -> Option<(&str, &str)> {
    let rest = augmented.strip_prefix("__")?;
    let end = rest.find("__ ")?;
    let lang = &rest[..end];
    (!lang.is_empty()).then(|| (lang, &rest[end + 3..]))
}

/// One line of the aggregated training file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub src_lang: String,
    pub src_id: String,
    pub tgt_lang: String,
    pub tgt_id: String,
    pub source: String,
    /// Target text with its language token.
    pub target: String,
}

pub fn training_examples(set: &MinedSet, src: &Corpus, tgt: &Corpus) -> Vec<TrainingExample> {
    set.pairs
        .iter()
        .map(|p| TrainingExample {
            src_lang: set.src_lang.clone(),
            src_id: src.external_id(p.src).to_owned(),
            tgt_lang: set.tgt_lang.clone(),
            tgt_id: tgt.external_id(p.tgt).to_owned(),
            source: src.text(p.src).to_owned(),
            target: augment_target(tgt.text(p.tgt), &set.tgt_lang),
        })
        .collect()
}

/// Writes all examples to one TSV:
/// `src_lang \t src_id \t tgt_lang \t tgt_id \t source \t target`.
pub fn write_training_file<'a>(
    examples: impl IntoIterator<Item = &'a TrainingExample>,
    path: impl AsRef<Path>,
) -> Result<usize> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut lines = 0;
    (|| {
        for ex in examples {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                ex.src_lang, ex.src_id, ex.tgt_lang, ex.tgt_id, ex.source, ex.target
            )?;
            lines += 1;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))?;
    Ok(lines)
}
