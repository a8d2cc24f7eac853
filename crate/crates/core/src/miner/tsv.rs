//! Mined-pair TSV files:
//! `score \t src_lang \t src_id \t tgt_lang \t tgt_id \t src_text \t tgt_text`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::MinedSet;
use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MinedRecord {
    pub score: f64,
    pub src_lang: String,
    pub src_id: String,
    pub tgt_lang: String,
    pub tgt_id: String,
    pub src_text: String,
    pub tgt_text: String,
}

pub fn write_tsv(set: &MinedSet, src: &Corpus, tgt: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if src.lang() != set.src_lang || tgt.lang() != set.tgt_lang {
        return Err(Error::invalid(format!(
            "corpora {}-{} do not match mined direction {}-{}",
            src.lang(),
            tgt.lang(),
            set.src_lang,
            set.tgt_lang
        )));
    }
    if let Some(p) = set
        .pairs
        .iter()
        .find(|p| p.src.index() >= src.len() || p.tgt.index() >= tgt.len())
    {
        return Err(Error::invalid(format!(
            "pair ({}, {}) out of range for corpora of size {} and {}",
            p.src,
            p.tgt,
            src.len(),
            tgt.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| {
        for p in &set.pairs {
            writeln!(
                w,
                "{:.6}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.score,
                set.src_lang,
                src.external_id(p.src),
                set.tgt_lang,
                tgt.external_id(p.tgt),
                src.text(p.src),
                tgt.text(p.tgt)
            )?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

pub fn read_tsv(path: impl AsRef<Path>) -> Result<Vec<MinedRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let schema = |message: String| Error::Schema {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 7 {
                return Err(schema(format!(
                    "expected 7 tab-separated fields, found {}",
                    f.len()
                )));
            }
            let score = f[0]
                .parse::<f64>()
                .map_err(|e| schema(format!("bad score {:?}: {e}", f[0])))?;
            Ok(MinedRecord {
                score,
                src_lang: f[1].to_owned(),
                src_id: f[2].to_owned(),
                tgt_lang: f[3].to_owned(),
                tgt_id: f[4].to_owned(),
                src_text: f[5].to_owned(),
                tgt_text: f[6].to_owned(),
            })
        })
        .collect()
}
