//! Run configuration files (YAML or JSON).
//!
//! A run config is the loop configuration plus a `data` section saying where
//! the corpora and initial embeddings come from:
//!
//! ```yaml
//! iterations: 3
//! langs: [en, ro, de]
//! pivots: [en]
//! margin:
//!   - {k: 5, tau: 1.04}
//!   - {k: 5, tau: 1.05}
//!   - {k: 5, tau: 1.06}
//! trainer: {kind: procrustes}
//! seed: 7
//! eval: {criterion: cosine, k: 5}
//! data:
//!   kind: synthetic
//!   n: 5000
//!   dim: 32
//!   noise_sigma: 0.05
//! ```
//!
//! or, for real corpora,
//!
//! ```yaml
//! data:
//!   kind: files
//!   dim: 64              # toy embedding size when `embeddings` is absent
//!   dedup: true
//!   subsample: 100000
//!   corpora:
//!     en: {path: en.txt}
//!     ro: {path: ro.jsonl, format: jsonl, embeddings: ro.crem}
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use bitext_core::corpus::{dedup, load_corpus, subsample, Corpus, CorpusFormat};
use bitext_core::embeddings::{
    ids_path, read_matrix, synth_world, toy_embed, EmbeddingMatrix, PRESET_MISALIGNMENT,
};
use bitext_core::miner::MarginConfig;
use bitext_core::training::{EvalConfig, LanguageData, LoopConfig, TrainerSpec};
use serde::{Deserialize, Serialize};
use tracing::info;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub iterations: usize,
    pub langs: Vec<String>,
    pub pivots: Vec<String>,
    pub margin: Vec<MarginConfig>,
    #[serde(default)]
    pub trainer: TrainerSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub eval: Option<EvalConfig>,
    pub data: DataSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSpec {
    /// Row-aligned synthetic languages with known ground truth.
    Synthetic {
        n: usize,
        dim: usize,
        #[serde(default = "default_noise")]
        noise_sigma: f64,
        #[serde(default)]
        misalignment: Option<f64>,
    },
    Files {
        corpora: BTreeMap<String, CorpusSpec>,
        #[serde(default)]
        dim: Option<usize>,
        #[serde(default)]
        dedup: bool,
        /// Per-language cap; every language is sampled with the run seed.
        #[serde(default)]
        subsample: Option<usize>,
    },
}

fn default_noise() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: CorpusFormat,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
}

impl RunConfig {
    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            iterations: self.iterations,
            langs: self.langs.clone(),
            pivots: self.pivots.clone(),
            margin: self.margin.clone(),
            trainer: self.trainer.clone(),
            seed: self.seed,
            eval: self.eval,
        }
    }

    /// Makes every data path absolute, relative to `base`.
    fn resolve_paths(&mut self, base: &Path) {
        if let DataSpec::Files { corpora, .. } = &mut self.data {
            for spec in corpora.values_mut() {
                spec.path = base.join(&spec.path);
                if let Some(e) = &mut spec.embeddings {
                    *e = base.join(&*e);
                }
            }
        }
    }
}

/// Parses a config file, choosing YAML or JSON by extension (YAML when in
/// doubt). Errors name the offending field path.
pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut cfg = parse_config(&text, is_json).map_err(|message| CliError::Config {
        path: path.to_path_buf(),
        message,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = std::path::absolute(&base).unwrap_or(base);
    cfg.resolve_paths(&base);
    cfg.loop_config().validate().map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(cfg)
}

fn parse_config(text: &str, json: bool) -> Result<RunConfig, String> {
    if json {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| format_path_error(e.path(), e.inner()))
    } else {
        let de = serde_yaml::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| format_path_error(e.path(), e.inner()))
    }
}

fn format_path_error(path: &serde_path_to_error::Path, inner: &dyn std::fmt::Display) -> String {
    let at = path.to_string();
    let inner = inner.to_string();
    if at == "." || inner.starts_with(&at) {
        inner
    } else {
        format!("{at}: {inner}")
    }
}

/// Loads or generates the corpora and initial embeddings, in `langs` order.
pub fn load_data(cfg: &RunConfig) -> CliResult<Vec<LanguageData>> {
    match &cfg.data {
        DataSpec::Synthetic {
            n,
            dim,
            noise_sigma,
            misalignment,
        } => {
            let m = misalignment.unwrap_or(PRESET_MISALIGNMENT);
            let (world, matrices) = synth_world(*n, *dim, &cfg.langs, *noise_sigma, m, cfg.seed)?;
            Ok(cfg
                .langs
                .iter()
                .zip(matrices)
                .map(|(lang, initial)| LanguageData {
                    corpus: world.corpus(lang),
                    initial,
                })
                .collect())
        }
        DataSpec::Files {
            corpora,
            dim,
            dedup: do_dedup,
            subsample: cap,
        } => cfg
            .langs
            .iter()
            .map(|lang| {
                let spec = corpora.get(lang).ok_or_else(|| {
                    CliError::Usage(format!("data.corpora: no entry for language {lang}"))
                })?;
                load_language(lang, spec, *dim, *do_dedup, *cap, cfg.seed)
            })
            .collect(),
    }
}

fn load_language(
    lang: &str,
    spec: &CorpusSpec,
    dim: Option<usize>,
    do_dedup: bool,
    cap: Option<usize>,
    seed: u64,
) -> CliResult<LanguageData> {
    let raw = load_corpus(&spec.path, lang, spec.format)?;
    let mut corpus = raw.clone();
    if do_dedup {
        corpus = dedup(&corpus);
    }
    if let Some(cap) = cap {
        corpus = subsample(&corpus, cap, seed)?;
    }
    info!(lang, sentences = corpus.len(), "loaded corpus");

    let initial = match &spec.embeddings {
        Some(path) => {
            let mut m = read_matrix(path)?;
            if !ids_path(path).exists() {
                m = adopt_corpus_ids(m, &raw, path)?;
            }
            m.select_ids(corpus.ids())?
        }
        None => {
            let dim = dim.ok_or_else(|| {
                CliError::Usage(format!(
                    "data.dim is required because {lang} has no embeddings file"
                ))
            })?;
            toy_embed(&corpus, dim, seed)?
        }
    };
    Ok(LanguageData { corpus, initial })
}

/// Gives a sidecar-less embedding file the ids of the corpus it was
/// computed from, which must have the same number of rows.
fn adopt_corpus_ids(m: EmbeddingMatrix, raw: &Corpus, path: &Path) -> CliResult<EmbeddingMatrix> {
    if m.len() != raw.len() {
        return Err(CliError::Usage(format!(
            "{}: {} rows but corpus {} has {} sentences",
            path.display(),
            m.len(),
            raw.lang(),
            raw.len()
        )));
    }
    Ok(m.with_ids(raw.ids().to_vec())?)
}

/// Maps external ids to row ordinals.
pub fn id_index(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect()
}
