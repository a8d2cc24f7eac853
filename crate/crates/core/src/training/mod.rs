//! The iterative mine-then-train loop.
//!
//! Each iteration mines every planned direction with the current model's
//! embeddings, then retrains from the *initial* model on the freshly mined
//! pairs only. The built-in trainer fits orthogonal Procrustes maps; an
//! external command can stand in for a real sequence-to-sequence trainer.

mod augment;
mod external;
mod procrustes;
mod run;

pub use augment::{
    augment_target, strip_target_token, target_token, training_examples, write_training_file,
    TrainingExample,
};
pub use external::{load_trained, ExternalTrainer, INITIAL_EMB_ENV, LANGS_ENV};
pub use procrustes::{orthogonal_procrustes, procrustes_train, transform, AlignmentMap};
pub use run::{
    run_criss, run_criss_with, IterationRecord, IterationState, LanguageData, MinedFile,
    RunManifest, RunOptions, RunOutcome, RunStatus, StageTimings, MANIFEST_FILE,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::evalkit::Criterion;
use crate::miner::{mining_plan, MarginConfig, MinedSet};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TrainerSpec {
    #[default]
    Procrustes,
    External {
        command: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub criterion: Criterion,
    #[serde(default = "default_eval_k")]
    pub k: usize,
}

fn default_eval_k() -> usize {
    crate::miner::DEFAULT_K
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            criterion: Criterion::Cosine,
            k: default_eval_k(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    pub iterations: usize,
    pub langs: Vec<String>,
    /// The first pivot is the reference space for alignment.
    pub pivots: Vec<String>,
    /// One mining configuration per iteration.
    pub margin: Vec<MarginConfig>,
    #[serde(default)]
    pub trainer: TrainerSpec,
    #[serde(default)]
    pub seed: u64,
    /// Row-index retrieval evaluation after each iteration; requires
    /// row-aligned corpora.
    #[serde(default)]
    pub eval: Option<EvalConfig>,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if self.margin.len() != self.iterations {
            return Err(Error::invalid(format!(
                "margin: expected {} per-iteration entries, found {}",
                self.iterations,
                self.margin.len()
            )));
        }
        for (t, m) in self.margin.iter().enumerate() {
            m.validate()
                .map_err(|e| Error::invalid(format!("margin[{t}]: {e}")))?;
        }
        if self.langs.len() < 2 {
            return Err(Error::invalid("langs: need at least two languages"));
        }
        mining_plan(&self.langs, &self.pivots)?;
        if let TrainerSpec::External { command } = &self.trainer {
            if command.trim().is_empty() {
                return Err(Error::invalid("trainer.command is empty"));
            }
        }
        if let Some(e) = &self.eval {
            if e.k == 0 {
                return Err(Error::invalid("eval.k must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn reference(&self) -> &str {
        &self.pivots[0]
    }
}

/// Everything a trainer sees for one iteration.
#[derive(Debug)]
pub struct TrainInput<'a> {
    pub iteration: usize,
    pub langs: &'a [String],
    pub reference: &'a str,
    pub mined: &'a [MinedSet],
    /// Initial-model embeddings, in `langs` order.
    pub initial: &'a [EmbeddingMatrix],
    /// Aggregated, token-augmented training pairs.
    pub pairs_file: &'a Path,
    pub out_dir: &'a Path,
    /// Directory with `<lang>.crem` copies of the initial embeddings.
    pub initial_dir: &'a Path,
}

/// Produces the next model's embeddings, in `langs` order.
pub trait Trainer {
    fn train(&self, input: &TrainInput<'_>) -> Result<Vec<EmbeddingMatrix>>;

    /// Whether the initial embeddings must exist on disk under `initial_dir`.
    fn needs_initial_files(&self) -> bool {
        false
    }
}

/// Orthogonal Procrustes onto the reference language, refit from scratch
/// every iteration and applied to the initial embeddings.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProcrustesTrainer;

impl Trainer for ProcrustesTrainer {
    fn train(&self, input: &TrainInput<'_>) -> Result<Vec<EmbeddingMatrix>> {
        let embeddings: Vec<(&str, &EmbeddingMatrix)> = input
            .langs
            .iter()
            .map(String::as_str)
            .zip(input.initial)
            .collect();
        let map = procrustes_train(input.mined, &embeddings, input.reference)?;
        embeddings
            .iter()
            .map(|(lang, m)| map.apply(lang, m))
            .collect()
    }
}

impl Trainer for ExternalTrainer {
    fn train(&self, input: &TrainInput<'_>) -> Result<Vec<EmbeddingMatrix>> {
        let written = self.run(
            input.iteration,
            input.pairs_file,
            input.out_dir,
            input.langs,
            input.initial_dir,
        )?;
        written
            .iter()
            .zip(input.initial)
            .map(|((_, path), initial)| load_trained(path, initial))
            .collect()
    }

    fn needs_initial_files(&self) -> bool {
        true
    }
}
