//! Iteration driver and run-directory persistence.
//!
//! Layout under the run directory:
//!
//! ```text
//! manifest.json
//! initial/<lang>.crem          (only for trainers that read files)
//! iter<t>/mined/<src>-<tgt>.tsv
//! iter<t>/train.tsv
//! iter<t>/stats.json
//! iter<t>/emb/<lang>.crem
//! iter<t>/report.json
//! ```
//!
//! The manifest records a SHA-256 per artifact and a digest of each
//! iteration's inputs (its slice of the configuration plus the initial data).
//! On resume an iteration is reused only if its inputs and artifacts still
//! match and every earlier iteration was reused or recomputed to identical
//! bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::{info, warn};

use super::{ExternalTrainer, LoopConfig, ProcrustesTrainer, TrainInput, Trainer, TrainerSpec};
use crate::corpus::Corpus;
use crate::embeddings::{read_matrix, write_matrix, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::evalkit::{mining_stats, multiway_matrix, MiningStats, RetrievalReport};
use crate::miner::{mine_pair, mining_plan, write_tsv, MinedSet, Side};
use crate::training::{training_examples, write_training_file};

pub const MANIFEST_FILE: &str = "manifest.json";

/// A corpus with its initial-model embeddings.
#[derive(Debug, Clone)]
pub struct LanguageData {
    pub corpus: Corpus,
    pub initial: EmbeddingMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub mine_ms: u64,
    pub train_ms: u64,
    pub eval_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// SHA-256 of the settings and data this iteration depends on.
    pub inputs: String,
    /// Run-relative path to SHA-256 hex digest.
    pub artifacts: BTreeMap<String, String>,
    /// Pair count per `src-tgt` direction.
    pub mined_counts: BTreeMap<String, usize>,
    pub average_accuracy: f64,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    pub status: RunStatus,
    /// Snapshot of the configuration that produced this run.
    pub config: serde_json::Value,
    pub initial_report: Option<RetrievalReport>,
    pub iterations: Vec<IterationRecord>,
}

impl RunManifest {
    pub fn read(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json { path, source: e })
    }

    /// Writes via a temporary file and rename.
    pub fn write(&self, run_dir: &Path) -> Result<()> {
        let path = run_dir.join(MANIFEST_FILE);
        let tmp = run_dir.join(format!("{MANIFEST_FILE}.tmp"));
        let mut json = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.clone(),
            source: e,
        })?;
        json.push('\n');
        std::fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinedFile {
    pub src: String,
    pub tgt: String,
    pub path: PathBuf,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct IterationState {
    pub iteration: usize,
    pub mined: Vec<MinedFile>,
    pub embeddings: Vec<(String, PathBuf)>,
    pub report: RetrievalReport,
    pub stats: MiningStats,
    /// True when the artifacts were taken from an earlier run on resume.
    pub reused: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub initial_report: RetrievalReport,
    pub states: Vec<IterationState>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub resume: bool,
    /// Stored verbatim in the manifest; defaults to the loop config.
    pub config_snapshot: Option<serde_json::Value>,
}

fn iter_dir(run_dir: &Path, t: usize) -> PathBuf {
    run_dir.join(format!("iter{t}"))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    json.push('\n');
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Digest of the initial corpora and embeddings.
fn data_digest(data: &[LanguageData]) -> String {
    let mut h = Sha256::new();
    for d in data {
        h.update(d.corpus.lang().as_bytes());
        h.update([0]);
        for (id, text) in d.corpus.ids().iter().zip(d.corpus.sentences()) {
            h.update(id.as_bytes());
            h.update([0]);
            h.update(text.as_bytes());
            h.update([0]);
        }
        h.update((d.initial.dim() as u64).to_le_bytes());
        for v in d.initial.as_slice() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Digest of everything iteration `t` depends on besides earlier iterations.
fn iteration_inputs(cfg: &LoopConfig, data_digest: &str, t: usize) -> String {
    let settings = serde_json::json!({
        "iteration": t,
        "langs": cfg.langs,
        "pivots": cfg.pivots,
        "margin": cfg.margin[t - 1],
        "trainer": cfg.trainer,
        "eval": cfg.eval,
        "data": data_digest,
    });
    hex::encode(Sha256::digest(settings.to_string().as_bytes()))
}

fn artifacts_intact(run_dir: &Path, record: &IterationRecord) -> bool {
    !record.artifacts.is_empty()
        && record
            .artifacts
            .iter()
            .all(|(rel, digest)| sha256_file(&run_dir.join(rel)).is_ok_and(|d| &d == digest))
}

fn evaluate(cfg: &LoopConfig, embeddings: &[EmbeddingMatrix]) -> Result<RetrievalReport> {
    let Some(eval) = cfg.eval else {
        return Ok(RetrievalReport::new(Default::default(), 0, Vec::new()));
    };
    let n = embeddings[0].len();
    if embeddings.iter().any(|m| m.len() != n) {
        warn!("corpora differ in size; skipping row-index evaluation");
        return Ok(RetrievalReport::new(eval.criterion, eval.k, Vec::new()));
    }
    let langs: Vec<(&str, &EmbeddingMatrix)> = cfg
        .langs
        .iter()
        .map(String::as_str)
        .zip(embeddings)
        .collect();
    multiway_matrix(&langs, eval.criterion, eval.k)
}

fn check_data(cfg: &LoopConfig, data: &[LanguageData]) -> Result<()> {
    if data.len() != cfg.langs.len() {
        return Err(Error::invalid(format!(
            "{} languages configured but data for {}",
            cfg.langs.len(),
            data.len()
        )));
    }
    let dim = data[0].initial.dim();
    for (lang, d) in cfg.langs.iter().zip(data) {
        if d.corpus.lang() != lang {
            return Err(Error::invalid(format!(
                "data for {} supplied where {lang} was expected",
                d.corpus.lang()
            )));
        }
        d.initial.validate()?;
        d.initial.check_bound_to(&d.corpus)?;
        if d.initial.dim() != dim {
            return Err(Error::DimMismatch {
                left: dim,
                right: d.initial.dim(),
            });
        }
    }
    Ok(())
}

/// Runs the loop with the trainer named in `cfg`.
pub fn run_criss(
    cfg: &LoopConfig,
    data: &[LanguageData],
    run_dir: &Path,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    match &cfg.trainer {
        TrainerSpec::Procrustes => run_criss_with(cfg, data, run_dir, opts, &ProcrustesTrainer),
        TrainerSpec::External { command } => run_criss_with(
            cfg,
            data,
            run_dir,
            opts,
            &ExternalTrainer::new(command.clone()),
        ),
    }
}

/// Runs the loop with an explicit trainer.
pub fn run_criss_with(
    cfg: &LoopConfig,
    data: &[LanguageData],
    run_dir: &Path,
    opts: &RunOptions,
    trainer: &dyn Trainer,
) -> Result<RunOutcome> {
    cfg.validate()?;
    check_data(cfg, data)?;
    mkdir(run_dir)?;

    let previous = if opts.resume {
        Some(RunManifest::read(run_dir)?)
    } else {
        if run_dir.join(MANIFEST_FILE).exists() {
            return Err(Error::invalid(format!(
                "{} already holds a run; resume it or choose another directory",
                run_dir.display()
            )));
        }
        None
    };
    let old_records: BTreeMap<usize, IterationRecord> = previous
        .iter()
        .flat_map(|m| m.iterations.iter().cloned())
        .map(|r| (r.iteration, r))
        .collect();

    let initial: Vec<EmbeddingMatrix> = data.iter().map(|d| d.initial.clone()).collect();
    let initial_report = evaluate(cfg, &initial)?;
    info!(
        average = initial_report.average,
        "initial retrieval accuracy"
    );

    let config = match &opts.config_snapshot {
        Some(v) => v.clone(),
        None => serde_json::to_value(cfg).expect("loop config serializes"),
    };
    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        seed: cfg.seed,
        status: RunStatus::Running,
        config,
        initial_report: Some(initial_report.clone()),
        iterations: Vec::new(),
    };
    manifest.write(run_dir)?;

    let initial_dir = run_dir.join("initial");
    if trainer.needs_initial_files() {
        mkdir(&initial_dir)?;
        for (lang, m) in cfg.langs.iter().zip(&initial) {
            write_matrix(m, initial_dir.join(format!("{lang}.crem")))?;
        }
    }

    let plan = mining_plan(&cfg.langs, &cfg.pivots)?;
    let mut current = initial.clone();
    let mut chain_intact = true;
    let mut states = Vec::with_capacity(cfg.iterations);
    let data_digest = data_digest(data);

    for t in 1..=cfg.iterations {
        let inputs = iteration_inputs(cfg, &data_digest, t);
        let reusable = chain_intact
            && old_records
                .get(&t)
                .is_some_and(|r| r.inputs == inputs && artifacts_intact(run_dir, r));

        let (state, record, next) = if reusable {
            let record = old_records[&t].clone();
            let (state, next) = load_iteration(cfg, data, run_dir, &record, &plan)?;
            info!(iteration = t, "reusing completed iteration");
            (state, record, next)
        } else {
            let (state, record, next) = compute_iteration(
                cfg,
                data,
                &initial,
                &current,
                &plan,
                run_dir,
                &initial_dir,
                t,
                inputs,
                trainer,
            )?;
            if old_records.get(&t).map(|r| &r.artifacts) != Some(&record.artifacts) {
                chain_intact = false;
            }
            (state, record, next)
        };

        current = next;
        manifest.iterations.push(record);
        manifest.write(run_dir)?;
        states.push(state);
    }

    manifest.status = RunStatus::Complete;
    manifest.write(run_dir)?;
    Ok(RunOutcome {
        initial_report,
        states,
    })
}

fn rel(run_dir: &Path, path: &Path) -> String {
    path.strip_prefix(run_dir)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

fn mined_path(dir: &Path, src: &str, tgt: &str) -> PathBuf {
    dir.join("mined").join(format!("{src}-{tgt}.tsv"))
}

fn emb_path(dir: &Path, lang: &str) -> PathBuf {
    dir.join("emb").join(format!("{lang}.crem"))
}

#[allow(clippy::too_many_arguments)]
fn compute_iteration(
    cfg: &LoopConfig,
    data: &[LanguageData],
    initial: &[EmbeddingMatrix],
    current: &[EmbeddingMatrix],
    plan: &[(String, String)],
    run_dir: &Path,
    initial_dir: &Path,
    t: usize,
    inputs: String,
    trainer: &dyn Trainer,
) -> Result<(IterationState, IterationRecord, Vec<EmbeddingMatrix>)> {
    let dir = iter_dir(run_dir, t);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    mkdir(&dir.join("mined"))?;
    mkdir(&dir.join("emb"))?;
    let margin = cfg.margin[t - 1];
    let pos = |lang: &str| {
        cfg.langs
            .iter()
            .position(|l| l == lang)
            .expect("planned language")
    };

    let started = Instant::now();
    let mined: Vec<MinedSet> = plan
        .par_iter()
        .map(|(s, g)| {
            let (si, gi) = (pos(s), pos(g));
            mine_pair(
                Side::new(s, &current[si]),
                Side::new(g, &current[gi]),
                &margin,
            )
        })
        .collect::<Result<_>>()?;
    let mine_ms = started.elapsed().as_millis() as u64;

    let mut artifacts = BTreeMap::new();
    let mut mined_files = Vec::with_capacity(mined.len());
    let mut examples = Vec::new();
    let mut mined_counts = BTreeMap::new();
    for set in &mined {
        let (si, gi) = (pos(&set.src_lang), pos(&set.tgt_lang));
        let path = mined_path(&dir, &set.src_lang, &set.tgt_lang);
        write_tsv(set, &data[si].corpus, &data[gi].corpus, &path)?;
        artifacts.insert(rel(run_dir, &path), sha256_file(&path)?);
        info!(
            iteration = t,
            direction = format!("{}-{}", set.src_lang, set.tgt_lang),
            pairs = set.len(),
            "mined"
        );
        mined_counts.insert(format!("{}-{}", set.src_lang, set.tgt_lang), set.len());
        examples.extend(training_examples(set, &data[si].corpus, &data[gi].corpus));
        mined_files.push(MinedFile {
            src: set.src_lang.clone(),
            tgt: set.tgt_lang.clone(),
            path,
            count: set.len(),
        });
    }
    let stats = mining_stats(&mined);
    let stats_path = dir.join("stats.json");
    write_json(&stats, &stats_path)?;
    artifacts.insert(rel(run_dir, &stats_path), sha256_file(&stats_path)?);
    let pairs_file = dir.join("train.tsv");
    write_training_file(&examples, &pairs_file)?;
    artifacts.insert(rel(run_dir, &pairs_file), sha256_file(&pairs_file)?);

    let started = Instant::now();
    let out_dir = dir.join("emb");
    let trained = trainer.train(&TrainInput {
        iteration: t,
        langs: &cfg.langs,
        reference: cfg.reference(),
        mined: &mined,
        initial,
        pairs_file: &pairs_file,
        out_dir: &out_dir,
        initial_dir,
    })?;
    let train_ms = started.elapsed().as_millis() as u64;
    if trained.len() != cfg.langs.len() {
        return Err(Error::Protocol(format!(
            "trainer returned {} matrices for {} languages",
            trained.len(),
            cfg.langs.len()
        )));
    }

    let mut embeddings = Vec::with_capacity(trained.len());
    for (lang, (m, d)) in cfg.langs.iter().zip(trained.iter().zip(data)) {
        m.validate()?;
        m.check_bound_to(&d.corpus)?;
        let path = emb_path(&dir, lang);
        write_matrix(m, &path)?;
        artifacts.insert(rel(run_dir, &path), sha256_file(&path)?);
        embeddings.push((lang.clone(), path));
    }

    let started = Instant::now();
    let report = evaluate(cfg, &trained)?;
    let eval_ms = started.elapsed().as_millis() as u64;
    info!(
        iteration = t,
        average = report.average,
        "retrieval accuracy"
    );
    let report_path = dir.join("report.json");
    report.write(&report_path)?;
    artifacts.insert(rel(run_dir, &report_path), sha256_file(&report_path)?);

    let record = IterationRecord {
        iteration: t,
        inputs,
        artifacts,
        mined_counts,
        average_accuracy: report.average,
        timings: StageTimings {
            mine_ms,
            train_ms,
            eval_ms,
        },
    };
    let state = IterationState {
        iteration: t,
        mined: mined_files,
        embeddings,
        report,
        stats,
        reused: false,
    };
    Ok((state, record, trained))
}

fn load_iteration(
    cfg: &LoopConfig,
    data: &[LanguageData],
    run_dir: &Path,
    record: &IterationRecord,
    plan: &[(String, String)],
) -> Result<(IterationState, Vec<EmbeddingMatrix>)> {
    let t = record.iteration;
    let dir = iter_dir(run_dir, t);
    let mut next = Vec::with_capacity(cfg.langs.len());
    let mut embeddings = Vec::with_capacity(cfg.langs.len());
    for (lang, d) in cfg.langs.iter().zip(data) {
        let path = emb_path(&dir, lang);
        let m = read_matrix(&path)?;
        m.check_bound_to(&d.corpus)?;
        next.push(m);
        embeddings.push((lang.clone(), path));
    }
    let mined = plan
        .iter()
        .map(|(s, g)| MinedFile {
            src: s.clone(),
            tgt: g.clone(),
            path: mined_path(&dir, s, g),
            count: record
                .mined_counts
                .get(&format!("{s}-{g}"))
                .copied()
                .unwrap_or(0),
        })
        .collect();
    let state = IterationState {
        iteration: t,
        mined,
        embeddings,
        report: RetrievalReport::read(dir.join("report.json"))?,
        stats: read_json(&dir.join("stats.json"))?,
        reused: true,
    };
    Ok((state, next))
}
