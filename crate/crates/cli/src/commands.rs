use std::io::Write;
use std::path::{Path, PathBuf};

use bitext_core::corpus::{load_corpus, CorpusFormat};
use bitext_core::embeddings::{
    read_matrix, synth_world, toy_embed, write_matrix, PRESET_MISALIGNMENT,
};
use bitext_core::evalkit::{
    direction_accuracy, mining_stats, Criterion, MiningStats, RetrievalReport,
};
use bitext_core::miner::{mine_pair, write_tsv, CandidateRule, MarginConfig, Side};
use bitext_core::training::{run_criss, RunManifest, RunOptions, MANIFEST_FILE};
use clap::Args;

use crate::config::{id_index, load_config, load_data, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Corpus file to embed.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "xx")]
    pub lang: String,
    #[arg(long, default_value = "plain")]
    pub format: CorpusFormat,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output `.crem` file; ids go to `<out>.ids`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn embed(args: &EmbedArgs) -> CliResult<()> {
    let corpus = load_corpus(&args.corpus, &args.lang, args.format)?;
    let m = toy_embed(&corpus, args.dim, args.seed)?;
    write_matrix(&m, &args.out)?;
    println!(
        "embedded {} sentences into {} dims: {}",
        m.len(),
        m.dim(),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long)]
    pub src_emb: PathBuf,
    #[arg(long)]
    pub tgt_emb: PathBuf,
    #[arg(long)]
    pub src_corpus: PathBuf,
    #[arg(long)]
    pub tgt_corpus: PathBuf,
    #[arg(long, default_value = "src")]
    pub src_lang: String,
    #[arg(long, default_value = "tgt")]
    pub tgt_lang: String,
    /// Format of both corpus files.
    #[arg(long, default_value = "plain")]
    pub format: CorpusFormat,
    #[arg(long, default_value_t = bitext_core::miner::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = bitext_core::miner::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long)]
    pub max_pairs: Option<usize>,
    #[arg(long, default_value = "union")]
    pub candidate_rule: CandidateRule,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn mine(args: &MineArgs) -> CliResult<()> {
    let src_corpus = load_corpus(&args.src_corpus, &args.src_lang, args.format)?;
    let tgt_corpus = load_corpus(&args.tgt_corpus, &args.tgt_lang, args.format)?;
    let src = read_matrix(&args.src_emb)?;
    let tgt = read_matrix(&args.tgt_emb)?;
    src.check_bound_to(&src_corpus)?;
    tgt.check_bound_to(&tgt_corpus)?;
    let cfg = MarginConfig {
        k: args.k,
        tau: args.tau,
        max_pairs: args.max_pairs,
        candidate_rule: args.candidate_rule,
    };
    let set = mine_pair(
        Side::new(&args.src_lang, &src),
        Side::new(&args.tgt_lang, &tgt),
        &cfg,
    )?;
    write_tsv(&set, &src_corpus, &tgt_corpus, &args.out)?;
    print_stats(&mining_stats(std::slice::from_ref(&set)));
    Ok(())
}

fn print_stats(stats: &MiningStats) {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"));
    for d in &stats.directions {
        println!(
            "{}-{}: {} pairs at tau {} (score min {}, median {}, max {})",
            d.src,
            d.tgt,
            d.count,
            d.tau,
            fmt(d.min),
            fmt(d.median),
            fmt(d.max)
        );
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// YAML or JSON run configuration.
    #[arg(long, required_unless_present = "resume")]
    pub config: Option<PathBuf>,
    /// Run directory for a fresh run.
    #[arg(long, conflicts_with = "resume", required_unless_present = "resume")]
    pub out: Option<PathBuf>,
    /// Continue an existing run directory, reusing completed iterations.
    /// Without `--config` the configuration stored in the run is used.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: &RunArgs) -> CliResult<()> {
    let (run_dir, resume) = match (&args.out, &args.resume) {
        (Some(out), None) => (out.clone(), false),
        (None, Some(dir)) => (dir.clone(), true),
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --out or --resume".into(),
            ))
        }
    };
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => stored_config(&run_dir)?,
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let data = load_data(&cfg)?;
    let opts = RunOptions {
        resume,
        config_snapshot: Some(serde_json::to_value(&cfg).expect("run config serializes")),
    };
    let outcome = run_criss(&cfg.loop_config(), &data, &run_dir, &opts)?;

    let mut out = std::io::stdout().lock();
    if !outcome.initial_report.directions.is_empty() {
        let _ = writeln!(
            out,
            "initial: average accuracy {:.4}",
            outcome.initial_report.average
        );
    }
    for s in &outcome.states {
        let mined: usize = s.mined.iter().map(|m| m.count).sum();
        let _ = write!(out, "iter{}: {mined} pairs mined", s.iteration);
        if !s.report.directions.is_empty() {
            let _ = write!(out, ", average accuracy {:.4}", s.report.average);
        }
        let _ = writeln!(out, "{}", if s.reused { " (reused)" } else { "" });
    }
    let _ = writeln!(out, "run directory: {}", run_dir.display());
    Ok(())
}

fn stored_config(run_dir: &Path) -> CliResult<RunConfig> {
    let manifest = RunManifest::read(run_dir)?;
    serde_json::from_value(manifest.config).map_err(|e| CliError::Config {
        path: run_dir.join(MANIFEST_FILE),
        message: format!("stored config: {e}"),
    })
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub src_emb: PathBuf,
    #[arg(long)]
    pub tgt_emb: PathBuf,
    /// TSV of `src_id \t tgt_id` lines naming true translation pairs.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value = "cosine")]
    pub criterion: Criterion,
    #[arg(long, default_value_t = bitext_core::miner::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value = "src")]
    pub src_lang: String,
    #[arg(long, default_value = "tgt")]
    pub tgt_lang: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let src = read_matrix(&args.src_emb)?;
    let tgt = read_matrix(&args.tgt_emb)?;
    let truth = read_truth(&args.truth, src.ids(), tgt.ids())?;
    let dir = direction_accuracy(
        &args.src_lang,
        &src,
        &args.tgt_lang,
        &tgt,
        &truth,
        args.criterion,
        args.k,
    )?;
    println!(
        "{}-{}: {}/{} correct, accuracy {:.4} ({:?})",
        dir.src, dir.tgt, dir.correct, dir.n, dir.accuracy, args.criterion
    );
    RetrievalReport::new(args.criterion, args.k, vec![dir]).write(&args.out)?;
    Ok(())
}

/// Reads `src_id \t tgt_id` lines into row-ordinal pairs.
fn read_truth(
    path: &Path,
    src_ids: &[String],
    tgt_ids: &[String],
) -> CliResult<Vec<(usize, usize)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (src_index, tgt_index) = (id_index(src_ids), id_index(tgt_ids));
    let bad = |line: usize, message: String| CliError::Config {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut truth = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(s), Some(t), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(bad(i + 1, "expected two tab-separated ids".into()));
        };
        let s = *src_index
            .get(s)
            .ok_or_else(|| bad(i + 1, format!("unknown source id {s:?}")))?;
        let t = *tgt_index
            .get(t)
            .ok_or_else(|| bad(i + 1, format!("unknown target id {t:?}")))?;
        truth.push((s, t));
    }
    Ok(truth)
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Comma-separated language codes.
    #[arg(long, value_delimiter = ',', default_value = "a,b,c")]
    pub langs: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = PRESET_MISALIGNMENT)]
    pub misalignment: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for `<lang>.txt`, `<lang>.crem` and `truth.tsv`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Writes a synthetic world as plain corpora plus embeddings. Row `i` of
/// every language is the translation of row `i` of every other; since plain
/// corpus ids are line numbers, `truth.tsv` pairs equal ids.
pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let (world, matrices) = synth_world(
        args.n,
        args.dim,
        &args.langs,
        args.noise_sigma,
        args.misalignment,
        args.seed,
    )?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let line_ids: Vec<String> = (1..=args.n).map(|i| i.to_string()).collect();
    for (lang, m) in args.langs.iter().zip(matrices) {
        let corpus = world.corpus(lang);
        let mut text = corpus.sentences().join("\n");
        text.push('\n');
        let path = args.out.join(format!("{lang}.txt"));
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        write_matrix(
            &m.with_ids(line_ids.clone())?,
            args.out.join(format!("{lang}.crem")),
        )?;
    }
    let truth: String = line_ids.iter().map(|id| format!("{id}\t{id}\n")).collect();
    let path = args.out.join("truth.tsv");
    std::fs::write(&path, truth).map_err(|e| CliError::io(&path, e))?;
    println!(
        "wrote {} languages × {} sentences (dim {}, misalignment {}) to {}",
        args.langs.len(),
        args.n,
        args.dim,
        args.misalignment,
        args.out.display()
    );
    Ok(())
}
