//! Subprocess protocol for external trainers.
//!
//! The command is run as
//! `<command> --iteration <t> --pairs <tsv> --out <dir>` with `CRISS_LANGS`
//! set to the comma-separated language codes and `CRISS_INITIAL_EMB` set to
//! a directory holding the initial `<lang>.crem` files. On exit 0 it must
//! have written `<dir>/<lang>.crem` (and optionally `.ids`) per language.

use std::path::{Path, PathBuf};
use std::process::Command;

use crate::embeddings::{ids_path, read_matrix, EmbeddingMatrix};
use crate::error::{Error, Result};

pub const LANGS_ENV: &str = "CRISS_LANGS";
pub const INITIAL_EMB_ENV: &str = "CRISS_INITIAL_EMB";

/// Longest stderr tail kept in error diagnostics.
const DIAGNOSTIC_BYTES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalTrainer {
    pub command: String,
}

fn tail(bytes: &[u8]) -> String {
    let start = bytes.len().saturating_sub(DIAGNOSTIC_BYTES);
    String::from_utf8_lossy(&bytes[start..]).trim().to_owned()
}

impl ExternalTrainer {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalTrainer {
            command: command.into(),
        }
    }

    /// Runs the command and loads the embeddings it wrote, in `langs` order.
    pub fn run(
        &self,
        iteration: usize,
        pairs: &Path,
        out_dir: &Path,
        langs: &[String],
        initial_dir: &Path,
    ) -> Result<Vec<(String, PathBuf)>> {
        let mut words = self.command.split_whitespace();
        let program = words
            .next()
            .ok_or_else(|| Error::invalid("external trainer command is empty"))?;
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

        let output = Command::new(program)
            .args(words)
            .arg("--iteration")
            .arg(iteration.to_string())
            .arg("--pairs")
            .arg(pairs)
            .arg("--out")
            .arg(out_dir)
            .env(LANGS_ENV, langs.join(","))
            .env(INITIAL_EMB_ENV, initial_dir)
            .output()
            .map_err(|e| Error::Trainer {
                iteration,
                code: None,
                diagnostics: format!("could not start {program:?}: {e}"),
            })?;

        if !output.status.success() {
            return Err(Error::Trainer {
                iteration,
                code: output.status.code(),
                diagnostics: tail(&output.stderr),
            });
        }

        langs
            .iter()
            .map(|lang| {
                let path = out_dir.join(format!("{lang}.crem"));
                if !path.is_file() {
                    return Err(Error::Protocol(format!(
                        "trainer did not write {}",
                        path.display()
                    )));
                }
                Ok((lang.clone(), path))
            })
            .collect()
    }
}

/// Loads trainer output and checks it lines up with the initial embeddings.
/// Without a sidecar, rows take the initial ids.
pub fn load_trained(path: &Path, initial: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    let mut m = read_matrix(path).map_err(|e| Error::Protocol(e.to_string()))?;
    if !ids_path(path).exists() && m.len() == initial.len() {
        m = m.with_ids(initial.ids().to_vec())?;
    }
    if m.dim() != initial.dim() || m.len() != initial.len() {
        return Err(Error::Protocol(format!(
            "{}: shape {}×{} does not match initial {}×{}",
            path.display(),
            m.len(),
            m.dim(),
            initial.len(),
            initial.dim()
        )));
    }
    if m.ids() != initial.ids() {
        return Err(Error::Protocol(format!(
            "{}: row ids differ from the initial embeddings",
            path.display()
        )));
    }
    Ok(m)
}
