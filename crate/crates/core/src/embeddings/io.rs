//! `.crem` embedding files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "CREM" | u32 version = 1 | u32 dim | u64 rows | rows × dim f32
//! ```
//!
//! External row ids live in a sidecar `<path>.ids`, one per line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::EmbeddingMatrix;
use crate::error::{Error, FormatError, Result};

pub const MAGIC: [u8; 4] = *b"CREM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

/// Sidecar path holding the external ids for an embedding file.
pub fn ids_path(path: &Path) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(".ids");
    PathBuf::from(s)
}

pub fn write_matrix(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_payload(&mut BufWriter::new(file), m).map_err(|e| Error::io(path, e))?;

    let sidecar = ids_path(path);
    let mut ids = String::new();
    for id in m.ids() {
        ids.push_str(id);
        ids.push('\n');
    }
    std::fs::write(&sidecar, ids).map_err(|e| Error::io(&sidecar, e))
}

fn write_payload(w: &mut impl Write, m: &EmbeddingMatrix) -> std::io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(m.dim() as u32).to_le_bytes())?;
    w.write_all(&(m.len() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

/// Reads and validates an embedding file. Without a sidecar, rows get
/// ordinal ids.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = |kind| Error::Format {
        path: path.to_path_buf(),
        kind,
    };

    if bytes.len() < HEADER_LEN {
        return Err(fmt(FormatError::Truncated {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        }));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(fmt(FormatError::BadMagic { found: magic }));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fmt(FormatError::UnsupportedVersion { found: version }));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if dim == 0 {
        return Err(fmt(FormatError::ZeroDim));
    }
    let rows = u64::from_le_bytes(bytes[12..20].try_into().unwrap());

    let expected = (rows as u128) * (dim as u128) * 4 + HEADER_LEN as u128;
    let actual = bytes.len() as u128;
    if actual < expected {
        return Err(fmt(FormatError::Truncated {
            expected: u64::try_from(expected).unwrap_or(u64::MAX),
            actual: actual as u64,
        }));
    }
    if actual > expected {
        return Err(fmt(FormatError::TrailingBytes {
            extra: (actual - expected) as u64,
        }));
    }

    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let m = EmbeddingMatrix::from_unit_rows(dim as usize, data)?;

    let sidecar = ids_path(path);
    match std::fs::read_to_string(&sidecar) {
        Ok(text) => {
            let ids: Vec<String> = text.lines().map(str::to_owned).collect();
            if ids.len() as u64 != rows {
                return Err(Error::Format {
                    path: sidecar,
                    kind: FormatError::IdCount {
                        header: rows,
                        sidecar: ids.len() as u64,
                    },
                });
            }
            m.with_ids(ids)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(m),
        Err(e) => Err(Error::io(sidecar, e)),
    }
}
