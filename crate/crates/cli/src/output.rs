//! Atomic file output and full-precision number formatting.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Collects written files for the manifest inventory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn new(root: &Path) -> Self {
        OutputDir { root: root.to_path_buf(), files: Vec::new() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(rel), bytes)?;
        self.files.push(OutputFile { path: rel.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn absorb(&mut self, files: Vec<OutputFile>) {
        self.files.extend(files);
    }

    pub fn into_files(mut self) -> Vec<OutputFile> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        self.files
    }
}

/// CSV with a header row; numbers go through [`fmt_f64`].
pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("flushing csv: {e}"))
}

/// Column-major little-endian f64 file: `u64` row count, `u64` column count, then each column.
pub fn binary_columns(columns: &[&[f64]]) -> Vec<u8> {
    let rows = columns.first().map_or(0, |c| c.len());
    let mut out = Vec::with_capacity(16 + 8 * rows * columns.len());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(columns.len() as u64).to_le_bytes());
    for c in columns {
        for v in *c {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Inverse of [`binary_columns`].
pub fn read_binary_columns(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    anyhow::ensure!(bytes.len() >= 16, "binary file shorter than its header");
    let rows = u64::from_le_bytes(bytes[0..8].try_into()?) as usize;
    let cols = u64::from_le_bytes(bytes[8..16].try_into()?) as usize;
    anyhow::ensure!(bytes.len() == 16 + 8 * rows * cols, "binary file size does not match its header");
    let vals: Vec<f64> = bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(vals.chunks(rows.max(1)).take(cols).map(|c| c.to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn binary_columns_round_trip() {
        let a = [1.0, 2.0, 3.0];
        let b = [-0.5, 0.25, 1e-9];
        let back = read_binary_columns(&binary_columns(&[&a, &b])).unwrap();
        assert_eq!(back, vec![a.to_vec(), b.to_vec()]);
        assert!(read_binary_columns(&[0u8; 10]).is_err());
    }

    #[test]
    fn atomic_write_leaves_only_the_target() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("sub/a.csv");
        write_atomic(&target, b"x\n1\n").unwrap();
        write_atomic(&target, b"x\n2\n").unwrap();
        assert_eq!(std::fs::read(&target).unwrap(), b"x\n2\n");
        let names: Vec<_> =
            std::fs::read_dir(dir.path().join("sub")).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }
}
