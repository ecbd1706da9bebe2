//! CSV tables plus a TOML manifest, written all-or-nothing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_NAME: &str = "manifest.toml";

/// One CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem; `.csv` is appended.
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: u64,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub rows: usize,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| CliError::Manifest(e.to_string()))?;
        if m.config_sha256.len() != 64 || hex::decode(&m.config_sha256).is_err() {
            return Err(CliError::Manifest("config_sha256 is not a SHA-256 hex digest".into()));
        }
        for f in &m.files {
            if f.name.contains('/') || f.name.contains('\\') || f.name.is_empty() {
                return Err(CliError::Manifest(format!("bad file name {:?}", f.name)));
            }
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn render_csv(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Csv(csv::Error::from(e.into_error())))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Writes every table and the manifest into `dir`. Each file goes to a
/// `.partial` name first; if anything fails all of them are removed.
pub fn write_all(
    dir: &Path,
    subcommand: &str,
    config_bytes: &[u8],
    seed: u64,
    tables: &[Table],
) -> Result<Manifest> {
    let mut outputs: Vec<(String, Vec<u8>)> = Vec::with_capacity(tables.len() + 1);
    let mut files = Vec::with_capacity(tables.len());
    for t in tables {
        let bytes = render_csv(t)?;
        files.push(FileEntry {
            name: t.file_name(),
            sha256: sha256_hex(&bytes),
            rows: t.rows.len(),
        });
        outputs.push((t.file_name(), bytes));
    }
    let manifest = Manifest {
        tool: "dfcrb".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        config_sha256: sha256_hex(config_bytes),
        seed,
        files,
    };
    outputs.push((MANIFEST_NAME.into(), manifest.to_toml().into_bytes()));

    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let result = (|| {
        for (name, bytes) in &outputs {
            let fin = dir.join(name);
            let tmp = dir.join(format!("{name}.partial"));
            staged.push((tmp.clone(), fin));
            fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
        }
        for (tmp, fin) in &staged {
            fs::rename(tmp, fin).map_err(|e| io_err(fin, e))?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        for (tmp, fin) in &staged {
            let _ = fs::remove_file(tmp);
            let _ = fs::remove_file(fin);
        }
        return Err(e);
    }
    Ok(manifest)
}

/// Checks that every file listed in a manifest exists with its recorded hash.
pub fn verify(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let m = Manifest::parse(&text)?;
    for f in &m.files {
        let p = dir.join(&f.name);
        let bytes = fs::read(&p).map_err(|e| io_err(&p, e))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(CliError::Manifest(format!("{} does not match its hash", f.name)));
        }
    }
    Ok(m)
}

/// Shortest round-trip form; exponent notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
