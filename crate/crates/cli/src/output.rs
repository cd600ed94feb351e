use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;

/// JSON artifact carrying its provenance.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub result: &'a T,
}

pub fn json<T: Serialize>(cfg: &RunConfig, result: &T) -> String {
    let env = Envelope { config_hash: cfg.hash(), seed: cfg.seed, config: cfg.canonical(), result };
    let mut s = serde_json::to_string_pretty(&env).expect("result serializes");
    s.push('\n');
    s
}

/// Comment lines prepended to CSV artifacts.
pub fn csv_preamble(cfg: &RunConfig) -> String {
    format!("# config_hash={}\n# seed={}\n", cfg.hash(), cfg.seed)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// `results.json` -> `results.trace.csv`.
pub fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}
