//! JSON-lines run manifest: one line per output file.

use crate::config::RunConfig;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};
use zzlab_core::io::JsonLines;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Git-style content hash: `sha256("blob <len>\0" ++ content)`.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

pub fn config_hash(cfg: &RunConfig) -> String {
    content_hash(cfg.canonical_text().as_bytes())
}

fn config_echo(cfg: &RunConfig) -> (Value, Value) {
    let mut values = Map::new();
    let mut sources = Map::new();
    for (k, (v, s)) in &cfg.values {
        values.insert(k.to_string(), Value::String(v.render()));
        sources.insert(k.to_string(), Value::String(s.name().into()));
    }
    (Value::Object(values), Value::Object(sources))
}

/// Appends the manifest line for `file` (relative to `dir`).
pub fn record_output(dir: &Path, file: &str, cfg: &RunConfig, extra: Value) -> std::io::Result<()> {
    let bytes = std::fs::read(dir.join(file))?;
    let (values, sources) = config_echo(cfg);
    let unix_time = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let rec = json!({
        "file": file,
        "file_hash": content_hash(&bytes),
        "subcommand": cfg.subcommand.name(),
        "config": values,
        "sources": sources,
        "output_dir": cfg.output_dir.display().to_string(),
        "config_file": cfg.config_file.as_ref().map(|p| p.display().to_string()),
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "versions": { "zzlab": env!("CARGO_PKG_VERSION"), "zzlab_core": zzlab_core::VERSION },
        "extra": extra,
        "unix_time": unix_time,
    });
    let mut w = JsonLines::append(&dir.join(MANIFEST_FILE))?;
    w.write(&rec)?;
    w.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_git_blob_hashing() {
        // `printf 'hello\n' | git hash-object --object-format=sha256 --stdin`
        assert_eq!(content_hash(b"hello\n"), "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4");
    }
}
