use std::fs;
use std::path::{Path, PathBuf};

use ardent_core::persist::hex_digest;
use serde_json::{json, Value};

use crate::error::CliError;

/// Directory `{out}/{command}-{hash}` where `hash` is the first 16 hex digits
/// of the canonical config digest. Identical invocations share a directory.
pub fn run_dir(out: &Path, command: &str, config: &Value) -> Result<(PathBuf, String), CliError> {
    let hash = config_hash(config)?;
    let dir = out.join(format!("{command}-{hash}"));
    fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    Ok((dir, hash))
}

/// serde_json maps are ordered by key, so serialization is canonical.
pub fn config_hash(config: &Value) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex_digest(&bytes)[..16].to_string())
}

pub fn write_manifest(dir: &Path, command: &str, seed: u64, hash: &str, config: &Value, extra: Value) -> Result<(), CliError> {
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config_hash": hash,
        "config": config,
        "results": extra,
    });
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(path))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(CliError::io(path))
}
