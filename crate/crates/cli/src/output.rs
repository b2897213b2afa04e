use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

pub const OUTPUT_ROOT_ENV: &str = "NEOFUSE_OUT";

/// `explicit` when given, else `default_name` under the output root.
pub fn resolve(explicit: Option<PathBuf>, default_name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
        root.join(default_name)
    })
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Directory that holds an output file, created if missing.
pub fn parent_dir(file: &Path) -> Result<PathBuf> {
    let dir = match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    create_dir(&dir)?;
    Ok(dir)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Records one command in `dir/manifest.json`.
///
/// Entries are keyed by command name so that rerunning a command replaces
/// its entry and the file stays byte-identical for identical inputs.
pub fn record(dir: &Path, command: &str, config: Value, inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
    let path = dir.join("manifest.json");
    let mut commands = Map::new();
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(Value::Object(mut doc)) = serde_json::from_str::<Value>(&text) {
            if let Some(Value::Object(existing)) = doc.remove("commands") {
                commands = existing;
            }
        }
    }
    commands.insert(
        command.to_string(),
        json!({
            "config": config,
            "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "outputs": outputs.iter().map(|p| file_name(p)).collect::<Vec<_>>(),
        }),
    );
    let doc = json!({
        "tool": "neofuse",
        "version": env!("CARGO_PKG_VERSION"),
        "rng": neofuse::rng::RNG_ALGORITHM,
        "commands": commands,
    });
    write_json(&path, &doc)
}
