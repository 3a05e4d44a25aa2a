use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

/// Bad flags or config file. Maps to exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Overlays the JSON object in `config` on the parsed flags. Keys must name
/// existing options (snake_case); values in the file win.
pub fn resolve<T: Serialize + DeserializeOwned>(args: T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else { return Ok(args) };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let overrides: Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let Value::Object(overrides) = overrides else {
        return Err(usage(format!("config {} must hold a JSON object", path.display())));
    };
    let Value::Object(mut merged) = serde_json::to_value(&args)? else {
        unreachable!("argument structs serialize to objects");
    };
    for (key, value) in overrides {
        if !merged.contains_key(&key) {
            let known: Vec<&String> = merged.keys().collect();
            return Err(usage(format!("config key {key:?} is not an option of this command; known: {known:?}")));
        }
        merged.insert(key, value);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

pub fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| usage(format!("--{flag} is required (on the command line or in --config)")))
}

/// `<out>.run.json`.
pub fn run_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".run.json");
    PathBuf::from(name)
}

/// Writes the resolved configuration and a result summary next to `out`.
pub fn write_run(out: &Path, command: &str, config: &impl Serialize, summary: Value) -> Result<()> {
    let record = json!({
        "version": photobot::VERSION,
        "command": command,
        "config": config,
        "summary": summary,
    });
    write_json(&run_path(out), &record)
}

/// A report document: the result plus the version and configuration that
/// produced it.
pub fn envelope(command: &str, config: &impl Serialize, report: &impl Serialize) -> Result<Value> {
    let mut doc = Map::new();
    doc.insert("version".into(), json!(photobot::VERSION));
    doc.insert("command".into(), json!(command));
    doc.insert("config".into(), serde_json::to_value(config)?);
    doc.insert("report".into(), serde_json::to_value(report)?);
    Ok(Value::Object(doc))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Opts {
        seed: u64,
        out: Option<PathBuf>,
    }

    #[test]
    fn file_values_override_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"seed": 9}"#).unwrap();
        let flags = Opts { seed: 1, out: Some("x".into()) };
        let got = resolve(flags, Some(&cfg)).unwrap();
        assert_eq!(got, Opts { seed: 9, out: Some("x".into()) });
    }

    #[test]
    fn unknown_key_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"sed": 9}"#).unwrap();
        let err = resolve(Opts { seed: 1, out: None }, Some(&cfg)).unwrap_err();
        assert!(err.downcast_ref::<Usage>().is_some());
    }

    #[test]
    fn run_path_appends_suffix() {
        assert_eq!(run_path(Path::new("a/model.tnet")), PathBuf::from("a/model.tnet.run.json"));
    }
}
