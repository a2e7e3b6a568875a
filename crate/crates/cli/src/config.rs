use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

/// `key = value` run configuration. Values from a file are overridden by
/// explicit command-line flags (flag wins); unknown keys are rejected.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let mut entries = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("line {}: expected 'key = value', got '{raw}'", ln + 1));
            };
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if key.is_empty() || value.is_empty() {
                return Err(format!("line {}: empty key or value", ln + 1));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(format!("line {}: duplicate key '{key}'", ln + 1));
            }
        }
        Ok(RunConfig { entries })
    }

    /// Every key in the file must be one this command understands.
    pub fn check_keys(&self, allowed: &[&str]) -> CliResult<()> {
        for key in self.entries.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "unknown config key '{key}'; known keys: {}",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }
}

/// Tracks the fully resolved configuration so every run can echo it.
#[derive(Default)]
pub struct Resolved {
    lines: Vec<(String, String)>,
}

impl Resolved {
    /// Precedence: explicit flag, then config file, then the default.
    pub fn value<T>(&mut self, key: &str, flag: Option<T>, cfg: &RunConfig, default: T) -> CliResult<T>
    where
        T: FromStr + Display,
    {
        let v = match flag {
            Some(v) => v,
            None => match cfg.get(key) {
                Some(raw) => raw
                    .parse()
                    .map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{raw}'")))?,
                None => default,
            },
        };
        self.lines.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    pub fn optional(&mut self, key: &str, flag: Option<String>, cfg: &RunConfig) -> Option<String> {
        let v = flag.or_else(|| cfg.get(key).map(str::to_string));
        if let Some(v) = &v {
            self.lines.push((key.to_string(), v.clone()));
        }
        v
    }

    pub fn echo(&self, command: &str) -> String {
        let mut out = format!("[config] command = {command}\n");
        for (k, v) in &self.lines {
            out.push_str(&format!("[config] {k} = {v}\n"));
        }
        out
    }
}
