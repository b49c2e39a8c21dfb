//! Optional TOML config file and the resolved-settings header.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

/// Settings a config file may provide. Flags override every field.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub format: Option<String>,
    pub oracle: Option<String>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub nondet: Option<bool>,
    pub threshold: Option<u64>,
    pub component: Option<String>,
    pub mode: Option<String>,
    pub beam: Option<usize>,
    pub kbest: Option<usize>,
    pub max_steps: Option<usize>,
    pub lambda: Option<f64>,
    pub nu: Option<f64>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub report_format: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Flag, then config file, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Resolved settings of one run, echoed at the top of every output file.
#[derive(Debug, Clone)]
pub struct Header {
    command: &'static str,
    entries: Vec<(&'static str, String)>,
}

impl Header {
    pub fn new(command: &'static str) -> Self {
        Header {
            command,
            entries: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &'static str, value: impl Display) -> &mut Self {
        self.entries.push((key, value.to_string()));
        self
    }

    pub fn path(&mut self, key: &'static str, path: &Path) -> &mut Self {
        self.set(key, path.display())
    }

    pub fn render(&self) -> String {
        let mut out = format!("# catgen {}\n", self.command);
        for (k, v) in &self.entries {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("beam = 8\nlambda = 0.5").is_ok());
        assert!(toml::from_str::<FileConfig>("bem = 8").is_err());
    }

    #[test]
    fn header_lines_are_comments() {
        let mut h = Header::new("tag");
        h.set("beam", 4).set("nu", 0.15);
        assert_eq!(h.render(), "# catgen tag\n# beam=4\n# nu=0.15\n");
    }
}
