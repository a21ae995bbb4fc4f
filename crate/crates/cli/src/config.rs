//! Optional defaults file, selected with `CLAUSE_FORGE_CONFIG`.
//!
//! ```toml
//! rules = "default"        # or a path to a rule file, or "none"
//! model = "models/crf.bin"
//! format = "json"          # tag output: json | bio
//! seed = 7
//! expand = true
//! log_level = "info"
//! ```
//!
//! Command-line flags always win over values from this file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

pub const ENV_VAR: &str = "CLAUSE_FORGE_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    pub rules: Option<String>,
    pub model: Option<PathBuf>,
    pub format: Option<String>,
    pub seed: Option<u64>,
    pub expand: Option<bool>,
    pub log_level: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl AppConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.message().to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    /// Reads the file named by the environment variable, if set.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var_os(ENV_VAR) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys() {
        let c = AppConfig::parse("rules = \"none\"\nseed = 3\nexpand = false\n", Path::new("x")).unwrap();
        assert_eq!(c.rules.as_deref(), Some("none"));
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.expand, Some(false));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(matches!(AppConfig::parse("colour = 1", Path::new("x")), Err(ConfigError::Parse { .. })));
    }
}
