//! `key=value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are matched
//! case-insensitively with `-` and `_` treated alike, so a file can use the
//! flag spellings (`min-support=4`) or the report header's (`min_support=4`).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use mithril_core::ConfigError;

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    values: BTreeMap<String, String>,
}

fn normalise(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl KeyValues {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            context: format!("cannot read config {}", path.display()),
            source,
        })?;
        Ok(Self::parse(&text)?)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::new(format!("config line {}: expected key=value", n + 1)));
            };
            values.insert(normalise(k), v.trim().to_string());
        }
        Ok(KeyValues { values })
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::new(format!("config key {key}: cannot parse {raw:?}"))),
        }
    }

    /// `flag`, else the file's value for `key`, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, ConfigError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.parse_opt(key)?.unwrap_or(default)),
        }
    }

    pub fn pick_str<'a>(&'a self, flag: Option<&'a str>, key: &str, default: &'a str) -> &'a str {
        flag.or_else(|| self.get_str(key)).unwrap_or(default)
    }
}
