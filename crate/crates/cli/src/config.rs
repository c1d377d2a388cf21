//! `key = value` experiment files. Command-line flags override file values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};
use crate::input::read_file;

#[derive(Debug, Default, Clone)]
pub struct Config {
    source: String,
    entries: BTreeMap<String, (usize, String)>,
}

impl Config {
    pub fn parse(source: &str, text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("");
            if line.trim().is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                let column = raw.len() - raw.trim_start().len() + 1;
                return Err(CliError::syntax(source, line_no, column, "expected `key = value`"));
            };
            let key = key.trim().replace('_', "-");
            if key.is_empty() {
                return Err(CliError::syntax(source, line_no, 1, "empty key"));
            }
            if entries.insert(key.clone(), (line_no, value.trim().to_string())).is_some() {
                return Err(CliError::syntax(source, line_no, 1, format!("duplicate key {key:?}")));
            }
        }
        Ok(Self {
            source: source.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&path.display().to_string(), &read_file(path)?)
    }

    /// Rejects keys that the subcommand does not know.
    pub fn check_keys(&self, known: &[&str]) -> CliResult<()> {
        for (key, (line, _)) in &self.entries {
            if !known.contains(&key.as_str()) {
                return Err(CliError::syntax(
                    &self.source,
                    *line,
                    1,
                    format!("unknown key {key:?} (known: {})", known.join(", ")),
                ));
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, value)) => value.parse().map(Some).map_err(|_| {
                CliError::syntax(&self.source, *line, 1, format!("invalid value {value:?} for {key}"))
            }),
        }
    }
}

/// Flag value if given, else the config file value.
pub fn pick<T: FromStr>(flag: Option<T>, cfg: &Config, key: &str) -> CliResult<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_reports_positions() {
        let cfg = Config::parse("c", "# run\nJ = 3/2\nsamples = 100 # fine\n").unwrap();
        assert_eq!(cfg.raw("J"), Some("3/2"));
        assert_eq!(cfg.get::<usize>("samples").unwrap(), Some(100));
        assert!(cfg.check_keys(&["J", "samples"]).is_ok());
        assert!(cfg.check_keys(&["J"]).unwrap_err().to_string().starts_with("c:3:1: unknown key"));
        let err = Config::parse("c", "\n  oops\n").unwrap_err();
        assert_eq!(err.to_string(), "c:2:3: expected `key = value`");
        let bad = Config::parse("c", "samples = many\n").unwrap();
        assert!(bad.get::<usize>("samples").is_err());
    }

    #[test]
    fn flags_win() {
        let cfg = Config::parse("c", "steps = 10\n").unwrap();
        assert_eq!(pick(Some(20usize), &cfg, "steps").unwrap(), Some(20));
        assert_eq!(pick(None::<usize>, &cfg, "steps").unwrap(), Some(10));
    }
}
