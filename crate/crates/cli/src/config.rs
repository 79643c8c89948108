//! Flat key=value run configuration: one setting per line, `#` comments,
//! later keys override earlier ones, and command-line flags override the
//! file. Keys use the long flag names.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

/// Parsed configuration file contents.
#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    /// Parse a config file. Blank lines and `#` comment lines are skipped;
    /// everything else must be `key = value`.
    pub fn load(path: &Path) -> Result<FileConfig> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, line) in raw.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected `key = value`, got {line:?}",
                    path.display(),
                    lineno + 1
                );
            };
            let key = key.trim();
            if key.is_empty() {
                bail!("{}:{}: empty key", path.display(), lineno + 1);
            }
            values.insert(key.to_owned(), value.trim().to_owned());
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Flag/file/default resolution: a present flag wins, then the file, then
/// the built-in default.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    file: FileConfig,
}

impl Settings {
    pub fn new(file: FileConfig) -> Settings {
        Settings { file }
    }

    /// Resolve a required setting with a default.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.resolve_opt(flag, key)?.unwrap_or(default))
    }

    /// Resolve an optional setting (no default).
    pub fn resolve_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(raw) => {
                let value = raw
                    .parse::<T>()
                    .map_err(|e| anyhow::anyhow!("config key {key} = {raw:?}: {e}"))?;
                Ok(Some(value))
            }
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn files_parse_with_comments_and_later_keys_override() {
        let (_dir, path) = write(
            "# run settings\nseed = 5\nqueries = 10\n\nseed = 9\nattacker = gemini\n",
        );
        let config = FileConfig::load(&path).unwrap();
        assert_eq!(config.get("seed"), Some("9"));
        assert_eq!(config.get("queries"), Some("10"));
        assert_eq!(config.get("attacker"), Some("gemini"));
        assert_eq!(config.get("missing"), None);
    }

    #[test]
    fn malformed_lines_are_rejected_with_their_line_number() {
        let (_dir, path) = write("seed = 5\nnot a setting\n");
        let err = FileConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn flags_override_file_and_file_overrides_default() {
        let (_dir, path) = write("seed = 9\n");
        let settings = Settings::new(FileConfig::load(&path).unwrap());
        assert_eq!(settings.resolve(Some(3u64), "seed", 7).unwrap(), 3);
        assert_eq!(settings.resolve(None::<u64>, "seed", 7).unwrap(), 9);
        assert_eq!(settings.resolve(None::<u64>, "jobs", 7).unwrap(), 7);
        let err = settings.resolve(None::<bool>, "seed", false).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }
}
