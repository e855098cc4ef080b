//! Flat `key = value` configuration dialect used by the pipeline config,
//! radiometric parameter files and scene descriptions.
//!
//! One assignment per line, `#` starts a comment, keys are lowercase with
//! dots for grouping. Values keep everything after the first `=`, trimmed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct FlatConfig {
    path: PathBuf,
    map: BTreeMap<String, String>,
    /// Original assignment order, kept for manifests and round-trips.
    order: Vec<String>,
}

impl FlatConfig {
    pub fn parse(text: &str, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut map = BTreeMap::new();
        let mut order = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(Error::MalformedConfig {
                    path,
                    line: idx + 1,
                    reason: "expected `key = value`".into(),
                });
            };
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.')
            {
                return Err(Error::MalformedConfig {
                    path,
                    line: idx + 1,
                    reason: format!("invalid key `{key}`"),
                });
            }
            if map.insert(key.clone(), value).is_none() {
                order.push(key);
            }
        }
        Ok(Self { path, map, order })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::IoFailure {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(|k| k.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|v| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::InvalidSpec {
            reason: format!("{}: missing required key `{key}`", self.path.display()),
        })
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                // `inf` lets scene files ask for a noiseless run.
                if v.eq_ignore_ascii_case("inf") {
                    return Ok(f64::INFINITY);
                }
                v.parse::<f64>().map_err(|_| Error::InvalidSpec {
                    reason: format!("key `{key}`: `{v}` is not a number"),
                })
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>().map_err(|_| Error::InvalidSpec {
                    reason: format!("key `{key}`: `{v}` is not a non-negative integer"),
                })
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>().map_err(|_| Error::InvalidSpec {
                    reason: format!("key `{key}`: `{v}` is not a 64-bit unsigned integer"),
                })
            })
            .transpose()
    }

    /// Path values are resolved relative to the config file's directory.
    pub fn get_path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                self.path.parent().unwrap_or(Path::new(".")).join(p)
            }
        })
    }

    /// All pairs in file order, for embedding into run manifests.
    pub fn pairs(&self) -> Vec<(String, String)> {
        self.order
            .iter()
            .map(|k| (k.clone(), self.map[k].clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let cfg = FlatConfig::parse("a = 1\n# note\nscene.kind = soil # trailing\n", "t").unwrap();
        assert_eq!(cfg.get("a"), Some("1"));
        assert_eq!(cfg.get("scene.kind"), Some("soil"));
        assert_eq!(cfg.get("missing"), None);
    }

    #[test]
    fn rejects_bare_words() {
        let err = FlatConfig::parse("value\n", "t").unwrap_err();
        assert!(matches!(err, Error::MalformedConfig { line: 1, .. }));
    }

    #[test]
    fn rejects_uppercase_keys() {
        assert!(FlatConfig::parse("Key = 1\n", "t").is_err());
    }

    #[test]
    fn inf_parses_as_infinity() {
        let cfg = FlatConfig::parse("snr = inf\n", "t").unwrap();
        assert_eq!(cfg.get_f64("snr").unwrap(), Some(f64::INFINITY));
    }

    #[test]
    fn later_assignment_wins() {
        let cfg = FlatConfig::parse("a = 1\na = 2\n", "t").unwrap();
        assert_eq!(cfg.get("a"), Some("2"));
        assert_eq!(cfg.pairs().len(), 1);
    }
}
