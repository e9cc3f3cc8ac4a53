//! Plain-text `key = value` run configuration. Flags given on the command line
//! take precedence over file entries.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub const KEYS: &[&str] = &[
    "k", "level", "levels", "dt", "theta", "storage", "alpha", "lambda", "mu", "penalty", "end_time", "out",
    "format",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {}: expected `key = value`, got `{raw}`", n + 1);
            };
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                bail!("config line {}: unknown key `{key}` (known: {})", n + 1, KEYS.join(", "));
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                bail!("config line {}: duplicate key `{key}`", n + 1);
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// `flag` if given, else the file entry, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow::anyhow!("config key `{key}` = `{v}`: {e}")))
            .transpose()
    }
}

/// Inclusive level ranges: `3`, `2..5`, `2..=5` or `2,3,5`.
pub fn parse_levels(s: &str) -> Result<Vec<i64>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (i64, i64) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty level range `{s}`");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<i64>().with_context(|| format!("bad level `{t}`")))
        .collect()
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number `{t}`")))
        .collect()
}
