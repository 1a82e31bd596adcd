//! Parameter resolution: command-line flag, then config file, then default.
//!
//! Config files hold one `key = value` per line; `#` starts a comment and
//! `_` in keys is read as `-`. A run manifest is accepted too, in which case
//! its `config` object supplies the values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const OUT_DIR_ENV: &str = "QWALK_OUT_DIR";

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, Value>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => Some(items.iter().filter_map(scalar).collect::<Vec<_>>().join(",")),
        other => Some(other.to_string()),
    }
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(text).context("config looks like JSON but does not parse")?;
        let cfg = v
            .get("config")
            .and_then(Value::as_object)
            .ok_or_else(|| anyhow!("JSON config has no `config` object"))?;
        return Ok(cfg
            .iter()
            .filter_map(|(k, v)| scalar(v).map(|s| (normalize(k), s)))
            .collect());
    }
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected `key = value`, got `{raw}`", i + 1))?;
        let key = normalize(k);
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.insert(key, v.trim().trim_matches('"').to_string());
    }
    Ok(out)
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                parse_config(&text).with_context(|| format!("in config {}", p.display()))?
            }
            None => BTreeMap::new(),
        };
        Ok(Settings {
            file,
            ..Settings::default()
        })
    }

    fn from_file<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let Some(raw) = self.file.get(key) else {
            return Ok(None);
        };
        raw.parse()
            .map(Some)
            .map_err(|e| anyhow!("config key `{key}` = `{raw}`: {e}"))
    }

    fn record<T: Serialize>(&mut self, key: &str, v: &Option<T>) -> Result<()> {
        self.resolved.insert(key.to_string(), serde_json::to_value(v)?);
        Ok(())
    }

    pub fn opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Serialize,
        T::Err: fmt::Display,
    {
        self.used.insert(key.to_string());
        let v = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        self.record(key, &v)?;
        Ok(v)
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Serialize,
        T::Err: fmt::Display,
    {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.record(key, &Some(&v))?;
        Ok(v)
    }

    pub fn required<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Serialize,
        T::Err: fmt::Display,
    {
        self.opt(key, flag)?
            .ok_or_else(|| anyhow!("missing `--{key}` (or `{key}` in the config file)"))
    }

    /// Flag, then the environment variable, then the config file.
    pub fn out_dir(&mut self, flag: Option<PathBuf>) -> Result<PathBuf> {
        let env = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
        self.get("out-dir", flag.or(env), PathBuf::from("out"))
    }

    pub fn resolved(&self) -> &BTreeMap<String, Value> {
        &self.resolved
    }

    /// Config keys that no parameter of the command asked for.
    pub fn unused(&self) -> Vec<&str> {
        self.file
            .keys()
            .filter(|k| !self.used.contains(*k))
            .map(String::as_str)
            .collect()
    }
}

/// Comma-separated list of sizes, e.g. `6,7,8`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeList(pub Vec<usize>);

impl FromStr for SizeList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let sizes = s
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if sizes.is_empty() {
            return Err("empty size list".into());
        }
        Ok(SizeList(sizes))
    }
}

impl fmt::Display for SizeList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl Serialize for SizeList {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
