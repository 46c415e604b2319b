//! Experiment configuration: flat dotted keys from a TOML file, overridden by
//! command-line flags.
//!
//! A value for key `k` under command path `a b` is looked up as `a.b.k`, then
//! `a.k`, then `k`; flags win over all of them. Every value a command reads is
//! recorded so it can be written verbatim into output headers.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use torus_lqg::{ComplexUH, TorusPoint};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    file: BTreeMap<String, String>,
    flags: BTreeMap<String, String>,
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut BTreeMap<String, String>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        toml::Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        toml::Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(scalar_text).collect();
            out.insert(prefix.to_string(), parts.join(","));
        }
        other => {
            out.insert(prefix.to_string(), scalar_text(other));
        }
    }
}

fn scalar_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Float(f) => format!("{f:?}"),
        other => other.to_string(),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let value: toml::Value = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut file = BTreeMap::new();
        flatten("", &value, &mut file);
        Ok(Self { file, flags: BTreeMap::new() })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Records a flag value; `None` leaves the file value in force.
    pub fn flag(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            self.flags.insert(key.to_string(), v.to_string());
        }
    }

    /// View of the configuration for one command path, e.g. `["lqft", "partition"]`.
    pub fn scope<'a>(&'a self, path: &[&str]) -> Scoped<'a> {
        Scoped { cfg: self, path: path.iter().map(|s| s.to_string()).collect(), used: BTreeMap::new() }
    }
}

/// Resolved reads of one command, remembered for the output header.
#[derive(Debug)]
pub struct Scoped<'a> {
    cfg: &'a ExperimentConfig,
    path: Vec<String>,
    used: BTreeMap<String, String>,
}

impl Scoped<'_> {
    fn lookup(&self, key: &str) -> Option<String> {
        if let Some(v) = self.cfg.flags.get(key) {
            return Some(v.clone());
        }
        for depth in (0..=self.path.len()).rev() {
            let mut full = self.path[..depth].join(".");
            if !full.is_empty() {
                full.push('.');
            }
            full.push_str(key);
            if let Some(v) = self.cfg.file.get(&full) {
                return Some(v.clone());
            }
        }
        None
    }

    pub fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.lookup(key);
        if let Some(s) = &v {
            self.used.insert(key.to_string(), s.clone());
        }
        v
    }

    pub fn get<T>(&mut self, key: &str, default: T) -> CliResult<T>
    where
        T: FromStr + ToString,
    {
        match self.raw(key) {
            Some(s) => s.trim().parse().map_err(|_| CliError::Config(format!("cannot parse `{key}` from `{s}`"))),
            None => {
                self.used.insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    pub fn required<T: FromStr>(&mut self, key: &str) -> CliResult<T> {
        let s = self.raw(key).ok_or_else(|| CliError::Config(format!("missing required value `{key}`")))?;
        s.trim().parse().map_err(|_| CliError::Config(format!("cannot parse `{key}` from `{s}`")))
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or_else(|| {
            self.used.insert(key.to_string(), default.to_string());
            default.to_string()
        })
    }

    pub fn tau(&mut self, key: &str, default: &str) -> CliResult<ComplexUH> {
        let s = self.string(key, default);
        parse_tau(&s)
    }

    pub fn list_f64(&mut self, key: &str, default: &str) -> CliResult<Vec<f64>> {
        let s = self.string(key, default);
        parse_list(&s)
    }

    /// Resolved key/value pairs, sorted by key.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self.used.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        out.insert(0, ("command".to_string(), self.path.join(" ")));
        out
    }
}

pub fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Config(format!("`{p}` is not a number"))))
        .collect()
}

pub fn parse_pair(s: &str, what: &str) -> CliResult<(f64, f64)> {
    let v = parse_list(s)?;
    match v.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(CliError::Config(format!("{what} must be two comma-separated numbers, got `{s}`"))),
    }
}

/// `re,im` with `im > 0`.
pub fn parse_tau(s: &str) -> CliResult<ComplexUH> {
    let (re, im) = parse_pair(s, "tau")?;
    Ok(ComplexUH::new(re, im)?)
}

/// `x1,x2` in torus coordinates.
pub fn parse_point(s: &str) -> CliResult<TorusPoint> {
    let (a, b) = parse_pair(s, "torus point")?;
    Ok(TorusPoint::new(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scoped_lookup_prefers_specific_keys_and_flags() {
        let mut cfg = ExperimentConfig::from_toml_str(
            "gamma = 0.5\nseed = 3\n[lqft]\ngamma = 1.0\n[lqft.partition]\nmu = 2.0\n[gmc]\ngamma = 1.5\n",
        )
        .unwrap();
        let mut s = cfg.scope(&["lqft", "partition"]);
        assert_eq!(s.get("gamma", 0.0).unwrap(), 1.0);
        assert_eq!(s.get("mu", 1.0).unwrap(), 2.0);
        assert_eq!(s.get("seed", 0u64).unwrap(), 3);
        assert_eq!(s.get("replicas", 100usize).unwrap(), 100);
        let r = s.resolved();
        assert_eq!(r[0], ("command".into(), "lqft partition".into()));
        assert!(r.contains(&("replicas".into(), "100".into())));
        cfg.flag("gamma", Some(0.25));
        assert_eq!(cfg.scope(&["gmc", "sample"]).get("gamma", 0.0).unwrap(), 0.25);
    }

    #[test]
    fn parse_errors_are_config_errors() {
        let cfg = ExperimentConfig::from_toml_str("tau = \"0,-1\"\nx = [0.1, 0.2]\nbad = \"abc\"").unwrap();
        let mut s = cfg.scope(&["green"]);
        assert!(matches!(s.tau("tau", "0,1"), Err(CliError::Core(_))));
        assert_eq!(parse_point(&s.string("x", "")).unwrap(), TorusPoint::new(0.1, 0.2));
        assert!(matches!(s.get("bad", 1.0), Err(CliError::Config(_))));
        assert!(ExperimentConfig::from_toml_str("= broken").is_err());
    }
}
