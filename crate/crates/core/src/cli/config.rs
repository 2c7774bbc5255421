//! Flat `key = value` experiment files with `[section]` headers.
//!
//! ```text
//! # comment
//! [run]
//! command = verify
//! seed = 7
//! trials = 100000
//!
//! [params]
//! check = lipschitz
//! gamma_i = 0.2
//!
//! [c]
//! tight = 4
//! ```
//!
//! Keys before the first header belong to `[run]`. Values are trimmed and
//! may be empty; lists are comma-separated.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExperimentConfig {
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub trials: Option<u64>,
    /// Parameters of the invoked operation.
    pub params: BTreeMap<String, String>,
    /// Per-bound constant multipliers.
    pub constants: BTreeMap<String, String>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut cfg = ExperimentConfig::default();
        let mut section = "run".to_string();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| ParseError { line: line_no, message };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header `{line}`")))?
                    .trim();
                if !matches!(name, "run" | "params" | "c") {
                    return Err(err(format!("unknown section `[{name}]`")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if !valid_key(key) {
                return Err(err(format!("invalid key `{key}`")));
            }
            match section.as_str() {
                "run" => match key {
                    "command" => cfg.command = Some(value.to_string()),
                    "seed" => cfg.seed = Some(value.parse().map_err(|_| err(format!("seed `{value}` is not a u64")))?),
                    "trials" => {
                        cfg.trials = Some(value.parse().map_err(|_| err(format!("trials `{value}` is not a u64")))?)
                    }
                    "out" => cfg.out = Some(value.to_string()),
                    other => return Err(err(format!("unknown key `{other}` in [run]"))),
                },
                "params" => {
                    if cfg.params.insert(key.to_string(), value.to_string()).is_some() {
                        return Err(err(format!("duplicate key `{key}`")));
                    }
                }
                _ => {
                    if cfg.constants.insert(key.to_string(), value.to_string()).is_some() {
                        return Err(err(format!("duplicate key `{key}`")));
                    }
                }
            }
        }
        Ok(cfg)
    }

    /// Canonical text; `parse(to_text())` returns an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::from("[run]\n");
        if let Some(c) = &self.command {
            s += &format!("command = {c}\n");
        }
        if let Some(v) = self.seed {
            s += &format!("seed = {v}\n");
        }
        if let Some(v) = self.trials {
            s += &format!("trials = {v}\n");
        }
        if let Some(v) = &self.out {
            s += &format!("out = {v}\n");
        }
        for (name, map) in [("params", &self.params), ("c", &self.constants)] {
            if map.is_empty() {
                continue;
            }
            s += &format!("\n[{name}]\n");
            for (k, v) in map {
                s += &format!("{k} = {v}\n");
            }
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical text, ignoring
    /// the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let digest = Sha256::digest(c.to_text().as_bytes());
        format!("{digest:x}")[..16].to_string()
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }
}
