//! `key = value` scenario files.

use std::collections::BTreeMap;
use std::fmt;

/// Keys accepted in a scenario file; they mirror the `run` flags.
pub const KEYS: [&str; 13] = [
    "system",
    "eps",
    "method",
    "dt",
    "t_end",
    "x0",
    "z0",
    "xdot0",
    "zdot0",
    "out",
    "log_every",
    "drift_factor",
    "newton_tol",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

/// Raw key/value pairs; later entries for the same key win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(err(Some(i + 1), format!("expected `key = value`, got `{line}`")));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(err(Some(i + 1), format!("unknown key `{k}` (known: {})", KEYS.join(", "))));
            }
            if v.is_empty() {
                return Err(err(Some(i + 1), format!("empty value for `{k}`")));
            }
            values.insert(k.to_string(), v.to_string());
        }
        Ok(Config { values })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(KEYS.contains(&key));
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key).map(|v| parse_number(key, v)).transpose()
    }

    pub fn integer(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| err(None, format!("`{key}` must be a non-negative integer, got `{v}`"))))
            .transpose()
    }

    /// Comma-separated list of numbers.
    pub fn vector(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.get(key).map(|v| v.split(',').map(|s| parse_number(key, s.trim())).collect()).transpose()
    }
}

/// Finite float; also accepts `pi`, `pi/<n>` and `<k>*pi`.
pub fn parse_number(key: &str, s: &str) -> Result<f64, ConfigError> {
    let bad = || err(None, format!("`{key}` expects a finite number, got `{s}`"));
    let lower = s.to_ascii_lowercase();
    let (sign, body) = match lower.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, lower.as_str()),
    };
    let value = if let Some(d) = body.strip_prefix("pi/") {
        std::f64::consts::PI / d.parse::<f64>().map_err(|_| bad())?
    } else if let Some(k) = body.strip_suffix("*pi") {
        k.parse::<f64>().map_err(|_| bad())? * std::f64::consts::PI
    } else if body == "pi" {
        std::f64::consts::PI
    } else {
        body.parse::<f64>().map_err(|_| bad())?
    };
    let value = sign * value;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}
