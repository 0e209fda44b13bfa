//! Experiment configuration: a command name plus flat `key = value` pairs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::CliError;

pub const ENV_PREFIX: &str = "URTLAB_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(CliError::Validation(format!("unknown format `{other}` (json, csv)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Json => "json",
            Self::Csv => "csv",
        })
    }
}

/// One parameter a command accepts, with its default if it has one.
#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub key: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn param(key: &'static str, default: Option<&'static str>, help: &'static str) -> Param {
    Param { key, default, help }
}

/// Every command with its parameters. `seed`, `out` and `format` are
/// handled separately and accepted by all commands.
pub fn command_params(command: &str) -> Option<&'static [Param]> {
    Some(match command {
        "rate-fn" => {
            const P: &[Param] =
                &[param("d", Some("4"), "ambient degree"), param("samples", Some("200"), "grid points in (0,1)")];
            P
        }
        "ldp-check" => {
            const P: &[Param] = &[
                param("d", Some("4"), "ambient degree"),
                param("n", Some("400"), "walk length"),
                param("a", Some("0.3"), "interval start"),
                param("b", Some("0.5"), "interval end"),
                param("tol", Some("0.03"), "allowed gap"),
            ];
            P
        }
        "walk kernel" => {
            const P: &[Param] = &[param("d", Some("4"), "ambient degree"), param("n", Some("4096"), "steps")];
            P
        }
        "walk series" => {
            const P: &[Param] = &[param("profile", None, "profile spec"), param("n", Some("4096"), "steps")];
            P
        }
        "exponent" => {
            const P: &[Param] = &[
                param("profile", None, "profile spec"),
                param("n", Some("4096"), "steps"),
                param("method", Some("ratio"), "direct, ratio or grid23"),
                param("tol", Some("0.001"), "allowed gap to the co-growth prediction"),
            ];
            P
        }
        "cogrowth" => {
            const P: &[Param] = &[
                param("d", Some("4"), "ambient degree"),
                param("gamma", None, "log-growth"),
                param("invert", None, "simple-walk exponent to invert"),
            ];
            P
        }
        "percolate" => {
            const P: &[Param] = &[
                param("d", Some("4"), "ambient degree"),
                param("p", Some("0.3"), "edge probability"),
                param("r", Some("8"), "window radius"),
                param("samples", Some("1"), "clusters to draw"),
                param("tree-out", None, "write the first cluster here"),
            ];
            P
        }
        "two-three-audit" => {
            const P: &[Param] = &[
                param("d", Some("4"), "ambient degree"),
                param("p", Some("0.35"), "edge probability"),
                param("l", Some("2"), "half step count"),
                param("samples", Some("5000"), "clusters"),
            ];
            P
        }
        "mtp-audit" => {
            const P: &[Param] = &[
                param("d", Some("4"), "ambient degree"),
                param("p", Some("0.3"), "edge probability"),
                param("l", Some("2"), "half step count"),
                param("samples", Some("5000"), "clusters"),
            ];
            P
        }
        "spine" => {
            const P: &[Param] = &[
                param("tree", None, "window file; otherwise a decorated line is generated"),
                param("d", Some("4"), "ambient degree of the generated line"),
                param("half-length", Some("10"), "half length of the generated line"),
                param("law", Some("fixture"), "decoration law: fixture, leaf or none"),
                param("stream", Some("0"), "sample stream"),
                param("rooting", Some("center"), "center or uniform"),
                param("samples", Some("0"), "decoration audit samples (0 skips the audit)"),
            ];
            P
        }
        "growth" => {
            const P: &[Param] = &[param("profile", None, "profile spec"), param("n", Some("60"), "horizon")];
            P
        }
        "verify" => {
            const P: &[Param] = &[
                param("d", Some("4"), "ambient degree"),
                param("criteria", Some("all"), "comma-separated criterion ids"),
                param("inject-fault", Some("none"), "none or wrong-sphere-size"),
            ];
            P
        }
        _ => return None,
    })
}

pub const COMMANDS: [&str; 12] = [
    "rate-fn",
    "ldp-check",
    "walk kernel",
    "walk series",
    "exponent",
    "cogrowth",
    "percolate",
    "two-three-audit",
    "mtp-audit",
    "spine",
    "growth",
    "verify",
];

fn accepts(command: &str, key: &str) -> bool {
    key == "seed" || command_params(command).is_some_and(|ps| ps.iter().any(|p| p.key == key))
}

/// A complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub seed: u64,
    pub params: BTreeMap<String, String>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl ExperimentConfig {
    pub fn new(command: &str) -> Result<Self, CliError> {
        if command_params(command).is_none() {
            return Err(CliError::Usage(format!(
                "unknown command `{command}`; expected one of {}",
                COMMANDS.join(", ")
            )));
        }
        Ok(Self { command: command.to_string(), seed: 0, params: BTreeMap::new(), out: None, format: None })
    }

    /// Set one key. `seed`, `out` and `format` go to their own fields.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "command" => {
                if value != self.command {
                    return Err(CliError::Validation(format!("command `{value}` conflicts with `{}`", self.command)));
                }
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| CliError::Validation(format!("seed must be a non-negative integer, got `{value}`")))?
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = Some(value.parse()?),
            _ if accepts(&self.command, key) => {
                self.params.insert(key.to_string(), value.to_string());
            }
            _ => return Err(CliError::Validation(format!("`{}` takes no parameter `{key}`", self.command))),
        }
        Ok(())
    }

    /// Parse the `key = value` text form. The `command` key is required.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(head, _)| head).trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("config line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(CliError::Validation(format!("config line {}: empty key", i + 1)));
            }
            if pairs.iter().any(|(seen, _)| *seen == k) {
                return Err(CliError::Validation(format!("config line {}: duplicate key `{k}`", i + 1)));
            }
            pairs.push((k, v));
        }
        let command = pairs
            .iter()
            .find(|(k, _)| *k == "command")
            .map(|(_, v)| *v)
            .ok_or_else(|| CliError::Validation("config has no `command`".into()))?;
        let mut config = Self::new(command)?;
        for (k, v) in pairs {
            config.set(k, v)?;
        }
        Ok(config)
    }

    /// The text form read by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!("command = {}\nseed = {}\n", self.command, self.seed);
        if let Some(out) = &self.out {
            s.push_str(&format!("out = {}\n", out.display()));
        }
        if let Some(f) = self.format {
            s.push_str(&format!("format = {f}\n"));
        }
        for (k, v) in &self.params {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    /// Apply `URTLAB_<KEY>` variables for keys this command accepts. Dashes
    /// in keys become underscores: `URTLAB_HALF_LENGTH` sets `half-length`.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), CliError> {
        let mut found: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| {
                let key = k.strip_prefix(ENV_PREFIX)?.to_ascii_lowercase().replace('_', "-");
                Some((key, v))
            })
            .filter(|(k, _)| matches!(k.as_str(), "seed" | "out" | "format") || accepts(&self.command, k))
            .collect();
        found.sort();
        for (k, v) in found {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Fill in defaults and check required keys and value sanity.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let params = command_params(&self.command).expect("command checked on construction");
        for p in params {
            if let Some(default) = p.default {
                self.params.entry(p.key.to_string()).or_insert_with(|| default.to_string());
            }
        }
        if self.command == "cogrowth" && self.params.contains_key("gamma") == self.params.contains_key("invert") {
            return Err(CliError::Validation("cogrowth takes exactly one of `gamma` and `invert`".into()));
        }
        let needs_profile = matches!(self.command.as_str(), "walk series" | "exponent" | "growth");
        if needs_profile && !self.params.contains_key("profile") {
            return Err(CliError::Validation(format!("`{}` needs a `profile`", self.command)));
        }
        if let Some(tol) = self.params.get("tol") {
            let v: f64 = tol.parse().map_err(|_| CliError::Validation(format!("tol must be a number, got `{tol}`")))?;
            if !(v > 0.0) {
                return Err(CliError::Validation(format!("tol must be positive, got {v}")));
            }
        }
        Ok(self)
    }

    /// Output format: explicit, else from the output extension, else JSON.
    pub fn effective_format(&self) -> Format {
        self.format.unwrap_or_else(|| match &self.out {
            Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => Format::Csv,
            _ => Format::Json,
        })
    }

    fn raw(&self, key: &str) -> Result<&str, CliError> {
        self.params
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CliError::Validation(format!("missing parameter `{key}`")))
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }

    /// Typed value of a parameter.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.raw(key)?;
        raw.parse().map_err(|_| CliError::Validation(format!("bad value `{raw}` for `{key}`")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.params.get(key).map(|_| self.get(key)).transpose()
    }
}
