//! Environment fixture file.
//!
//! JSON document; `format` must be `intent-forge/environment@1`.
//!
//! ```json
//! {
//!   "format": "intent-forge/environment@1",
//!   "label": "synthetic desk-scale data",
//!   "rng_seed": 42,
//!   "temperature_reading": 21,
//!   "query_context_limit": 4096,
//!   "vfs": [{ "path": "files/song.mp3", "audio": true, "content": "" }],
//!   "contacts": [{ "id": 1, "display": "Acme Insurance", "email": "claims@acme.example" }],
//!   "answers": ["42"],
//!   "web_store": { "https://example.org": { "status": 200, "headers": {}, "body": "..." } },
//!   "subqueries": { "which is the largest city in germany?": "Berlin" },
//!   "shell": { "exact": { "ls": "..." }, "rules": [{ "pattern": "^ssh .*", "output": "..." }] }
//! }
//! ```

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    normalize_query, AnswerSource, Contact, EnvClock, HostEnvironment, SeededRng, ShellBackend, ShellScript,
    SubqueryBackend, WebResponse,
};

pub const ENVIRONMENT_FORMAT: &str = "intent-forge/environment@1";
pub(crate) const DEFAULT_QUERY_CONTEXT_LIMIT: usize = 4096;

#[derive(Debug, Error)]
pub enum EnvConfigError {
    #[error("cannot read environment file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("environment file is not valid: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported environment format `{0}`")]
    Format(String),
    #[error("bad shell rule `{pattern}`: {source}")]
    ShellRule { pattern: String, source: regex::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VfsFile {
    pub path: String,
    #[serde(default)]
    pub audio: bool,
    #[serde(default)]
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShellRule {
    pub pattern: String,
    pub output: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShellConfig {
    #[serde(default)]
    pub exact: BTreeMap<String, String>,
    #[serde(default)]
    pub rules: Vec<ShellRule>,
}

/// Declarative description of a host environment. Every call to
/// [`EnvironmentConfig::build`] yields a fresh, independent environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentConfig {
    pub format: String,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub temperature_reading: i64,
    #[serde(default = "default_limit")]
    pub query_context_limit: usize,
    #[serde(default)]
    pub vfs: Vec<VfsFile>,
    #[serde(default)]
    pub contacts: Vec<Contact>,
    #[serde(default)]
    pub answers: Vec<String>,
    #[serde(default)]
    pub web_store: BTreeMap<String, WebResponse>,
    #[serde(default)]
    pub subqueries: BTreeMap<String, String>,
    #[serde(default)]
    pub shell: ShellConfig,
}

fn default_limit() -> usize {
    DEFAULT_QUERY_CONTEXT_LIMIT
}

impl EnvironmentConfig {
    pub fn from_json(text: &str) -> Result<Self, EnvConfigError> {
        let config: EnvironmentConfig = serde_json::from_str(text)?;
        if config.format != ENVIRONMENT_FORMAT {
            return Err(EnvConfigError::Format(config.format));
        }
        config.shell_script()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, EnvConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| EnvConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    fn shell_script(&self) -> Result<ShellScript, EnvConfigError> {
        let exact = self
            .shell
            .exact
            .iter()
            .map(|(k, v)| (k.split_whitespace().collect::<Vec<_>>().join(" "), v.clone()))
            .collect();
        let rules = self
            .shell
            .rules
            .iter()
            .map(|rule| {
                Regex::new(&rule.pattern)
                    .map(|re| (re, rule.output.clone()))
                    .map_err(|source| EnvConfigError::ShellRule { pattern: rule.pattern.clone(), source })
            })
            .collect::<Result<_, _>>()?;
        Ok(ShellScript { exact, rules })
    }

    /// Fixture-mode environment: virtual clock, scripted answers, recorded
    /// sub-query answers and a scripted shell.
    pub fn build(&self) -> HostEnvironment {
        self.build_with_seed(self.rng_seed)
    }

    pub fn build_with_seed(&self, seed: u64) -> HostEnvironment {
        let mut env = HostEnvironment::empty();
        env.rng_seed = seed;
        env.rng = SeededRng::new(seed);
        env.clock = EnvClock::virtual_clock();
        env.temperature_reading = self.temperature_reading;
        env.query_context_limit = self.query_context_limit;
        env.vfs = self.vfs.iter().map(|f| (f.path.clone(), f.clone())).collect();
        env.contacts = self.contacts.clone();
        env.answers = AnswerSource::Scripted(self.answers.iter().cloned().collect::<VecDeque<_>>());
        env.web_store = self.web_store.clone();
        env.subqueries = SubqueryBackend::Fixture(
            self.subqueries.iter().map(|(k, v)| (normalize_query(k), v.clone())).collect::<HashMap<_, _>>(),
        );
        // Validated in from_json; a config built in code with a bad rule
        // simply gets no rules.
        env.shell = ShellBackend::Scripted(self.shell_script().unwrap_or_default());
        env
    }
}
