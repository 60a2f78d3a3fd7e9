//! Desk-scale host environment behind the standard catalog functions.
//!
//! Everything a workflow can touch lives here: a virtual file system,
//! a contact book, seeded randomness, a clock, scripted answers, recorded
//! web responses and sub-query answers, a scripted shell, and a capture
//! list for outgoing mail. In fixture mode none of it reaches the real
//! machine.

mod config;
mod functions;
mod rng;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::function_table::HostError;

pub use config::{EnvConfigError, EnvironmentConfig, ShellRule, VfsFile};
pub use functions::{install_standard_functions, standard_specs, STANDARD_CATALOG};
pub use rng::SeededRng;

/// Lowercases, maps `_` and `-` to spaces and collapses whitespace. Both
/// the haystack and the needle go through this before substring matching.
pub fn normalize_for_match(text: &str) -> String {
    text.to_lowercase().replace(['_', '-'], " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercased, whitespace-collapsed query text; the key of the sub-query store.
pub fn normalize_query(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contact {
    pub id: i64,
    pub display: String,
    pub email: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebResponse {
    #[serde(default = "ok_status")]
    pub status: u16,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub body: String,
}

fn ok_status() -> u16 {
    200
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SentEmail {
    pub to: String,
    pub subject: String,
    pub text: String,
    pub attachments: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AudioPlayer {
    pub current: Option<String>,
    /// Every path ever started, in order.
    pub history: Vec<String>,
}

/// Virtual time advances only through `sleep`; real time is wall-clock.
#[derive(Debug, Clone)]
pub enum EnvClock {
    Virtual { elapsed: Duration },
    Real { start: Instant },
}

impl EnvClock {
    pub fn virtual_clock() -> Self {
        EnvClock::Virtual { elapsed: Duration::ZERO }
    }

    pub fn real() -> Self {
        EnvClock::Real { start: Instant::now() }
    }

    pub fn elapsed(&self) -> Duration {
        match self {
            EnvClock::Virtual { elapsed } => *elapsed,
            EnvClock::Real { start } => start.elapsed(),
        }
    }

    pub fn is_virtual(&self) -> bool {
        matches!(self, EnvClock::Virtual { .. })
    }

    pub fn sleep(&mut self, d: Duration) {
        match self {
            EnvClock::Virtual { elapsed } => *elapsed += d,
            EnvClock::Real { .. } => std::thread::sleep(d),
        }
    }
}

pub type Prompter = Box<dyn FnMut(&str) -> Option<String> + Send>;
pub type SubqueryFn = Box<dyn FnMut(&str) -> Result<String, HostError> + Send>;

pub enum AnswerSource {
    Scripted(VecDeque<String>),
    Interactive(Prompter),
}

pub enum SubqueryBackend {
    /// Keyed by [`normalize_query`].
    Fixture(HashMap<String, String>),
    Live(SubqueryFn),
}

#[derive(Debug, Clone, Default)]
pub struct ShellScript {
    /// Keyed by whitespace-collapsed command.
    pub exact: BTreeMap<String, String>,
    pub rules: Vec<(Regex, String)>,
}

impl ShellScript {
    pub fn lookup(&self, command: &str) -> Option<&str> {
        let key = command.split_whitespace().collect::<Vec<_>>().join(" ");
        if let Some(out) = self.exact.get(&key) {
            return Some(out);
        }
        self.rules.iter().find(|(re, _)| re.is_match(&key)).map(|(_, out)| out.as_str())
    }
}

pub enum ShellBackend {
    Scripted(ShellScript),
    /// Runs commands through `sh -c`. Only reachable with an explicit opt-in.
    Real,
}

pub struct HostEnvironment {
    pub(crate) vfs: BTreeMap<String, VfsFile>,
    pub(crate) contacts: Vec<Contact>,
    pub(crate) rng_seed: u64,
    pub(crate) rng: SeededRng,
    pub(crate) clock: EnvClock,
    pub(crate) temperature_reading: i64,
    pub(crate) answers: AnswerSource,
    pub(crate) web_store: BTreeMap<String, WebResponse>,
    pub(crate) subqueries: SubqueryBackend,
    pub(crate) query_context_limit: usize,
    pub(crate) audio_player: AudioPlayer,
    pub(crate) shell: ShellBackend,
    pub(crate) sent_emails: Vec<SentEmail>,
    pending_output: Vec<String>,
    output_log: Vec<String>,
    effects: usize,
}

impl fmt::Debug for HostEnvironment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HostEnvironment")
            .field("vfs", &self.vfs.keys().collect::<Vec<_>>())
            .field("contacts", &self.contacts.len())
            .field("rng_seed", &self.rng_seed)
            .field("clock", &self.clock)
            .field("audio_player", &self.audio_player)
            .field("sent_emails", &self.sent_emails)
            .field("effects", &self.effects)
            .finish()
    }
}

impl HostEnvironment {
    /// An environment with empty stores, seed 0 and a virtual clock.
    pub fn empty() -> Self {
        HostEnvironment {
            vfs: BTreeMap::new(),
            contacts: Vec::new(),
            rng_seed: 0,
            rng: SeededRng::new(0),
            clock: EnvClock::virtual_clock(),
            temperature_reading: 0,
            answers: AnswerSource::Scripted(VecDeque::new()),
            web_store: BTreeMap::new(),
            subqueries: SubqueryBackend::Fixture(HashMap::new()),
            query_context_limit: config::DEFAULT_QUERY_CONTEXT_LIMIT,
            audio_player: AudioPlayer::default(),
            shell: ShellBackend::Scripted(ShellScript::default()),
            sent_emails: Vec::new(),
            pending_output: Vec::new(),
            output_log: Vec::new(),
            effects: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self.rng = SeededRng::new(seed);
        self
    }

    pub fn with_clock(mut self, clock: EnvClock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_answer_source(mut self, answers: AnswerSource) -> Self {
        self.answers = answers;
        self
    }

    pub fn with_subquery_backend(mut self, backend: SubqueryBackend) -> Self {
        self.subqueries = backend;
        self
    }

    pub fn with_shell(mut self, shell: ShellBackend) -> Self {
        self.shell = shell;
        self
    }

    pub fn with_temperature(mut self, reading: i64) -> Self {
        self.temperature_reading = reading;
        self
    }

    pub fn add_file(&mut self, path: impl Into<String>, audio: bool, content: impl Into<String>) {
        let path = path.into();
        self.vfs.insert(path.clone(), VfsFile { path, audio, content: content.into() });
    }

    pub fn add_contact(&mut self, contact: Contact) {
        self.contacts.push(contact);
    }

    pub fn add_web_response(&mut self, url: impl Into<String>, response: WebResponse) {
        self.web_store.insert(url.into(), response);
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn clock(&self) -> &EnvClock {
        &self.clock
    }

    pub fn elapsed(&self) -> Duration {
        self.clock.elapsed()
    }

    pub fn audio_player(&self) -> &AudioPlayer {
        &self.audio_player
    }

    pub fn sent_emails(&self) -> &[SentEmail] {
        &self.sent_emails
    }

    pub fn files(&self) -> impl Iterator<Item = &VfsFile> {
        self.vfs.values()
    }

    /// Number of host-function callbacks that have run against this environment.
    pub fn effect_count(&self) -> usize {
        self.effects
    }

    pub(crate) fn record_effect(&mut self) {
        self.effects += 1;
    }

    pub fn emit_output(&mut self, text: impl Into<String>) {
        let text = text.into();
        self.output_log.push(text.clone());
        self.pending_output.push(text);
    }

    /// Output emitted since the last call.
    pub fn take_output(&mut self) -> Vec<String> {
        std::mem::take(&mut self.pending_output)
    }

    pub fn output_log(&self) -> &[String] {
        &self.output_log
    }

    pub(crate) fn find_paths(&self, expression: &str, audio_only: bool) -> Vec<String> {
        let needle = normalize_for_match(expression);
        self.vfs
            .values()
            .filter(|f| !audio_only || f.audio)
            .filter(|f| normalize_for_match(&f.path).contains(&needle))
            .map(|f| f.path.clone())
            .collect()
    }

    /// Resolves a workflow-supplied path; bare names are also tried under `files/`.
    pub(crate) fn resolve_path(&self, path: &str) -> Option<&VfsFile> {
        self.vfs.get(path).or_else(|| self.vfs.get(&format!("files/{}", path.trim_start_matches("./"))))
    }
}
