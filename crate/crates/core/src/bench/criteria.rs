//! Declarative success criteria over run artifacts.
//!
//! Criteria file schema (JSON):
//!
//! ```text
//! {
//!   "format": "intent-forge/criteria@1",
//!   "criteria": [
//!     { "intention_id": 1, "description": "...", "predicate": <predicate> }
//!   ]
//! }
//! ```
//!
//! A predicate is one of
//!
//! ```text
//! {"all": [<predicate>, ...]}            every child holds
//! {"any": [<predicate>, ...]}            at least one child holds
//! {"called": "name"}                     the trace has a call to `name`
//! {"called_with": {"name": "sleep", "args": [<pattern>, ...]}}
//! {"not_called": "name"}
//! {"status_is": "completed"}
//! {"output_contains": "text"}            some printed line contains text (case-insensitive)
//! {"env_check": <probe>}
//! ```
//!
//! Argument patterns match positionally; extra arguments are ignored:
//! `"any"`, `{"eq": value}`, `{"one_of": [value, ...]}`, and
//! `{"contains": ["a", "b"]}` (the argument's text, or its JSON for
//! non-strings, contains every needle, case-insensitive).
//!
//! Probes: `"audio_idle"`, `"played_audio"`,
//! `{"email_sent": {"to_contains": "..", "attachment_contains": ".."}}`,
//! `{"clock_at_least_ms": 5000}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::ParsedResponse;
use crate::function_table::HostValue;
use crate::host::HostEnvironment;
use crate::interpreter::{ExecutionTrace, TraceStatus};

pub const CRITERIA_FORMAT: &str = "intent-forge/criteria@1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgPattern {
    Any,
    Eq(HostValue),
    OneOf(Vec<HostValue>),
    Contains(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvProbe {
    AudioIdle,
    PlayedAudio,
    EmailSent {
        #[serde(default)]
        to_contains: Option<String>,
        #[serde(default)]
        attachment_contains: Option<String>,
    },
    ClockAtLeastMs(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallPattern {
    pub name: String,
    #[serde(default)]
    pub args: Vec<ArgPattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    All(Vec<Predicate>),
    Any(Vec<Predicate>),
    Called(String),
    CalledWith(CallPattern),
    NotCalled(String),
    StatusIs(TraceStatus),
    OutputContains(String),
    EnvCheck(EnvProbe),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessCriterion {
    pub intention_id: u32,
    #[serde(default)]
    pub description: String,
    pub predicate: Predicate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CriteriaFile {
    format: String,
    criteria: Vec<SuccessCriterion>,
}

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error("invalid criteria file: {0}")]
    Parse(String),
    #[error("criteria file lists intention {0} twice")]
    Duplicate(u32),
}

/// Criteria keyed by intention id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CriteriaSet {
    criteria: BTreeMap<u32, SuccessCriterion>,
}

impl CriteriaSet {
    pub fn from_json(text: &str) -> Result<Self, CriteriaError> {
        let file: CriteriaFile = serde_json::from_str(text).map_err(|e| CriteriaError::Parse(e.to_string()))?;
        if file.format != CRITERIA_FORMAT {
            return Err(CriteriaError::Parse(format!(
                "unsupported format `{}` (expected `{CRITERIA_FORMAT}`)",
                file.format
            )));
        }
        let mut criteria = BTreeMap::new();
        for c in file.criteria {
            let id = c.intention_id;
            if criteria.insert(id, c).is_some() {
                return Err(CriteriaError::Duplicate(id));
            }
        }
        Ok(CriteriaSet { criteria })
    }

    pub fn load(path: &Path) -> Result<Self, CriteriaError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CriteriaError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn insert(&mut self, criterion: SuccessCriterion) {
        self.criteria.insert(criterion.intention_id, criterion);
    }

    pub fn get(&self, intention_id: u32) -> Option<&SuccessCriterion> {
        self.criteria.get(&intention_id)
    }

    pub fn len(&self) -> usize {
        self.criteria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.criteria.is_empty()
    }
}

/// Everything a predicate may look at.
pub struct Artifacts<'a> {
    pub parsed: &'a ParsedResponse,
    pub trace: &'a ExecutionTrace,
    pub env: &'a HostEnvironment,
}

fn lower_text(v: &HostValue) -> String {
    match v {
        HostValue::Text(s) => s.to_lowercase(),
        other => serde_json::to_string(other).unwrap_or_default().to_lowercase(),
    }
}

fn value_eq(a: &HostValue, b: &HostValue) -> bool {
    match (a, b) {
        (HostValue::Integer(x), HostValue::Float(y)) | (HostValue::Float(y), HostValue::Integer(x)) => *x as f64 == *y,
        (HostValue::List(xs), HostValue::List(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| value_eq(x, y))
        }
        _ => a == b,
    }
}

impl ArgPattern {
    pub fn matches(&self, v: &HostValue) -> bool {
        match self {
            ArgPattern::Any => true,
            ArgPattern::Eq(want) => value_eq(want, v),
            ArgPattern::OneOf(options) => options.iter().any(|o| value_eq(o, v)),
            ArgPattern::Contains(needles) => {
                let hay = lower_text(v);
                needles.iter().all(|n| hay.contains(&n.to_lowercase()))
            }
        }
    }
}

impl EnvProbe {
    fn holds(&self, env: &HostEnvironment) -> bool {
        match self {
            EnvProbe::AudioIdle => env.audio_player().current.is_none(),
            EnvProbe::PlayedAudio => !env.audio_player().history.is_empty(),
            EnvProbe::EmailSent { to_contains, attachment_contains } => env.sent_emails().iter().any(|mail| {
                let to_ok = to_contains.as_ref().is_none_or(|t| mail.to.to_lowercase().contains(&t.to_lowercase()));
                let att_ok = attachment_contains.as_ref().is_none_or(|a| {
                    let a = a.to_lowercase();
                    mail.attachments.iter().any(|p| p.to_lowercase().contains(&a))
                });
                to_ok && att_ok
            }),
            EnvProbe::ClockAtLeastMs(ms) => env.elapsed().as_millis() >= u128::from(*ms),
        }
    }
}

impl Predicate {
    /// `Ok` when the predicate holds, otherwise the first clause that failed.
    pub fn check<'p>(&'p self, a: &Artifacts<'_>) -> Result<(), &'p Predicate> {
        match self {
            Predicate::All(children) => children.iter().try_for_each(|c| c.check(a)),
            Predicate::Any(children) => {
                let mut first_failure = None;
                for c in children {
                    match c.check(a) {
                        Ok(()) => return Ok(()),
                        Err(f) => {
                            first_failure.get_or_insert(f);
                        }
                    }
                }
                Err(first_failure.unwrap_or(self))
            }
            Predicate::Called(name) => a.trace.calls().any(|c| c.name == name).then_some(()).ok_or(self),
            Predicate::CalledWith(pat) => a
                .trace
                .calls()
                .any(|c| {
                    c.name == pat.name
                        && c.args.len() >= pat.args.len()
                        && pat.args.iter().zip(c.args).all(|(p, v)| p.matches(v))
                })
                .then_some(())
                .ok_or(self),
            Predicate::NotCalled(name) => (!a.trace.calls().any(|c| c.name == name)).then_some(()).ok_or(self),
            Predicate::StatusIs(s) => (a.trace.status == *s).then_some(()).ok_or(self),
            Predicate::OutputContains(text) => {
                let needle = text.to_lowercase();
                a.trace.outputs().any(|o| o.to_lowercase().contains(&needle)).then_some(()).ok_or(self)
            }
            Predicate::EnvCheck(probe) => probe.holds(a.env).then_some(()).ok_or(self),
        }
    }

    pub fn holds(&self, a: &Artifacts<'_>) -> bool {
        self.check(a).is_ok()
    }
}
