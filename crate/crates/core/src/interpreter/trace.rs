//! Execution traces and their line-delimited serialization.
//!
//! One JSON object per line, tagged by `event`:
//!
//! ```text
//! {"event":"begin","t_ms":0,"intention_id":"1"}
//! {"event":"call","t_ms":0,"name":"sleep","args":[5],"result":{"value":null}}
//! {"event":"output","t_ms":5000,"text":"done"}
//! {"event":"error","t_ms":5000,"kind":"ZeroDivisionError","message":"division by zero","line":3}
//! {"event":"end","t_ms":5000,"status":"completed","steps_used":12}
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::function_table::HostValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Completed,
    RuntimeError,
    LimitExceeded,
    ParseRejected,
}

impl TraceStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceStatus::Completed => "completed",
            TraceStatus::RuntimeError => "runtime_error",
            TraceStatus::LimitExceeded => "limit_exceeded",
            TraceStatus::ParseRejected => "parse_rejected",
        }
    }
}

impl std::fmt::Display for TraceStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallFailure {
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fixture_miss: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallResult {
    Value(HostValue),
    Error(CallFailure),
}

impl CallResult {
    pub fn is_ok(&self) -> bool {
        matches!(self, CallResult::Value(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Begin {
        t_ms: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        intention_id: Option<String>,
    },
    Call {
        t_ms: u64,
        name: String,
        args: Vec<HostValue>,
        result: CallResult,
    },
    Output {
        t_ms: u64,
        text: String,
    },
    Error {
        t_ms: u64,
        kind: String,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        line: Option<usize>,
    },
    End {
        t_ms: u64,
        status: TraceStatus,
        steps_used: u64,
    },
}

impl TraceEvent {
    pub fn t_ms(&self) -> u64 {
        match self {
            TraceEvent::Begin { t_ms, .. }
            | TraceEvent::Call { t_ms, .. }
            | TraceEvent::Output { t_ms, .. }
            | TraceEvent::Error { t_ms, .. }
            | TraceEvent::End { t_ms, .. } => *t_ms,
        }
    }
}

/// A call as seen by trace consumers.
#[derive(Debug, Clone, Copy)]
pub struct CallView<'a> {
    pub name: &'a str,
    pub args: &'a [HostValue],
    pub result: &'a CallResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionTrace {
    pub events: Vec<TraceEvent>,
    pub status: TraceStatus,
    pub steps_used: u64,
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trace has no end event")]
    MissingEnd,
}

impl ExecutionTrace {
    pub fn calls(&self) -> impl Iterator<Item = CallView<'_>> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Call { name, args, result, .. } => Some(CallView { name, args, result }),
            _ => None,
        })
    }

    pub fn outputs(&self) -> impl Iterator<Item = &str> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Output { text, .. } => Some(text.as_str()),
            _ => None,
        })
    }

    /// Kind and message of the terminal error, if any.
    pub fn error(&self) -> Option<(&str, &str)> {
        self.events.iter().find_map(|e| match e {
            TraceEvent::Error { kind, message, .. } => Some((kind.as_str(), message.as_str())),
            _ => None,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&serde_json::to_string(event).expect("trace events always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceParseError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: TraceEvent =
                serde_json::from_str(line).map_err(|source| TraceParseError::Json { line: i + 1, source })?;
            events.push(event);
        }
        let (status, steps_used) = match events.last() {
            Some(TraceEvent::End { status, steps_used, .. }) => (*status, *steps_used),
            _ => return Err(TraceParseError::MissingEnd),
        };
        Ok(ExecutionTrace { events, status, steps_used })
    }
}
