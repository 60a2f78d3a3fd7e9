//! Scripted transcripts replayed against a virtual clock.
//!
//! File schema (JSON):
//!
//! ```text
//! {
//!   "format": "intent-forge/transcripts@1",
//!   "label": "...",
//!   "transcripts": [
//!     {
//!       "model": "gpt-4o",
//!       "intention_id": 1,
//!       "chunks": [ { "offset_ms": 120.0, "text": "```python\n" }, ... ],
//!       "annotations": { "expected_success": true, "expected_reason": null, "notes": "..." }
//!     }
//!   ]
//! }
//! ```
//!
//! `offset_ms` is measured from request send, must be positive and
//! non-decreasing within a transcript, and is resolved to microseconds.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Clock, GatewayError, StreamRequest, Transport};

pub const TRANSCRIPT_FORMAT: &str = "intent-forge/transcripts@1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub offset_ms: f64,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    #[serde(default)]
    pub expected_success: Option<bool>,
    #[serde(default)]
    pub expected_reason: Option<String>,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub model: String,
    pub intention_id: u32,
    pub chunks: Vec<Chunk>,
    #[serde(default)]
    pub annotations: Annotations,
}

impl Transcript {
    pub fn full_text(&self) -> String {
        self.chunks.iter().map(|c| c.text.as_str()).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptFile {
    pub format: String,
    #[serde(default)]
    pub label: String,
    pub transcripts: Vec<Transcript>,
}

/// Read-only after load; shareable across threads.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    label: String,
    order: Vec<(String, u32)>,
    transcripts: HashMap<(String, u32), Transcript>,
}

fn offset(ms: f64) -> Duration {
    Duration::from_micros((ms * 1000.0).round() as u64)
}

impl FixtureTransport {
    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        let file: TranscriptFile = serde_json::from_str(text).map_err(|e| GatewayError::FixtureParse(e.to_string()))?;
        if file.format != TRANSCRIPT_FORMAT {
            return Err(GatewayError::FixtureParse(format!(
                "unsupported format `{}` (expected `{TRANSCRIPT_FORMAT}`)",
                file.format
            )));
        }
        let mut order = Vec::new();
        let mut transcripts = HashMap::new();
        for t in file.transcripts {
            let mut last = 0.0;
            for c in &t.chunks {
                if !c.offset_ms.is_finite() || c.offset_ms <= 0.0 || c.offset_ms < last {
                    return Err(GatewayError::FixtureParse(format!(
                        "{} / intention {}: chunk offsets must be positive and non-decreasing",
                        t.model, t.intention_id
                    )));
                }
                last = c.offset_ms;
            }
            let key = (t.model.clone(), t.intention_id);
            if transcripts.contains_key(&key) {
                return Err(GatewayError::FixtureParse(format!(
                    "duplicate transcript for {} / intention {}",
                    t.model, t.intention_id
                )));
            }
            order.push(key.clone());
            transcripts.insert(key, t);
        }
        Ok(FixtureTransport { label: file.label, order, transcripts })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.transcripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transcripts.is_empty()
    }

    pub fn get(&self, model: &str, intention_id: u32) -> Option<&Transcript> {
        self.transcripts.get(&(model.to_string(), intention_id))
    }

    /// Transcripts in file order.
    pub fn transcripts(&self) -> impl Iterator<Item = &Transcript> {
        self.order.iter().map(move |k| &self.transcripts[k])
    }
}

pub fn load_fixture_transport(path: &Path) -> Result<FixtureTransport, GatewayError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| GatewayError::FixtureParse(format!("{}: {e}", path.display())))?;
    FixtureTransport::from_json(&text)
}

impl Transport for FixtureTransport {
    fn stream(
        &self,
        request: &StreamRequest<'_>,
        clock: &mut dyn Clock,
        on_chunk: &mut dyn FnMut(&str, Duration),
    ) -> Result<(), GatewayError> {
        let id = request.intention_id.ok_or_else(|| GatewayError::MissingTranscript {
            model: request.model_name.to_string(),
            intention_id: None,
        })?;
        let transcript = self.get(request.model_name, id).ok_or_else(|| GatewayError::MissingTranscript {
            model: request.model_name.to_string(),
            intention_id: Some(id),
        })?;
        let sent = clock.now();
        for chunk in &transcript.chunks {
            let at = offset(chunk.offset_ms);
            if at > request.timeout {
                clock.advance_to(sent + request.timeout);
                return Err(GatewayError::Timeout(request.timeout));
            }
            clock.advance_to(sent + at);
            on_chunk(&chunk.text, clock.now());
        }
        Ok(())
    }

    fn network_requests(&self) -> usize {
        0
    }

    fn has_transcript(&self, model: &str, intention_id: u32) -> bool {
        self.get(model, intention_id).is_some()
    }
}
