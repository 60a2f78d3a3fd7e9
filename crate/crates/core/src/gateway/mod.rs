//! Streaming chat-completion client with latency measurement.
//!
//! Time to first token is the delay from request send to the first
//! streamed chunk carrying at least one character; response time is the
//! delay from request send to the end of the stream.

mod clock;
mod fixture;
mod live;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::function_table::HostError;
use crate::host::SubqueryFn;
use crate::prompt::{ModelParams, PromptBundle, DEFAULT_ROLE};

pub use clock::{Clock, SystemClock, VirtualClock};
pub use fixture::{
    load_fixture_transport, Annotations, Chunk, FixtureTransport, Transcript, TranscriptFile, TRANSCRIPT_FORMAT,
};
pub use live::{LiveTransport, API_KEY_VAR};

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport error{}: {message}", .status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport { status: Option<u16>, message: String },
    #[error("stream closed without any content")]
    EmptyStream,
    #[error("request timed out after {} ms", .0.as_millis())]
    Timeout(Duration),
    #[error("invalid transcript fixture: {0}")]
    FixtureParse(String),
    #[error("no transcript for model `{model}`{}", .intention_id.map(|i| format!(" and intention {i}")).unwrap_or_default())]
    MissingTranscript { model: String, intention_id: Option<u32> },
    #[error("invalid model configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    Live,
    /// `None` selects the bundled transcripts.
    Fixture(Option<PathBuf>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub model_name: String,
    pub endpoint_url: String,
    temperature: f64,
    pub role: String,
    pub transport: TransportKind,
    request_timeout: Duration,
}

impl ModelConfig {
    pub fn new(
        model_name: impl Into<String>,
        endpoint_url: impl Into<String>,
        temperature: f64,
        transport: TransportKind,
        request_timeout: Duration,
    ) -> Result<Self, GatewayError> {
        let config = ModelConfig {
            model_name: model_name.into(),
            endpoint_url: endpoint_url.into(),
            temperature: 0.0,
            role: DEFAULT_ROLE.to_string(),
            transport,
            request_timeout: DEFAULT_TIMEOUT,
        };
        config.with_temperature(temperature)?.with_timeout(request_timeout)
    }

    /// Defaults for replaying bundled transcripts.
    pub fn fixture(model_name: impl Into<String>) -> Self {
        ModelConfig {
            model_name: model_name.into(),
            endpoint_url: String::new(),
            temperature: 0.0,
            role: DEFAULT_ROLE.to_string(),
            transport: TransportKind::Fixture(None),
            request_timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn live(model_name: impl Into<String>, endpoint_url: impl Into<String>) -> Self {
        ModelConfig { endpoint_url: endpoint_url.into(), transport: TransportKind::Live, ..Self::fixture(model_name) }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self, GatewayError> {
        if !(0.0..=2.0).contains(&temperature) {
            return Err(GatewayError::Config(format!("temperature {temperature} is outside [0, 2]")));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Result<Self, GatewayError> {
        if timeout.is_zero() {
            return Err(GatewayError::Config("request timeout must be positive".into()));
        }
        self.request_timeout = timeout;
        Ok(self)
    }

    pub fn with_role(mut self, role: impl Into<String>) -> Self {
        self.role = role.into();
        self
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn request_timeout(&self) -> Duration {
        self.request_timeout
    }
}

/// What a transport needs to issue one completion.
#[derive(Debug, Clone, Copy)]
pub struct StreamRequest<'a> {
    pub model_name: &'a str,
    pub intention_id: Option<u32>,
    pub endpoint_url: &'a str,
    pub timeout: Duration,
    pub bundle: &'a PromptBundle,
}

pub trait Transport: Send + Sync {
    /// Delivers chunks in arrival order with their clock reading.
    fn stream(
        &self,
        request: &StreamRequest<'_>,
        clock: &mut dyn Clock,
        on_chunk: &mut dyn FnMut(&str, Duration),
    ) -> Result<(), GatewayError>;

    /// Requests that reached the network so far.
    fn network_requests(&self) -> usize;

    /// Whether a scripted response exists for the pair. Live transports answer anything.
    fn has_transcript(&self, _model: &str, _intention_id: u32) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub chunk_text: String,
    /// Offset from request send.
    pub at: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedResponse {
    pub full_text: String,
    pub events: Vec<StreamEvent>,
    pub time_to_first_token_ms: f64,
    pub response_time_s: f64,
}

pub fn complete_stream(
    bundle: &PromptBundle,
    intention_id: Option<u32>,
    config: &ModelConfig,
    transport: &dyn Transport,
    clock: &mut dyn Clock,
) -> Result<TimedResponse, GatewayError> {
    if bundle.user_message.is_empty() {
        return Err(GatewayError::Config("empty user message".into()));
    }
    let request = StreamRequest {
        model_name: &config.model_name,
        intention_id,
        endpoint_url: &config.endpoint_url,
        timeout: config.request_timeout,
        bundle,
    };
    let sent = clock.now();
    let mut events: Vec<StreamEvent> = Vec::new();
    transport.stream(&request, clock, &mut |text, now| {
        let at = now.saturating_sub(sent);
        // Clamp against clocks that report out of order.
        let at = events.last().map_or(at, |prev| at.max(prev.at));
        events.push(StreamEvent { chunk_text: text.to_string(), at });
    })?;
    let end = clock.now().saturating_sub(sent);
    let first = events.iter().find(|e| !e.chunk_text.is_empty()).ok_or(GatewayError::EmptyStream)?.at;
    let end = end.max(events.last().map_or(end, |e| e.at));
    Ok(TimedResponse {
        full_text: events.iter().map(|e| e.chunk_text.as_str()).collect(),
        events,
        time_to_first_token_ms: first.as_secs_f64() * 1000.0,
        response_time_s: end.as_secs_f64(),
    })
}

/// Role used for nested `query_llm` requests.
pub const SUBQUERY_ROLE: &str = "You are a helpful assistant";

/// A `query_llm` backend that forwards each query as its own completion.
pub fn subquery_via_gateway(transport: Arc<dyn Transport>, config: ModelConfig) -> SubqueryFn {
    Box::new(move |query: &str| {
        let bundle = PromptBundle {
            role_message: SUBQUERY_ROLE.to_string(),
            user_message: query.to_string(),
            model_params: ModelParams { temperature: config.temperature, model_name: config.model_name.clone() },
        };
        let mut clock = SystemClock::new();
        complete_stream(&bundle, None, &config, transport.as_ref(), &mut clock).map(|r| r.full_text).map_err(
            |e| match e {
                GatewayError::Transport { status: Some(status), message } => HostError::with_status(status, message),
                other => HostError::new(other.to_string()),
            },
        )
    })
}
