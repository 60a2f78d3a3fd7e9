//! OpenAI-compatible chat-completions client with server-sent-event streaming.

use std::io::{BufRead, BufReader};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde_json::{json, Value};

use super::{Clock, GatewayError, StreamRequest, Transport};

/// Environment variable holding the bearer token for live requests.
pub const API_KEY_VAR: &str = "INTENT_FORGE_API_KEY";

#[derive(Debug)]
pub struct LiveTransport {
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    requests: AtomicUsize,
}

enum Attempt {
    Done,
    /// Failed before any chunk arrived; safe to retry.
    Transient(GatewayError),
}

impl LiveTransport {
    pub fn new(api_key: Option<String>) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| GatewayError::Transport { status: None, message: e.to_string() })?;
        Ok(LiveTransport { client, api_key, requests: AtomicUsize::new(0) })
    }

    /// Reads the key from `INTENT_FORGE_API_KEY`; absent means no auth header.
    pub fn from_env() -> Result<Self, GatewayError> {
        Self::new(std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()))
    }

    fn url(endpoint: &str) -> String {
        format!("{}/v1/chat/completions", endpoint.trim_end_matches('/'))
    }

    fn attempt(
        &self,
        request: &StreamRequest<'_>,
        clock: &mut dyn Clock,
        on_chunk: &mut dyn FnMut(&str, Duration),
    ) -> Result<Attempt, GatewayError> {
        let body = json!({
            "model": request.model_name,
            "messages": [
                {"role": "system", "content": request.bundle.role_message},
                {"role": "user", "content": request.bundle.user_message},
            ],
            "temperature": request.bundle.model_params.temperature,
            "stream": true,
        });
        let mut builder = self
            .client
            .post(Self::url(request.endpoint_url))
            .timeout(request.timeout)
            .header("Accept", "text/event-stream")
            .header("Content-Type", "application/json")
            .body(body.to_string());
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        self.requests.fetch_add(1, Ordering::SeqCst);
        let response = match builder.send() {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Transient(map_reqwest(e, request.timeout))),
        };
        let status = response.status();
        if !status.is_success() {
            let err = GatewayError::Transport {
                status: Some(status.as_u16()),
                message: status.canonical_reason().unwrap_or("HTTP error").to_string(),
            };
            if status.is_server_error() || status.as_u16() == 429 {
                return Ok(Attempt::Transient(err));
            }
            return Err(err);
        }

        let mut delivered = false;
        let reader = BufReader::new(response);
        for line in reader.lines() {
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    let err = map_io(e, request.timeout);
                    return if delivered { Err(err) } else { Ok(Attempt::Transient(err)) };
                }
            };
            let Some(data) = line.strip_prefix("data:") else { continue };
            let data = data.trim();
            if data == "[DONE]" {
                break;
            }
            let event: Value = serde_json::from_str(data).map_err(|e| GatewayError::Transport {
                status: None,
                message: format!("malformed stream event: {e}"),
            })?;
            if let Some(message) = event.get("error").and_then(|e| e.get("message")).and_then(Value::as_str) {
                return Err(GatewayError::Transport { status: None, message: message.to_string() });
            }
            let text = event.pointer("/choices/0/delta/content").and_then(Value::as_str).unwrap_or("");
            if !text.is_empty() {
                delivered = true;
                on_chunk(text, clock.now());
            }
        }
        Ok(Attempt::Done)
    }
}

fn map_reqwest(e: reqwest::Error, timeout: Duration) -> GatewayError {
    if e.is_timeout() {
        GatewayError::Timeout(timeout)
    } else {
        GatewayError::Transport { status: e.status().map(|s| s.as_u16()), message: e.to_string() }
    }
}

fn map_io(e: std::io::Error, timeout: Duration) -> GatewayError {
    let timed_out = e.kind() == std::io::ErrorKind::TimedOut
        || e.get_ref().and_then(|inner| inner.downcast_ref::<reqwest::Error>()).is_some_and(reqwest::Error::is_timeout);
    if timed_out {
        GatewayError::Timeout(timeout)
    } else {
        GatewayError::Transport { status: None, message: e.to_string() }
    }
}

impl Transport for LiveTransport {
    fn stream(
        &self,
        request: &StreamRequest<'_>,
        clock: &mut dyn Clock,
        on_chunk: &mut dyn FnMut(&str, Duration),
    ) -> Result<(), GatewayError> {
        match self.attempt(request, clock, on_chunk)? {
            Attempt::Done => Ok(()),
            Attempt::Transient(err) => {
                log::warn!("{}: {err}; retrying once", request.model_name);
                match self.attempt(request, clock, on_chunk)? {
                    Attempt::Done => Ok(()),
                    Attempt::Transient(err) => Err(err),
                }
            }
        }
    }

    fn network_requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}
