//! The live transport against a local server that speaks just enough
//! HTTP/1.1 to serve scripted server-sent-event responses.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use intent_forge::gateway::{
    complete_stream, subquery_via_gateway, GatewayError, LiveTransport, ModelConfig, SystemClock, Transport,
};
use intent_forge::prompt::{build_prompt, Intention};
use intent_forge::suite::standard_table;

struct Captured {
    head: String,
    body: String,
}

struct MockServer {
    endpoint: String,
    requests: Arc<Mutex<Vec<Captured>>>,
}

fn sse(chunks: &[&str]) -> String {
    let mut body = String::new();
    for c in chunks {
        let event = serde_json::json!({"choices": [{"delta": {"content": c}}]});
        body.push_str(&format!("data: {event}\n\n"));
    }
    body.push_str("data: [DONE]\n\n");
    format!("HTTP/1.1 200 OK\r\nContent-Type: text/event-stream\r\nConnection: close\r\n\r\n{body}")
}

fn status(code: u16, reason: &str) -> String {
    format!("HTTP/1.1 {code} {reason}\r\nContent-Length: 0\r\nConnection: close\r\n\r\n")
}

/// Serves one scripted response per connection, in order.
fn serve(responses: Vec<String>) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&requests);
    thread::spawn(move || {
        for response in responses {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                head.push_str(&line);
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Captured { head, body: String::from_utf8(body).unwrap() });
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    MockServer { endpoint, requests }
}

fn run(server: &MockServer, transport: &LiveTransport) -> Result<String, GatewayError> {
    let config = ModelConfig::live("gpt-4o", &server.endpoint);
    let bundle = build_prompt(&Intention::new(1, "Please sleep for 5 seconds"), &standard_table(), &config).unwrap();
    let mut clock = SystemClock::new();
    let response = complete_stream(&bundle, Some(1), &config, transport, &mut clock)?;
    assert!(response.time_to_first_token_ms <= response.response_time_s * 1000.0);
    assert!(response.events.windows(2).all(|w| w[0].at <= w[1].at));
    Ok(response.full_text)
}

#[test]
fn streams_chunks_with_auth_and_body() {
    let server = serve(vec![sse(&["```python\n", "sleep(5)\n", "```"])]);
    let transport = LiveTransport::new(Some("secret-token".into())).unwrap();
    assert_eq!(run(&server, &transport).unwrap(), "```python\nsleep(5)\n```");
    assert_eq!(transport.network_requests(), 1);
    let requests = server.requests.lock().unwrap();
    let req = &requests[0];
    assert!(req.head.starts_with("POST /v1/chat/completions "));
    assert!(req.head.to_ascii_lowercase().contains("authorization: bearer secret-token"));
    let body: serde_json::Value = serde_json::from_str(&req.body).unwrap();
    assert_eq!(body["model"], "gpt-4o");
    assert_eq!(body["stream"], true);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], "You are a Python 3 code generator");
    assert!(body["messages"][1]["content"].as_str().unwrap().contains("Please sleep for 5 seconds"));
}

#[test]
fn server_error_is_retried_once() {
    let server = serve(vec![status(503, "Service Unavailable"), sse(&["ok"])]);
    let transport = LiveTransport::new(None).unwrap();
    assert_eq!(run(&server, &transport).unwrap(), "ok");
    assert_eq!(transport.network_requests(), 2);
    let requests = server.requests.lock().unwrap();
    assert!(!requests[0].head.to_ascii_lowercase().contains("authorization"));
}

#[test]
fn persistent_server_error_surfaces_after_retry() {
    let server = serve(vec![status(500, "Internal Server Error"), status(502, "Bad Gateway")]);
    let transport = LiveTransport::new(None).unwrap();
    let err = run(&server, &transport).unwrap_err();
    assert!(matches!(err, GatewayError::Transport { status: Some(502), .. }), "{err:?}");
    assert_eq!(transport.network_requests(), 2);
}

#[test]
fn client_error_is_not_retried() {
    let server = serve(vec![status(400, "Bad Request"), sse(&["unused"])]);
    let transport = LiveTransport::new(None).unwrap();
    let err = run(&server, &transport).unwrap_err();
    assert!(matches!(err, GatewayError::Transport { status: Some(400), .. }), "{err:?}");
    assert_eq!(transport.network_requests(), 1);
}

#[test]
fn stream_without_content_is_empty() {
    let server = serve(vec![sse(&["", ""])]);
    let transport = LiveTransport::new(None).unwrap();
    assert!(matches!(run(&server, &transport), Err(GatewayError::EmptyStream)));
}

#[test]
fn subquery_maps_status_onto_host_error() {
    let server = serve(vec![sse(&["Berlin"]), status(400, "Bad Request")]);
    let transport: Arc<dyn Transport> = Arc::new(LiveTransport::new(None).unwrap());
    let mut query = subquery_via_gateway(Arc::clone(&transport), ModelConfig::live("gpt-4o", &server.endpoint));
    assert_eq!(query("Largest city in Germany?").unwrap(), "Berlin");
    let err = query("x".repeat(10).as_str()).unwrap_err();
    assert_eq!(err.status, Some(400));
    let requests = server.requests.lock().unwrap();
    let body: serde_json::Value = serde_json::from_str(&requests[0].body).unwrap();
    assert_eq!(body["messages"][0]["content"], "You are a helpful assistant");
    assert_eq!(body["messages"][1]["content"], "Largest city in Germany?");
}
