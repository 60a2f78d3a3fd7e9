//! Intent resolution controller.
//!
//! A natural-language intention is turned into a prompt over a typed
//! function catalog, sent to a chat-completion model, and the code block in
//! the reply is run inside a sandboxed interpreter whose only effects are
//! catalog calls. Every run produces an execution trace; the benchmark
//! harness classifies those traces and renders per-model reports.

pub mod analyzer;
pub mod bench;
pub mod function_table;
pub mod gateway;
pub mod host;
pub mod interpreter;
pub mod prompt;
pub mod suite;
