//! Model × intention benchmark: run, classify, aggregate, report.

mod criteria;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{extract_code, NoCodeBlock, ParsedResponse};
use crate::function_table::FunctionTable;
use crate::gateway::{
    complete_stream, Clock, GatewayError, ModelConfig, SystemClock, TimedResponse, Transport, VirtualClock,
};
use crate::host::HostEnvironment;
use crate::interpreter::{
    execute_workflow, parse_rejected_trace, parse_workflow, ExecLimits, ExecutionTrace, TraceStatus,
};
use crate::prompt::{build_prompt, Intention, PromptError};

pub use criteria::{
    ArgPattern, Artifacts, CallPattern, CriteriaError, CriteriaSet, EnvProbe, Predicate, SuccessCriterion,
    CRITERIA_FORMAT,
};
pub use report::{parse_csv, render_report, ReportError, ReportFormat, PLOT_DATA_FORMAT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    NoCodeBlock,
    ParseRejected,
    RuntimeError,
    LimitExceeded,
    WrongFunctions,
    PredicateFailed,
    TransportError,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::NoCodeBlock => "no_code_block",
            FailureReason::ParseRejected => "parse_rejected",
            FailureReason::RuntimeError => "runtime_error",
            FailureReason::LimitExceeded => "limit_exceeded",
            FailureReason::WrongFunctions => "wrong_functions",
            FailureReason::PredicateFailed => "predicate_failed",
            FailureReason::TransportError => "transport_error",
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FailureReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown failure reason `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model_name: String,
    pub intention_id: u32,
    pub success: bool,
    pub failure_reason: Option<FailureReason>,
    pub has_preamble: bool,
    pub has_postamble: bool,
    pub has_comments: bool,
    pub ttft_ms: f64,
    pub response_time_s: f64,
    pub trace_ref: Option<String>,
    /// Human-readable context for failures (error message or failed clause).
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAggregate {
    pub model_name: String,
    pub runs: usize,
    pub success_count: usize,
    pub fail_count: usize,
    /// Runs with a preamble or a postamble.
    pub preamble_count: usize,
    pub comment_count: usize,
    pub avg_response_time_s: f64,
    pub avg_ttft_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Fixture,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub mode: RunMode,
    /// Label of the transcript set in fixture mode.
    pub source: Option<String>,
    pub intentions: Vec<u32>,
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<ModelAggregate>,
}

impl BenchmarkReport {
    pub fn from_records(mode: RunMode, source: Option<String>, records: Vec<RunRecord>) -> Self {
        let mut intentions: Vec<u32> = Vec::new();
        for r in &records {
            if !intentions.contains(&r.intention_id) {
                intentions.push(r.intention_id);
            }
        }
        let aggregates = aggregate_report(&records);
        BenchmarkReport { mode, source, intentions, records, aggregates }
    }

    pub fn record(&self, model: &str, intention_id: u32) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.model_name == model && r.intention_id == intention_id)
    }

    pub fn aggregate(&self, model: &str) -> Option<&ModelAggregate> {
        self.aggregates.iter().find(|a| a.model_name == model)
    }
}

/// Per-model counts and means, models in first-appearance order.
pub fn aggregate_report(records: &[RunRecord]) -> Vec<ModelAggregate> {
    let mut models: Vec<&str> = Vec::new();
    for r in records {
        if !models.contains(&r.model_name.as_str()) {
            models.push(&r.model_name);
        }
    }
    models
        .into_iter()
        .map(|m| {
            let rs: Vec<&RunRecord> = records.iter().filter(|r| r.model_name == m).collect();
            let n = rs.len();
            let success_count = rs.iter().filter(|r| r.success).count();
            let mean = |f: fn(&RunRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n as f64;
            ModelAggregate {
                model_name: m.to_string(),
                runs: n,
                success_count,
                fail_count: n - success_count,
                preamble_count: rs.iter().filter(|r| r.has_preamble || r.has_postamble).count(),
                comment_count: rs.iter().filter(|r| r.has_comments).count(),
                avg_response_time_s: mean(|r| r.response_time_s),
                avg_ttft_ms: mean(|r| r.ttft_ms),
            }
        })
        .collect()
}

/// Decides success for one run.
///
/// Order of failure reasons: missing code block, parse rejection, then the
/// predicate. A failing predicate is attributed to the trace status when
/// execution stopped abnormally, otherwise to the first failing clause.
pub fn classify_success(
    parsed: Result<&ParsedResponse, &NoCodeBlock>,
    trace: &ExecutionTrace,
    env_after: &HostEnvironment,
    criterion: &SuccessCriterion,
) -> (bool, Option<FailureReason>) {
    classify_detailed(parsed, trace, env_after, criterion).0
}

fn classify_detailed(
    parsed: Result<&ParsedResponse, &NoCodeBlock>,
    trace: &ExecutionTrace,
    env_after: &HostEnvironment,
    criterion: &SuccessCriterion,
) -> ((bool, Option<FailureReason>), Option<String>) {
    let Ok(parsed) = parsed else {
        return ((false, Some(FailureReason::NoCodeBlock)), Some("no fenced code block in response".into()));
    };
    let error_detail = || trace.error().map(|(k, m)| format!("{k}: {m}"));
    if trace.status == TraceStatus::ParseRejected {
        return ((false, Some(FailureReason::ParseRejected)), error_detail());
    }
    let artifacts = Artifacts { parsed, trace, env: env_after };
    match criterion.predicate.check(&artifacts) {
        Ok(()) => ((true, None), None),
        Err(clause) => {
            let clause_text = serde_json::to_string(clause).unwrap_or_default();
            match trace.status {
                TraceStatus::RuntimeError => ((false, Some(FailureReason::RuntimeError)), error_detail()),
                TraceStatus::LimitExceeded => ((false, Some(FailureReason::LimitExceeded)), error_detail()),
                _ => {
                    let reason = match clause {
                        Predicate::NotCalled(_) => FailureReason::WrongFunctions,
                        _ => FailureReason::PredicateFailed,
                    };
                    ((false, Some(reason)), Some(format!("failed clause {clause_text}")))
                }
            }
        }
    }
}

/// Full artifacts of one run.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub record: RunRecord,
    pub response: Option<TimedResponse>,
    pub parsed: Option<ParsedResponse>,
    pub trace: Option<ExecutionTrace>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("no success criterion for intention {0}")]
    MissingCriterion(u32),
}

/// How the matrix is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub mode: RunMode,
    /// Upper bound on concurrent runs in live mode. Fixture mode is sequential.
    pub concurrency: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { mode: RunMode::Fixture, concurrency: 1 }
    }
}

pub struct Matrix<'a> {
    pub intentions: &'a [Intention],
    pub models: &'a [ModelConfig],
    pub table: &'a FunctionTable,
    pub criteria: &'a CriteriaSet,
    pub transport: &'a dyn Transport,
    pub env_factory: &'a (dyn Fn() -> HostEnvironment + Sync),
    pub limits: ExecLimits,
    pub source: Option<String>,
}

pub fn trace_ref(model: &str, intention_id: u32) -> String {
    let safe: String = model
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_') { c } else { '_' })
        .collect();
    format!("{safe}__{intention_id}.jsonl")
}

/// Runs one (model, intention) pair end to end. Configuration problems are
/// errors; anything the model or the program does wrong becomes a record.
pub fn run_one(
    m: &Matrix<'_>,
    model: &ModelConfig,
    intention: &Intention,
    mode: RunMode,
) -> Result<RunArtifact, BenchError> {
    let criterion = m.criteria.get(intention.id).ok_or(BenchError::MissingCriterion(intention.id))?;
    let bundle = build_prompt(intention, m.table, model)?;
    let mut clock: Box<dyn Clock> = match mode {
        RunMode::Fixture => Box::new(VirtualClock::new()),
        RunMode::Live => Box::new(SystemClock::new()),
    };
    let base = RunRecord {
        model_name: model.model_name.clone(),
        intention_id: intention.id,
        success: false,
        failure_reason: None,
        has_preamble: false,
        has_postamble: false,
        has_comments: false,
        ttft_ms: 0.0,
        response_time_s: 0.0,
        trace_ref: None,
        detail: None,
    };
    let response = match complete_stream(&bundle, Some(intention.id), model, m.transport, clock.as_mut()) {
        Ok(r) => r,
        Err(e @ (GatewayError::MissingTranscript { .. } | GatewayError::FixtureParse(_) | GatewayError::Config(_))) => {
            return Err(e.into())
        }
        Err(e) => {
            log::warn!("{} / intention {}: {e}", model.model_name, intention.id);
            return Ok(RunArtifact {
                record: RunRecord {
                    failure_reason: Some(FailureReason::TransportError),
                    detail: Some(e.to_string()),
                    ..base
                },
                response: None,
                parsed: None,
                trace: None,
            });
        }
    };
    let mut record =
        RunRecord { ttft_ms: response.time_to_first_token_ms, response_time_s: response.response_time_s, ..base };
    let mut env = (m.env_factory)();
    let id_label = intention.id.to_string();
    let parsed = extract_code(&response.full_text);
    let trace = match &parsed {
        Ok(p) => {
            record.has_preamble = p.has_preamble;
            record.has_postamble = p.has_postamble;
            record.has_comments = p.has_comments;
            let trace = match parse_workflow(&p.code) {
                Ok(program) => execute_workflow(&program, m.table, &mut env, &m.limits, Some(&id_label)),
                Err(err) => parse_rejected_trace(&err, &env, Some(&id_label)),
            };
            record.trace_ref = Some(trace_ref(&model.model_name, intention.id));
            Some(trace)
        }
        Err(_) => None,
    };
    let empty = ExecutionTrace { events: Vec::new(), status: TraceStatus::ParseRejected, steps_used: 0 };
    let ((success, reason), detail) =
        classify_detailed(parsed.as_ref(), trace.as_ref().unwrap_or(&empty), &env, criterion);
    record.success = success;
    record.failure_reason = reason;
    record.detail = detail;
    Ok(RunArtifact { record, response: Some(response), parsed: parsed.ok(), trace })
}

/// One record per (model, intention), models outermost.
pub fn run_matrix(m: &Matrix<'_>, options: RunOptions) -> Result<(BenchmarkReport, Vec<RunArtifact>), BenchError> {
    let pairs: Vec<(&ModelConfig, &Intention)> =
        m.models.iter().flat_map(|model| m.intentions.iter().map(move |i| (model, i))).collect();
    for i in m.intentions {
        if m.criteria.get(i.id).is_none() {
            return Err(BenchError::MissingCriterion(i.id));
        }
    }
    if options.mode == RunMode::Fixture {
        for (model, i) in &pairs {
            if !m.transport.has_transcript(&model.model_name, i.id) {
                return Err(GatewayError::MissingTranscript {
                    model: model.model_name.clone(),
                    intention_id: Some(i.id),
                }
                .into());
            }
        }
    }

    let artifacts = if options.mode == RunMode::Live && options.concurrency > 1 {
        let workers = options.concurrency.min(pairs.len().max(1));
        let next = std::sync::atomic::AtomicUsize::new(0);
        let mut slots: Vec<Option<Result<RunArtifact, BenchError>>> = (0..pairs.len()).map(|_| None).collect();
        let results = std::sync::Mutex::new(&mut slots);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    let Some((model, i)) = pairs.get(k) else { break };
                    let out = run_one(m, model, i, options.mode);
                    results.lock().expect("result slots")[k] = Some(out);
                });
            }
        });
        slots.into_iter().map(|s| s.expect("every pair ran")).collect::<Result<Vec<_>, _>>()?
    } else {
        pairs.iter().map(|(model, i)| run_one(m, model, i, options.mode)).collect::<Result<Vec<_>, _>>()?
    };
    let records = artifacts.iter().map(|a| a.record.clone()).collect();
    Ok((BenchmarkReport::from_records(options.mode, m.source.clone(), records), artifacts))
}
