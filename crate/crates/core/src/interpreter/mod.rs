//! Sandboxed interpreter for generated workflows.
//!
//! Source is parsed into a small statement/expression tree and evaluated
//! by a tree walker. The only names that reach the outside world are the
//! entries of the [`FunctionTable`]; every such call is type-checked and
//! recorded in the returned [`ExecutionTrace`].

mod ast;
mod builtins;
mod eval;
mod lexer;
mod parser;
mod trace;
mod value;

use std::time::Duration;

use thiserror::Error;

pub use ast::*;
pub use lexer::{tokenize, LexError, Pos, StrToken, Tok, Token};
pub use parser::{parse_workflow, ParseError, METHOD_WHITELIST};
pub use trace::{CallFailure, CallResult, CallView, ExecutionTrace, TraceEvent, TraceParseError, TraceStatus};
pub use value::{float_repr, str_repr};

use crate::function_table::FunctionTable;
use crate::host::HostEnvironment;
use eval::{Interp, Limit, Unwind};

/// Builtin function names available to every workflow.
pub const BUILTIN_NAMES: &[&str] = &["len", "range", "str", "int", "float"];

const INTERPRETER_STACK: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid execution limits: {0}")]
pub struct LimitsError(String);

/// Resource bounds for one execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecLimits {
    max_steps: u64,
    max_depth: usize,
    max_wall: Duration,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits { max_steps: 100_000, max_depth: 64, max_wall: Duration::from_secs(30) }
    }
}

impl ExecLimits {
    pub fn new(max_steps: u64, max_depth: usize, max_wall: Duration) -> Result<Self, LimitsError> {
        if max_steps == 0 {
            return Err(LimitsError("max_steps must be positive".into()));
        }
        if max_depth == 0 {
            return Err(LimitsError("max_depth must be positive".into()));
        }
        if max_wall.is_zero() {
            return Err(LimitsError("wall-time limit must be positive".into()));
        }
        Ok(ExecLimits { max_steps, max_depth, max_wall })
    }

    pub fn with_max_steps(self, max_steps: u64) -> Result<Self, LimitsError> {
        Self::new(max_steps, self.max_depth, self.max_wall)
    }

    pub fn max_steps(&self) -> u64 {
        self.max_steps
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn max_wall(&self) -> Duration {
        self.max_wall
    }
}

/// Runs a parsed program against a frozen table and an environment.
///
/// Never panics on program behaviour: errors and limit breaches end the
/// trace with the matching status.
pub fn execute_workflow(
    program: &WorkflowProgram,
    table: &FunctionTable,
    env: &mut HostEnvironment,
    limits: &ExecLimits,
    intention_id: Option<&str>,
) -> ExecutionTrace {
    let begin =
        TraceEvent::Begin { t_ms: env.elapsed().as_millis() as u64, intention_id: intention_id.map(str::to_string) };
    if !table.is_frozen() {
        let t_ms = env.elapsed().as_millis() as u64;
        return ExecutionTrace {
            events: vec![
                begin,
                TraceEvent::Error {
                    t_ms,
                    kind: "ConfigurationError".into(),
                    message: "function table must be frozen before execution".into(),
                    line: None,
                },
                TraceEvent::End { t_ms, status: TraceStatus::RuntimeError, steps_used: 0 },
            ],
            status: TraceStatus::RuntimeError,
            steps_used: 0,
        };
    }

    // Deeply nested programs recurse deeply in the evaluator, so the run
    // gets a dedicated stack.
    std::thread::scope(|scope| {
        let handle = std::thread::Builder::new()
            .name("workflow".into())
            .stack_size(INTERPRETER_STACK)
            .spawn_scoped(scope, move || run(program, table, env, limits, begin))
            .expect("spawning the interpreter thread");
        match handle.join() {
            Ok(trace) => trace,
            Err(panic) => std::panic::resume_unwind(panic),
        }
    })
}

fn run(
    program: &WorkflowProgram,
    table: &FunctionTable,
    env: &mut HostEnvironment,
    limits: &ExecLimits,
    begin: TraceEvent,
) -> ExecutionTrace {
    let mut interp = Interp::new(table, env, limits);
    interp.events.push(begin);
    let outcome = interp.exec_block(&program.body);
    let status = match outcome {
        Ok(_) => TraceStatus::Completed,
        Err(Unwind::Raise(exc)) => {
            let t_ms = interp.now_ms();
            let line = Some(interp.line).filter(|l| *l > 0);
            interp.events.push(TraceEvent::Error {
                t_ms,
                kind: exc.kind.trace_kind().into(),
                message: exc.message,
                line,
            });
            TraceStatus::RuntimeError
        }
        Err(Unwind::Limit(limit)) => {
            let (kind, message) = match limit {
                Limit::Steps => ("StepLimitExceeded", format!("step limit of {} exceeded", limits.max_steps())),
                Limit::Depth => ("DepthLimitExceeded", format!("call depth limit of {} exceeded", limits.max_depth())),
                Limit::Time => {
                    ("TimeLimitExceeded", format!("wall-time limit of {} ms exceeded", limits.max_wall().as_millis()))
                }
            };
            let t_ms = interp.now_ms();
            let line = Some(interp.line).filter(|l| *l > 0);
            interp.events.push(TraceEvent::Error { t_ms, kind: kind.into(), message, line });
            TraceStatus::LimitExceeded
        }
    };
    let steps_used = interp.steps.min(limits.max_steps());
    let t_ms = interp.now_ms();
    let mut events = std::mem::take(&mut interp.events);
    events.push(TraceEvent::End { t_ms, status, steps_used });
    ExecutionTrace { events, status, steps_used }
}

/// Trace for source that never made it past the parser.
pub fn parse_rejected_trace(err: &ParseError, env: &HostEnvironment, intention_id: Option<&str>) -> ExecutionTrace {
    let t_ms = env.elapsed().as_millis() as u64;
    ExecutionTrace {
        events: vec![
            TraceEvent::Begin { t_ms, intention_id: intention_id.map(str::to_string) },
            TraceEvent::Error { t_ms, kind: err.kind().into(), message: err.to_string(), line: Some(err.pos().line) },
            TraceEvent::End { t_ms, status: TraceStatus::ParseRejected, steps_used: 0 },
        ],
        status: TraceStatus::ParseRejected,
        steps_used: 0,
    }
}

/// Parses and executes in one go.
pub fn run_source(
    source: &str,
    table: &FunctionTable,
    env: &mut HostEnvironment,
    limits: &ExecLimits,
    intention_id: Option<&str>,
) -> ExecutionTrace {
    match parse_workflow(source) {
        Ok(program) => execute_workflow(&program, table, env, limits, intention_id),
        Err(err) => parse_rejected_trace(&err, env, intention_id),
    }
}
