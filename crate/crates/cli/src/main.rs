use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use intent_forge::analyzer::extract_code;
use intent_forge::bench::{
    classify_success, parse_csv, render_report, run_matrix, trace_ref, BenchmarkReport, CriteriaSet, Matrix,
    ReportFormat, RunArtifact, RunMode, RunOptions,
};
use intent_forge::gateway::{
    complete_stream, load_fixture_transport, subquery_via_gateway, LiveTransport, ModelConfig, SystemClock, Transport,
    TransportKind, VirtualClock, DEFAULT_ENDPOINT,
};
use intent_forge::host::{AnswerSource, EnvClock, EnvironmentConfig, HostEnvironment, ShellBackend, SubqueryBackend};
use intent_forge::interpreter::{
    execute_workflow, parse_rejected_trace, parse_workflow, ExecLimits, ExecutionTrace, TraceStatus,
};
use intent_forge::prompt::{build_prompt, render_docs, Intention};
use intent_forge::suite;

#[derive(Parser)]
#[command(name = "intent-forge", version, about = "Resolve natural-language intentions into sandboxed workflows")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve one intention and print the response, trace and verdict.
    Resolve(ResolveArgs),
    /// Run the model × intention matrix and render a report.
    Bench(BenchArgs),
    /// Re-render a report from a csv produced by `bench --format csv`.
    Report(ReportArgs),
    /// Print the function catalog exactly as it appears in prompts.
    Docs,
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// Transcript fixture file (defaults to the bundled set).
    #[arg(long, value_name = "FILE", conflicts_with = "live")]
    fixtures: Option<PathBuf>,
    /// Query a live OpenAI-compatible endpoint instead of replaying fixtures.
    #[arg(long)]
    live: bool,
    /// Endpoint base URL for live mode.
    #[arg(long, value_name = "URL")]
    endpoint: Option<String>,
    /// Environment fixture file (defaults to the bundled environment).
    #[arg(long, value_name = "FILE")]
    env: Option<PathBuf>,
    /// Success criteria file (defaults to the bundled criteria).
    #[arg(long, value_name = "FILE")]
    criteria: Option<PathBuf>,
    /// Override the environment's random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run `shell` commands on this machine instead of the scripted shell.
    #[arg(long)]
    allow_real_shell: bool,
    /// TOML file with endpoint, temperature, timeout, role, concurrency and models.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ResolveArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Intention text. Bundled intentions may be given by id instead.
    #[arg(long, conflicts_with = "id", required_unless_present = "id")]
    intention: Option<String>,
    /// Bundled intention id (1-9).
    #[arg(long)]
    id: Option<u32>,
    #[arg(long, default_value = "gpt-4o")]
    model: String,
    /// Write the execution trace as JSON lines to this file.
    #[arg(long, value_name = "FILE")]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Comma-separated model names (defaults to the bundled seven).
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    /// markdown, csv or plot-data.
    #[arg(long, default_value = "markdown")]
    format: String,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Directory receiving one JSONL trace per run.
    #[arg(long, value_name = "DIR")]
    trace_out: Option<PathBuf>,
    /// Run the whole matrix this many times.
    #[arg(long, default_value_t = 1)]
    repeat: u32,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV report to read.
    input: PathBuf,
    #[arg(long, default_value = "markdown")]
    format: String,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Label the timings as live measurements rather than fixture replay.
    #[arg(long)]
    live: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    endpoint: Option<String>,
    temperature: Option<f64>,
    timeout_s: Option<f64>,
    role: Option<String>,
    concurrency: Option<usize>,
    models: Option<Vec<String>>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Resolve(args) => resolve(args),
        Command::Bench(args) => bench(args),
        Command::Report(args) => report(args),
        Command::Docs => docs(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn docs() -> Result<()> {
    let mut text = render_docs(&suite::standard_table())?;
    text.push('\n');
    write_output(None, &text)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
    }
}

/// Everything resolved from flags and files before any run starts.
struct Setup {
    mode: RunMode,
    transport: Arc<dyn Transport>,
    source_label: Option<String>,
    environment: EnvironmentConfig,
    criteria: CriteriaSet,
    file: FileConfig,
}

fn setup(args: &SourceArgs) -> Result<Setup> {
    let file = FileConfig::load(args.config.as_deref())?;
    let environment = match &args.env {
        Some(p) => EnvironmentConfig::load(p)?,
        None => suite::environment(),
    };
    let criteria = match &args.criteria {
        Some(p) => CriteriaSet::load(p)?,
        None => suite::criteria(),
    };
    let (mode, transport, source_label): (_, Arc<dyn Transport>, _) = if args.live {
        (RunMode::Live, Arc::new(LiveTransport::from_env()?), None)
    } else {
        let t = match &args.fixtures {
            Some(p) => load_fixture_transport(p)?,
            None => suite::transport(),
        };
        let label = Some(t.label().to_string()).filter(|l| !l.is_empty());
        (RunMode::Fixture, Arc::new(t) as Arc<dyn Transport>, label)
    };
    Ok(Setup { mode, transport, source_label, environment, criteria, file })
}

fn model_config(name: &str, args: &SourceArgs, s: &Setup) -> Result<ModelConfig> {
    let transport = match s.mode {
        RunMode::Live => TransportKind::Live,
        RunMode::Fixture => TransportKind::Fixture(args.fixtures.clone()),
    };
    let endpoint =
        args.endpoint.clone().or_else(|| s.file.endpoint.clone()).unwrap_or_else(|| DEFAULT_ENDPOINT.to_string());
    let timeout = match s.file.timeout_s {
        Some(t) if t.is_finite() && t > 0.0 => Duration::from_secs_f64(t),
        Some(t) => bail!("timeout_s must be positive, got {t}"),
        None => intent_forge::gateway::DEFAULT_TIMEOUT,
    };
    let mut config = ModelConfig::new(name, endpoint, s.file.temperature.unwrap_or(0.0), transport, timeout)?;
    if let Some(role) = &s.file.role {
        config = config.with_role(role.clone());
    }
    Ok(config)
}

fn build_env(args: &SourceArgs, s: &Setup, model: &ModelConfig, interactive: bool) -> HostEnvironment {
    let mut env = match args.seed {
        Some(seed) => s.environment.build_with_seed(seed),
        None => s.environment.build(),
    };
    if s.mode == RunMode::Live {
        env =
            env.with_subquery_backend(SubqueryBackend::Live(subquery_via_gateway(s.transport.clone(), model.clone())));
        if interactive {
            env = env
                .with_clock(EnvClock::real())
                .with_answer_source(AnswerSource::Interactive(Box::new(prompt_terminal)));
        }
    }
    if args.allow_real_shell {
        env = env.with_shell(ShellBackend::Real);
    }
    env
}

fn prompt_terminal(question: &str) -> Option<String> {
    eprint!("{question} ");
    let _ = std::io::stderr().flush();
    let mut line = String::new();
    std::io::stdin().lock().read_line(&mut line).ok()?;
    Some(line.trim_end_matches(['\r', '\n']).to_string())
}

fn resolve(args: ResolveArgs) -> Result<()> {
    let s = setup(&args.source)?;
    let intention = match (args.id, &args.intention) {
        (Some(id), _) => suite::intentions()
            .into_iter()
            .find(|i| i.id == id)
            .with_context(|| format!("no bundled intention with id {id}"))?,
        (None, Some(text)) => {
            suite::intentions().into_iter().find(|i| i.text == *text).unwrap_or_else(|| Intention::new(0, text.clone()))
        }
        (None, None) => bail!("give --intention or --id"),
    };
    if s.mode == RunMode::Fixture && intention.id == 0 {
        bail!("fixture mode replays bundled intentions only; use --id or --live");
    }
    let model = model_config(&args.model, &args.source, &s)?;
    let table = suite::standard_table();
    let bundle = build_prompt(&intention, &table, &model)?;
    let id = Some(intention.id).filter(|i| *i > 0);
    let response = match s.mode {
        RunMode::Fixture => complete_stream(&bundle, id, &model, s.transport.as_ref(), &mut VirtualClock::new())?,
        RunMode::Live => complete_stream(&bundle, id, &model, s.transport.as_ref(), &mut SystemClock::new())?,
    };

    let mut out = String::new();
    out.push_str(&format!(
        "== response from {} (time to first token {:.1} ms, response time {:.2} s)\n{}\n",
        model.model_name, response.time_to_first_token_ms, response.response_time_s, response.full_text
    ));
    let mut env = build_env(&args.source, &s, &model, true);
    let label = id.map(|i| i.to_string());
    let parsed = extract_code(&response.full_text);
    let trace = match &parsed {
        Ok(p) => {
            out.push_str(&format!(
                "== analysis: preamble {}, postamble {}, comments {}, blocks {}\n",
                p.has_preamble,
                p.has_postamble,
                p.has_comments,
                p.block_count()
            ));
            match parse_workflow(&p.code) {
                Ok(program) => execute_workflow(&program, &table, &mut env, &ExecLimits::default(), label.as_deref()),
                Err(e) => parse_rejected_trace(&e, &env, label.as_deref()),
            }
        }
        Err(_) => {
            out.push_str("== analysis: no fenced code block; nothing executed\n");
            ExecutionTrace { events: Vec::new(), status: TraceStatus::ParseRejected, steps_used: 0 }
        }
    };
    if !trace.events.is_empty() {
        out.push_str(&format!("== trace: {} after {} steps\n", trace.status.as_str(), trace.steps_used));
        out.push_str(&trace.to_jsonl());
        let outputs: Vec<&str> = trace.outputs().collect();
        if !outputs.is_empty() {
            out.push_str("== output\n");
            for line in outputs {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    if let Some(path) = &args.trace_out {
        std::fs::write(path, trace.to_jsonl()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(criterion) = id.and_then(|i| s.criteria.get(i)) {
        let (ok, reason) = classify_success(parsed.as_ref(), &trace, &env, criterion);
        match reason {
            None if ok => out.push_str("== verdict: success\n"),
            reason => {
                out.push_str(&format!("== verdict: failure ({})\n", reason.map(|r| r.as_str()).unwrap_or("unknown")))
            }
        }
    }
    write_output(None, &out)
}

fn bench(args: BenchArgs) -> Result<()> {
    let format: ReportFormat = args.format.parse()?;
    if args.repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    let s = setup(&args.source)?;
    let names: Vec<String> = if !args.models.is_empty() {
        args.models.clone()
    } else if let Some(models) = &s.file.models {
        models.clone()
    } else {
        suite::MODELS.iter().map(|m| m.to_string()).collect()
    };
    let models = names.iter().map(|n| model_config(n, &args.source, &s)).collect::<Result<Vec<_>>>()?;
    let table = suite::standard_table();
    let intentions = suite::intentions();
    let concurrency = s.file.concurrency.unwrap_or(4).max(1);

    let mut records = Vec::new();
    let mut artifacts: Vec<RunArtifact> = Vec::new();
    for round in 0..args.repeat {
        // Live sub-queries go to the first listed model.
        let reference = models.first().cloned().unwrap_or_else(|| ModelConfig::fixture("none"));
        let factory = || build_env(&args.source, &s, &reference, false);
        let matrix = Matrix {
            intentions: &intentions,
            models: &models,
            table: &table,
            criteria: &s.criteria,
            transport: s.transport.as_ref(),
            env_factory: &factory,
            limits: ExecLimits::default(),
            source: s.source_label.clone(),
        };
        let (report, arts) = run_matrix(&matrix, RunOptions { mode: s.mode, concurrency })?;
        log::info!("round {} finished with {} records", round + 1, report.records.len());
        records.extend(report.records);
        artifacts.extend(arts);
    }
    let report = BenchmarkReport::from_records(s.mode, s.source_label.clone(), records);

    if let Some(dir) = &args.trace_out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for a in &artifacts {
            if let Some(trace) = &a.trace {
                let path = dir.join(trace_ref(&a.record.model_name, a.record.intention_id));
                std::fs::write(&path, trace.to_jsonl()).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    write_output(args.out.as_deref(), &render_report(&report, format))
}

fn report(args: ReportArgs) -> Result<()> {
    let format: ReportFormat = args.format.parse()?;
    let text = std::fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let records = parse_csv(&text)?;
    let mode = if args.live { RunMode::Live } else { RunMode::Fixture };
    let report = BenchmarkReport::from_records(mode, None, records);
    write_output(args.out.as_deref(), &render_report(&report, format))
}
