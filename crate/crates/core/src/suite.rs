//! The bundled benchmark suite: nine intentions, seven models, and the
//! fixture set (transcripts, environment, success criteria) that replays it.

use crate::bench::{run_matrix, BenchError, BenchmarkReport, CriteriaSet, Matrix, RunArtifact, RunMode, RunOptions};
use crate::function_table::FunctionTable;
use crate::gateway::{FixtureTransport, ModelConfig};
use crate::host::{install_standard_functions, EnvironmentConfig};
use crate::interpreter::ExecLimits;
use crate::prompt::Intention;

pub const TRANSCRIPTS_JSON: &str = include_str!("../fixtures/transcripts.json");
pub const ENVIRONMENT_JSON: &str = include_str!("../fixtures/environment.json");
pub const CRITERIA_JSON: &str = include_str!("../fixtures/criteria.json");

pub const MODELS: [&str; 7] = [
    "falcon-3-10b-instruct",
    "phi-4",
    "qwen-2.5-14b-instruct",
    "gpt-4o",
    "gpt-4o-mini",
    "gpt-4-turbo",
    "gpt-4.5-preview-2025-02-27",
];

pub const INTENTIONS: [&str; 9] = [
    "Please sleep for 5 seconds",
    "Please tell me a random number between 1 and 100",
    "Please tell me the current temperature",
    "Play a random song in my list for 5 seconds",
    "Which is the largest city in Germany?",
    "Please tell me all files in the current directory",
    "Please send my car title to my insurance company",
    "Please summarize the Wikipedia article\nhttps://en.wikipedia.org/wiki/Transformer_(deep_learning_architecture)",
    "Please install nginx on the machine with the address 127.0.0.1:2222 running Debian GNU/Linux",
];

pub fn intentions() -> Vec<Intention> {
    INTENTIONS.iter().enumerate().map(|(i, t)| Intention::new(i as u32 + 1, *t)).collect()
}

pub fn model_configs() -> Vec<ModelConfig> {
    MODELS.iter().map(|m| ModelConfig::fixture(*m)).collect()
}

/// Frozen table with the sixteen standard functions.
pub fn standard_table() -> FunctionTable {
    let mut table = FunctionTable::new();
    install_standard_functions(&mut table).expect("fresh table accepts the catalog");
    table.frozen()
}

pub fn transport() -> FixtureTransport {
    FixtureTransport::from_json(TRANSCRIPTS_JSON).expect("bundled transcripts are valid")
}

pub fn environment() -> EnvironmentConfig {
    EnvironmentConfig::from_json(ENVIRONMENT_JSON).expect("bundled environment is valid")
}

pub fn criteria() -> CriteriaSet {
    CriteriaSet::from_json(CRITERIA_JSON).expect("bundled criteria are valid")
}

/// Replays the full bundled matrix (7 models × 9 intentions).
pub fn run_bundled() -> Result<(BenchmarkReport, Vec<RunArtifact>), BenchError> {
    let transport = transport();
    let env = environment();
    let table = standard_table();
    let criteria = criteria();
    let intentions = intentions();
    let models = model_configs();
    let factory = || env.build();
    let matrix = Matrix {
        intentions: &intentions,
        models: &models,
        table: &table,
        criteria: &criteria,
        transport: &transport,
        env_factory: &factory,
        limits: ExecLimits::default(),
        source: Some(transport.label().to_string()),
    };
    run_matrix(&matrix, RunOptions { mode: RunMode::Fixture, concurrency: 1 })
}
