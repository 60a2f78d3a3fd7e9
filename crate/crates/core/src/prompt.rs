//! Prompt formatting: catalog docs plus intention text.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::function_table::{render_signature, FunctionTable};
use crate::gateway::ModelConfig;

/// Role message sent unless the model configuration overrides it.
pub const DEFAULT_ROLE: &str = "You are a Python 3 code generator";

/// Version tag of [`PROMPT_TEMPLATE`]. Bump on any wording change.
pub const PROMPT_TEMPLATE_VERSION: &str = "intent-forge/prompt@1";

/// User message template. `{functions}` and `{intention}` are substituted.
pub const PROMPT_TEMPLATE: &str = "\
Write a Python 3 program that fulfils the intention below.

Rules:
- Reply with exactly one fenced code block (```python ... ```) and nothing else. No explanation before or after the block.
- Use only the functions listed below and plain Python. Do not import any modules.
- If you define a function, you must also invoke it.
- Use print to report results to the user.

Available functions:
{functions}

Intention:
{intention}
";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("function table is empty")]
    EmptyTable,
    #[error("function table must be frozen before rendering docs")]
    NotFrozen,
    #[error("intention {0} has empty text")]
    EmptyIntention(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intention {
    pub id: u32,
    pub text: String,
}

impl Intention {
    pub fn new(id: u32, text: impl Into<String>) -> Self {
        Intention { id, text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub temperature: f64,
    pub model_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub role_message: String,
    pub user_message: String,
    pub model_params: ModelParams,
}

/// One signature line per entry, in registration order.
pub fn render_docs(table: &FunctionTable) -> Result<String, PromptError> {
    if !table.is_frozen() {
        return Err(PromptError::NotFrozen);
    }
    if table.is_empty() {
        return Err(PromptError::EmptyTable);
    }
    Ok(table.specs().map(render_signature).collect::<Vec<_>>().join("\n"))
}

pub fn build_prompt(
    intention: &Intention,
    table: &FunctionTable,
    config: &ModelConfig,
) -> Result<PromptBundle, PromptError> {
    if intention.text.is_empty() {
        return Err(PromptError::EmptyIntention(intention.id));
    }
    let docs = render_docs(table)?;
    // Substituting in one pass keeps braces inside the intention text intact.
    let (head, rest) = PROMPT_TEMPLATE.split_once("{functions}").expect("template has {functions}");
    let (mid, tail) = rest.split_once("{intention}").expect("template has {intention}");
    let user_message = format!("{head}{docs}{mid}{}{tail}", intention.text);
    Ok(PromptBundle {
        role_message: config.role.clone(),
        user_message,
        model_params: ModelParams { temperature: config.temperature(), model_name: config.model_name.clone() },
    })
}
