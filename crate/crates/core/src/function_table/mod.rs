//! The function table: a typed catalog of host functions.
//!
//! Every effect a generated workflow can have goes through an entry of this
//! table. Entries carry a [`FunctionSpec`] (rendered into the prompt) and an
//! implementation callback. Calls are type-checked against the spec on the
//! way in and on the way out.

mod types;
mod value;

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::host::HostEnvironment;

pub use types::{parse_type, MalformedType, SemanticType};
pub use value::HostValue;

/// Python keywords; catalog names must be callable from workflow code.
const RESERVED: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal",
    "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
];

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !RESERVED.contains(&name)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub ty: SemanticType,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, ty: SemanticType) -> Self {
        ParamSpec { name: name.into(), ty }
    }
}

/// Whether an entry is a desk-scale stand-in or a real integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FunctionKind {
    #[default]
    Stub,
    Real,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpec {
    pub name: String,
    pub params: Vec<ParamSpec>,
    pub return_type: SemanticType,
    pub doc: Option<String>,
    pub kind: FunctionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("`{0}` is not a valid identifier")]
    InvalidName(String),
    #[error("parameter `{0}` is declared more than once")]
    DuplicateParam(String),
    #[error("parameter `{0}` cannot have type void")]
    VoidParam(String),
    #[error("return type may only use void as the whole type")]
    NestedVoid,
    #[error("malformed signature: {0}")]
    Malformed(String),
    #[error(transparent)]
    Type(#[from] MalformedType),
}

impl FunctionSpec {
    pub fn new(name: impl Into<String>, params: Vec<ParamSpec>, return_type: SemanticType) -> Result<Self, SpecError> {
        let spec = FunctionSpec { name: name.into(), params, return_type, doc: None, kind: FunctionKind::Stub };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_doc(mut self, doc: impl Into<String>) -> Self {
        self.doc = Some(doc.into());
        self
    }

    pub fn with_kind(mut self, kind: FunctionKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if !is_identifier(&self.name) {
            return Err(SpecError::InvalidName(self.name.clone()));
        }
        for (i, p) in self.params.iter().enumerate() {
            if !is_identifier(&p.name) {
                return Err(SpecError::InvalidName(p.name.clone()));
            }
            if self.params[..i].iter().any(|q| q.name == p.name) {
                return Err(SpecError::DuplicateParam(p.name.clone()));
            }
            if p.ty.contains_void() {
                return Err(SpecError::VoidParam(p.name.clone()));
            }
        }
        if !self.return_type.is_void() && self.return_type.contains_void() {
            return Err(SpecError::NestedVoid);
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Parses one catalog line, `function name(p: T, ...): Ret`, with an
    /// optional trailing `// doc` comment.
    pub fn parse_signature(line: &str) -> Result<FunctionSpec, SpecError> {
        let malformed = |why: &str| SpecError::Malformed(format!("{why}: `{line}`"));
        let (head, doc) = match line.find(" // ") {
            Some(i) => (&line[..i], Some(line[i + 4..].trim().to_string())),
            None => (line, None),
        };
        let rest = head.trim().strip_prefix("function ").ok_or_else(|| malformed("missing `function` keyword"))?;
        let open = rest.find('(').ok_or_else(|| malformed("missing `(`"))?;
        let name = rest[..open].trim();
        let close = matching_paren(rest, open).ok_or_else(|| malformed("unbalanced parentheses"))?;
        let params_text = &rest[open + 1..close];
        let ret_text =
            rest[close + 1..].trim_start().strip_prefix(':').ok_or_else(|| malformed("missing return type"))?;

        let mut params = Vec::new();
        for piece in split_top_level(params_text) {
            let piece = piece.trim();
            if piece.is_empty() {
                if params_text.trim().is_empty() {
                    break;
                }
                return Err(malformed("empty parameter"));
            }
            let colon = piece.find(':').ok_or_else(|| malformed("parameter without type"))?;
            let pname = piece[..colon].trim();
            let pty = parse_type(&piece[colon + 1..])?;
            params.push(ParamSpec::new(pname, pty));
        }
        let mut spec = FunctionSpec::new(name, params, parse_type(ret_text)?)?;
        spec.doc = doc.filter(|d| !d.is_empty());
        Ok(spec)
    }
}

fn matching_paren(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, c) in text.char_indices().skip_while(|(i, _)| *i < open) {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Splits on commas that are not nested inside angle brackets.
fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '<' => depth += 1,
            '>' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

/// Renders the catalog line for a spec, e.g.
/// `function find_contact_id(expression: String): Integer|null`.
pub fn render_signature(spec: &FunctionSpec) -> String {
    let params = spec.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect::<Vec<_>>().join(", ");
    let mut line = format!("function {}({}): {}", spec.name, params, spec.return_type);
    if let Some(doc) = &spec.doc {
        line.push_str(" // ");
        line.push_str(doc);
    }
    line
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_signature(self))
    }
}

/// Error raised by a host function implementation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", self.render())]
pub struct HostError {
    pub message: String,
    /// Transport-style status code, when the failure models one (e.g. HTTP 400).
    pub status: Option<u16>,
    /// Set when a fixture store had no entry for the request, as opposed to
    /// the request itself being invalid.
    pub fixture_miss: bool,
}

impl HostError {
    pub fn new(message: impl Into<String>) -> Self {
        HostError { message: message.into(), status: None, fixture_miss: false }
    }

    pub fn with_status(status: u16, message: impl Into<String>) -> Self {
        HostError { message: message.into(), status: Some(status), fixture_miss: false }
    }

    pub fn fixture_miss(message: impl Into<String>) -> Self {
        HostError { message: message.into(), status: None, fixture_miss: true }
    }

    fn render(&self) -> String {
        match self.status {
            Some(status) => format!("{status} {}", self.message),
            None => self.message.clone(),
        }
    }
}

pub type Callback = Arc<dyn Fn(&[HostValue], &mut HostEnvironment) -> Result<HostValue, HostError> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("function `{0}` is already registered")]
    DuplicateName(String),
    #[error("function table is frozen")]
    TableFrozen,
    #[error("function table must be frozen before use")]
    NotFrozen,
    #[error(transparent)]
    InvalidSpec(#[from] SpecError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvokeError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("{name}() takes {expected} argument(s) but {given} were given")]
    ArityMismatch { name: String, expected: usize, given: usize },
    #[error("{function}(): argument `{param}` expects {expected}, got {found}")]
    ArgumentTypeMismatch { function: String, param: String, expected: String, found: String },
    #[error("{function}() returned {found}, declared {expected}")]
    ReturnTypeMismatch { function: String, expected: String, found: String },
    #[error(transparent)]
    Host(#[from] HostError),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Clone)]
struct Entry {
    spec: FunctionSpec,
    callback: Callback,
}

/// Catalog of host functions. Registration order is preserved.
///
/// A table is mutable until [`FunctionTable::freeze`]; after that it only
/// serves lookups and invocations and can be shared across threads.
#[derive(Clone, Default)]
pub struct FunctionTable {
    entries: IndexMap<String, Entry>,
    frozen: bool,
}

impl fmt::Debug for FunctionTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionTable")
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .field("frozen", &self.frozen)
            .finish()
    }
}

impl FunctionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, spec: FunctionSpec, callback: F) -> Result<(), TableError>
    where
        F: Fn(&[HostValue], &mut HostEnvironment) -> Result<HostValue, HostError> + Send + Sync + 'static,
    {
        if self.frozen {
            return Err(TableError::TableFrozen);
        }
        spec.validate()?;
        if self.entries.contains_key(&spec.name) {
            return Err(TableError::DuplicateName(spec.name));
        }
        self.entries.insert(spec.name.clone(), Entry { spec, callback: Arc::new(callback) });
        Ok(())
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn frozen(mut self) -> Self {
        self.freeze();
        self
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn lookup(&self, name: &str) -> Option<&FunctionSpec> {
        self.entries.get(name).map(|e| &e.spec)
    }

    /// Specs in registration order.
    pub fn specs(&self) -> impl Iterator<Item = &FunctionSpec> {
        self.entries.values().map(|e| &e.spec)
    }

    /// Type-checked call. The callback only runs when the name, arity and
    /// every argument check out; its result is checked against the declared
    /// return type, with `void` mapping to `Null`.
    pub fn invoke(&self, name: &str, args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, InvokeError> {
        if !self.frozen {
            return Err(TableError::NotFrozen.into());
        }
        let entry = self.entries.get(name).ok_or_else(|| InvokeError::UnknownFunction(name.to_string()))?;
        let spec = &entry.spec;
        if args.len() != spec.arity() {
            return Err(InvokeError::ArityMismatch {
                name: name.to_string(),
                expected: spec.arity(),
                given: args.len(),
            });
        }
        for (param, arg) in spec.params.iter().zip(args) {
            if !arg.conforms_to(&param.ty) {
                return Err(InvokeError::ArgumentTypeMismatch {
                    function: name.to_string(),
                    param: param.name.clone(),
                    expected: param.ty.to_string(),
                    found: arg.kind_name().to_string(),
                });
            }
        }
        let result = (entry.callback)(args, env)?;
        if spec.return_type.is_void() {
            return Ok(HostValue::Null);
        }
        if !result.conforms_to(&spec.return_type) {
            return Err(InvokeError::ReturnTypeMismatch {
                function: name.to_string(),
                expected: spec.return_type.to_string(),
                found: result.kind_name().to_string(),
            });
        }
        Ok(result)
    }
}
