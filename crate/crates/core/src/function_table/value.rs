//! Runtime values exchanged with host functions.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::types::SemanticType;

/// A value crossing the boundary between workflow code and host functions.
///
/// Serializes as plain JSON (`null`, booleans, numbers, strings, arrays,
/// objects). Floats always carry a fractional part in JSON so that they
/// deserialize back as floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HostValue {
    Null,
    Boolean(bool),
    Integer(i64),
    Float(f64),
    Text(String),
    List(Vec<HostValue>),
    Map(IndexMap<String, HostValue>),
}

impl HostValue {
    pub fn text(s: impl Into<String>) -> HostValue {
        HostValue::Text(s.into())
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            HostValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            HostValue::Integer(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[HostValue]> {
        match self {
            HostValue::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, HostValue::Null)
    }

    /// Name of the value's shape, used in error messages.
    pub fn kind_name(&self) -> &'static str {
        match self {
            HostValue::Null => "null",
            HostValue::Boolean(_) => "Boolean",
            HostValue::Integer(_) => "Integer",
            HostValue::Float(_) => "Float",
            HostValue::Text(_) => "String",
            HostValue::List(_) => "Collection",
            HostValue::Map(_) => "Dictionary",
        }
    }

    /// Structural check of this value against a declared type.
    ///
    /// `Integer` values satisfy `Float`; `Null` satisfies only `null`, `void`
    /// and unions that contain `null`.
    pub fn conforms_to(&self, ty: &SemanticType) -> bool {
        match (ty, self) {
            (SemanticType::Union(members), v) => members.iter().any(|m| v.conforms_to(m)),
            (SemanticType::Null | SemanticType::Void, HostValue::Null) => true,
            (SemanticType::String, HostValue::Text(_)) => true,
            (SemanticType::Integer, HostValue::Integer(_)) => true,
            (SemanticType::Float, HostValue::Float(_) | HostValue::Integer(_)) => true,
            (SemanticType::Boolean, HostValue::Boolean(_)) => true,
            (SemanticType::Collection(element), HostValue::List(items)) => {
                items.iter().all(|item| item.conforms_to(element))
            }
            (SemanticType::Dictionary(key, value), HostValue::Map(entries)) => {
                entries.iter().all(|(k, v)| HostValue::Text(k.clone()).conforms_to(key) && v.conforms_to(value))
            }
            _ => false,
        }
    }
}

impl fmt::Display for HostValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match serde_json::to_string(self) {
            Ok(s) => f.write_str(&s),
            Err(_) => f.write_str("<unserializable>"),
        }
    }
}

impl From<&str> for HostValue {
    fn from(s: &str) -> Self {
        HostValue::Text(s.to_string())
    }
}

impl From<String> for HostValue {
    fn from(s: String) -> Self {
        HostValue::Text(s)
    }
}

impl From<i64> for HostValue {
    fn from(i: i64) -> Self {
        HostValue::Integer(i)
    }
}

impl From<bool> for HostValue {
    fn from(b: bool) -> Self {
        HostValue::Boolean(b)
    }
}

impl<T: Into<HostValue>> From<Vec<T>> for HostValue {
    fn from(items: Vec<T>) -> Self {
        HostValue::List(items.into_iter().map(Into::into).collect())
    }
}
