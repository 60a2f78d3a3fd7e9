//! Semantic types of the function catalog and their surface grammar.
//!
//! The grammar is deliberately small: bare base names (`String`, `Integer`,
//! `Float`, `Boolean`, `void`, `null`), the two generic containers
//! `Collection<T>` and `Dictionary<K, V>`, and `A|B` unions.

use std::fmt;

use thiserror::Error;

/// A type as it appears in a catalog signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SemanticType {
    String,
    Integer,
    Float,
    Boolean,
    Void,
    Null,
    Collection(Box<SemanticType>),
    Dictionary(Box<SemanticType>, Box<SemanticType>),
    /// Flattened, duplicate-free, at least two members, declaration order kept.
    Union(Vec<SemanticType>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed type `{text}` at offset {offset}: {reason}")]
pub struct MalformedType {
    pub text: String,
    pub offset: usize,
    pub reason: String,
}

impl SemanticType {
    /// Builds a union, flattening nested unions and dropping duplicates.
    /// Collapses to the single member when only one distinct type remains.
    pub fn union<I: IntoIterator<Item = SemanticType>>(members: I) -> SemanticType {
        let mut flat: Vec<SemanticType> = Vec::new();
        for member in members {
            match member {
                SemanticType::Union(inner) => {
                    for t in inner {
                        if !flat.contains(&t) {
                            flat.push(t);
                        }
                    }
                }
                other => {
                    if !flat.contains(&other) {
                        flat.push(other);
                    }
                }
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            SemanticType::Union(flat)
        }
    }

    pub fn collection(element: SemanticType) -> SemanticType {
        SemanticType::Collection(Box::new(element))
    }

    pub fn dictionary(key: SemanticType, value: SemanticType) -> SemanticType {
        SemanticType::Dictionary(Box::new(key), Box::new(value))
    }

    pub fn is_void(&self) -> bool {
        matches!(self, SemanticType::Void)
    }

    /// True when `Void` occurs anywhere in the type.
    pub fn contains_void(&self) -> bool {
        match self {
            SemanticType::Void => true,
            SemanticType::Collection(e) => e.contains_void(),
            SemanticType::Dictionary(k, v) => k.contains_void() || v.contains_void(),
            SemanticType::Union(ms) => ms.iter().any(|m| m.contains_void()),
            _ => false,
        }
    }

    pub fn admits_null(&self) -> bool {
        match self {
            SemanticType::Null | SemanticType::Void => true,
            SemanticType::Union(ms) => ms.iter().any(|m| m.admits_null()),
            _ => false,
        }
    }
}

impl fmt::Display for SemanticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticType::String => f.write_str("String"),
            SemanticType::Integer => f.write_str("Integer"),
            SemanticType::Float => f.write_str("Float"),
            SemanticType::Boolean => f.write_str("Boolean"),
            SemanticType::Void => f.write_str("void"),
            SemanticType::Null => f.write_str("null"),
            SemanticType::Collection(e) => write!(f, "Collection<{e}>"),
            SemanticType::Dictionary(k, v) => write!(f, "Dictionary<{k}, {v}>"),
            SemanticType::Union(ms) => {
                for (i, m) in ms.iter().enumerate() {
                    if i > 0 {
                        f.write_str("|")?;
                    }
                    write!(f, "{m}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::str::FromStr for SemanticType {
    type Err = MalformedType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_type(s)
    }
}

/// Parses a signature type such as `Integer|null` or `Dictionary<String, String>`.
pub fn parse_type(text: &str) -> Result<SemanticType, MalformedType> {
    let mut parser = TypeParser { text, pos: 0 };
    parser.skip_ws();
    if parser.at_end() {
        return Err(parser.error("empty type"));
    }
    let ty = parser.parse_union(true)?;
    parser.skip_ws();
    if !parser.at_end() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(ty)
}

struct TypeParser<'a> {
    text: &'a str,
    pos: usize,
}

impl TypeParser<'_> {
    fn error(&self, reason: &str) -> MalformedType {
        MalformedType { text: self.text.to_string(), offset: self.pos, reason: reason.to_string() }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, c: char) -> Result<(), MalformedType> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn parse_union(&mut self, top_level: bool) -> Result<SemanticType, MalformedType> {
        let mut arms = vec![self.parse_atom(top_level)?];
        loop {
            self.skip_ws();
            if self.peek() != Some('|') {
                break;
            }
            self.pos += 1;
            arms.push(self.parse_atom(false)?);
        }
        if arms.len() == 1 {
            return Ok(arms.pop().unwrap());
        }
        if arms.iter().any(SemanticType::contains_void) {
            return Err(self.error("void cannot be a union member"));
        }
        let arm_count = arms.len();
        let ty = SemanticType::union(arms);
        match &ty {
            SemanticType::Union(ms) if ms.len() == arm_count => Ok(ty),
            _ => Err(self.error("duplicate union member")),
        }
    }

    fn parse_atom(&mut self, allow_void: bool) -> Result<SemanticType, MalformedType> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = &self.text[start..self.pos];
        if name.is_empty() {
            return Err(self.error("empty type name or union arm"));
        }
        match name {
            "String" => Ok(SemanticType::String),
            "Integer" => Ok(SemanticType::Integer),
            "Float" => Ok(SemanticType::Float),
            "Boolean" => Ok(SemanticType::Boolean),
            "null" => Ok(SemanticType::Null),
            "void" if allow_void => Ok(SemanticType::Void),
            "void" => Err(self.error("void is only valid as a whole return type")),
            "Collection" => {
                self.expect('<')?;
                let element = self.parse_union(false)?;
                self.expect('>')?;
                Ok(SemanticType::collection(element))
            }
            "Dictionary" => {
                self.expect('<')?;
                let key = self.parse_union(false)?;
                self.expect(',')?;
                let value = self.parse_union(false)?;
                self.expect('>')?;
                Ok(SemanticType::dictionary(key, value))
            }
            other => {
                self.pos = start;
                Err(self.error(&format!("unknown base type `{other}`")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_catalog_forms() {
        assert_eq!(
            parse_type("Integer|null").unwrap(),
            SemanticType::Union(vec![SemanticType::Integer, SemanticType::Null])
        );
        assert_eq!(parse_type("Collection<String>").unwrap(), SemanticType::collection(SemanticType::String));
        assert_eq!(parse_type("String").unwrap(), SemanticType::String);
        assert_eq!(
            parse_type("Dictionary<String, String>").unwrap(),
            SemanticType::dictionary(SemanticType::String, SemanticType::String)
        );
        assert_eq!(parse_type("void").unwrap(), SemanticType::Void);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "",
            "   ",
            "Collection<String",
            "Collection<>",
            "Strin",
            "Integer|",
            "|Integer",
            "Integer||null",
            "Dictionary<String>",
            "String>",
            "void|null",
            "Collection<void>",
            "Integer|Integer",
        ] {
            assert!(parse_type(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn union_constructor_flattens() {
        let nested = SemanticType::union([
            SemanticType::Integer,
            SemanticType::union([SemanticType::Null, SemanticType::String]),
            SemanticType::Integer,
        ]);
        assert_eq!(nested, SemanticType::Union(vec![SemanticType::Integer, SemanticType::Null, SemanticType::String]));
        assert_eq!(SemanticType::union([SemanticType::Float, SemanticType::Float]), SemanticType::Float);
    }

    #[test]
    fn renders_with_dictionary_spacing() {
        let t = parse_type("Dictionary<String,Collection<Integer|null>>").unwrap();
        assert_eq!(t.to_string(), "Dictionary<String, Collection<Integer|null>>");
    }
}
