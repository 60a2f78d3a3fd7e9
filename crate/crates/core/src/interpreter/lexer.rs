//! Tokenizer for workflow source.
//!
//! Produces an indentation-aware token stream (`Newline`, `Indent`,
//! `Dedent`) and keeps comments as tokens so that comment detection can
//! work from the same scan as the parser.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrToken {
    /// Decoded value for plain strings; the raw body for f-strings, whose
    /// escapes are decoded per literal segment by the parser.
    pub value: String,
    pub fstring: bool,
    pub raw: bool,
    pub bytes: bool,
    pub triple: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Float(f64),
    Imaginary,
    Str(StrToken),
    Op(&'static str),
    Comment(String),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

// Longest first so that greedy matching works.
const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=",
    "&=", "|=", "^=", "@=", "<<", ">>", "+", "-", "*", "/", "%", "@", "<", ">", "=", "(", ")", "[", "]", "{", "}", ",",
    ":", ".", ";", "&", "|", "^", "~", "!",
];

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(source).run()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
    indents: Vec<usize>,
    depth: usize,
    tokens: Vec<Token>,
    at_line_start: bool,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0, line: 1, col: 1, indents: vec![0], depth: 0, tokens: Vec::new(), at_line_start: true }
    }

    fn here(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, LexError> {
        Err(LexError { pos: self.here(), message: message.into() })
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn push(&mut self, tok: Tok, pos: Pos) {
        self.tokens.push(Token { tok, pos });
    }

    fn last_is_newline_or_start(&self) -> bool {
        matches!(self.tokens.last().map(|t| &t.tok), None | Some(Tok::Newline) | Some(Tok::Indent) | Some(Tok::Dedent))
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        // A leading byte-order mark is not part of the program.
        if self.src.starts_with('\u{feff}') {
            self.pos = '\u{feff}'.len_utf8();
        }
        loop {
            if self.at_line_start && self.depth == 0 {
                self.handle_indentation()?;
                if self.pos >= self.src.len() {
                    break;
                }
            }
            let Some(c) = self.peek() else { break };
            let start = self.here();
            match c {
                ' ' | '\t' | '\x0c' | '\r' => {
                    self.bump();
                }
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        if !self.last_is_newline_or_start() {
                            self.push(Tok::Newline, start);
                        }
                        self.at_line_start = true;
                    }
                }
                '#' => {
                    let text = self.take_while(|c| c != '\n');
                    self.push(Tok::Comment(text), start);
                }
                '\\' if matches!(self.peek_at(1), Some('\n')) => {
                    self.bump();
                    self.bump();
                }
                '\\' if self.peek_at(1) == Some('\r') && self.peek_at(2) == Some('\n') => {
                    self.bump();
                    self.bump();
                    self.bump();
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) => {
                    let tok = self.number()?;
                    self.push(tok, start);
                }
                c if is_ident_start(c) => {
                    if let Some(tok) = self.maybe_prefixed_string()? {
                        self.push(tok, start);
                    } else {
                        let name = self.take_while(is_ident_continue);
                        self.push(Tok::Name(name), start);
                    }
                }
                '"' | '\'' => {
                    let tok = self.string(String::new())?;
                    self.push(tok, start);
                }
                _ => {
                    let rest = &self.src[self.pos..];
                    let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) else {
                        return self.err(format!("unexpected character {c:?}"));
                    };
                    for _ in 0..op.chars().count() {
                        self.bump();
                    }
                    match *op {
                        "(" | "[" | "{" => self.depth += 1,
                        ")" | "]" | "}" => {
                            if self.depth == 0 {
                                return Err(LexError { pos: start, message: format!("unmatched '{op}'") });
                            }
                            self.depth -= 1;
                        }
                        _ => {}
                    }
                    self.push(Tok::Op(op), start);
                }
            }
        }
        if self.depth > 0 {
            return self.err("unexpected end of input inside brackets");
        }
        let end = self.here();
        if !self.last_is_newline_or_start() {
            self.push(Tok::Newline, end);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, end);
        }
        self.push(Tok::Eof, end);
        Ok(self.tokens)
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }

    /// Measures the indentation of the next logical line. Blank and
    /// comment-only lines do not affect indentation.
    fn handle_indentation(&mut self) -> Result<(), LexError> {
        loop {
            let mut width = 0usize;
            while let Some(c) = self.peek() {
                match c {
                    ' ' => width += 1,
                    '\t' => width = (width / 8 + 1) * 8,
                    '\x0c' => width = 0,
                    _ => break,
                }
                self.bump();
            }
            match self.peek() {
                None => {
                    self.at_line_start = false;
                    return Ok(());
                }
                Some('\n') => {
                    self.bump();
                    continue;
                }
                Some('\r') if self.peek_at(1) == Some('\n') => {
                    self.bump();
                    self.bump();
                    continue;
                }
                Some('#') => {
                    let start = self.here();
                    let text = self.take_while(|c| c != '\n');
                    self.push(Tok::Comment(text), start);
                    continue;
                }
                Some(_) => {
                    self.at_line_start = false;
                    let pos = self.here();
                    let current = *self.indents.last().unwrap();
                    if width > current {
                        self.indents.push(width);
                        self.push(Tok::Indent, pos);
                    } else if width < current {
                        while width < *self.indents.last().unwrap() {
                            self.indents.pop();
                            self.push(Tok::Dedent, pos);
                        }
                        if width != *self.indents.last().unwrap() {
                            return Err(LexError {
                                pos,
                                message: "unindent does not match any outer indentation level".into(),
                            });
                        }
                    }
                    return Ok(());
                }
            }
        }
    }

    fn number(&mut self) -> Result<Tok, LexError> {
        let start = self.pos;
        let radix = if self.peek() == Some('0') {
            match self.peek_at(1) {
                Some('x' | 'X') => Some(16),
                Some('o' | 'O') => Some(8),
                Some('b' | 'B') => Some(2),
                _ => None,
            }
        } else {
            None
        };
        if let Some(radix) = radix {
            self.bump();
            self.bump();
            let digits = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
            let clean: String = digits.chars().filter(|&c| c != '_').collect();
            return match i64::from_str_radix(&clean, radix) {
                Ok(v) => Ok(Tok::Int(v)),
                Err(_) => self.err(format!("invalid or oversized integer literal {}", &self.src[start..self.pos])),
            };
        }
        let mut is_float = false;
        self.take_while(|c| c.is_ascii_digit() || c == '_');
        if self.peek() == Some('.') {
            is_float = true;
            self.bump();
            self.take_while(|c| c.is_ascii_digit() || c == '_');
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let sign_ok =
                matches!(self.peek_at(1), Some('+' | '-')) && self.peek_at(2).is_some_and(|c| c.is_ascii_digit());
            if sign_ok || self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
                is_float = true;
                self.bump();
                if matches!(self.peek(), Some('+' | '-')) {
                    self.bump();
                }
                self.take_while(|c| c.is_ascii_digit() || c == '_');
            }
        }
        if matches!(self.peek(), Some('j' | 'J')) {
            self.bump();
            return Ok(Tok::Imaginary);
        }
        let text: String = self.src[start..self.pos].chars().filter(|&c| c != '_').collect();
        if self.peek().is_some_and(is_ident_start) {
            return self.err("invalid numeric literal");
        }
        if is_float {
            text.parse::<f64>().map(Tok::Float).or_else(|_| self.err(format!("invalid float literal {text}")))
        } else {
            if text.len() > 1 && text.starts_with('0') && text.chars().any(|c| c != '0') {
                return self.err("leading zeros in decimal integer literals are not permitted");
            }
            text.parse::<i64>().map(Tok::Int).or_else(|_| self.err(format!("integer literal {text} is too large")))
        }
    }

    fn maybe_prefixed_string(&mut self) -> Result<Option<Tok>, LexError> {
        for len in [2usize, 1] {
            let prefix: String = self.src[self.pos..].chars().take(len).collect();
            if prefix.chars().count() != len {
                continue;
            }
            let valid =
                matches!(prefix.to_ascii_lowercase().as_str(), "r" | "u" | "f" | "b" | "rb" | "br" | "fr" | "rf");
            if valid && matches!(self.peek_at(len), Some('"' | '\'')) {
                for _ in 0..len {
                    self.bump();
                }
                return self.string(prefix.to_ascii_lowercase()).map(Some);
            }
        }
        Ok(None)
    }

    fn string(&mut self, prefix: String) -> Result<Tok, LexError> {
        let start = self.here();
        let quote = self.bump().unwrap();
        let triple = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        if triple {
            self.bump();
            self.bump();
        }
        let raw = prefix.contains('r');
        let fstring = prefix.contains('f');
        let bytes = prefix.contains('b');
        let mut body = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(LexError { pos: start, message: "unterminated string literal".into() });
            };
            if c == quote {
                if !triple {
                    break;
                }
                if self.peek() == Some(quote) && self.peek_at(1) == Some(quote) {
                    self.bump();
                    self.bump();
                    break;
                }
                body.push(c);
                continue;
            }
            if c == '\n' && !triple {
                return Err(LexError { pos: start, message: "unterminated string literal".into() });
            }
            if c == '\\' {
                // Keep escapes verbatim here; decoding happens below so that
                // raw strings and f-strings can opt out.
                body.push(c);
                if let Some(next) = self.bump() {
                    body.push(next);
                }
                continue;
            }
            body.push(c);
        }
        let value = if raw || fstring {
            body
        } else {
            decode_escapes(&body).map_err(|message| LexError { pos: start, message })?
        };
        Ok(Tok::Str(StrToken { value, fstring, raw, bytes, triple }))
    }
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Decodes backslash escapes of a non-raw string body.
pub fn decode_escapes(body: &str) -> Result<String, String> {
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        let Some(e) = chars.next() else {
            out.push('\\');
            break;
        };
        match e {
            '\n' => {}
            '\\' => out.push('\\'),
            '\'' => out.push('\''),
            '"' => out.push('"'),
            'a' => out.push('\x07'),
            'b' => out.push('\x08'),
            'f' => out.push('\x0c'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            't' => out.push('\t'),
            'v' => out.push('\x0b'),
            '0'..='7' => {
                let mut value = e.to_digit(8).unwrap();
                for _ in 0..2 {
                    match chars.peek().and_then(|c| c.to_digit(8)) {
                        Some(d) => {
                            value = value * 8 + d;
                            chars.next();
                        }
                        None => break,
                    }
                }
                out.push(char::from_u32(value).ok_or("invalid octal escape")?);
            }
            'x' | 'u' | 'U' => {
                let len = match e {
                    'x' => 2,
                    'u' => 4,
                    _ => 8,
                };
                let hex: String = (0..len).filter_map(|_| chars.next()).collect();
                let value = u32::from_str_radix(&hex, 16)
                    .ok()
                    .filter(|_| hex.len() == len)
                    .ok_or_else(|| format!("truncated \\{e} escape"))?;
                out.push(char::from_u32(value).ok_or("invalid unicode escape")?);
            }
            other => {
                out.push('\\');
                out.push(other);
            }
        }
    }
    Ok(out)
}
