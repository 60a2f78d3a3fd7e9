//! Response decoding: fenced code extraction and comment detection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interpreter::{tokenize, Tok};

const FENCE: &str = "```";

/// One fenced block and the text leading up to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FencedBlock {
    /// Text between the previous block (or the start) and this opening fence.
    pub leading: String,
    /// The opening fence line including its newline, e.g. "```python\n".
    pub opening_fence: String,
    pub label: Option<String>,
    pub code: String,
    /// From the newline ending the code up to and including the closing backticks.
    pub closing_fence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    /// Interior of all fenced blocks, joined with newlines.
    pub code: String,
    pub preamble: String,
    pub postamble: String,
    pub has_preamble: bool,
    pub has_postamble: bool,
    pub has_comments: bool,
    pub fence_label: Option<String>,
    pub blocks: Vec<FencedBlock>,
}

impl ParsedResponse {
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Reassembles the response the blocks were cut from.
    pub fn reconstruct(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            out.push_str(&b.leading);
            out.push_str(&b.opening_fence);
            out.push_str(&b.code);
            out.push_str(&b.closing_fence);
        }
        out.push_str(&self.postamble);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("response contains no well-formed fenced code block")]
pub struct NoCodeBlock {
    pub raw: String,
}

fn has_text(s: &str) -> bool {
    s.chars().any(|c| !c.is_whitespace())
}

/// Byte offsets at which each line starts.
fn line_starts(text: &str) -> impl Iterator<Item = usize> + '_ {
    std::iter::once(0).chain(text.match_indices('\n').map(|(i, _)| i + 1)).filter(move |&i| i < text.len())
}

fn line_at(text: &str, start: usize) -> &str {
    let rest = &text[start..];
    rest.find('\n').map_or(rest, |i| &rest[..i])
}

/// Finds the next block at or after `from`: (fence start, label, interior start, interior end, fence end).
fn next_block(text: &str, from: usize) -> Option<(usize, Option<String>, usize, usize, usize)> {
    for start in line_starts(text).filter(|&s| s >= from) {
        let line = line_at(text, start);
        let indent = line.len() - line.trim_start_matches([' ', '\t']).len();
        let Some(info) = line[indent..].strip_prefix(FENCE) else { continue };
        let info = info.trim_end_matches('\r');
        if info.contains('`') || start + line.len() >= text.len() {
            continue;
        }
        let label = Some(info.trim()).filter(|l| !l.is_empty()).map(str::to_string);
        let interior = start + line.len() + 1;
        // Closing fence: a line holding only backticks (three) and whitespace.
        for close in line_starts(text).filter(|&s| s >= interior) {
            let cl = line_at(text, close);
            if cl.trim() == FENCE {
                let tick = close + cl.find(FENCE).unwrap();
                let end = if close == interior { interior } else { close - 1 };
                return Some((start, label, interior, end, tick + FENCE.len()));
            }
        }
        return None;
    }
    None
}

/// Extracts every fenced block, in order.
pub fn extract_code(response_text: &str) -> Result<ParsedResponse, NoCodeBlock> {
    let mut blocks = Vec::new();
    let mut cursor = 0;
    while let Some((start, label, interior, end, fence_end)) = next_block(response_text, cursor) {
        blocks.push(FencedBlock {
            leading: response_text[cursor..start].to_string(),
            opening_fence: response_text[start..interior].to_string(),
            label,
            code: response_text[interior..end].to_string(),
            closing_fence: response_text[end..fence_end].to_string(),
        });
        cursor = fence_end;
    }
    if blocks.is_empty() {
        return Err(NoCodeBlock { raw: response_text.to_string() });
    }
    let code = blocks.iter().map(|b| b.code.as_str()).collect::<Vec<_>>().join("\n");
    let preamble = blocks[0].leading.clone();
    let postamble = response_text[cursor..].to_string();
    Ok(ParsedResponse {
        has_comments: detect_comments(&code),
        has_preamble: has_text(&preamble),
        has_postamble: has_text(&postamble),
        fence_label: blocks[0].label.clone(),
        code,
        preamble,
        postamble,
        blocks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanProvenance {
    Lexical,
    /// The source did not tokenize; a plain search for `#` was used.
    SubstringFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentScan {
    pub has_comments: bool,
    pub line_comments: usize,
    pub docstrings: usize,
    pub provenance: ScanProvenance,
}

/// Counts `#` comments and bare string statements (docstrings).
pub fn scan_comments(code: &str) -> CommentScan {
    let tokens = match tokenize(code) {
        Ok(t) => t,
        Err(_) => {
            let has = code.contains('#');
            return CommentScan {
                has_comments: has,
                line_comments: usize::from(has),
                docstrings: 0,
                provenance: ScanProvenance::SubstringFallback,
            };
        }
    };
    let toks: Vec<&Tok> = tokens.iter().map(|t| &t.tok).filter(|t| !matches!(t, Tok::Comment(_))).collect();
    let line_comments = tokens.iter().filter(|t| matches!(t.tok, Tok::Comment(_))).count();
    let mut docstrings = 0;
    for (i, tok) in toks.iter().enumerate() {
        if !matches!(tok, Tok::Str(_)) {
            continue;
        }
        let starts_statement = i == 0 || matches!(toks[i - 1], Tok::Newline | Tok::Indent | Tok::Dedent);
        // Adjacent literals concatenate into one statement.
        let mut j = i + 1;
        while matches!(toks.get(j), Some(Tok::Str(_))) {
            j += 1;
        }
        let ends_statement = matches!(toks.get(j), None | Some(Tok::Newline | Tok::Dedent | Tok::Eof));
        let continues_run = i > 0 && matches!(toks[i - 1], Tok::Str(_));
        if starts_statement && ends_statement && !continues_run {
            docstrings += 1;
        }
    }
    CommentScan {
        has_comments: line_comments + docstrings > 0,
        line_comments,
        docstrings,
        provenance: ScanProvenance::Lexical,
    }
}

pub fn detect_comments(code: &str) -> bool {
    scan_comments(code).has_comments
}
