//! Programs for comment detection: one family keeps every `#` inside a
//! string literal, the other adds a real comment somewhere.

use super::pure_programs::generate;

const STRING_HASHES: &[&str] = &[
    "tag = \"a # b\"",
    "tag = 'c#'",
    "tag = \"\"\"first\n# still inside\n\"\"\"",
    "tag = f\"#{1 + 1}\"",
    "tag = \"\\\"#\\\"\"",
    "tag = r'\\#'",
    "tag = '#' + \"#\"",
    "tag = ['#', \"##\"]",
    "tag = {'#': '# value'}",
    "tag = '''# one\n# two'''",
    "print('# not a comment')",
    "tag = \"x\" if '#' else '#'",
];

const COMMENTS: &[&str] =
    &["# note", "#", "#!shebang-like", "# -*- coding: utf-8 -*-", "#: tagged", "# 'quoted' \"text\""];

pub fn without_comments(count: u64) -> Vec<String> {
    (0..count)
        .map(|seed| {
            let mut src = generate(seed).source();
            for k in 0..=(seed as usize % 3) {
                src.push_str(STRING_HASHES[(seed as usize + k * 5) % STRING_HASHES.len()]);
                src.push('\n');
            }
            src
        })
        .collect()
}

pub fn with_comments(count: u64) -> Vec<String> {
    (0..count)
        .map(|seed| {
            let src = generate(seed + 10_000).source();
            let mut lines: Vec<String> = src.lines().map(str::to_string).collect();
            let at = seed as usize % lines.len();
            let comment = COMMENTS[seed as usize % COMMENTS.len()];
            match seed % 4 {
                0 => lines[at].push_str(&format!("  {comment}")),
                1 => lines[at].push_str(comment),
                2 => {
                    let indent: String = lines[at].chars().take_while(|c| *c == ' ').collect();
                    lines.insert(at, format!("{indent}{comment}"));
                }
                _ => lines.push(format!("tag = '#'  {comment}")),
            }
            let mut out = lines.join("\n");
            if seed % 3 != 0 {
                out.push('\n');
            }
            out
        })
        .collect()
}
