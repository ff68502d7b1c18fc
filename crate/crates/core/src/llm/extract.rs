//! Pulling descriptions and code out of free-form model responses.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("no brace-enclosed description found outside code blocks")]
    NoBraces,
    #[error("no double-brace-enclosed descriptions found")]
    NoDoubleBraces,
    #[error("no code found in the response")]
    NoCode,
    #[error("code is missing definitions of {}", .0.join(", "))]
    MissingDefinitions(Vec<String>),
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// The text with every fenced block blanked out, keeping byte offsets.
fn outside_fences(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut inside = false;
    for line in text.split_inclusive('\n') {
        if is_fence(line) {
            inside = !inside;
            out.extend(line.chars().map(|c| if c == '\n' { '\n' } else { ' ' }));
        } else if inside {
            out.extend(line.chars().map(|c| if c == '\n' { '\n' } else { ' ' }));
        } else {
            out.push_str(line);
        }
    }
    out
}

/// Content of the first top-level `{...}` pair outside code fences, trimmed.
pub fn extract_braced_description(response: &str) -> Result<String, ExtractError> {
    let visible = outside_fences(response);
    let chars: Vec<(usize, char)> = visible.char_indices().collect();
    let start = chars
        .iter()
        .position(|&(_, c)| c == '{')
        .ok_or(ExtractError::NoBraces)?;
    let mut depth = 0usize;
    for &(offset, c) in &chars[start..] {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    let open = chars[start].0;
                    let inner = response[open + 1..offset].trim();
                    if inner.is_empty() {
                        return Err(ExtractError::NoBraces);
                    }
                    return Ok(inner.to_string());
                }
            }
            _ => {}
        }
    }
    Err(ExtractError::NoBraces)
}

/// Every nonempty `{{...}}` item, in order of appearance.
pub fn parse_double_braced(response: &str) -> Vec<String> {
    let mut items = Vec::new();
    let mut rest = response;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        let Some(close) = after.find("}}") else { break };
        let item = after[..close].trim();
        if !item.is_empty() {
            items.push(item.to_string());
        }
        rest = &after[close + 2..];
    }
    items
}

fn fenced_blocks(response: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in response.lines() {
        if is_fence(line) {
            match current.take() {
                Some(lines) => blocks.push(lines.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    // an unterminated fence still counts
    if let Some(lines) = current {
        blocks.push(lines.join("\n"));
    }
    blocks.retain(|b| !b.trim().is_empty());
    blocks
}

fn starts_definition(line: &str) -> bool {
    ["import ", "from ", "def ", "class ", "@"]
        .iter()
        .any(|k| line.starts_with(k))
}

/// Names defined with `def` at any indentation.
pub fn defined_functions(code: &str) -> Vec<&str> {
    code.lines()
        .filter_map(|l| l.trim_start().strip_prefix("def "))
        .filter_map(|rest| rest.split('(').next())
        .map(str::trim)
        .collect()
}

/// Code from a response: fenced blocks joined in order when present,
/// otherwise everything from the first top-level definition or import.
pub fn extract_code(response: &str, required_names: &[&str]) -> Result<String, ExtractError> {
    let blocks = fenced_blocks(response);
    let code = if blocks.is_empty() {
        let mut offset = None;
        let mut pos = 0;
        for line in response.split_inclusive('\n') {
            if starts_definition(line) {
                offset = Some(pos);
                break;
            }
            pos += line.len();
        }
        response[offset.ok_or(ExtractError::NoCode)?..]
            .trim_end()
            .to_string()
    } else {
        blocks.join("\n\n").trim_end().to_string()
    };
    if code.trim().is_empty() {
        return Err(ExtractError::NoCode);
    }
    let defined = defined_functions(&code);
    let missing: Vec<String> = required_names
        .iter()
        .filter(|n| !defined.contains(n))
        .map(|n| n.to_string())
        .collect();
    if missing.is_empty() {
        Ok(code)
    } else {
        Err(ExtractError::MissingDefinitions(missing))
    }
}
