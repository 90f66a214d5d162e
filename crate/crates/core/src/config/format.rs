//! The scenario text format: an indentation-structured key/value tree.
//!
//! ```text
//! # comment
//! name: pick_cube
//! sim:
//!   dt: 0.01
//!   gravity: [0, 0, -9.81]
//! objects:
//!   - name: "cube"
//!     kind:
//!       type: primitive
//! ```
//!
//! Nesting uses exactly two spaces per level. Lists use `- item`; a list item
//! that starts with `key: value` is a map whose remaining keys continue two
//! columns further in. Inline values are numbers, `true`/`false`/`null`,
//! double-quoted strings with JSON escapes, bare strings, `[a, b, ...]` flow
//! lists and `{}`. Comments start with `#` at line start or after whitespace.
//!
//! The format maps onto a JSON value tree, which the typed layer deserializes.

use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> SyntaxError {
    SyntaxError {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Debug)]
enum LineKind {
    Dash,
    Text(String),
}

#[derive(Debug)]
struct Line {
    indent: usize,
    kind: LineKind,
    lineno: usize,
    column: usize,
}

pub fn parse_tree(source: &str) -> Result<Value, SyntaxError> {
    let lines = tokenize(source)?;
    if lines.is_empty() {
        return Ok(Value::Object(Map::new()));
    }
    if lines[0].indent != 0 {
        return Err(err(lines[0].lineno, 1, "document must start at column 1"));
    }
    let mut pos = 0;
    let value = parse_block(&lines, &mut pos, 0)?;
    if pos < lines.len() {
        let l = &lines[pos];
        return Err(err(l.lineno, l.column, "unexpected indentation"));
    }
    if !value.is_object() {
        return Err(err(1, 1, "top level must be a key/value block"));
    }
    Ok(value)
}

fn strip_comment(raw: &str) -> &str {
    let mut in_str = false;
    let mut escaped = false;
    let mut prev_ws = true;
    for (i, c) in raw.char_indices() {
        if in_str {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
        } else if c == '"' {
            in_str = true;
        } else if c == '#' && prev_ws {
            return &raw[..i];
        }
        prev_ws = c.is_whitespace();
    }
    raw
}

fn tokenize(source: &str) -> Result<Vec<Line>, SyntaxError> {
    let mut out = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let lineno = idx + 1;
        let text = strip_comment(raw).trim_end();
        if text.trim().is_empty() {
            continue;
        }
        if let Some(col) = text.find('\t') {
            if text[..col].trim().is_empty() {
                return Err(err(lineno, col + 1, "tabs are not allowed in indentation"));
            }
        }
        let indent = text.len() - text.trim_start_matches(' ').len();
        if indent % 2 != 0 {
            return Err(err(
                lineno,
                indent + 1,
                "indentation must be a multiple of two spaces",
            ));
        }
        let mut rest = &text[indent..];
        let mut level = indent;
        // `- - x` nests one list level per dash.
        loop {
            if rest == "-" {
                out.push(Line {
                    indent: level,
                    kind: LineKind::Dash,
                    lineno,
                    column: level + 1,
                });
                break;
            } else if let Some(after) = rest.strip_prefix("- ") {
                out.push(Line {
                    indent: level,
                    kind: LineKind::Dash,
                    lineno,
                    column: level + 1,
                });
                let trimmed = after.trim_start_matches(' ');
                level += 2;
                rest = trimmed;
            } else {
                out.push(Line {
                    indent: level,
                    kind: LineKind::Text(rest.to_string()),
                    lineno,
                    column: level + 1,
                });
                break;
            }
        }
    }
    Ok(out)
}

fn parse_block(lines: &[Line], pos: &mut usize, indent: usize) -> Result<Value, SyntaxError> {
    let first = &lines[*pos];
    match &first.kind {
        LineKind::Dash => parse_list(lines, pos, indent),
        LineKind::Text(text) => {
            if split_key(text).is_some() {
                parse_map(lines, pos, indent)
            } else {
                let v = parse_inline(text, first.lineno, first.column)?;
                *pos += 1;
                if let Some(next) = lines.get(*pos) {
                    if next.indent > indent {
                        return Err(err(
                            next.lineno,
                            next.column,
                            "unexpected indentation after a value",
                        ));
                    }
                }
                Ok(v)
            }
        }
    }
}

fn parse_map(lines: &[Line], pos: &mut usize, indent: usize) -> Result<Value, SyntaxError> {
    let mut map = Map::new();
    while let Some(line) = lines.get(*pos) {
        if line.indent < indent {
            break;
        }
        if line.indent > indent {
            return Err(err(line.lineno, line.column, "unexpected indentation"));
        }
        let text = match &line.kind {
            LineKind::Text(t) => t,
            LineKind::Dash => {
                return Err(err(
                    line.lineno,
                    line.column,
                    "list item inside a key/value block",
                ))
            }
        };
        let (key, rest) = split_key(text).ok_or_else(|| {
            err(
                line.lineno,
                line.column,
                format!("expected `key: value`, found `{text}`"),
            )
        })?;
        if map.contains_key(&key) {
            return Err(err(
                line.lineno,
                line.column,
                format!("duplicate key `{key}`"),
            ));
        }
        *pos += 1;
        let value = if rest.is_empty() {
            match lines.get(*pos) {
                Some(next) if next.indent > indent => {
                    if next.indent != indent + 2 {
                        return Err(err(
                            next.lineno,
                            next.column,
                            "nested block must be indented by two spaces",
                        ));
                    }
                    parse_block(lines, pos, indent + 2)?
                }
                _ => Value::Null,
            }
        } else {
            let col = line.column + text.len() - rest.len();
            parse_inline(rest, line.lineno, col)?
        };
        map.insert(key, value);
    }
    Ok(Value::Object(map))
}

fn parse_list(lines: &[Line], pos: &mut usize, indent: usize) -> Result<Value, SyntaxError> {
    let mut items = Vec::new();
    while let Some(line) = lines.get(*pos) {
        if line.indent < indent {
            break;
        }
        if line.indent > indent || !matches!(line.kind, LineKind::Dash) {
            return Err(err(
                line.lineno,
                line.column,
                "expected a list item `- ...`",
            ));
        }
        *pos += 1;
        let value = match lines.get(*pos) {
            Some(next) if next.indent > indent => {
                if next.indent != indent + 2 {
                    return Err(err(
                        next.lineno,
                        next.column,
                        "list item content must be indented by two spaces",
                    ));
                }
                parse_block(lines, pos, indent + 2)?
            }
            _ => Value::Null,
        };
        items.push(value);
    }
    Ok(Value::Array(items))
}

fn is_bare_key(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '/'))
        && !s.starts_with('-')
}

/// Splits `key: rest` / `key:`. Returns `None` when the line is not a key line.
fn split_key(text: &str) -> Option<(String, &str)> {
    if text.starts_with('"') {
        let end = closing_quote(text)?;
        let key: String = serde_json::from_str(&text[..=end]).ok()?;
        let after = &text[end + 1..];
        let rest = after.strip_prefix(':')?;
        if !rest.is_empty() && !rest.starts_with(' ') {
            return None;
        }
        return Some((key, rest.trim()));
    }
    let colon = text.find(':')?;
    let key = &text[..colon];
    if !is_bare_key(key) {
        return None;
    }
    let rest = &text[colon + 1..];
    if !rest.is_empty() && !rest.starts_with(' ') {
        return None;
    }
    Some((key.to_string(), rest.trim()))
}

fn closing_quote(text: &str) -> Option<usize> {
    let mut escaped = false;
    for (i, c) in text.char_indices().skip(1) {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == '"' {
            return Some(i);
        }
    }
    None
}

/// Parses one inline value (scalar, quoted string, flow list, `{}`).
pub fn parse_inline(text: &str, line: usize, column: usize) -> Result<Value, SyntaxError> {
    let mut p = InlineParser {
        src: text,
        pos: 0,
        line,
        column,
    };
    p.skip_ws();
    let v = p.value(false)?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.error("trailing characters after value"));
    }
    Ok(v)
}

struct InlineParser<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl InlineParser<'_> {
    fn error(&self, msg: &str) -> SyntaxError {
        err(self.line, self.column + self.pos, msg)
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(' ') {
            self.pos += 1;
        }
    }

    fn value(&mut self, in_list: bool) -> Result<Value, SyntaxError> {
        let rest = &self.src[self.pos..];
        if rest.starts_with('[') {
            self.pos += 1;
            let mut items = Vec::new();
            self.skip_ws();
            if self.src[self.pos..].starts_with(']') {
                self.pos += 1;
                return Ok(Value::Array(items));
            }
            loop {
                self.skip_ws();
                items.push(self.value(true)?);
                self.skip_ws();
                let r = &self.src[self.pos..];
                if r.starts_with(',') {
                    self.pos += 1;
                } else if r.starts_with(']') {
                    self.pos += 1;
                    return Ok(Value::Array(items));
                } else {
                    return Err(self.error("expected `,` or `]` in list"));
                }
            }
        }
        if rest.starts_with('{') {
            let inner = rest[1..].trim_start();
            if inner.starts_with('}') {
                self.pos += rest.len() - inner.len() + 1;
                return Ok(Value::Object(Map::new()));
            }
            return Err(self.error("only the empty map `{}` may be written inline"));
        }
        if rest.starts_with('"') {
            let end = closing_quote(rest).ok_or_else(|| self.error("unterminated string"))?;
            let s: String = serde_json::from_str(&rest[..=end])
                .map_err(|e| self.error(&format!("bad string: {e}")))?;
            self.pos += end + 1;
            return Ok(Value::String(s));
        }
        let end = if in_list {
            rest.find([',', ']']).unwrap_or(rest.len())
        } else {
            rest.len()
        };
        let token = rest[..end].trim_end();
        if token.is_empty() {
            return Err(self.error("missing value"));
        }
        self.pos += end;
        Ok(scalar(token))
    }
}

fn scalar(token: &str) -> Value {
    match token {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        "null" => return Value::Null,
        _ => {}
    }
    let digits = token.strip_prefix('-').unwrap_or(token);
    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
        if let Ok(i) = token.parse::<i64>() {
            return Value::Number(i.into());
        }
        if let Ok(u) = token.parse::<u64>() {
            return Value::Number(u.into());
        }
    }
    let looks_numeric = token
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'-' | b'+' | b'.' | b'e' | b'E'))
        && token.bytes().any(|b| b.is_ascii_digit());
    if looks_numeric {
        if let Ok(f) = token.parse::<f64>() {
            if let Some(n) = Number::from_f64(f) {
                return Value::Number(n);
            }
        }
    }
    Value::String(token.to_string())
}

/// Writes a value tree in the scenario format. `parse_tree(write_tree(v)) == v`
/// for any object-rooted tree without nulls inside flow lists.
pub fn write_tree(value: &Value) -> String {
    let mut out = String::new();
    if let Value::Object(map) = value {
        write_map(map, 0, &mut out);
    } else {
        out.push_str(&inline(value));
        out.push('\n');
    }
    out
}

fn is_flow(v: &Value) -> bool {
    match v {
        Value::Object(m) => m.is_empty(),
        Value::Array(items) => items.iter().all(|i| match i {
            Value::Array(_) => is_flow(i),
            Value::Object(_) | Value::Null => false,
            _ => true,
        }),
        _ => true,
    }
}

fn key_text(k: &str) -> String {
    if is_bare_key(k) {
        k.to_string()
    } else {
        serde_json::to_string(k).expect("string serialization")
    }
}

fn inline(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.to_string()
            } else if let Some(u) = n.as_u64() {
                u.to_string()
            } else {
                format!("{:?}", n.as_f64().unwrap_or(f64::NAN))
            }
        }
        Value::String(s) => serde_json::to_string(s).expect("string serialization"),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(inline).collect();
            format!("[{}]", parts.join(", "))
        }
        Value::Object(_) => "{}".into(),
    }
}

fn pad(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push(' ');
    }
}

fn write_map(map: &Map<String, Value>, indent: usize, out: &mut String) {
    for (k, v) in map {
        pad(indent, out);
        out.push_str(&key_text(k));
        out.push(':');
        write_child(v, indent, out);
    }
}

/// Writes the part after `key:` or `-`.
fn write_child(v: &Value, indent: usize, out: &mut String) {
    if is_flow(v) {
        out.push(' ');
        out.push_str(&inline(v));
        out.push('\n');
        return;
    }
    out.push('\n');
    match v {
        Value::Object(m) => write_map(m, indent + 2, out),
        Value::Array(items) => write_list(items, indent + 2, out),
        _ => unreachable!("scalars are flow values"),
    }
}

fn write_list(items: &[Value], indent: usize, out: &mut String) {
    for item in items {
        pad(indent, out);
        out.push('-');
        write_child(item, indent, out);
    }
}
