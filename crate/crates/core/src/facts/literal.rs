use std::fmt;

use serde::{Deserialize, Serialize};

/// A constant value observed in source, or a marker that the value was an
/// arbitrary expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Literal {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    None,
    NonLiteral,
}

impl Literal {
    pub fn is_literal(&self) -> bool {
        !matches!(self, Literal::NonLiteral)
    }

    fn negate(self) -> Literal {
        match self {
            Literal::Int(i) => i.checked_neg().map_or(Literal::Float(-(i as f64)), Literal::Int),
            Literal::Float(f) => Literal::Float(-f),
            _ => Literal::NonLiteral,
        }
    }

    /// Literal for a `unary_operator` node text such as `-1` or `+2.5`.
    pub(crate) fn signed(op: &str, operand: Literal) -> Literal {
        match (op, operand) {
            ("-", l @ (Literal::Int(_) | Literal::Float(_))) => l.negate(),
            ("+", l @ (Literal::Int(_) | Literal::Float(_))) => l,
            _ => Literal::NonLiteral,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => write!(f, "{s:?}"),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Bool(true) => f.write_str("True"),
            Literal::Bool(false) => f.write_str("False"),
            Literal::None => f.write_str("None"),
            Literal::NonLiteral => f.write_str("<expr>"),
        }
    }
}

/// Python integer literal (`1_000`, `0x1F`, `0o7`, `0b1`). Values outside
/// i64 degrade to a float; imaginary literals are not constants we match on.
pub(crate) fn parse_int(text: &str) -> Literal {
    let t: String = text.chars().filter(|c| *c != '_').collect();
    if t.ends_with(['j', 'J']) {
        return Literal::NonLiteral;
    }
    let lower = t.to_ascii_lowercase();
    let parsed = if let Some(h) = lower.strip_prefix("0x") {
        i64::from_str_radix(h, 16).ok()
    } else if let Some(o) = lower.strip_prefix("0o") {
        i64::from_str_radix(o, 8).ok()
    } else if let Some(b) = lower.strip_prefix("0b") {
        i64::from_str_radix(b, 2).ok()
    } else {
        lower.parse::<i64>().ok()
    };
    match parsed {
        Some(i) => Literal::Int(i),
        None => lower
            .parse::<f64>()
            .map(Literal::Float)
            .unwrap_or(Literal::NonLiteral),
    }
}

pub(crate) fn parse_float(text: &str) -> Literal {
    let t: String = text.chars().filter(|c| *c != '_').collect();
    if t.ends_with(['j', 'J']) {
        return Literal::NonLiteral;
    }
    t.parse::<f64>().map(Literal::Float).unwrap_or(Literal::NonLiteral)
}

/// Decode a single Python string token (prefix, quotes and escapes).
/// Returns `None` for bytes and f-strings, which are not plain text constants.
pub(crate) fn decode_string(token: &str) -> Option<String> {
    let quote_at = token.find(['\'', '"'])?;
    let prefix = token[..quote_at].to_ascii_lowercase();
    if prefix.contains('b') || prefix.contains('f') || prefix.contains('t') {
        return None;
    }
    let raw = prefix.contains('r');
    let rest = &token[quote_at..];
    let q = &rest[..1];
    let triple = q.repeat(3);
    let body = if rest.len() >= 6 && rest.starts_with(&triple) && rest.ends_with(&triple) {
        &rest[3..rest.len() - 3]
    } else if rest.len() >= 2 && rest.ends_with(q) {
        &rest[1..rest.len() - 1]
    } else {
        return None;
    };
    if raw {
        Some(body.to_string())
    } else {
        Some(unescape(body))
    }
}

fn unescape(body: &str) -> String {
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
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => out.push('\r'),
            'a' => out.push('\u{7}'),
            'b' => out.push('\u{8}'),
            'f' => out.push('\u{c}'),
            'v' => out.push('\u{b}'),
            'x' | 'u' | 'U' => {
                let n = match e {
                    'x' => 2,
                    'u' => 4,
                    _ => 8,
                };
                let hex: String = (0..n).filter_map(|_| chars.next_if(|c| c.is_ascii_hexdigit())).collect();
                match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                    Some(ch) if hex.len() == n => out.push(ch),
                    _ => {
                        out.push('\\');
                        out.push(e);
                        out.push_str(&hex);
                    }
                }
            }
            '0'..='7' => {
                let mut oct = String::from(e);
                while oct.len() < 3 {
                    match chars.next_if(|c| ('0'..='7').contains(c)) {
                        Some(d) => oct.push(d),
                        None => break,
                    }
                }
                let v = u32::from_str_radix(&oct, 8).unwrap_or(0);
                out.push(char::from_u32(v).unwrap_or('\u{fffd}'));
            }
            other => {
                out.push('\\');
                out.push(other);
            }
        }
    }
    out
}
