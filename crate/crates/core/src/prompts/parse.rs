//! Extraction of the structured parts of model responses.
//!
//! Models often restate exemplars before answering, so every marker-based
//! parser uses the last occurrence of its marker.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityRef, RelationRef};
use crate::text::preview;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no candidate relation found in response {preview:?}")]
    NoRelation { preview: String },
    #[error("response has neither {{Yes}} nor {{No}}: {preview:?}")]
    NoDecision { preview: String },
    #[error("no simplified question in response {preview:?}")]
    NoSimplifiedQuestion { preview: String },
    #[error("empty answer in response {preview:?}")]
    EmptyAnswer { preview: String },
}

fn short(response: &str) -> String {
    preview(response.trim(), 80)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationChoice {
    pub relation: RelationRef,
    /// The relation was salvaged by scanning the response for a candidate name.
    pub fallback_used: bool,
}

/// Outcome of an answer-trying call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriDecision {
    pub answerable: bool,
    pub rationale: String,
    pub answer_text: Option<String>,
}

/// Text after the last case-insensitive occurrence of `marker`, up to end of line.
fn after_last_marker<'a>(response: &'a str, marker: &str) -> Option<&'a str> {
    let lower = response.to_ascii_lowercase();
    let at = lower.rfind(&marker.to_ascii_lowercase())? + marker.len();
    let rest = &response[at..];
    Some(rest.split('\n').next().unwrap_or(""))
}

fn clean_token(token: &str) -> &str {
    token
        .trim()
        .trim_matches(|c: char| matches!(c, '`' | '*' | '"' | '\'' | '“' | '”'))
        .trim_end_matches([',', '.', ';', ')', '`', '*'])
}

/// Reads a relation written as `name`, `~name` or `~ name` at the start of `text`.
fn leading_relation(text: &str) -> Option<RelationRef> {
    let text = clean_token(text);
    let (passive, rest) = match text.strip_prefix('~') {
        Some(r) => (true, r.trim_start()),
        None => (false, text),
    };
    let name = rest.split(|c: char| c.is_whitespace() || c == ',' || c == ';').next()?;
    let name = clean_token(name);
    if name.is_empty() {
        return None;
    }
    let raw = if passive { format!("~{name}") } else { name.to_string() };
    RelationRef::parse(&raw).ok()
}

fn relation_index_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)relation_(\d+)\s*:?\s*(.*)").unwrap())
}

fn choice_from_output(line: &str, candidates: &[RelationRef]) -> Option<RelationRef> {
    if let Some(caps) = relation_index_re().captures(line) {
        let rest = caps.get(2).map_or("", |m| m.as_str());
        if clean_token(rest).is_empty() {
            let index: usize = caps[1].parse().ok()?;
            return candidates.get(index.checked_sub(1)?).cloned();
        }
        return leading_relation(rest).filter(|r| candidates.contains(r));
    }
    leading_relation(line).filter(|r| candidates.contains(r))
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// True when `relation` (with its direction) occurs as a whole token in `text`.
fn mentions(text: &str, relation: &RelationRef) -> bool {
    let bytes = text.as_bytes();
    let name = relation.name();
    for (at, _) in text.match_indices(name) {
        let end = at + name.len();
        if at > 0 && (is_word_byte(bytes[at - 1]) || bytes[at - 1] == b'.') {
            continue;
        }
        if end < bytes.len() {
            let next = bytes[end];
            if is_word_byte(next) {
                continue;
            }
            if next == b'.' && end + 1 < bytes.len() && is_word_byte(bytes[end + 1]) {
                continue;
            }
        }
        let passive = text[..at].trim_end().ends_with('~');
        if passive == relation.is_passive() {
            return true;
        }
    }
    false
}

/// Picks the relation named on the last `Output:` line.
///
/// A name wins over an index. When the named relation is not a candidate, or
/// there is no usable `Output:` line, the first candidate mentioned anywhere
/// in the response is taken and the choice is flagged.
pub fn parse_relation_choice(response: &str, candidates: &[RelationRef]) -> Result<RelationChoice, ParseError> {
    if let Some(line) = after_last_marker(response, "output:") {
        if let Some(relation) = choice_from_output(line, candidates) {
            return Ok(RelationChoice {
                relation,
                fallback_used: false,
            });
        }
    }
    candidates
        .iter()
        .find(|c| mentions(response, c))
        .map(|c| RelationChoice {
            relation: c.clone(),
            fallback_used: true,
        })
        .ok_or_else(|| ParseError::NoRelation {
            preview: short(response),
        })
}

/// Candidates listed on a `Relation_set` line, in order.
pub fn parse_relation_set(text: &str) -> Vec<RelationRef> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"relation_\d+\s*:\s*(~?\s*[^,\s]+)").unwrap());
    let Some(line) = after_last_marker(text, "relation_set") else {
        return Vec::new();
    };
    re.captures_iter(line).filter_map(|c| leading_relation(&c[1])).collect()
}

pub fn parse_answer_decision(response: &str) -> Result<TriDecision, ParseError> {
    let lower = response.to_ascii_lowercase();
    let yes = lower.find("{yes}");
    let no = lower.find("{no}");
    let (answerable, at) = match (yes, no) {
        (Some(y), Some(n)) if y < n => (true, y + "{yes}".len()),
        (Some(y), None) => (true, y + "{yes}".len()),
        (_, Some(n)) => (false, n + "{no}".len()),
        (None, None) => {
            return Err(ParseError::NoDecision {
                preview: short(response),
            })
        }
    };
    let after = &response[at..];
    let rationale = after
        .split('\n')
        .next()
        .unwrap_or("")
        .trim_start_matches(|c: char| c == '.' || c == ',' || c == ':' || c.is_whitespace())
        .trim_end()
        .to_string();
    let answer_text = if answerable { extract_answer(after) } else { None };
    Ok(TriDecision {
        answerable,
        rationale,
        answer_text,
    })
}

/// Best-effort entity from a `{Yes}` rationale: the last quoted string, else
/// what follows "answer is", else the last bracketed span.
pub fn extract_answer(text: &str) -> Option<String> {
    static QUOTED: OnceLock<Regex> = OnceLock::new();
    static ANSWER_IS: OnceLock<Regex> = OnceLock::new();
    static BRACKET: OnceLock<Regex> = OnceLock::new();
    let quoted = QUOTED.get_or_init(|| Regex::new(r#""([^"\n]+)"|“([^”\n]+)”"#).unwrap());
    if let Some(c) = quoted.captures_iter(text).last() {
        let s = c.get(1).or_else(|| c.get(2)).map_or("", |m| m.as_str()).trim();
        let s = s.trim_end_matches([',', '.']).trim();
        if !s.is_empty() {
            return Some(s.to_string());
        }
    }
    let answer_is = ANSWER_IS.get_or_init(|| Regex::new(r"(?i)\banswer is:?\s+([^\n]+)").unwrap());
    if let Some(c) = answer_is.captures_iter(text).last() {
        let s = cut_sentence(&c[1]);
        if !s.is_empty() {
            return Some(s);
        }
    }
    let bracket = BRACKET.get_or_init(|| Regex::new(r"\[([^\]\n]+)\]").unwrap());
    bracket
        .captures_iter(text)
        .last()
        .map(|c| c[1].trim().to_string())
        .filter(|s| !s.is_empty())
}

/// Cuts at the first sentence break that does not follow an initial.
fn cut_sentence(text: &str) -> String {
    let mut end = text.len();
    for (i, _) in text.match_indices(". ") {
        let word = text[..i].rsplit(' ').next().unwrap_or("");
        if word.chars().count() > 1 {
            end = i;
            break;
        }
    }
    text[..end]
        .trim()
        .trim_end_matches('.')
        .trim_matches(|c: char| c == '*' || c == '`')
        .trim()
        .to_string()
}

fn strip_wrapping(text: &str) -> &str {
    let mut t = text.trim().trim_matches('*').trim();
    for (open, close) in [('"', '"'), ('“', '”'), ('`', '`'), ('\'', '\'')] {
        if t.len() >= 2 && t.starts_with(open) && t.ends_with(close) {
            t = t[open.len_utf8()..t.len() - close.len_utf8()].trim();
        }
    }
    t
}

/// The text after the last `Simplified_question:`; failing that, the last
/// line ending in `?`.
pub fn parse_simplified_question(response: &str) -> Result<String, ParseError> {
    let lower = response.to_ascii_lowercase();
    let marker = ["simplified_question:", "simplified question:"]
        .iter()
        .filter_map(|m| lower.rfind(m).map(|at| at + m.len()))
        .max();
    if let Some(at) = marker {
        let found = response[at..].lines().map(strip_wrapping).find(|l| !l.is_empty());
        if let Some(q) = found {
            return Ok(q.to_string());
        }
    }
    response
        .lines()
        .map(strip_wrapping)
        .rfind(|l| l.ends_with('?'))
        .map(str::to_string)
        .ok_or_else(|| ParseError::NoSimplifiedQuestion {
            preview: short(response),
        })
}

/// A short single-line answer: the first non-empty line minus any `Answer:` label.
pub fn parse_final_answer(response: &str) -> Result<String, ParseError> {
    let line = response.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let lower = line.to_ascii_lowercase();
    let mut body = line;
    for label in ["final answer:", "answer:"] {
        if lower.starts_with(label) {
            body = &line[label.len()..];
            break;
        }
    }
    let answer = strip_wrapping(body.trim().trim_end_matches('.'))
        .trim_end_matches('.')
        .trim();
    if answer.is_empty() {
        return Err(ParseError::EmptyAnswer {
            preview: short(response),
        });
    }
    Ok(answer.to_string())
}

/// Index of the tail named on the last `Output:` line, by index or name.
pub fn parse_tail_choice(response: &str, tails: &[EntityRef]) -> Option<usize> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?i)entity_(\d+)\s*:?\s*(.*)").unwrap());
    let line = after_last_marker(response, "output:")?;
    let by_name = |text: &str| {
        let text = strip_wrapping(text).trim_end_matches('.');
        tails.iter().position(|t| t.friendly_name == text)
    };
    if let Some(c) = re.captures(line) {
        if let Some(i) = by_name(&c[2]) {
            return Some(i);
        }
        let index: usize = c[1].parse().ok()?;
        return (1..=tails.len()).contains(&index).then(|| index - 1);
    }
    by_name(line)
}

/// The entity named on the last `Topic:` line.
pub fn parse_topic(response: &str) -> Option<String> {
    let line = after_last_marker(response, "topic:")?;
    let t = strip_wrapping(line).trim_matches(|c| c == '[' || c == ']').trim();
    (!t.is_empty()).then(|| t.to_string())
}
