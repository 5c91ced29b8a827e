//! A provider that answers every prompt by brute force over a graph.
//!
//! It understands the synthetic question form
//! `what is the rK of the ... of the r1 of [topic]?` and reads the task from
//! the system message. Useful as ground truth for the orchestration: with it,
//! any failure is a plumbing bug rather than a model error.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::kg::{KnowledgeGraph, RelationRef};
use crate::llm::{ChatProvider, ChatRole, CompletionRequest, LlmError};
use crate::prompts::{
    parse_relation_set, ANSWER_TRYING_INSTRUCTION, FALLBACK_INSTRUCTION, FINAL_ANSWER_INSTRUCTION,
    RELATION_FILTERING_INSTRUCTION, TAIL_SELECTION_INSTRUCTION, TOPIC_INSTRUCTION,
};
use crate::text::preview;

/// A parsed synthetic question: relations innermost first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainQuestion {
    pub topic: String,
    pub relations: Vec<RelationRef>,
}

impl ChainQuestion {
    pub fn parse(text: &str) -> Option<Self> {
        let body = text.trim().strip_prefix("what is the ")?.strip_suffix("]?")?;
        let (chain, topic) = body.rsplit_once(" of [")?;
        let mut relations = chain
            .split(" of the ")
            .map(RelationRef::parse)
            .collect::<Result<Vec<_>, _>>()
            .ok()?;
        relations.reverse();
        (!relations.is_empty() && !topic.is_empty()).then(|| Self {
            topic: topic.to_string(),
            relations,
        })
    }

    pub fn render(&self) -> String {
        let chain: Vec<String> = self.relations.iter().rev().map(|r| r.to_string()).collect();
        format!("what is the {} of [{}]?", chain.join(" of the "), self.topic)
    }
}

/// Forward facts by friendly name, scanned linearly.
pub struct OracleProvider {
    facts: Vec<(String, String, String)>,
    calls: AtomicUsize,
}

fn last_line_value<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    text.lines().rev().find_map(|l| l.strip_prefix(prefix)).map(str::trim)
}

/// `( h, r, t )` lines following the last occurrence of `header`.
fn triples_after(text: &str, header: &str) -> Vec<(String, String, String)> {
    let Some(at) = text.rfind(header) else {
        return Vec::new();
    };
    text[at + header.len()..]
        .lines()
        .skip_while(|l| l.trim().is_empty())
        .map_while(parse_triple_line)
        .collect()
}

fn parse_triple_line(line: &str) -> Option<(String, String, String)> {
    let inner = line.trim().strip_prefix('(')?.strip_suffix(')')?;
    let mut parts = inner.splitn(3, ',').map(str::trim);
    Some((
        parts.next()?.to_string(),
        parts.next()?.to_string(),
        parts.next()?.to_string(),
    ))
}

impl OracleProvider {
    pub fn new(kg: &KnowledgeGraph) -> Self {
        let name = |mid: &str| kg.entity(mid).map_or_else(|| mid.to_string(), |e| e.friendly_name);
        Self {
            facts: kg
                .raw_triples()
                .map(|(h, r, t)| (name(h), r.to_string(), name(t)))
                .collect(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn hop(&self, from: &BTreeSet<String>, relation: &RelationRef) -> BTreeSet<String> {
        self.facts
            .iter()
            .filter(|(_, r, _)| r == relation.name())
            .filter_map(|(h, _, t)| {
                if relation.is_passive() {
                    from.contains(t).then(|| h.clone())
                } else {
                    from.contains(h).then(|| t.clone())
                }
            })
            .collect()
    }

    /// Every entity reached from `start` by following `chain`.
    pub fn walk(&self, start: &str, chain: &[RelationRef]) -> BTreeSet<String> {
        let mut frontier = BTreeSet::from([start.to_string()]);
        for r in chain {
            frontier = self.hop(&frontier, r);
        }
        frontier
    }

    fn answer_of(&self, q: &ChainQuestion) -> String {
        self.walk(&q.topic, &q.relations)
            .into_iter()
            .next()
            .unwrap_or_else(|| "unknown".into())
    }

    fn relation_filtering(&self, user: &str) -> Option<String> {
        let q = ChainQuestion::parse(last_line_value(user, "Question: ")?)?;
        let done = triples_after(user, "Retrieved triples so far:").len();
        let wanted = q.relations.get(done)?;
        let candidates = parse_relation_set(user);
        let i = candidates.iter().position(|c| c == wanted)?;
        Some(format!(
            "Explanation: the first unsolved sub-question follows {wanted}.\nOutput: relation_{}: {wanted}",
            i + 1
        ))
    }

    fn answer_trying(&self, user: &str) -> Option<String> {
        let q = ChainQuestion::parse(last_line_value(user, "Question: ")?)?;
        let triples = triples_after(user, "Knowledge Triples:");
        let (head, rel, tail) = triples.first()?;
        let solved = q.relations.len() == 1 && q.relations[0].to_string() == *rel && *head == q.topic;
        Some(if solved {
            format!("Answer: {{Yes}}. The triple gives the answer \"{tail}\".")
        } else {
            "Answer: {No}. More hops remain after this triple.".to_string()
        })
    }

    fn simplify(&self, user: &str) -> Option<String> {
        let mut q = ChainQuestion::parse(last_line_value(user, "N-hop Question: ")?)?;
        let (_, _, tail) = parse_triple_line(last_line_value(user, "Knowledge triple: ")?)?;
        if q.relations.len() < 2 {
            return None;
        }
        q.relations.remove(0);
        q.topic = tail;
        Some(format!("Simplified_question: {}", q.render()))
    }

    fn tail_selection(&self, user: &str) -> Option<String> {
        let q = ChainQuestion::parse(last_line_value(user, "Question: ")?)?;
        let (_, rel, _) = parse_triple_line(last_line_value(user, "Partial triple: ")?)?;
        let after = q.relations.iter().position(|r| r.to_string() == rel)? + 1;
        let listed = last_line_value(user, "Candidates: ")?;
        let names: Vec<&str> = listed
            .split(", entity_")
            .filter_map(|part| part.split_once(": ").map(|(_, n)| n))
            .collect();
        let i = names
            .iter()
            .position(|n| !self.walk(n, &q.relations[after..]).is_empty())?;
        Some(format!("Output: entity_{}: {}", i + 1, names[i]))
    }

    fn final_answer(&self, user: &str) -> Option<String> {
        let q = ChainQuestion::parse(last_line_value(user, "Question: ")?)?;
        Some(self.answer_of(&q))
    }

    fn topic(&self, user: &str) -> Option<String> {
        let q = ChainQuestion::parse(last_line_value(user, "Question: ")?)?;
        Some(format!("Topic: {}", q.topic))
    }
}

impl ChatProvider for OracleProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let system = request
            .messages
            .iter()
            .find(|m| m.role == ChatRole::System)
            .map_or("", |m| m.content.as_str());
        let user = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == ChatRole::User)
            .map_or("", |m| m.content.as_str());
        let response = match system {
            RELATION_FILTERING_INSTRUCTION => self.relation_filtering(user),
            ANSWER_TRYING_INSTRUCTION => self.answer_trying(user),
            FINAL_ANSWER_INSTRUCTION | FALLBACK_INSTRUCTION => self.final_answer(user),
            TAIL_SELECTION_INSTRUCTION => self.tail_selection(user),
            TOPIC_INSTRUCTION => self.topic(user),
            _ if user.contains("N-hop Question: ") => self.simplify(user),
            _ => None,
        };
        response.ok_or_else(|| LlmError::Unmatched {
            preview: preview(&request.render(), 80),
        })
    }
}
