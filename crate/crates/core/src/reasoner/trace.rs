//! Per-question event log.
//!
//! Every model exchange a run makes lands in exactly one event, in the order
//! it happened. A [`TraceDocument`] is the JSON file written per question.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::debate::DebateTurn;
use crate::kg::{EntityRef, RelationRef, Triple};
use crate::llm::Exchange;
use crate::prompts::TriDecision;

use super::{Answer, AnswerSource, ReasonFailure, ReasonerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    /// Topic entity found by the extraction prompt.
    Topic {
        entity: EntityRef,
        exchange: Exchange,
    },
    Relations {
        entity: EntityRef,
        relations: Vec<RelationRef>,
    },
    RelationChoice {
        relation: RelationRef,
        fallback_used: bool,
        exchange: Exchange,
    },
    TripleFill {
        tails: Vec<EntityRef>,
        triple: Triple,
        selection: Option<Exchange>,
    },
    AnswerTry {
        decision: TriDecision,
        exchange: Exchange,
    },
    DebateTurn {
        turn: DebateTurn,
        exchange: Exchange,
    },
    Simplified {
        from: String,
        to: String,
    },
    Fallback {
        answer: String,
        exchange: Exchange,
    },
    FinalAnswer {
        answer: String,
        source: AnswerSource,
        exchange: Option<Exchange>,
    },
}

impl EventKind {
    pub const NAMES: [&'static str; 9] = [
        "topic",
        "relations",
        "relation_choice",
        "triple_fill",
        "answer_try",
        "debate_turn",
        "simplified",
        "fallback",
        "final_answer",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Topic { .. } => "topic",
            EventKind::Relations { .. } => "relations",
            EventKind::RelationChoice { .. } => "relation_choice",
            EventKind::TripleFill { .. } => "triple_fill",
            EventKind::AnswerTry { .. } => "answer_try",
            EventKind::DebateTurn { .. } => "debate_turn",
            EventKind::Simplified { .. } => "simplified",
            EventKind::Fallback { .. } => "fallback",
            EventKind::FinalAnswer { .. } => "final_answer",
        }
    }

    pub fn exchange(&self) -> Option<&Exchange> {
        match self {
            EventKind::Topic { exchange, .. }
            | EventKind::RelationChoice { exchange, .. }
            | EventKind::AnswerTry { exchange, .. }
            | EventKind::DebateTurn { exchange, .. }
            | EventKind::Fallback { exchange, .. } => Some(exchange),
            EventKind::TripleFill { selection, .. } => selection.as_ref(),
            EventKind::FinalAnswer { exchange, .. } => exchange.as_ref(),
            EventKind::Relations { .. } | EventKind::Simplified { .. } => None,
        }
    }

    /// One line for terminal display.
    pub fn summary(&self) -> String {
        match self {
            EventKind::Topic { entity, .. } => format!("topic {entity}"),
            EventKind::Relations { entity, relations } => {
                let names: Vec<String> = relations.iter().map(|r| r.to_string()).collect();
                format!("{entity}: [{}]", names.join(", "))
            }
            EventKind::RelationChoice {
                relation,
                fallback_used,
                ..
            } => {
                if *fallback_used {
                    format!("chose {relation} (salvaged from free text)")
                } else {
                    format!("chose {relation}")
                }
            }
            EventKind::TripleFill { tails, triple, .. } => {
                format!("{triple} ({} tail(s))", tails.len())
            }
            EventKind::AnswerTry { decision, .. } => {
                if decision.answerable {
                    format!("answerable: {}", decision.answer_text.as_deref().unwrap_or("-"))
                } else {
                    "not answerable".to_string()
                }
            }
            EventKind::DebateTurn { turn, .. } => format!(
                "{} round {}: {}",
                turn.role.short(),
                turn.round,
                crate::text::preview(turn.content.lines().last().unwrap_or(""), 100)
            ),
            EventKind::Simplified { to, .. } => format!("-> {to}"),
            EventKind::Fallback { answer, .. } => format!("fallback answer {answer:?}"),
            EventKind::FinalAnswer { answer, source, .. } => format!("answer {answer:?} ({source})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// 1-based reasoning step; 0 for events before the first step.
    pub step: usize,
    pub elapsed_ms: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Events of one run, timed from construction.
#[derive(Debug, Clone)]
pub struct Trace {
    started: Instant,
    events: Vec<TraceEvent>,
}

impl Default for Trace {
    fn default() -> Self {
        Self::new()
    }
}

impl Trace {
    pub fn new() -> Self {
        Self {
            started: Instant::now(),
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, step: usize, kind: EventKind) {
        self.events.push(TraceEvent {
            step,
            elapsed_ms: self.started.elapsed().as_millis() as u64,
            kind,
        });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }

    pub fn count(&self, name: &str) -> usize {
        self.events.iter().filter(|e| e.kind.name() == name).count()
    }

    pub fn elapsed_ms(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }
}

/// Error categories for failed questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureTag {
    RelationFiltering,
    IterationStopping,
    AnswerAliasing,
    AnswerGeneration,
    QuestionSimplifying,
    Other,
}

impl FailureTag {
    pub const ALL: [FailureTag; 6] = [
        FailureTag::RelationFiltering,
        FailureTag::IterationStopping,
        FailureTag::AnswerAliasing,
        FailureTag::AnswerGeneration,
        FailureTag::QuestionSimplifying,
        FailureTag::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureTag::RelationFiltering => "relation_filtering",
            FailureTag::IterationStopping => "iteration_stopping",
            FailureTag::AnswerAliasing => "answer_aliasing",
            FailureTag::AnswerGeneration => "answer_generation",
            FailureTag::QuestionSimplifying => "question_simplifying",
            FailureTag::Other => "other",
        }
    }
}

impl fmt::Display for FailureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FailureTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FailureTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown failure tag {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub text: String,
    pub source: AnswerSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFailure {
    pub tag: FailureTag,
    pub message: String,
}

/// The per-question trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub id: String,
    pub question: String,
    pub config: ReasonerConfig,
    pub events: Vec<TraceEvent>,
    pub answer: Option<AnswerRecord>,
    pub failure: Option<RunFailure>,
    pub steps: usize,
    pub wall_time_ms: u64,
}

impl TraceDocument {
    pub fn from_run(
        id: impl Into<String>,
        question: impl Into<String>,
        config: &ReasonerConfig,
        run: &Result<Answer, ReasonFailure>,
    ) -> Self {
        let (events, answer, failure, steps, wall) = match run {
            Ok(a) => (
                a.trace.events().to_vec(),
                Some(AnswerRecord {
                    text: a.text.clone(),
                    source: a.source,
                }),
                None,
                a.steps,
                a.trace.elapsed_ms(),
            ),
            Err(f) => (
                f.trace.events().to_vec(),
                None,
                Some(RunFailure {
                    tag: f.error.failure_tag(),
                    message: f.error.to_string(),
                }),
                f.steps,
                f.trace.elapsed_ms(),
            ),
        };
        Self {
            id: id.into(),
            question: question.into(),
            config: config.clone(),
            events,
            answer,
            failure,
            steps,
            wall_time_ms: wall,
        }
    }

    pub fn count(&self, name: &str) -> usize {
        self.events.iter().filter(|e| e.kind.name() == name).count()
    }
}
