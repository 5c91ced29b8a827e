//! Heuristic failure categories for wrong answers.
//!
//! Explicit run errors decide first, since they say exactly which stage broke.
//! Wrong answers from completed runs are then checked for a wrong step count,
//! a near-miss against the gold set, and finally blamed on answer generation.

use crate::reasoner::{AnswerSource, EventKind, FailureTag, TraceDocument};

use super::metric::near_miss;

pub fn tag_failure(doc: &TraceDocument, gold: &[String], hops: Option<usize>) -> FailureTag {
    if let Some(failure) = &doc.failure {
        return failure.tag;
    }
    let dead_end = doc
        .events
        .iter()
        .any(|e| matches!(&e.kind, EventKind::Relations { relations, .. } if relations.is_empty()));
    if dead_end {
        return FailureTag::RelationFiltering;
    }
    let Some(answer) = &doc.answer else {
        return FailureTag::Other;
    };
    if answer.source == AnswerSource::Fallback && doc.steps > 0 {
        return FailureTag::IterationStopping;
    }
    if hops.is_some_and(|h| h != doc.steps) {
        return FailureTag::IterationStopping;
    }
    if near_miss(&answer.text, gold) {
        return FailureTag::AnswerAliasing;
    }
    FailureTag::AnswerGeneration
}
