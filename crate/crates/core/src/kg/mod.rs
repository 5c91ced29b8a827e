//! Knowledge graph access.
//!
//! Reasoning only ever touches the graph through two calls: the relations
//! incident to an entity, and the triples completed from an entity and one
//! of those relations. Both are exposed by [`KgBackend`], implemented by the
//! in-memory [`KnowledgeGraph`] and by the SPARQL-protocol [`SparqlKg`].
//!
//! Entities carry a machine id and a friendly name. Everything handed to a
//! language model uses friendly names; ids stay inside the backends.

mod memory;
mod sparql;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use memory::{KnowledgeGraph, KnowledgeGraphBuilder};
pub use sparql::{SparqlConfig, SparqlKg, SparqlQueries, FREEBASE_NAME_PROPERTY, FREEBASE_NS};

/// An entity with its opaque identifier and human-readable label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    pub mid: String,
    pub friendly_name: String,
}

impl EntityRef {
    pub fn new(mid: impl Into<String>, friendly_name: impl Into<String>) -> Self {
        Self {
            mid: mid.into(),
            friendly_name: friendly_name.into(),
        }
    }

    /// Local graphs have no id layer: the name doubles as the id.
    pub fn local(name: impl Into<String>) -> Self {
        let name = name.into();
        Self {
            mid: name.clone(),
            friendly_name: name,
        }
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.friendly_name)
    }
}

impl PartialOrd for EntityRef {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Ordered by friendly name, ties broken by id.
impl Ord for EntityRef {
    fn cmp(&self, other: &Self) -> Ordering {
        self.friendly_name
            .cmp(&other.friendly_name)
            .then_with(|| self.mid.cmp(&other.mid))
    }
}

/// A relation label plus traversal direction.
///
/// `passive == true` means the relation is walked from tail to head and is
/// displayed with a leading `~`. Ordering is by name, forward before passive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationRef {
    name: String,
    passive: bool,
}

impl RelationRef {
    /// Panics if `name` is empty or starts with `~`; use [`RelationRef::parse`] for untrusted input.
    pub fn forward(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(valid_relation_name(&name), "invalid relation name {name:?}");
        Self { name, passive: false }
    }

    pub fn passive(name: impl Into<String>) -> Self {
        Self {
            passive: true,
            ..Self::forward(name)
        }
    }

    /// Parses the display form: `name` or `~name` (a space after `~` is tolerated).
    pub fn parse(text: &str) -> Result<Self, KgError> {
        let text = text.trim();
        let (passive, name) = match text.strip_prefix('~') {
            Some(rest) => (true, rest.trim_start()),
            None => (false, text),
        };
        if !valid_relation_name(name) {
            return Err(KgError::InvalidRelation(text.to_string()));
        }
        Ok(Self {
            name: name.to_string(),
            passive,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_passive(&self) -> bool {
        self.passive
    }

    /// The same relation walked the other way.
    pub fn inverse(&self) -> Self {
        Self {
            name: self.name.clone(),
            passive: !self.passive,
        }
    }
}

fn valid_relation_name(name: &str) -> bool {
    !name.is_empty() && !name.starts_with('~') && !name.contains(char::is_whitespace)
}

impl fmt::Display for RelationRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passive {
            write!(f, "~{}", self.name)
        } else {
            f.write_str(&self.name)
        }
    }
}

impl FromStr for RelationRef {
    type Err = KgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for RelationRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RelationRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Self::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// `(head, relation, tail)` as seen from `head`. For a passive relation the
/// stored fact is `(tail, relation.name, head)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityRef,
    pub relation: RelationRef,
    pub tail: EntityRef,
}

impl Triple {
    pub fn new(head: EntityRef, relation: RelationRef, tail: EntityRef) -> Self {
        Self { head, relation, tail }
    }
}

/// Rendered the way prompts list knowledge: `( head, relation, tail )`.
impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "( {}, {}, {} )",
            self.head.friendly_name, self.relation, self.tail.friendly_name
        )
    }
}

#[derive(Debug, Error)]
pub enum KgError {
    #[error("empty source")]
    EmptySource,
    #[error("line {line}: {reason}: {content:?}")]
    Malformed {
        line: usize,
        reason: &'static str,
        content: String,
    },
    #[error("invalid relation {0:?}")]
    InvalidRelation(String),
    #[error("invalid entity id {0:?}")]
    InvalidMid(String),
    #[error("entity not found: {0:?}")]
    NotFound(String),
    #[error("network error talking to {endpoint}: {message}")]
    Network { endpoint: String, message: String },
    #[error("query to {endpoint} timed out")]
    Timeout { endpoint: String },
    #[error("protocol error from {endpoint}: {message}")]
    Protocol { endpoint: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl KgError {
    /// Transport-level failures that may succeed on a second attempt.
    pub fn is_retriable(&self) -> bool {
        matches!(self, KgError::Network { .. } | KgError::Timeout { .. })
    }
}

/// The two graph interfaces used by the reasoner, plus id/name resolution.
///
/// Results are set-valued: `get_relations` is sorted and duplicate-free,
/// `triple_filling` is sorted by tail friendly name and duplicate-free.
pub trait KgBackend: Send + Sync {
    fn get_relations(&self, entity: &EntityRef) -> Result<Vec<RelationRef>, KgError>;

    fn triple_filling(&self, entity: &EntityRef, relation: &RelationRef) -> Result<Vec<Triple>, KgError>;

    /// Looks `key` up as an id first, then as a friendly name.
    fn resolve(&self, key: &str) -> Result<EntityRef, KgError>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relation_display_and_parse() {
        let r = RelationRef::parse("~ starred_actors").unwrap();
        assert!(r.is_passive());
        assert_eq!(r.name(), "starred_actors");
        assert_eq!(r.to_string(), "~starred_actors");
        assert_eq!(RelationRef::parse("written_by").unwrap().to_string(), "written_by");
        assert!(RelationRef::parse("~").is_err());
        assert!(RelationRef::parse("").is_err());
        assert!(RelationRef::parse("~~x").is_err());
    }

    #[test]
    fn relation_ordering_groups_by_name() {
        let mut rels = [
            RelationRef::passive("written_by"),
            RelationRef::forward("written_by"),
            RelationRef::passive("directed_by"),
        ];
        rels.sort();
        let shown: Vec<_> = rels.iter().map(ToString::to_string).collect();
        assert_eq!(shown, ["~directed_by", "written_by", "~written_by"]);
    }

    #[test]
    fn relation_serde_uses_display_form() {
        let json = serde_json::to_string(&RelationRef::passive("starred_actors")).unwrap();
        assert_eq!(json, "\"~starred_actors\"");
        let back: RelationRef = serde_json::from_str(&json).unwrap();
        assert!(back.is_passive());
    }

    #[test]
    fn triple_renders_with_friendly_names() {
        let t = Triple::new(
            EntityRef::local("Joe Anderson"),
            RelationRef::passive("starred_actors"),
            EntityRef::new("m.0xyz", "High Life"),
        );
        assert_eq!(t.to_string(), "( Joe Anderson, ~starred_actors, High Life )");
    }
}
