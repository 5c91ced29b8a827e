//! Shared test helpers: random graphs and exhaustive-scan answers.

#![allow(dead_code)]

use std::collections::BTreeSet;

use dog_kgqa::kg::{KnowledgeGraph, RelationRef};
use rand::Rng;

pub type Fact = (String, String, String);

pub const RELATIONS: [&str; 6] = [
    "directed_by",
    "written_by",
    "starred_actors",
    "release_year",
    "in_language",
    "has_genre",
];

pub fn random_facts(rng: &mut impl Rng, entities: usize, triples: usize) -> Vec<Fact> {
    (0..triples)
        .map(|_| {
            (
                format!("e{}", rng.gen_range(0..entities)),
                RELATIONS[rng.gen_range(0..RELATIONS.len())].to_string(),
                format!("e{}", rng.gen_range(0..entities)),
            )
        })
        .collect()
}

pub fn build(facts: &[Fact]) -> KnowledgeGraph {
    let mut b = KnowledgeGraph::builder();
    for (h, r, t) in facts {
        b.triple(h, r, t);
    }
    b.build()
}

/// `{ r : (e, r, _) } ∪ { ~r : (_, r, e) }` by a full scan.
pub fn scan_relations(facts: &[Fact], e: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (h, r, t) in facts {
        if h == e {
            out.insert(r.clone());
        }
        if t == e {
            out.insert(format!("~{r}"));
        }
    }
    out
}

/// Triples `( e, r, x )` by a full scan, rendered for comparison.
pub fn scan_fill(facts: &[Fact], e: &str, r: &RelationRef) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (h, name, t) in facts {
        if name != r.name() {
            continue;
        }
        if !r.is_passive() && h == e {
            out.insert(format!("( {e}, {r}, {t} )"));
        }
        if r.is_passive() && t == e {
            out.insert(format!("( {e}, {r}, {h} )"));
        }
    }
    out
}
