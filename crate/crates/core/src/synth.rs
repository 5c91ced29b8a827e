//! Synthetic multi-hop fixtures with known answers.
//!
//! Each chain is a path `e0 -r1-> e1 -r2-> ... -rK-> eK` over MetaQA-style
//! relation names, walked forward or passively at random, with distractor
//! edges around every chain entity. Some chains also get a decoy tail so that
//! one relation leads to two entities. Gold answers come from a linear scan of
//! the raw facts.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::QAInstance;
use crate::kg::{KnowledgeGraph, RelationRef};
use crate::oracle::ChainQuestion;

pub const RELATION_POOL: [&str; 12] = [
    "directed_by",
    "written_by",
    "starred_actors",
    "release_year",
    "in_language",
    "has_genre",
    "has_tags",
    "has_imdb_rating",
    "has_imdb_votes",
    "produced_by",
    "edited_by",
    "composed_by",
];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub chains: usize,
    pub hops: usize,
    /// Distractor edges per chain entity.
    pub distractors: usize,
    /// Fraction of chains whose first hop also reaches a decoy entity.
    pub decoy_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            chains: 100,
            hops: 3,
            distractors: 1,
            decoy_rate: 0.25,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Chain {
    pub entities: Vec<String>,
    pub relations: Vec<RelationRef>,
}

pub struct SynthFixture {
    pub kg: KnowledgeGraph,
    pub facts: Vec<(String, String, String)>,
    pub chains: Vec<Chain>,
}

/// Entities reached from `topic` along `chain`, by scanning `facts`.
pub fn scan_answers(facts: &[(String, String, String)], topic: &str, chain: &[RelationRef]) -> BTreeSet<String> {
    let mut at: BTreeSet<String> = BTreeSet::from([topic.to_string()]);
    for rel in chain {
        let mut next = BTreeSet::new();
        for (h, r, t) in facts {
            if r != rel.name() {
                continue;
            }
            if !rel.is_passive() && at.contains(h) {
                next.insert(t.clone());
            }
            if rel.is_passive() && at.contains(t) {
                next.insert(h.clone());
            }
        }
        at = next;
    }
    at
}

pub fn generate(config: &SynthConfig) -> SynthFixture {
    assert!(
        config.hops >= 1 && config.hops <= RELATION_POOL.len() / 2,
        "hops out of range"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut facts = Vec::new();
    let mut chains = Vec::new();
    for c in 0..config.chains {
        let mut pool = RELATION_POOL.to_vec();
        pool.shuffle(&mut rng);
        let (chain_names, spare) = pool.split_at(config.hops);
        let entities: Vec<String> = (0..=config.hops).map(|i| format!("Node {c}-{i}")).collect();
        let mut relations = Vec::new();
        for (i, name) in chain_names.iter().enumerate() {
            let passive = rng.gen_bool(0.5);
            let (a, b) = (&entities[i], &entities[i + 1]);
            if passive {
                facts.push((b.clone(), name.to_string(), a.clone()));
                relations.push(RelationRef::passive(*name));
            } else {
                facts.push((a.clone(), name.to_string(), b.clone()));
                relations.push(RelationRef::forward(*name));
            }
        }
        for (i, e) in entities.iter().enumerate() {
            for j in 0..config.distractors {
                let name = spare.choose(&mut rng).expect("spare relations");
                let noise = format!("Noise {c}-{i}-{j}");
                if rng.gen_bool(0.5) {
                    facts.push((e.clone(), name.to_string(), noise));
                } else {
                    facts.push((noise, name.to_string(), e.clone()));
                }
            }
        }
        if config.hops > 1 && rng.gen_bool(config.decoy_rate) {
            let decoy = format!("Decoy {c}");
            let first = &relations[0];
            if first.is_passive() {
                facts.push((decoy, first.name().to_string(), entities[0].clone()));
            } else {
                facts.push((entities[0].clone(), first.name().to_string(), decoy));
            }
        }
        chains.push(Chain { entities, relations });
    }
    let mut b = KnowledgeGraph::builder();
    for (h, r, t) in &facts {
        b.triple(h, r, t);
    }
    SynthFixture {
        kg: b.build(),
        facts,
        chains,
    }
}

impl SynthFixture {
    /// One `k`-hop question per chain, over the chain's first `k` relations.
    pub fn questions(&self, k: usize) -> Vec<QAInstance> {
        self.chains
            .iter()
            .enumerate()
            .map(|(c, chain)| {
                let q = ChainQuestion {
                    topic: chain.entities[0].clone(),
                    relations: chain.relations[..k].to_vec(),
                };
                QAInstance {
                    id: format!("c{c:03}-k{k}"),
                    question: q.render(),
                    topic: Some(q.topic.clone()),
                    gold: scan_answers(&self.facts, &q.topic, &q.relations).into_iter().collect(),
                    hops: Some(k),
                }
            })
            .collect()
    }

    /// `k`-hop questions as tab-separated `id, question, topic, gold, hops` lines.
    pub fn tabular(&self, k: usize) -> String {
        self.questions(k)
            .iter()
            .map(|q| {
                format!(
                    "{}\t{}\t{}\t{}\t{k}\n",
                    q.id,
                    q.question,
                    q.topic.as_deref().unwrap_or(""),
                    q.gold.join("|")
                )
            })
            .collect()
    }

    /// The graph in `head|relation|tail` form.
    pub fn kb_text(&self) -> String {
        self.facts.iter().map(|(h, r, t)| format!("{h}|{r}|{t}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relation_names_are_not_substrings() {
        for a in RELATION_POOL {
            for b in RELATION_POOL {
                assert!(a == b || !b.contains(a), "{a} in {b}");
            }
        }
    }

    #[test]
    fn fixture_shape() {
        let f = generate(&SynthConfig::default());
        assert!(f.kg.triple_count() >= 200);
        for k in 1..=3 {
            let qs = f.questions(k);
            assert_eq!(qs.len(), 100);
            for (q, chain) in qs.iter().zip(&f.chains) {
                assert!(q.gold.contains(&chain.entities[k]), "{q:?}");
            }
        }
        let full = f.questions(3);
        assert!(full.iter().all(|q| q.gold.len() == 1));
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate(&SynthConfig::default()).kb_text();
        let b = generate(&SynthConfig::default()).kb_text();
        assert_eq!(a, b);
        let c = generate(&SynthConfig {
            seed: 9,
            ..SynthConfig::default()
        })
        .kb_text();
        assert_ne!(a, c);
    }
}
