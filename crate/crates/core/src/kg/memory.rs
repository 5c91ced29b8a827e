//! In-memory triple store with head and tail indexes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use super::{EntityRef, KgBackend, KgError, RelationRef, Triple};

type Index = HashMap<String, BTreeMap<String, BTreeSet<String>>>;

/// Forward triples stored once; passive (`~`) relations are answered from the
/// tail index, so `(h, ~r, t)` exists exactly when `(t, r, h)` is stored.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    triples: Vec<[String; 3]>,
    head_index: Index,
    tail_index: Index,
    names: BTreeMap<String, String>,
    by_name: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, Default)]
pub struct KnowledgeGraphBuilder {
    graph: KnowledgeGraph,
}

impl KnowledgeGraphBuilder {
    /// Registers or renames an entity.
    pub fn entity(&mut self, mid: &str, friendly_name: &str) -> &mut Self {
        self.graph.set_name(mid, friendly_name);
        self
    }

    /// Adds a forward fact between two ids; unnamed ids are named after themselves.
    pub fn triple(&mut self, head: &str, relation: &str, tail: &str) -> &mut Self {
        let g = &mut self.graph;
        for mid in [head, tail] {
            if !g.names.contains_key(mid) {
                g.set_name(mid, mid);
            }
        }
        g.triples
            .push([head.to_string(), relation.to_string(), tail.to_string()]);
        index_insert(&mut g.head_index, head, relation, tail);
        index_insert(&mut g.tail_index, tail, relation, head);
        self
    }

    pub fn build(self) -> KnowledgeGraph {
        self.graph
    }
}

fn index_insert(index: &mut Index, key: &str, relation: &str, other: &str) {
    index
        .entry(key.to_string())
        .or_default()
        .entry(relation.to_string())
        .or_default()
        .insert(other.to_string());
}

impl KnowledgeGraph {
    pub fn builder() -> KnowledgeGraphBuilder {
        KnowledgeGraphBuilder::default()
    }

    /// Loads the MetaQA `kb.txt` format: `head|relation|tail`, one fact per line.
    pub fn load_metaqa(source: impl BufRead) -> Result<Self, KgError> {
        let mut builder = Self::builder();
        let mut seen_any = false;
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let content = line.trim_end_matches('\r');
            if content.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split('|').collect();
            if fields.len() != 3 {
                return Err(KgError::Malformed {
                    line: line_no,
                    reason: "expected exactly two '|' separators",
                    content: content.to_string(),
                });
            }
            let (head, relation, tail) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
            if head.is_empty() || relation.is_empty() || tail.is_empty() {
                return Err(KgError::Malformed {
                    line: line_no,
                    reason: "empty field",
                    content: content.to_string(),
                });
            }
            if RelationRef::parse(relation).map_or(true, |r| r.is_passive()) {
                return Err(KgError::Malformed {
                    line: line_no,
                    reason: "relation must be a forward name",
                    content: content.to_string(),
                });
            }
            builder.triple(head, relation, tail);
            seen_any = true;
        }
        if !seen_any {
            return Err(KgError::EmptySource);
        }
        Ok(builder.build())
    }

    /// Writes the stored multiset back out in the MetaQA format (ids, not names).
    pub fn write_metaqa(&self, mut out: impl Write) -> std::io::Result<()> {
        for [h, r, t] in &self.triples {
            writeln!(out, "{h}|{r}|{t}")?;
        }
        Ok(())
    }

    fn set_name(&mut self, mid: &str, name: &str) {
        if let Some(old) = self.names.insert(mid.to_string(), name.to_string()) {
            if let Some(set) = self.by_name.get_mut(&old) {
                set.remove(mid);
                if set.is_empty() {
                    self.by_name.remove(&old);
                }
            }
        }
        self.by_name
            .entry(name.to_string())
            .or_default()
            .insert(mid.to_string());
    }

    /// Stored forward triples, including duplicates, in insertion order.
    pub fn raw_triples(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.triples
            .iter()
            .map(|[h, r, t]| (h.as_str(), r.as_str(), t.as_str()))
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn entity_count(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityRef> + '_ {
        self.names
            .iter()
            .map(|(mid, name)| EntityRef::new(mid.clone(), name.clone()))
    }

    pub fn entity(&self, mid: &str) -> Option<EntityRef> {
        self.names.get(mid).map(|name| EntityRef::new(mid, name.clone()))
    }

    /// Rebuilds both indexes from the stored triples and compares them to the live ones.
    pub fn indexes_consistent(&self) -> bool {
        let mut head = Index::new();
        let mut tail = Index::new();
        for [h, r, t] in &self.triples {
            index_insert(&mut head, h, r, t);
            index_insert(&mut tail, t, r, h);
        }
        head == self.head_index
            && tail == self.tail_index
            && self.names.len() >= head.keys().chain(tail.keys()).collect::<BTreeSet<_>>().len()
    }

    pub fn relations(&self, entity: &EntityRef) -> Vec<RelationRef> {
        let forward = self
            .head_index
            .get(&entity.mid)
            .into_iter()
            .flat_map(|m| m.keys())
            .map(|name| RelationRef::forward(name.clone()));
        let passive = self
            .tail_index
            .get(&entity.mid)
            .into_iter()
            .flat_map(|m| m.keys())
            .map(|name| RelationRef::passive(name.clone()));
        let set: BTreeSet<RelationRef> = forward.chain(passive).collect();
        set.into_iter().collect()
    }

    pub fn fill(&self, entity: &EntityRef, relation: &RelationRef) -> Vec<Triple> {
        let index = if relation.is_passive() {
            &self.tail_index
        } else {
            &self.head_index
        };
        let Some(others) = index.get(&entity.mid).and_then(|m| m.get(relation.name())) else {
            return Vec::new();
        };
        let head = self.entity(&entity.mid).unwrap_or_else(|| entity.clone());
        let mut tails: Vec<EntityRef> = others
            .iter()
            .map(|mid| self.entity(mid).unwrap_or_else(|| EntityRef::local(mid.clone())))
            .collect();
        tails.sort();
        tails
            .into_iter()
            .map(|tail| Triple::new(head.clone(), relation.clone(), tail))
            .collect()
    }

    pub fn lookup(&self, key: &str) -> Result<EntityRef, KgError> {
        if let Some(e) = self.entity(key) {
            return Ok(e);
        }
        self.by_name
            .get(key)
            .and_then(|mids| mids.iter().next())
            .and_then(|mid| self.entity(mid))
            .ok_or_else(|| KgError::NotFound(key.to_string()))
    }
}

impl KgBackend for KnowledgeGraph {
    fn get_relations(&self, entity: &EntityRef) -> Result<Vec<RelationRef>, KgError> {
        Ok(self.relations(entity))
    }

    fn triple_filling(&self, entity: &EntityRef, relation: &RelationRef) -> Result<Vec<Triple>, KgError> {
        Ok(self.fill(entity, relation))
    }

    fn resolve(&self, key: &str) -> Result<EntityRef, KgError> {
        self.lookup(key)
    }
}
