//! Remote graph access over the SPARQL 1.1 protocol.
//!
//! Queries are POSTed form-encoded with `Accept: application/sparql-results+json`.
//! Relation and entity ids are written in the configured namespace
//! (Freebase's `http://rdf.freebase.com/ns/` by default). Friendly names are
//! read from a configurable name property and cached for the life of the
//! backend.

use std::collections::{BTreeSet, HashMap};
use std::sync::RwLock;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::ACCEPT;
use serde::Deserialize;

use super::{EntityRef, KgBackend, KgError, RelationRef, Triple};

pub const FREEBASE_NS: &str = "http://rdf.freebase.com/ns/";
pub const FREEBASE_NAME_PROPERTY: &str = "type.object.name";
const SPARQL_RESULTS_JSON: &str = "application/sparql-results+json";

#[derive(Debug, Clone)]
pub struct SparqlConfig {
    pub endpoint: String,
    pub namespace: String,
    /// Local name (inside `namespace`) of the property holding friendly names.
    pub name_property: String,
    /// Preferred language tag for names; untagged literals are always accepted.
    pub language: String,
    pub timeout: Duration,
}

impl SparqlConfig {
    pub fn freebase(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            namespace: FREEBASE_NS.to_string(),
            name_property: FREEBASE_NAME_PROPERTY.to_string(),
            language: "en".to_string(),
            timeout: Duration::from_secs(30),
        }
    }
}

/// Query text for the two graph interfaces and the name lookups.
#[derive(Debug, Clone)]
pub struct SparqlQueries {
    namespace: String,
    name_property: String,
    language: String,
}

impl SparqlQueries {
    pub fn new(config: &SparqlConfig) -> Self {
        Self {
            namespace: config.namespace.clone(),
            name_property: config.name_property.clone(),
            language: config.language.clone(),
        }
    }

    fn prefix(&self) -> String {
        format!("PREFIX ns: <{}>\n", self.namespace)
    }

    /// Outgoing predicates bind `?out`, incoming ones bind `?in`.
    pub fn relations_of(&self, mid: &str) -> Result<String, KgError> {
        let subject = self.entity_term(mid)?;
        Ok(format!(
            "{}SELECT DISTINCT ?out ?in WHERE {{\n  {{ {subject} ?out ?x . }}\n  UNION\n  {{ ?x ?in {subject} . }}\n}}",
            self.prefix()
        ))
    }

    pub fn tails_of(&self, mid: &str, relation: &RelationRef) -> Result<String, KgError> {
        let entity = self.entity_term(mid)?;
        let predicate = self.predicate_term(relation.name())?;
        let pattern = if relation.is_passive() {
            format!("?tail {predicate} {entity} .")
        } else {
            format!("{entity} {predicate} ?tail .")
        };
        Ok(format!(
            "{}SELECT DISTINCT ?tail WHERE {{\n  {pattern}\n}}",
            self.prefix()
        ))
    }

    pub fn name_of(&self, mid: &str) -> Result<String, KgError> {
        let entity = self.entity_term(mid)?;
        Ok(format!(
            "{}SELECT ?name WHERE {{\n  {entity} ns:{} ?name .\n  FILTER(lang(?name) = '' || langMatches(lang(?name), '{}'))\n}}\nLIMIT 1",
            self.prefix(),
            self.name_property,
            self.language
        ))
    }

    pub fn entity_by_name(&self, name: &str) -> String {
        format!(
            "{}SELECT DISTINCT ?entity WHERE {{\n  ?entity ns:{} ?name .\n  FILTER(str(?name) = \"{}\")\n}}\nORDER BY ?entity\nLIMIT 1",
            self.prefix(),
            self.name_property,
            escape_literal(name)
        )
    }

    fn entity_term(&self, mid: &str) -> Result<String, KgError> {
        if is_local_name(mid) {
            Ok(format!("ns:{mid}"))
        } else {
            Err(KgError::InvalidMid(mid.to_string()))
        }
    }

    fn predicate_term(&self, name: &str) -> Result<String, KgError> {
        if is_local_name(name) {
            Ok(format!("ns:{name}"))
        } else if name.contains("://") && !name.contains(['<', '>', '"', ' ', '{', '}']) {
            Ok(format!("<{name}>"))
        } else {
            Err(KgError::InvalidRelation(name.to_string()))
        }
    }

    fn local_name<'a>(&self, iri: &'a str) -> Option<&'a str> {
        iri.strip_prefix(self.namespace.as_str())
            .filter(|rest| is_local_name(rest))
    }
}

fn is_local_name(s: &str) -> bool {
    !s.is_empty() && !s.starts_with('.') && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

#[derive(Deserialize)]
struct SelectResults {
    results: Bindings,
}

#[derive(Deserialize)]
struct Bindings {
    bindings: Vec<HashMap<String, Term>>,
}

#[derive(Deserialize, Debug, Clone)]
struct Term {
    #[serde(rename = "type")]
    kind: String,
    value: String,
}

pub struct SparqlKg {
    config: SparqlConfig,
    queries: SparqlQueries,
    client: Client,
    names: RwLock<HashMap<String, String>>,
}

impl SparqlKg {
    pub fn new(config: SparqlConfig) -> Result<Self, KgError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| KgError::Network {
                endpoint: config.endpoint.clone(),
                message: e.to_string(),
            })?;
        Ok(Self {
            queries: SparqlQueries::new(&config),
            config,
            client,
            names: RwLock::new(HashMap::new()),
        })
    }

    pub fn queries(&self) -> &SparqlQueries {
        &self.queries
    }

    pub fn cached_names(&self) -> usize {
        self.names.read().map(|m| m.len()).unwrap_or(0)
    }

    fn select(&self, query: &str) -> Result<Vec<HashMap<String, Term>>, KgError> {
        let endpoint = &self.config.endpoint;
        log::debug!("sparql query to {endpoint}:\n{query}");
        let response = self
            .client
            .post(endpoint)
            .header(ACCEPT, SPARQL_RESULTS_JSON)
            .form(&[("query", query)])
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    KgError::Timeout {
                        endpoint: endpoint.clone(),
                    }
                } else {
                    KgError::Network {
                        endpoint: endpoint.clone(),
                        message: e.to_string(),
                    }
                }
            })?;
        let status = response.status();
        if !status.is_success() {
            return Err(KgError::Network {
                endpoint: endpoint.clone(),
                message: format!("HTTP {status}"),
            });
        }
        let body = response.text().map_err(|e| {
            if e.is_timeout() {
                KgError::Timeout {
                    endpoint: endpoint.clone(),
                }
            } else {
                KgError::Network {
                    endpoint: endpoint.clone(),
                    message: e.to_string(),
                }
            }
        })?;
        let parsed: SelectResults = serde_json::from_str(&body).map_err(|e| KgError::Protocol {
            endpoint: endpoint.clone(),
            message: e.to_string(),
        })?;
        Ok(parsed.results.bindings)
    }

    fn friendly_name(&self, mid: &str) -> Result<String, KgError> {
        if let Some(name) = self.names.read().ok().and_then(|m| m.get(mid).cloned()) {
            return Ok(name);
        }
        let name = self.fetch_name(mid)?.unwrap_or_else(|| mid.to_string());
        if let Ok(mut cache) = self.names.write() {
            cache.insert(mid.to_string(), name.clone());
        }
        Ok(name)
    }

    fn fetch_name(&self, mid: &str) -> Result<Option<String>, KgError> {
        let rows = self.select(&self.queries.name_of(mid)?)?;
        Ok(rows.into_iter().find_map(|mut row| row.remove("name")).map(|t| t.value))
    }

    fn relation_from_iri(&self, iri: &str, passive: bool) -> Option<RelationRef> {
        let name = self
            .queries
            .local_name(iri)
            .map(str::to_string)
            .unwrap_or_else(|| iri.to_string());
        if name == self.config.name_property {
            return None;
        }
        let relation = RelationRef::parse(&name).ok()?;
        Some(if passive { relation.inverse() } else { relation })
    }

    fn term_entity(&self, term: &Term) -> Result<Option<EntityRef>, KgError> {
        match term.kind.as_str() {
            "uri" => match self.queries.local_name(&term.value) {
                Some(mid) => Ok(Some(EntityRef::new(mid, self.friendly_name(mid)?))),
                None => Ok(Some(EntityRef::local(term.value.clone()))),
            },
            "literal" | "typed-literal" => Ok(Some(EntityRef::local(term.value.clone()))),
            "bnode" => Ok(None),
            other => Err(KgError::Protocol {
                endpoint: self.config.endpoint.clone(),
                message: format!("unknown term type {other:?}"),
            }),
        }
    }
}

impl KgBackend for SparqlKg {
    fn get_relations(&self, entity: &EntityRef) -> Result<Vec<RelationRef>, KgError> {
        let rows = self.select(&self.queries.relations_of(&entity.mid)?)?;
        let mut set = BTreeSet::new();
        for row in rows {
            for (var, passive) in [("out", false), ("in", true)] {
                if let Some(term) = row.get(var) {
                    if term.kind != "uri" {
                        continue;
                    }
                    if let Some(rel) = self.relation_from_iri(&term.value, passive) {
                        set.insert(rel);
                    }
                }
            }
        }
        Ok(set.into_iter().collect())
    }

    fn triple_filling(&self, entity: &EntityRef, relation: &RelationRef) -> Result<Vec<Triple>, KgError> {
        let rows = self.select(&self.queries.tails_of(&entity.mid, relation)?)?;
        let mut tails = BTreeSet::new();
        for row in rows {
            if let Some(term) = row.get("tail") {
                if let Some(tail) = self.term_entity(term)? {
                    tails.insert(tail);
                }
            }
        }
        let head = if entity.friendly_name.is_empty() || entity.friendly_name == entity.mid {
            EntityRef::new(entity.mid.clone(), self.friendly_name(&entity.mid)?)
        } else {
            entity.clone()
        };
        Ok(tails
            .into_iter()
            .map(|tail| Triple::new(head.clone(), relation.clone(), tail))
            .collect())
    }

    fn resolve(&self, key: &str) -> Result<EntityRef, KgError> {
        if key.trim().is_empty() {
            return Err(KgError::NotFound(key.to_string()));
        }
        if is_local_name(key) {
            if let Some(name) = self.fetch_name(key)? {
                if let Ok(mut cache) = self.names.write() {
                    cache.insert(key.to_string(), name.clone());
                }
                return Ok(EntityRef::new(key, name));
            }
        }
        let rows = self.select(&self.queries.entity_by_name(key))?;
        let mid = rows
            .into_iter()
            .find_map(|mut row| row.remove("entity"))
            .and_then(|t| self.queries.local_name(&t.value).map(str::to_string))
            .ok_or_else(|| KgError::NotFound(key.to_string()))?;
        if let Ok(mut cache) = self.names.write() {
            cache.insert(mid.clone(), key.to_string());
        }
        Ok(EntityRef::new(mid, key))
    }
}
