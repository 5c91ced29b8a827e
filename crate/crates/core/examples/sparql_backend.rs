//! Query text for a SPARQL endpoint, and a live lookup when one is configured.
//!
//! `DOG_SPARQL_ENDPOINT=http://localhost:8890/sparql cargo run --example sparql_backend -- m.03_r3`

use dog_kgqa::kg::{KgBackend, RelationRef, SparqlConfig, SparqlKg};

fn main() -> anyhow::Result<()> {
    let mid = std::env::args().nth(1).unwrap_or_else(|| "m.03_r3".into());
    let endpoint = std::env::var("DOG_SPARQL_ENDPOINT").ok();
    let kg = SparqlKg::new(SparqlConfig::freebase(
        endpoint
            .clone()
            .unwrap_or_else(|| "http://localhost:8890/sparql".into()),
    ))?;

    let q = kg.queries();
    println!("-- relations of {mid}\n{}\n", q.relations_of(&mid)?);
    println!(
        "-- tails of {mid} via location.country.languages_spoken\n{}\n",
        q.tails_of(&mid, &RelationRef::forward("location.country.languages_spoken"))?
    );
    println!("-- name of {mid}\n{}\n", q.name_of(&mid)?);

    if endpoint.is_none() {
        println!("set DOG_SPARQL_ENDPOINT to run the queries");
        return Ok(());
    }
    let entity = kg.resolve(&mid)?;
    let relations = kg.get_relations(&entity)?;
    println!("{} has {} relations", entity.friendly_name, relations.len());
    for r in relations.iter().take(10) {
        println!("  {r}");
    }
    Ok(())
}
