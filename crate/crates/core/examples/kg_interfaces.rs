//! The two graph interfaces on an in-memory graph, passive relations included.

use dog_kgqa::kg::{KgBackend, KnowledgeGraph, RelationRef};

fn main() -> anyhow::Result<()> {
    let kg = KnowledgeGraph::load_metaqa(include_str!("../fixtures/high_life/kb.txt").as_bytes())?;
    println!("{} triples, {} entities", kg.triple_count(), kg.entity_count());

    let joe = kg.resolve("Joe Anderson")?;
    let relations = kg.get_relations(&joe)?;
    println!(
        "relations of {}: {:?}",
        joe.friendly_name,
        relations.iter().map(|r| r.to_string()).collect::<Vec<_>>()
    );

    for t in kg.triple_filling(&joe, &RelationRef::passive("starred_actors"))? {
        println!("  {t}");
    }
    let high_life = kg.resolve("High Life")?;
    for t in kg.triple_filling(&high_life, &RelationRef::parse("release_year")?)? {
        println!("  {t}");
    }
    Ok(())
}
