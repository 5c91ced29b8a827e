//! A full two-step run: retrieve, fail to answer, debate, retrieve again, answer.

use dog_kgqa::cli::render_trace;
use dog_kgqa::kg::{KgBackend, KnowledgeGraph};
use dog_kgqa::llm::ScriptedProvider;
use dog_kgqa::reasoner::{Reasoner, ReasonerConfig, TraceDocument};

fn main() -> anyhow::Result<()> {
    let kg = KnowledgeGraph::load_metaqa(include_str!("../fixtures/high_life/kb.txt").as_bytes())?;
    let provider = ScriptedProvider::from_json(include_str!("../fixtures/high_life/rules.json"))?;
    let config = ReasonerConfig::default();
    let reasoner = Reasoner::new(&kg, &provider, config.clone())?;

    let q = "In what year was the movie [Joe Anderson] starring in released";
    let topic = kg.resolve("Joe Anderson")?;
    let run = reasoner.answer_question(q, Some(&topic), Some(2));
    print!(
        "{}",
        render_trace(&TraceDocument::from_run("two-hop", q, &config, &run))
    );
    println!("model calls: {}", provider.call_count());
    Ok(())
}
