//! Three roles rewriting a 2-hop question into a 1-hop one over two rounds.

use dog_kgqa::debate::{run_debate, simplify_merged, DebateConfig, RoleBook};
use dog_kgqa::kg::{EntityRef, RelationRef, Triple};
use dog_kgqa::llm::{LlmClient, ModelSettings, ScriptedProvider};
use dog_kgqa::prompts::PromptForge;

fn main() -> anyhow::Result<()> {
    let provider = ScriptedProvider::from_json(include_str!("../fixtures/high_life/rules.json"))?;
    let settings = ModelSettings::default();
    let forge = PromptForge::default();
    let roles = RoleBook::default();
    let q = "In what year was the movie [Joe Anderson] starring in released";
    let triple = Triple::new(
        EntityRef::local("Joe Anderson"),
        RelationRef::passive("starred_actors"),
        EntityRef::local("High Life"),
    );

    let config = DebateConfig {
        rounds: 2,
        ..DebateConfig::default()
    };
    let outcome = run_debate(
        q,
        &triple,
        &config,
        &roles,
        &forge,
        LlmClient::new(&provider, &settings),
        &mut |turn, _| {
            println!(
                "{} round {}: {}",
                turn.role.short(),
                turn.round,
                turn.content.lines().last().unwrap_or("")
            );
        },
    )?;
    println!("simplified: {}", outcome.simplified);

    let merged = simplify_merged(q, &triple, &roles, &forge, LlmClient::new(&provider, &settings))?;
    println!("single agent: {merged}");
    Ok(())
}
