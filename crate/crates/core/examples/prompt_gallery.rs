//! Every prompt the engine sends, rendered for one example question.

use dog_kgqa::debate::{RoleBook, RoleId};
use dog_kgqa::kg::{EntityRef, RelationRef, Triple};
use dog_kgqa::llm::ChatMessage;
use dog_kgqa::prompts::PromptForge;

fn show(title: &str, messages: &[ChatMessage]) {
    println!("==== {title}");
    for m in messages {
        println!("[{:?}]\n{}\n", m.role, m.content);
    }
}

fn main() -> anyhow::Result<()> {
    let forge = PromptForge::default();
    let roles = RoleBook::default();
    let q = "In what year was the movie [Joe Anderson] starring in released";
    let joe = EntityRef::local("Joe Anderson");
    let triple = Triple::new(
        joe.clone(),
        RelationRef::passive("starred_actors"),
        EntityRef::local("High Life"),
    );
    let candidates = [RelationRef::passive("starred_actors")];

    show(
        "relation filtering (2 exemplars)",
        &forge.relation_filtering(q, &candidates, 2)?,
    );
    show(
        "answer trying (1 exemplar)",
        &forge.answer_trying(q, std::slice::from_ref(&triple), 1)?,
    );
    show(
        "simplify, first speaker",
        &forge.simplify_turn(&roles.role(RoleId::Simplifier), q, &triple, &[], 1)?,
    );
    show(
        "simplify, merged team",
        &forge.simplify_turn(&roles.role(RoleId::Merged), q, &triple, &[], 1)?,
    );
    show(
        "tail selection",
        &forge.tail_selection(
            q,
            &joe,
            &candidates[0],
            &[EntityRef::local("High Life"), EntityRef::local("The Crew")],
        )?,
    );
    show("final answer", &forge.final_answer(q, &[triple]));
    show("fallback", &forge.fallback(q));
    Ok(())
}
