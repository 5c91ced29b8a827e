//! Deterministic chat responses from rules, behind the response cache.

use dog_kgqa::llm::{CachedProvider, ChatMessage, LlmClient, ModelSettings, ScriptedProvider};

fn main() -> anyhow::Result<()> {
    let rules = ScriptedProvider::from_json(include_str!("../fixtures/high_life/rules.json"))?;
    let provider = CachedProvider::new(rules);
    let settings = ModelSettings::default();
    let llm = LlmClient::new(&provider, &settings);

    let messages = vec![
        ChatMessage::system("You are a linguist."),
        ChatMessage::user("N-hop Question: In what year was the movie High Life released?"),
    ];
    for _ in 0..2 {
        let exchange = llm.ask(messages.clone())?;
        println!("response: {}", exchange.response);
    }
    println!(
        "provider calls: {}, cached entries: {}",
        provider.inner().call_count(),
        provider.len()
    );

    match llm.ask(vec![ChatMessage::user("something no rule covers")]) {
        Ok(_) => println!("unexpected match"),
        Err(e) => println!("unmatched prompt: {e}"),
    }
    Ok(())
}
