//! MetaQA with a real chat model.
//!
//! ```text
//! DOG_LLM_ENDPOINT=https://api.openai.com/v1/chat/completions DOG_LLM_API_KEY=... \
//! DOG_METAQA_KB=MetaQA/kb.txt DOG_METAQA_QA=MetaQA/1-hop/vanilla/qa_test.txt \
//! cargo run --release --example live_metaqa
//! ```
//!
//! Samples 100 questions with seed 0 and caches responses in `live-cache.ndjson`.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use dog_kgqa::eval::{evaluate, load_metaqa_qa, sample_uniform, tag_table, EvalContext, EvalOptions};
use dog_kgqa::kg::KnowledgeGraph;
use dog_kgqa::llm::{CachedProvider, ConcurrencyLimit, HttpChatProvider};
use dog_kgqa::reasoner::ReasonerConfig;

fn main() -> anyhow::Result<()> {
    let (Ok(kb), Ok(qa)) = (std::env::var("DOG_METAQA_KB"), std::env::var("DOG_METAQA_QA")) else {
        println!("set DOG_LLM_ENDPOINT, DOG_METAQA_KB and DOG_METAQA_QA to run");
        return Ok(());
    };
    let hops = std::env::var("DOG_METAQA_HOPS")
        .ok()
        .map(|h| h.parse())
        .transpose()?
        .unwrap_or(1);
    let kg = KnowledgeGraph::load_metaqa(BufReader::new(File::open(kb)?))?;
    let data = load_metaqa_qa(BufReader::new(File::open(qa)?), Some(hops))?;
    let sample = sample_uniform(&data, 100.min(data.len()), 0)?;

    let http = HttpChatProvider::from_env()?;
    let provider = ConcurrencyLimit::new(
        CachedProvider::with_overflow_file(http, Path::new("live-cache.ndjson"))?,
        4,
    );
    let report = evaluate(
        &EvalContext::new(&kg, &provider),
        &sample,
        &ReasonerConfig::default(),
        &EvalOptions::default(),
    )?;
    println!("{}", report.summary());
    print!("{}", tag_table(&report));
    Ok(())
}
