//! Hits@1 on synthetic 1-, 2- and 3-hop chains with the brute-force oracle as the model.

use std::time::Instant;

use dog_kgqa::eval::{evaluate, EvalContext, EvalOptions};
use dog_kgqa::oracle::OracleProvider;
use dog_kgqa::reasoner::ReasonerConfig;
use dog_kgqa::synth::{generate, SynthConfig};

fn main() -> anyhow::Result<()> {
    let fixture = generate(&SynthConfig::default());
    let oracle = OracleProvider::new(&fixture.kg);
    let ctx = EvalContext::new(&fixture.kg, &oracle);
    for k in 1..=3 {
        let started = Instant::now();
        let report = evaluate(
            &ctx,
            &fixture.questions(k),
            &ReasonerConfig::default(),
            &EvalOptions::default(),
        )?;
        let steps_ok = report.records.iter().all(|r| r.steps == k);
        println!(
            "k={k} {} steps_ok={steps_ok} in {:?}",
            report.summary(),
            started.elapsed()
        );
    }
    println!("oracle calls: {}", oracle.call_count());
    Ok(())
}
