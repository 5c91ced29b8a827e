//! The five-row ablation and a debate-round sweep, on synthetic 3-hop chains.

use dog_kgqa::eval::{comparison_table, run_ablation, run_sweep, EvalContext, EvalOptions, SweepAxis};
use dog_kgqa::oracle::OracleProvider;
use dog_kgqa::reasoner::ReasonerConfig;
use dog_kgqa::synth::{generate, SynthConfig};

fn main() -> anyhow::Result<()> {
    let fixture = generate(&SynthConfig {
        chains: 30,
        ..SynthConfig::default()
    });
    let oracle = OracleProvider::new(&fixture.kg);
    let ctx = EvalContext::new(&fixture.kg, &oracle);
    let questions = fixture.questions(3);
    let base = ReasonerConfig::default();

    let rows = run_ablation(&ctx, &questions, &base, &EvalOptions::default())?;
    print!("{}", comparison_table(&rows));
    for r in &rows {
        let turns: usize = r.traces.iter().map(|t| t.count("debate_turn")).sum();
        println!("{:<22} debate turns={turns}", r.label);
    }

    let axis = SweepAxis::DebateRounds;
    let sweep = run_sweep(
        &ctx,
        &questions,
        &base,
        axis,
        &axis.default_values(),
        &EvalOptions::default(),
    )?;
    print!("{}", comparison_table(&sweep));
    Ok(())
}
