use std::time::Instant;

use dog_kgqa::debate::DebateConfig;
use dog_kgqa::eval::{evaluate, EvalContext, EvalOptions};
use dog_kgqa::oracle::{ChainQuestion, OracleProvider};
use dog_kgqa::reasoner::{AnswerMode, EventKind, ReasonerConfig};
use dog_kgqa::synth::{generate, SynthConfig};

fn run(config: &ReasonerConfig) {
    let fixture = generate(&SynthConfig::default());
    let oracle = OracleProvider::new(&fixture.kg);
    let ctx = EvalContext::new(&fixture.kg, &oracle);
    for k in 1..=3 {
        let questions = fixture.questions(k);
        let started = Instant::now();
        let report = evaluate(&ctx, &questions, config, &EvalOptions::default()).unwrap();
        let bad: Vec<_> = report.records.iter().filter(|r| !r.correct).take(3).collect();
        assert_eq!(report.hits_at_1, 1.0, "k={k}: {bad:#?}");
        assert!(report.records.iter().all(|r| r.steps == k), "k={k}");
        assert!(started.elapsed().as_secs_f64() < 10.0);
    }
}

#[test]
fn oracle_answers_every_chain_in_k_steps() {
    run(&ReasonerConfig::default());
}

#[test]
fn oracle_with_generated_answers() {
    run(&ReasonerConfig {
        answer_mode: AnswerMode::LlmGenerate,
        ..ReasonerConfig::default()
    });
}

#[test]
fn oracle_with_full_debate() {
    run(&ReasonerConfig {
        debate: DebateConfig {
            rounds: 2,
            ..DebateConfig::default()
        },
        ..ReasonerConfig::default()
    });
}

#[test]
fn oracle_path_collect() {
    run(&ReasonerConfig::path_collect());
}

#[test]
fn simplified_questions_drop_the_consumed_relation() {
    let fixture = generate(&SynthConfig::default());
    let oracle = OracleProvider::new(&fixture.kg);
    let ctx = EvalContext::new(&fixture.kg, &oracle);
    let report = evaluate(
        &ctx,
        &fixture.questions(3),
        &ReasonerConfig::default(),
        &EvalOptions::default(),
    )
    .unwrap();
    let mut seen = 0;
    for doc in &report.traces {
        let mut consumed = Vec::new();
        for e in &doc.events {
            match &e.kind {
                EventKind::RelationChoice { relation, .. } => consumed.push(relation.clone()),
                EventKind::Simplified { to, .. } => {
                    let q = ChainQuestion::parse(to).expect("synthetic form");
                    for r in &consumed {
                        assert!(!q.relations.contains(r), "{r} still in {to}");
                    }
                    seen += 1;
                }
                _ => {}
            }
        }
    }
    assert_eq!(seen, 200);
}
