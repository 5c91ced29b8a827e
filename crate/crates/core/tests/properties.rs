mod common;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use dog_kgqa::debate::{run_debate, DebateConfig, RoleBook, RoleId};
use dog_kgqa::eval::{evaluate, exact_match, hits_at_1, sample_uniform, EvalContext, EvalOptions, QAInstance};
use dog_kgqa::kg::{EntityRef, KgBackend, KnowledgeGraph, RelationRef, Triple};
use dog_kgqa::llm::{
    ChatMessage, ChatProvider, CompletionRequest, LlmClient, LlmError, ModelSettings, ScriptedProvider,
};
use dog_kgqa::oracle::OracleProvider;
use dog_kgqa::prompts::{parse_relation_choice, PromptForge};
use dog_kgqa::reasoner::{AnswerSource, EventKind, Mode, Reasoner, ReasonerConfig};
use dog_kgqa::synth::{generate, SynthConfig};
use dog_kgqa::text::normalize;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn relation_strategy() -> impl Strategy<Value = RelationRef> {
    (0..RELATIONS.len(), any::<bool>()).prop_map(|(i, p)| {
        if p {
            RelationRef::passive(RELATIONS[i])
        } else {
            RelationRef::forward(RELATIONS[i])
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_interfaces_match_scan(seed in any::<u64>(), entities in 1usize..30, triples in 0usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let facts = random_facts(&mut rng, entities, triples);
        let kg = build(&facts);
        for i in 0..entities {
            let name = format!("e{i}");
            let e = EntityRef::local(name.as_str());
            let got: BTreeSet<String> = kg.get_relations(&e).unwrap().iter().map(|r| r.to_string()).collect();
            prop_assert_eq!(&got, &scan_relations(&facts, &name));
            for r in RELATIONS.iter().flat_map(|r| [RelationRef::forward(*r), RelationRef::passive(*r)]) {
                let filled = kg.triple_filling(&e, &r).unwrap();
                for t in &filled {
                    prop_assert_eq!(&t.head, &e);
                    prop_assert_eq!(&t.relation, &r);
                    let forward = if r.is_passive() {
                        (t.tail.mid.clone(), r.name().to_string(), name.clone())
                    } else {
                        (name.clone(), r.name().to_string(), t.tail.mid.clone())
                    };
                    prop_assert!(facts.contains(&forward));
                }
                let got: BTreeSet<String> = filled.iter().map(|t| t.to_string()).collect();
                prop_assert_eq!(got, scan_fill(&facts, &name, &r));
            }
        }
        prop_assert!(kg.indexes_consistent());
    }

    #[test]
    fn load_write_load_keeps_the_multiset(seed in any::<u64>(), triples in 0usize..150) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let facts = random_facts(&mut rng, 20, triples);
        let text: String = facts.iter().map(|(h, r, t)| format!("{h}|{r}|{t}\n")).collect();
        let a = KnowledgeGraph::load_metaqa(text.as_bytes()).unwrap();
        let mut out = Vec::new();
        a.write_metaqa(&mut out).unwrap();
        let b = KnowledgeGraph::load_metaqa(out.as_slice()).unwrap();
        let bag = |kg: &KnowledgeGraph| {
            let mut v: Vec<(String, String, String)> =
                kg.raw_triples().map(|(h, r, t)| (h.into(), r.into(), t.into())).collect();
            v.sort();
            v
        };
        let mut expected = facts.clone();
        expected.sort();
        prop_assert_eq!(bag(&a), expected);
        prop_assert_eq!(bag(&a), bag(&b));
        let again = KnowledgeGraph::load_metaqa(text.as_bytes()).unwrap();
        for i in 0..20 {
            let e = EntityRef::local(format!("e{i}"));
            prop_assert_eq!(a.get_relations(&e).unwrap(), again.get_relations(&e).unwrap());
            for r in a.get_relations(&e).unwrap() {
                prop_assert_eq!(a.triple_filling(&e, &r).unwrap(), again.triple_filling(&e, &r).unwrap());
            }
        }
    }

    #[test]
    fn relation_choice_stays_in_candidates(
        response in ".{0,80}",
        pick in 0usize..8,
        candidates in prop::collection::vec(relation_strategy(), 1..6),
    ) {
        let noisy = format!("{response}\nOutput: relation_{pick}: {}", RELATIONS[pick % RELATIONS.len()]);
        for text in [response.as_str(), noisy.as_str()] {
            if let Ok(choice) = parse_relation_choice(text, &candidates) {
                prop_assert!(candidates.contains(&choice.relation));
            }
        }
    }

    #[test]
    fn prompts_are_pure_and_carry_k_exemplars(
        k in 0usize..=10,
        question in "[a-z ]{1,40}",
        candidates in prop::collection::vec(relation_strategy(), 1..5),
    ) {
        let forge = PromptForge::default();
        let a = forge.relation_filtering(&question, &candidates, k).unwrap();
        let b = PromptForge::default().relation_filtering(&question, &candidates, k).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a[1].content.matches("Relation_set").count(), k + 1);
        let triple = Triple::new(EntityRef::local("a"), candidates[0].clone(), EntityRef::local("b"));
        let at = forge.answer_trying(&question, &[triple], k).unwrap();
        prop_assert_eq!(at[1].content.matches("Knowledge Triples:").count(), k + 1);
    }

    #[test]
    fn scripted_provider_is_pure(needle in "[a-z]{1,6}", body in "[a-z ]{0,30}") {
        let p = ScriptedProvider::default().rule(&needle, format!("reply to {needle}"));
        let req = CompletionRequest::new("m", vec![ChatMessage::user(format!("{body}{needle}{body}"))]);
        let first = p.complete(&req).unwrap();
        prop_assert_eq!(first, p.complete(&req).unwrap());
        prop_assert_eq!(p.call_count(), 2);
    }

    #[test]
    fn debate_schedule_is_round_robin(rounds in 1u32..=3, mask in 1u8..8) {
        let roles: Vec<RoleId> = RoleId::DEBATERS.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, r)| *r).collect();
        let config = DebateConfig { rounds, ..DebateConfig::with_roles(&roles) };
        let provider = Numbered::default();
        let settings = ModelSettings::default();
        let triple = Triple::new(EntityRef::local("Joe Anderson"), RelationRef::passive("starred_actors"), EntityRef::local("High Life"));
        let mut seen: Vec<(RoleId, u32, String, String)> = Vec::new();
        let outcome = run_debate(
            "In what year was the movie [Joe Anderson] starring in released",
            &triple,
            &config,
            &RoleBook::default(),
            &PromptForge::default(),
            LlmClient::new(&provider, &settings),
            &mut |turn, exchange| seen.push((turn.role, turn.round, turn.content.clone(), exchange.prompt.clone())),
        ).unwrap();
        prop_assert_eq!(seen.len(), rounds as usize * roles.len());
        prop_assert_eq!(outcome.transcript.len(), seen.len());
        for (i, (role, round, _, prompt)) in seen.iter().enumerate() {
            prop_assert_eq!(*role, roles[i % roles.len()]);
            prop_assert_eq!(*round as usize, i / roles.len() + 1);
            for (_, _, earlier, _) in &seen[..i] {
                prop_assert!(prompt.contains(earlier.as_str()));
            }
        }
    }

    #[test]
    fn oracle_traces_are_complete(seed in 0u64..1000, k in 1usize..=3, rounds in 1u32..=3, mask in 1u8..8, path in any::<bool>()) {
        let fixture = generate(&SynthConfig { chains: 4, seed, ..SynthConfig::default() });
        let oracle = OracleProvider::new(&fixture.kg);
        let roles: Vec<RoleId> = RoleId::DEBATERS.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, r)| *r).collect();
        let config = if path {
            ReasonerConfig::path_collect()
        } else {
            ReasonerConfig { debate: DebateConfig { rounds, ..DebateConfig::with_roles(&roles) }, ..ReasonerConfig::default() }
        };
        let reasoner = Reasoner::new(&fixture.kg, &oracle, config.clone()).unwrap();
        for q in fixture.questions(k) {
            let topic = fixture.kg.resolve(q.topic.as_deref().unwrap()).unwrap();
            let a = reasoner.answer_question(&q.question, Some(&topic), q.hops).unwrap();
            prop_assert!(exact_match(&a.text, &q.gold));
            prop_assert_eq!(a.steps, k);
            if config.mode == Mode::Stepwise {
                prop_assert_eq!(a.trace.count("answer_try"), a.steps);
                prop_assert_eq!(a.trace.count("debate_turn"), (a.steps - 1) * rounds as usize * roles.len());
            } else {
                prop_assert_eq!(a.trace.count("answer_try"), 0);
                prop_assert_eq!(a.trace.count("debate_turn"), 0);
            }
            for e in a.trace.events() {
                if let EventKind::Simplified { from, to } = &e.kind {
                    prop_assert_ne!(normalize(from), normalize(to));
                }
            }
            if a.source == AnswerSource::Triple {
                prop_assert!(a.triples.iter().any(|t| t.tail.friendly_name == a.text));
            }
        }
    }

    #[test]
    fn exact_match_is_symmetric(a in "[A-Za-z .,'-]{0,20}", b in "[A-Za-z .,'-]{0,20}") {
        prop_assert_eq!(exact_match(&a, std::slice::from_ref(&b)), exact_match(&b, std::slice::from_ref(&a)));
    }

    #[test]
    fn sampling_is_distinct_and_seeded(n in 1usize..200, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let data: Vec<QAInstance> = (0..n).map(|i| QAInstance {
            id: format!("q{i}"), question: String::new(), topic: None, gold: vec!["x".into()], hops: None,
        }).collect();
        let m = ((n as f64) * frac) as usize;
        let a = sample_uniform(&data, m, seed).unwrap();
        prop_assert_eq!(&a, &sample_uniform(&data, m, seed).unwrap());
        let ids: BTreeSet<&str> = a.iter().map(|q| q.id.as_str()).collect();
        prop_assert_eq!(ids.len(), m);
    }

    #[test]
    fn report_totals_are_consistent(seed in 0u64..500, budget in 1usize..=3) {
        let fixture = generate(&SynthConfig { chains: 12, seed, ..SynthConfig::default() });
        let oracle = OracleProvider::new(&fixture.kg);
        let ctx = EvalContext::new(&fixture.kg, &oracle);
        let config = ReasonerConfig { max_steps: Some(budget), ..ReasonerConfig::default() };
        let report = evaluate(&ctx, &fixture.questions(3), &config, &EvalOptions::default()).unwrap();
        let correct = report.records.iter().filter(|r| r.correct).count();
        prop_assert_eq!(report.hits_at_1, correct as f64 / report.n as f64);
        prop_assert_eq!(report.hits_at_1, hits_at_1(report.records.iter().map(|r| r.correct)));
        for r in &report.records {
            prop_assert_eq!(r.failure_tag.is_some(), !r.correct);
        }
        prop_assert_eq!(report.tag_counts.values().sum::<usize>(), report.n - correct);
    }
}

/// Answers every simplify turn with a numbered, distinct question.
#[derive(Default)]
struct Numbered(AtomicUsize);

impl ChatProvider for Numbered {
    fn complete(&self, _: &CompletionRequest) -> Result<String, LlmError> {
        let n = self.0.fetch_add(1, Ordering::SeqCst);
        Ok(format!(
            "Draft {n} looks fine.\nSimplified_question: When did [High Life {n}] release?"
        ))
    }
}
