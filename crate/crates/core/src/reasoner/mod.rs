//! The iterative reasoning loop.
//!
//! Each step looks at the relations around the current topic entity, lets the
//! model pick the one that solves the first hop, fills the triple, and asks
//! whether the question can now be answered. If not, the debate rewrites the
//! question one hop shorter and the triple's tail becomes the new topic.

mod trace;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::debate::{run_debate, DebateConfig, DebateError, RoleBook};
use crate::kg::{EntityRef, KgBackend, KgError, RelationRef, Triple};
use crate::llm::{ChatProvider, Exchange, LlmClient, LlmError, ModelSettings};
use crate::prompts::{
    parse_answer_decision, parse_final_answer, parse_relation_choice, parse_tail_choice, parse_topic, ParseError,
    PromptError, PromptForge,
};

pub use trace::{AnswerRecord, EventKind, FailureTag, RunFailure, Trace, TraceDocument, TraceEvent};

/// Step budget when neither the config nor the dataset gives one.
pub const DEFAULT_MAX_STEPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Retrieve, try to answer, simplify; one hop per step.
    Stepwise,
    /// Collect one triple per hop against the original question, then answer once.
    PathCollect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerMode {
    /// The answer is the tail of the last retrieved triple.
    LastTriple,
    /// The model states the answer.
    LlmGenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    Triple,
    Generated,
    Fallback,
}

impl fmt::Display for AnswerSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnswerSource::Triple => "triple",
            AnswerSource::Generated => "generated",
            AnswerSource::Fallback => "fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExemplarCounts {
    pub relation_filtering: usize,
    pub answer_trying: usize,
    pub simplify: usize,
}

impl Default for ExemplarCounts {
    fn default() -> Self {
        Self {
            relation_filtering: 10,
            answer_trying: 10,
            simplify: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReasonerConfig {
    pub mode: Mode,
    pub answer_mode: AnswerMode,
    /// Overrides the dataset's hop count when set.
    pub max_steps: Option<usize>,
    /// Number of filled triples shown to answer trying. The walk always
    /// continues from a single selected tail.
    pub branch_limit: usize,
    /// Ignored in path-collect mode.
    pub debate: DebateConfig,
    pub exemplars: ExemplarCounts,
    pub model: ModelSettings,
    /// Ask the model for the topic entity when none is given.
    pub extract_topic: bool,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Stepwise,
            answer_mode: AnswerMode::LastTriple,
            max_steps: None,
            branch_limit: 1,
            debate: DebateConfig::default(),
            exemplars: ExemplarCounts::default(),
            model: ModelSettings::default(),
            extract_topic: false,
        }
    }
}

impl ReasonerConfig {
    /// Path collection with a single generation over the path.
    pub fn path_collect() -> Self {
        Self {
            mode: Mode::PathCollect,
            answer_mode: AnswerMode::LlmGenerate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ReasonError> {
        if self.mode == Mode::PathCollect && self.answer_mode == AnswerMode::LastTriple {
            return Err(ReasonError::InvalidConfig(
                "last-triple answers need stepwise mode".into(),
            ));
        }
        if self.max_steps == Some(0) {
            return Err(ReasonError::InvalidConfig("max_steps must be at least 1".into()));
        }
        if self.branch_limit == 0 {
            return Err(ReasonError::InvalidConfig("branch_limit must be at least 1".into()));
        }
        if self.mode == Mode::Stepwise {
            self.debate
                .validate()
                .map_err(|e| ReasonError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    pub fn effective_max_steps(&self, hops: Option<usize>) -> usize {
        self.max_steps.or(hops).unwrap_or(DEFAULT_MAX_STEPS).max(1)
    }
}

#[derive(Debug, Error)]
pub enum ReasonError {
    #[error("invalid reasoner config: {0}")]
    InvalidConfig(String),
    #[error("no topic entity for the question")]
    NoTopic,
    #[error("dead end at step {step}: {entity} has no usable relations")]
    DeadEnd { entity: String, step: usize },
    #[error("relation filtering: {0}")]
    RelationParse(ParseError),
    #[error("answer trying: {0}")]
    AnswerParse(ParseError),
    #[error("answer generation: {0}")]
    FinalAnswerParse(ParseError),
    #[error("question simplifying: {0}")]
    Debate(#[from] DebateError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Kg(#[from] KgError),
}

impl ReasonError {
    pub fn failure_tag(&self) -> FailureTag {
        match self {
            ReasonError::DeadEnd { .. } | ReasonError::RelationParse(_) => FailureTag::RelationFiltering,
            ReasonError::AnswerParse(_) => FailureTag::IterationStopping,
            ReasonError::FinalAnswerParse(_) => FailureTag::AnswerGeneration,
            ReasonError::Debate(DebateError::Unparseable { .. } | DebateError::Unchanged { .. }) => {
                FailureTag::QuestionSimplifying
            }
            ReasonError::Debate(_)
            | ReasonError::InvalidConfig(_)
            | ReasonError::NoTopic
            | ReasonError::Prompt(_)
            | ReasonError::Llm(_)
            | ReasonError::Kg(_) => FailureTag::Other,
        }
    }
}

/// A failed run with everything recorded up to the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct ReasonFailure {
    pub error: ReasonError,
    pub steps: usize,
    pub triples: Vec<Triple>,
    pub trace: Trace,
}

#[derive(Debug, Clone)]
pub struct Answer {
    pub text: String,
    pub source: AnswerSource,
    pub steps: usize,
    pub triples: Vec<Triple>,
    pub trace: Trace,
}

#[derive(Debug, Clone)]
pub struct ReasoningState {
    pub original_question: String,
    pub current_question: String,
    pub topic: EntityRef,
    pub step: usize,
    pub max_steps: usize,
    pub triples: Vec<Triple>,
    pub trace: Trace,
}

impl ReasoningState {
    pub fn new(question: &str, topic: EntityRef, max_steps: usize) -> Self {
        Self {
            original_question: question.to_string(),
            current_question: question.to_string(),
            topic,
            step: 0,
            max_steps,
            triples: Vec::new(),
            trace: Trace::new(),
        }
    }

    fn answer(&mut self, text: String, source: AnswerSource) -> Answer {
        Answer {
            text,
            source,
            steps: self.step,
            triples: self.triples.clone(),
            trace: std::mem::take(&mut self.trace),
        }
    }

    fn fail(&mut self, error: ReasonError) -> ReasonFailure {
        ReasonFailure {
            error,
            steps: self.step,
            triples: self.triples.clone(),
            trace: std::mem::take(&mut self.trace),
        }
    }
}

#[derive(Debug)]
pub enum StepOutcome {
    Answered(Answer),
    /// The question was simplified and the topic advanced.
    Continue,
    /// Not answerable and the step budget is spent.
    Exhausted,
}

/// Runs questions against one graph and one provider. Shareable across threads.
pub struct Reasoner<'a> {
    kg: &'a dyn KgBackend,
    provider: &'a dyn ChatProvider,
    config: ReasonerConfig,
    forge: PromptForge,
    roles: RoleBook,
}

impl<'a> Reasoner<'a> {
    pub fn new(
        kg: &'a dyn KgBackend,
        provider: &'a dyn ChatProvider,
        config: ReasonerConfig,
    ) -> Result<Self, ReasonError> {
        config.validate()?;
        Ok(Self {
            kg,
            provider,
            config,
            forge: PromptForge::default(),
            roles: RoleBook::default(),
        })
    }

    pub fn with_forge(mut self, forge: PromptForge) -> Self {
        self.forge = forge;
        self
    }

    pub fn with_roles(mut self, roles: RoleBook) -> Self {
        self.roles = roles;
        self
    }

    pub fn config(&self) -> &ReasonerConfig {
        &self.config
    }

    fn llm(&self) -> LlmClient<'_> {
        LlmClient::new(self.provider, &self.config.model)
    }

    /// Answers `question` starting from `topic`, or from an extracted topic
    /// when `topic` is `None` and extraction is enabled.
    pub fn answer_question(
        &self,
        question: &str,
        topic: Option<&EntityRef>,
        hops: Option<usize>,
    ) -> Result<Answer, ReasonFailure> {
        let max_steps = self.config.effective_max_steps(hops);
        let mut trace = Trace::new();
        let topic = match topic {
            Some(t) => t.clone(),
            None => match self.extract_topic(question, &mut trace) {
                Ok(t) => t,
                Err(error) => {
                    return Err(ReasonFailure {
                        error,
                        steps: 0,
                        triples: Vec::new(),
                        trace,
                    })
                }
            },
        };
        let mut state = ReasoningState::new(question, topic, max_steps);
        state.trace = trace;
        match self.config.mode {
            Mode::Stepwise => self.run_stepwise(&mut state),
            Mode::PathCollect => self.run_path_collect(&mut state),
        }
    }

    fn extract_topic(&self, question: &str, trace: &mut Trace) -> Result<EntityRef, ReasonError> {
        if !self.config.extract_topic {
            return Err(ReasonError::NoTopic);
        }
        let exchange = self.llm().ask(self.forge.topic_extraction(question))?;
        let name = parse_topic(&exchange.response).ok_or(ReasonError::NoTopic)?;
        let entity = self.kg.resolve(&name)?;
        trace.push(
            0,
            EventKind::Topic {
                entity: entity.clone(),
                exchange,
            },
        );
        Ok(entity)
    }

    fn run_stepwise(&self, state: &mut ReasoningState) -> Result<Answer, ReasonFailure> {
        while state.step < state.max_steps {
            match self.step(state) {
                Ok(StepOutcome::Answered(answer)) => return Ok(answer),
                Ok(StepOutcome::Continue) => {}
                Ok(StepOutcome::Exhausted) => break,
                Err(ReasonError::DeadEnd { .. }) if state.step == 0 => {
                    return self.fallback_answer(state).map_err(|e| state.fail(e));
                }
                Err(e) => return Err(state.fail(e)),
            }
        }
        if self.config.answer_mode == AnswerMode::LastTriple {
            if let Some(last) = state.triples.last() {
                let text = last.tail.friendly_name.clone();
                state.trace.push(
                    state.step,
                    EventKind::FinalAnswer {
                        answer: text.clone(),
                        source: AnswerSource::Triple,
                        exchange: None,
                    },
                );
                return Ok(state.answer(text, AnswerSource::Triple));
            }
        }
        self.fallback_answer(state).map_err(|e| state.fail(e))
    }

    /// One retrieve, answer-try and (if needed) simplify cycle.
    pub fn step(&self, state: &mut ReasoningState) -> Result<StepOutcome, ReasonError> {
        let n = state.step + 1;
        let triple = self.retrieve(state, n, &state.current_question.clone(), false)?;
        let mut shown = vec![triple.clone()];
        if self.config.branch_limit > 1 {
            let others = self.kg.triple_filling(&triple.head, &triple.relation)?;
            shown.extend(
                others
                    .into_iter()
                    .filter(|t| t.tail != triple.tail)
                    .take(self.config.branch_limit - 1),
            );
        }
        state.triples.push(triple.clone());
        state.step = n;

        let messages =
            self.forge
                .answer_trying(&state.current_question, &shown, self.config.exemplars.answer_trying)?;
        let exchange = self.llm().ask(messages)?;
        let decision = parse_answer_decision(&exchange.response).map_err(ReasonError::AnswerParse)?;
        let answerable = decision.answerable;
        let extracted = decision.answer_text.clone();
        state.trace.push(n, EventKind::AnswerTry { decision, exchange });

        if answerable {
            let (text, source) = match self.config.answer_mode {
                AnswerMode::LastTriple => {
                    state.trace.push(
                        n,
                        EventKind::FinalAnswer {
                            answer: triple.tail.friendly_name.clone(),
                            source: AnswerSource::Triple,
                            exchange: None,
                        },
                    );
                    (triple.tail.friendly_name.clone(), AnswerSource::Triple)
                }
                AnswerMode::LlmGenerate => (self.generate(state, extracted)?, AnswerSource::Generated),
            };
            return Ok(StepOutcome::Answered(state.answer(text, source)));
        }
        if state.step >= state.max_steps {
            return Ok(StepOutcome::Exhausted);
        }

        let trace = &mut state.trace;
        let outcome = run_debate(
            &state.current_question,
            &triple,
            &self.config.debate,
            &self.roles,
            &self.forge,
            self.llm(),
            &mut |turn, exchange| {
                trace.push(
                    n,
                    EventKind::DebateTurn {
                        turn: turn.clone(),
                        exchange: exchange.clone(),
                    },
                )
            },
        )?;
        state.trace.push(
            n,
            EventKind::Simplified {
                from: state.current_question.clone(),
                to: outcome.simplified.clone(),
            },
        );
        state.current_question = outcome.simplified;
        state.topic = triple.tail;
        Ok(StepOutcome::Continue)
    }

    /// Relations, relation choice and triple filling from the current topic.
    fn retrieve(
        &self,
        state: &mut ReasoningState,
        n: usize,
        question: &str,
        on_path: bool,
    ) -> Result<Triple, ReasonError> {
        let topic = state.topic.clone();
        let relations = self.kg.get_relations(&topic)?;
        state.trace.push(
            n,
            EventKind::Relations {
                entity: topic.clone(),
                relations: relations.clone(),
            },
        );
        let dead_end = || ReasonError::DeadEnd {
            entity: topic.friendly_name.clone(),
            step: n,
        };
        if relations.is_empty() {
            return Err(dead_end());
        }
        let k = self.config.exemplars.relation_filtering;
        let messages = if on_path {
            self.forge
                .relation_filtering_on_path(question, &state.triples, &relations, k)?
        } else {
            self.forge.relation_filtering(question, &relations, k)?
        };
        let exchange = self.llm().ask(messages)?;
        let choice = parse_relation_choice(&exchange.response, &relations).map_err(ReasonError::RelationParse)?;
        state.trace.push(
            n,
            EventKind::RelationChoice {
                relation: choice.relation.clone(),
                fallback_used: choice.fallback_used,
                exchange,
            },
        );
        let filled = self.kg.triple_filling(&topic, &choice.relation)?;
        if filled.is_empty() {
            return Err(dead_end());
        }
        let tails: Vec<EntityRef> = filled.iter().map(|t| t.tail.clone()).collect();
        let (index, selection) = self.select_tail(question, &topic, &choice.relation, &tails)?;
        let triple = filled[index].clone();
        state.trace.push(
            n,
            EventKind::TripleFill {
                tails,
                triple: triple.clone(),
                selection,
            },
        );
        Ok(triple)
    }

    /// Picks the tail to continue from. A single tail is taken as is; several
    /// go to the model, with the lexicographically smallest as the fallback.
    pub fn select_tail(
        &self,
        question: &str,
        head: &EntityRef,
        relation: &RelationRef,
        tails: &[EntityRef],
    ) -> Result<(usize, Option<Exchange>), ReasonError> {
        assert!(!tails.is_empty(), "select_tail needs at least one tail");
        if tails.len() == 1 {
            return Ok((0, None));
        }
        let smallest = tails
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let exchange = self
            .llm()
            .ask(self.forge.tail_selection(question, head, relation, tails)?)?;
        let index = parse_tail_choice(&exchange.response, tails).unwrap_or(smallest);
        Ok((index, Some(exchange)))
    }

    fn generate(&self, state: &mut ReasoningState, extracted: Option<String>) -> Result<String, ReasonError> {
        let n = state.step;
        if let Some(text) = extracted {
            state.trace.push(
                n,
                EventKind::FinalAnswer {
                    answer: text.clone(),
                    source: AnswerSource::Generated,
                    exchange: None,
                },
            );
            return Ok(text);
        }
        let messages = self.forge.final_answer(&state.original_question, &state.triples);
        let exchange = self.llm().ask(messages)?;
        let text = parse_final_answer(&exchange.response).map_err(ReasonError::FinalAnswerParse)?;
        state.trace.push(
            n,
            EventKind::FinalAnswer {
                answer: text.clone(),
                source: AnswerSource::Generated,
                exchange: Some(exchange),
            },
        );
        Ok(text)
    }

    /// Answers from the model's own knowledge; no triples are shown.
    pub fn fallback_answer(&self, state: &mut ReasoningState) -> Result<Answer, ReasonError> {
        let exchange = self.llm().ask(self.forge.fallback(&state.original_question))?;
        let text = parse_final_answer(&exchange.response).map_err(ReasonError::FinalAnswerParse)?;
        state.trace.push(
            state.step,
            EventKind::Fallback {
                answer: text.clone(),
                exchange,
            },
        );
        Ok(state.answer(text, AnswerSource::Fallback))
    }

    fn run_path_collect(&self, state: &mut ReasoningState) -> Result<Answer, ReasonFailure> {
        let question = state.original_question.clone();
        while state.step < state.max_steps {
            let n = state.step + 1;
            match self.retrieve(state, n, &question, true) {
                Ok(triple) => {
                    state.topic = triple.tail.clone();
                    state.triples.push(triple);
                    state.step = n;
                }
                Err(ReasonError::DeadEnd { .. }) if !state.triples.is_empty() => break,
                Err(ReasonError::DeadEnd { .. }) => {
                    return self.fallback_answer(state).map_err(|e| state.fail(e));
                }
                Err(e) => return Err(state.fail(e)),
            }
        }
        match self.generate(state, None) {
            Ok(text) => Ok(state.answer(text, AnswerSource::Generated)),
            Err(e) => Err(state.fail(e)),
        }
    }
}
