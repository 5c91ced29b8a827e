//! Question simplification by a round-robin debate.
//!
//! Given an N-hop question and the triple that answers its first hop, the
//! enabled roles speak in order for a fixed number of rounds, each seeing the
//! whole chat log so far. The last turn's `Simplified_question:` is the result.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::Triple;
use crate::llm::{Exchange, LlmClient, LlmError};
use crate::prompts::{parse_simplified_question, ParseError, PromptError, PromptForge};
use crate::text::normalize_loose;

pub const MAX_ROUNDS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleId {
    Simplifier,
    Critic,
    Linguist,
    /// The three roles fused into one agent.
    Merged,
}

impl RoleId {
    pub const DEBATERS: [RoleId; 3] = [RoleId::Simplifier, RoleId::Critic, RoleId::Linguist];

    pub fn label(self) -> &'static str {
        match self {
            RoleId::Simplifier => "Question Simplifying Expert",
            RoleId::Critic => "Critic",
            RoleId::Linguist => "Linguist",
            RoleId::Merged => "Simplification Team",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            RoleId::Simplifier => "R1",
            RoleId::Critic => "R2",
            RoleId::Linguist => "R3",
            RoleId::Merged => "QS'",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Role {
    pub id: RoleId,
    pub description: String,
}

/// Role descriptions, kept as data so ablations need no special code paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleBook {
    pub simplifier: String,
    pub critic: String,
    pub linguist: String,
}

impl Default for RoleBook {
    fn default() -> Self {
        Self {
            simplifier: "You are an expert at problem simplification. What you are good at doing is answering the sub-problems of the original N-hop problem based on known information, so as to get new problems that need to be solved.".into(),
            critic: "You are a serious critic, please note: you need to compare [N-hop Question] and [Simplified_question] obtained from the discussion in the chat log to see if they are the same. If they are the same, it means that the previous expert problem simplification failed and the task was not completed. You need to point this error out.".into(),
            linguist: "You are a linguist who is particularly good at dealing with irrelevant information in simplified problems. Regarding the simplification of collaborators’ output in chat records, if the simplification is not thorough, please provide a reasonable simplification solution. Specifically, it is necessary to ensure that there are no irrelevant constraints in the simplified question that originate from the answer entities of sub-questions that have already been answered in the original question.".into(),
        }
    }
}

impl RoleBook {
    pub fn role(&self, id: RoleId) -> Role {
        let description = match id {
            RoleId::Simplifier => self.simplifier.clone(),
            RoleId::Critic => self.critic.clone(),
            RoleId::Linguist => self.linguist.clone(),
            RoleId::Merged => format!("{}\n{}\n{}", self.simplifier, self.critic, self.linguist),
        };
        Role { id, description }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateTurn {
    pub role: RoleId,
    pub round: u32,
    pub content: String,
}

pub type DebateTranscript = Vec<DebateTurn>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DebateConfig {
    pub rounds: u32,
    /// Speaking order within a round; ignored when `merged`.
    pub enabled_roles: Vec<RoleId>,
    pub merged: bool,
    /// Stop after a full round in which the critic raised no objection.
    pub early_exit: bool,
    pub exemplars: usize,
}

impl Default for DebateConfig {
    fn default() -> Self {
        Self {
            rounds: 1,
            enabled_roles: RoleId::DEBATERS.to_vec(),
            merged: false,
            early_exit: false,
            exemplars: 1,
        }
    }
}

impl DebateConfig {
    pub fn merged() -> Self {
        Self {
            merged: true,
            ..Self::default()
        }
    }

    pub fn with_roles(roles: &[RoleId]) -> Self {
        Self {
            enabled_roles: roles.to_vec(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DebateError> {
        if !(1..=MAX_ROUNDS).contains(&self.rounds) {
            return Err(DebateError::InvalidConfig(format!(
                "rounds must be in 1..={MAX_ROUNDS}, got {}",
                self.rounds
            )));
        }
        if self.merged {
            return Ok(());
        }
        if self.enabled_roles.is_empty() {
            return Err(DebateError::InvalidConfig("no roles enabled".into()));
        }
        if self.enabled_roles.contains(&RoleId::Merged) {
            return Err(DebateError::InvalidConfig(
                "the merged role is selected with `merged`, not listed".into(),
            ));
        }
        if !self.enabled_roles.windows(2).all(|w| w[0] < w[1]) {
            return Err(DebateError::InvalidConfig(
                "roles must be distinct and in R1, R2, R3 order".into(),
            ));
        }
        Ok(())
    }

    /// The speakers of one round.
    pub fn speakers(&self) -> Vec<RoleId> {
        if self.merged {
            vec![RoleId::Merged]
        } else {
            self.enabled_roles.clone()
        }
    }
}

#[derive(Debug, Error)]
pub enum DebateError {
    #[error("invalid debate config: {0}")]
    InvalidConfig(String),
    #[error("empty question")]
    EmptyQuestion,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("final {} turn has no usable question: {source}", role.short())]
    Unparseable { role: RoleId, source: ParseError },
    #[error("simplification failed: {simplified:?} is the original question")]
    Unchanged { simplified: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DebateOutcome {
    pub simplified: String,
    pub transcript: DebateTranscript,
}

const OBJECTION_MARKERS: [&str; 4] = ["fail", "not completed", "error", "not the same"];

/// A critic turn objects when it flags failure or leaves the question unchanged.
fn critic_objects(turn: &DebateTurn, question: &str) -> bool {
    let lower = turn.content.to_lowercase();
    if OBJECTION_MARKERS.iter().any(|m| lower.contains(m)) {
        return true;
    }
    match parse_simplified_question(&turn.content) {
        Ok(q) => normalize_loose(&q) == normalize_loose(question),
        Err(_) => false,
    }
}

/// Runs the debate. `observer` sees every turn together with its exchange.
pub fn run_debate(
    question: &str,
    triple: &Triple,
    config: &DebateConfig,
    roles: &RoleBook,
    forge: &PromptForge,
    llm: LlmClient<'_>,
    observer: &mut dyn FnMut(&DebateTurn, &Exchange),
) -> Result<DebateOutcome, DebateError> {
    config.validate()?;
    if question.trim().is_empty() {
        return Err(DebateError::EmptyQuestion);
    }
    let speakers: Vec<_> = config.speakers().into_iter().map(|id| roles.role(id)).collect();
    let mut transcript: DebateTranscript = Vec::new();
    for round in 1..=config.rounds {
        for role in &speakers {
            let messages = forge.simplify_turn(role, question, triple, &transcript, config.exemplars)?;
            let exchange = llm.ask(messages)?;
            let turn = DebateTurn {
                role: role.id,
                round,
                content: exchange.response.clone(),
            };
            observer(&turn, &exchange);
            transcript.push(turn);
        }
        let objected = transcript
            .iter()
            .filter(|t| t.round == round && t.role == RoleId::Critic)
            .any(|t| critic_objects(t, question));
        if config.early_exit && round < config.rounds && speakers.iter().any(|r| r.id == RoleId::Critic) && !objected {
            log::debug!("debate stopped after round {round}: no objection");
            break;
        }
    }
    let last = transcript.last().expect("at least one turn");
    let simplified = parse_simplified_question(&last.content).map_err(|source| DebateError::Unparseable {
        role: last.role,
        source,
    })?;
    if normalize_loose(&simplified) == normalize_loose(question) {
        return Err(DebateError::Unchanged { simplified });
    }
    Ok(DebateOutcome { simplified, transcript })
}

/// The fused single-agent variant: one turn per round with all three descriptions.
pub fn simplify_merged(
    question: &str,
    triple: &Triple,
    roles: &RoleBook,
    forge: &PromptForge,
    llm: LlmClient<'_>,
) -> Result<String, DebateError> {
    run_debate(
        question,
        triple,
        &DebateConfig::merged(),
        roles,
        forge,
        llm,
        &mut |_, _| {},
    )
    .map(|o| o.simplified)
}
