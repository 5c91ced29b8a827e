//! Prompts for every model call, and parsers for their responses.
//!
//! Building is pure: the same inputs always give byte-identical messages.
//! Each builder returns `[system, user]`; the system message carries the task
//! instruction or the speaking role's description.

mod exemplars;
mod parse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::debate::{DebateTurn, Role, RoleId};
use crate::kg::{EntityRef, RelationRef, Triple};
use crate::llm::ChatMessage;

pub use exemplars::{parse_pool, Exemplar, ExemplarLibrary, ExemplarTask, MAX_EXEMPLARS};
pub use parse::{
    extract_answer, parse_answer_decision, parse_final_answer, parse_relation_choice, parse_relation_set,
    parse_simplified_question, parse_tail_choice, parse_topic, ParseError, RelationChoice, TriDecision,
};

pub const RELATION_FILTERING_INSTRUCTION: &str = "For a multi-hop problem, solving it requires addressing several sub-problems that are logically preceded by the problem. Given a multi-hop problem and several relations, choose which relation should be used to solve the first subproblem. Here are some examples from which you should learn how to make your choices. It is worth noting that the \"~\" before a relationship means that the relationship is a passive relationship.";

pub const ANSWER_TRYING_INSTRUCTION: &str = "Given a question and the associated retrieved knowledge graph triples (entity, relation, entity), you are asked to answer whether it's sufficient for you to answer the question with these triples and your knowledge (Yes or No).";

pub const SIMPLIFY_INSTRUCTION: &str = "Your team rewrites an N-hop question into an (N-1)-hop question. The knowledge triple answers the first-hop sub-question; replace that sub-question with its answer entity and keep everything else. Read the chat log, then contribute according to your role.";

pub const FALLBACK_INSTRUCTION: &str =
    "The knowledge graph did not provide enough information for this question. Answer it using your own knowledge.";

pub const FINAL_ANSWER_INSTRUCTION: &str = "Given a question and the associated retrieved knowledge graph triples (entity, relation, entity), answer the question based on these triples.";

pub const TAIL_SELECTION_INSTRUCTION: &str = "A knowledge graph relation leads to several entities. Choose the entity that is most useful for answering the question.";

pub const TOPIC_INSTRUCTION: &str =
    "Identify the topic entity of the question: the named entity from which answering the question has to start.";

const RELATION_FILTERING_FORMAT: &str = "First explain which sub-question has to be solved first, then finish with a line of the form \"Output: relation_i: name\".";

const ANSWER_TRYING_FORMAT: &str = "Start your reply with \"Answer: {Yes}\" or \"Answer: {No}\" followed by your reasoning. If the answer is {Yes}, put the answer entity in double quotes.";

const SIMPLIFY_FORMAT: &str = "End your reply with a single line of the form \"Simplified_question: <question>\".";

const SINGLE_LINE_FORMAT: &str = "Reply with the answer only, on a single line.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    RelationFiltering,
    AnswerTrying,
    SimplifyTurn,
    Fallback,
    FinalAnswer,
    TailSelection,
    TopicExtraction,
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("relation filtering needs at least one candidate relation")]
    EmptyCandidates,
    #[error("answer trying needs at least one triple")]
    NoTriples,
    #[error("tail selection needs at least two tails")]
    TooFewTails,
    #[error("{requested} {task:?} exemplars requested but only {available} available")]
    TooManyExemplars {
        task: ExemplarTask,
        requested: usize,
        available: usize,
    },
    #[error("{origin}: exemplar record {record}: {reason}")]
    Pool {
        origin: String,
        record: usize,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A task instruction, optional role description and exemplars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate<'a> {
    pub task: Task,
    pub instruction: &'a str,
    pub role_description: Option<&'a str>,
    pub exemplars: Vec<&'a Exemplar>,
}

impl PromptTemplate<'_> {
    /// System: the role description if any, else the instruction.
    /// User: the instruction when displaced, exemplars, query, format note.
    pub fn render(&self, query: &str, format: &str) -> Vec<ChatMessage> {
        let system = self.role_description.unwrap_or(self.instruction);
        let mut parts: Vec<String> = Vec::new();
        if self.role_description.is_some() {
            parts.push(self.instruction.to_string());
        }
        parts.extend(self.exemplars.iter().map(|e| e.render()));
        parts.push(query.to_string());
        if !format.is_empty() {
            parts.push(format.to_string());
        }
        vec![ChatMessage::system(system), ChatMessage::user(parts.join("\n\n"))]
    }
}

fn relation_set(candidates: &[RelationRef]) -> String {
    let listed: Vec<String> = candidates
        .iter()
        .enumerate()
        .map(|(i, r)| format!("relation_{}: {r}", i + 1))
        .collect();
    format!("Relation_set : {}", listed.join(", "))
}

fn knowledge_lines(triples: &[Triple]) -> String {
    triples.iter().map(|t| t.to_string()).collect::<Vec<_>>().join("\n")
}

fn chat_log(transcript: &[DebateTurn]) -> String {
    if transcript.is_empty() {
        return "Chat log: (empty)".to_string();
    }
    let turns: Vec<String> = transcript
        .iter()
        .map(|t| format!("[{} | round {}]: {}", t.role.label(), t.round, t.content.trim()))
        .collect();
    format!("Chat log:\n{}", turns.join("\n"))
}

/// Builds prompts over one exemplar library.
#[derive(Debug, Clone, Default)]
pub struct PromptForge {
    library: ExemplarLibrary,
}

impl PromptForge {
    pub fn new(library: ExemplarLibrary) -> Self {
        Self { library }
    }

    pub fn library(&self) -> &ExemplarLibrary {
        &self.library
    }

    pub fn relation_filtering(
        &self,
        question: &str,
        candidates: &[RelationRef],
        k: usize,
    ) -> Result<Vec<ChatMessage>, PromptError> {
        self.relation_filtering_on_path(question, &[], candidates, k)
    }

    /// Relation filtering that also lists the triples already retrieved, so
    /// the model can pick the next unsolved hop of the original question.
    pub fn relation_filtering_on_path(
        &self,
        question: &str,
        path: &[Triple],
        candidates: &[RelationRef],
        k: usize,
    ) -> Result<Vec<ChatMessage>, PromptError> {
        if candidates.is_empty() {
            return Err(PromptError::EmptyCandidates);
        }
        let template = PromptTemplate {
            task: Task::RelationFiltering,
            instruction: RELATION_FILTERING_INSTRUCTION,
            role_description: None,
            exemplars: self.library.take(ExemplarTask::RelationFiltering, k, 0)?,
        };
        let mut query = format!("Question: {question}\n");
        if !path.is_empty() {
            query.push_str(&format!(
                "Retrieved triples so far:\n{}\nChoose the relation for the first sub-problem these triples have not solved yet.\n",
                knowledge_lines(path)
            ));
        }
        query.push_str(&relation_set(candidates));
        Ok(template.render(&query, RELATION_FILTERING_FORMAT))
    }

    pub fn answer_trying(&self, question: &str, triples: &[Triple], k: usize) -> Result<Vec<ChatMessage>, PromptError> {
        if triples.is_empty() {
            return Err(PromptError::NoTriples);
        }
        let template = PromptTemplate {
            task: Task::AnswerTrying,
            instruction: ANSWER_TRYING_INSTRUCTION,
            role_description: None,
            exemplars: self.library.take(ExemplarTask::AnswerTrying, k, 0)?,
        };
        let query = format!("Question: {question}\nKnowledge Triples:\n{}", knowledge_lines(triples));
        Ok(template.render(&query, ANSWER_TRYING_FORMAT))
    }

    /// One debate turn. The fused single-agent role reads the pool from its
    /// second entry so that its one-shot prompt uses a different example.
    pub fn simplify_turn(
        &self,
        role: &Role,
        question: &str,
        triple: &Triple,
        transcript: &[DebateTurn],
        k: usize,
    ) -> Result<Vec<ChatMessage>, PromptError> {
        let offset = usize::from(role.id == RoleId::Merged);
        let template = PromptTemplate {
            task: Task::SimplifyTurn,
            instruction: SIMPLIFY_INSTRUCTION,
            role_description: Some(&role.description),
            exemplars: self.library.take(ExemplarTask::Simplify, k, offset)?,
        };
        let query = format!(
            "N-hop Question: {question}\nKnowledge triple: {triple}\n{}",
            chat_log(transcript)
        );
        Ok(template.render(&query, SIMPLIFY_FORMAT))
    }

    pub fn fallback(&self, question: &str) -> Vec<ChatMessage> {
        let template = PromptTemplate {
            task: Task::Fallback,
            instruction: FALLBACK_INSTRUCTION,
            role_description: None,
            exemplars: Vec::new(),
        };
        template.render(&format!("Question: {question}"), SINGLE_LINE_FORMAT)
    }

    pub fn final_answer(&self, question: &str, triples: &[Triple]) -> Vec<ChatMessage> {
        let template = PromptTemplate {
            task: Task::FinalAnswer,
            instruction: FINAL_ANSWER_INSTRUCTION,
            role_description: None,
            exemplars: Vec::new(),
        };
        let query = format!("Question: {question}\nKnowledge Triples:\n{}", knowledge_lines(triples));
        template.render(&query, SINGLE_LINE_FORMAT)
    }

    pub fn tail_selection(
        &self,
        question: &str,
        head: &EntityRef,
        relation: &RelationRef,
        tails: &[EntityRef],
    ) -> Result<Vec<ChatMessage>, PromptError> {
        if tails.len() < 2 {
            return Err(PromptError::TooFewTails);
        }
        let template = PromptTemplate {
            task: Task::TailSelection,
            instruction: TAIL_SELECTION_INSTRUCTION,
            role_description: None,
            exemplars: Vec::new(),
        };
        let listed: Vec<String> = tails
            .iter()
            .enumerate()
            .map(|(i, t)| format!("entity_{}: {t}", i + 1))
            .collect();
        let query = format!(
            "Question: {question}\nPartial triple: ( {head}, {relation}, ? )\nCandidates: {}",
            listed.join(", ")
        );
        Ok(template.render(&query, "Finish with a line of the form \"Output: entity_i: name\"."))
    }

    pub fn topic_extraction(&self, question: &str) -> Vec<ChatMessage> {
        let template = PromptTemplate {
            task: Task::TopicExtraction,
            instruction: TOPIC_INSTRUCTION,
            role_description: None,
            exemplars: Vec::new(),
        };
        template.render(
            &format!("Question: {question}"),
            "Reply with a single line of the form \"Topic: <entity name>\".",
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::debate::RoleBook;

    fn rels(names: &[&str]) -> Vec<RelationRef> {
        names.iter().map(|n| RelationRef::parse(n).unwrap()).collect()
    }

    fn triple(h: &str, r: &str, t: &str) -> Triple {
        Triple::new(EntityRef::local(h), RelationRef::parse(r).unwrap(), EntityRef::local(t))
    }

    #[test]
    fn relation_filtering_lists_candidates_in_order() {
        let f = PromptForge::default();
        let m = f
            .relation_filtering("Q?", &rels(&["~starred_actors", "written_by", "~directed_by"]), 1)
            .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].content, RELATION_FILTERING_INSTRUCTION);
        assert!(m[0].content.contains("passive relationship"));
        assert!(m[1]
            .content
            .contains("Relation_set : relation_1: ~starred_actors, relation_2: written_by, relation_3: ~directed_by"));
        assert!(m[1].content.contains("Output: relation_2: written_by"));
        let zero = f.relation_filtering("Q?", &rels(&["a"]), 0).unwrap();
        assert!(zero[1]
            .content
            .starts_with("Question: Q?\nRelation_set : relation_1: a"));
        assert!(matches!(
            f.relation_filtering("Q?", &[], 0),
            Err(PromptError::EmptyCandidates)
        ));
        assert!(f.relation_filtering("Q?", &rels(&["a"]), 11).is_err());
    }

    #[test]
    fn exemplar_count_matches_k() {
        let f = PromptForge::default();
        for k in 0..=MAX_EXEMPLARS {
            let m = f.relation_filtering("Q?", &rels(&["a"]), k).unwrap();
            assert_eq!(m[1].content.matches("Question:").count(), k + 1);
            let m = f.answer_trying("Q?", &[triple("a", "r", "b")], k).unwrap();
            assert_eq!(m[1].content.matches("Question:").count(), k + 1);
        }
    }

    #[test]
    fn answer_trying_renders_triples() {
        let f = PromptForge::default();
        let ts = [triple("a", "r", "b"), triple("b", "~s", "c"), triple("c", "t", "d")];
        let m = f.answer_trying("Q?", &ts, 0).unwrap();
        assert_eq!(m[1].content.lines().filter(|l| l.starts_with("( ")).count(), 3);
        assert!(m[1].content.contains("( b, ~s, c )"));
        assert!(m[1].content.contains("Answer: {Yes}"));
        assert!(f.answer_trying("Q?", &ts, 2).unwrap()[1]
            .content
            .contains("the species of qilin"));
        assert!(matches!(f.answer_trying("Q?", &[], 0), Err(PromptError::NoTriples)));
    }

    #[test]
    fn simplify_turn_carries_role_and_log() {
        let f = PromptForge::default();
        let book = RoleBook::default();
        let t = triple("Joe Anderson", "~starred_actors", "High Life");
        let m = f.simplify_turn(&book.role(RoleId::Critic), "Q?", &t, &[], 1).unwrap();
        assert!(m[0].content.starts_with("You are a serious critic"));
        assert!(m[1].content.contains("Chat log: (empty)"));
        assert!(m[1].content.contains("Last Passenger"));
        let log = vec![DebateTurn {
            role: RoleId::Simplifier,
            round: 1,
            content: "Simplified_question: x?".into(),
        }];
        let m = f
            .simplify_turn(&book.role(RoleId::Linguist), "Q?", &t, &log, 0)
            .unwrap();
        assert!(m[1]
            .content
            .contains("[Question Simplifying Expert | round 1]: Simplified_question: x?"));
        let merged = f.simplify_turn(&book.role(RoleId::Merged), "Q?", &t, &[], 1).unwrap();
        assert!(merged[1].content.contains("Vampires Suck"));
        assert!(!merged[1].content.contains("Last Passenger"));
    }

    #[test]
    fn fallback_and_final_answer_shapes() {
        let f = PromptForge::default();
        let q = "In what year was the movie Joe Anderson starring in released?";
        let m = f.fallback(q);
        assert_eq!(m.len(), 2);
        assert!(m[1].content.contains(q));
        assert!(!m[1].content.contains("( "));
        let m = f.final_answer(q, &[triple("High Life", "release_year", "2009")]);
        assert!(m[1].content.contains(q));
        assert_eq!(m[1].content.matches("( ").count(), 1);
        assert!(m[1].content.contains("single line"));
    }

    #[test]
    fn building_is_pure() {
        let f = PromptForge::default();
        let a = f.relation_filtering("Q?", &rels(&["a", "~b"]), 3).unwrap();
        let b = f.relation_filtering("Q?", &rels(&["a", "~b"]), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tail_selection_lists_entities() {
        let f = PromptForge::default();
        let tails = [EntityRef::local("A"), EntityRef::local("B")];
        let m = f
            .tail_selection("Q?", &EntityRef::local("h"), &RelationRef::forward("r"), &tails)
            .unwrap();
        assert!(m[1].content.contains("( h, r, ? )"));
        assert!(m[1].content.contains("entity_1: A, entity_2: B"));
        assert!(f
            .tail_selection("Q?", &tails[0], &RelationRef::forward("r"), &tails[..1])
            .is_err());
    }
}
