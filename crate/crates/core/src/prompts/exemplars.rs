//! Few-shot exemplar pools.
//!
//! A pool file is UTF-8 text with records separated by a line holding only
//! `---`. Inside a record the first blank line separates the input block from
//! the output block. Every output block is checked against the task's parser
//! at load time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse::{parse_answer_decision, parse_relation_choice, parse_relation_set, parse_simplified_question};
use super::PromptError;

pub const MAX_EXEMPLARS: usize = 10;

const RELATION_FILTERING: &str = include_str!("../../data/exemplars/relation_filtering.txt");
const ANSWER_TRYING: &str = include_str!("../../data/exemplars/answer_trying.txt");
const SIMPLIFY: &str = include_str!("../../data/exemplars/simplify.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub input: String,
    pub output: String,
}

impl Exemplar {
    pub fn render(&self) -> String {
        format!("{}\n{}", self.input, self.output)
    }
}

/// The three tasks that take exemplars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExemplarTask {
    RelationFiltering,
    AnswerTrying,
    Simplify,
}

impl ExemplarTask {
    pub const ALL: [ExemplarTask; 3] = [
        ExemplarTask::RelationFiltering,
        ExemplarTask::AnswerTrying,
        ExemplarTask::Simplify,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ExemplarTask::RelationFiltering => "relation_filtering.txt",
            ExemplarTask::AnswerTrying => "answer_trying.txt",
            ExemplarTask::Simplify => "simplify.txt",
        }
    }

    fn check(self, exemplar: &Exemplar) -> Result<(), String> {
        match self {
            ExemplarTask::RelationFiltering => {
                let candidates = parse_relation_set(&exemplar.input);
                if candidates.is_empty() {
                    return Err("input has no Relation_set line".into());
                }
                parse_relation_choice(&exemplar.output, &candidates)
                    .map(drop)
                    .map_err(|e| e.to_string())
            }
            ExemplarTask::AnswerTrying => parse_answer_decision(&exemplar.output)
                .map(drop)
                .map_err(|e| e.to_string()),
            ExemplarTask::Simplify => parse_simplified_question(&exemplar.output)
                .map(drop)
                .map_err(|e| e.to_string()),
        }
    }
}

/// Splits pool text into exemplars and validates each output block.
pub fn parse_pool(text: &str, task: ExemplarTask, source: &str) -> Result<Vec<Exemplar>, PromptError> {
    let mut records: Vec<Vec<&str>> = vec![Vec::new()];
    for line in text.lines() {
        if line.trim() == "---" {
            records.push(Vec::new());
        } else {
            records.last_mut().expect("non-empty").push(line);
        }
    }
    let mut pool = Vec::new();
    for (i, lines) in records.iter().enumerate() {
        let body = lines.join("\n");
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let bad = |reason: String| PromptError::Pool {
            origin: source.to_string(),
            record: i + 1,
            reason,
        };
        let split = lines
            .iter()
            .skip_while(|l| l.trim().is_empty())
            .position(|l| l.trim().is_empty())
            .ok_or_else(|| bad("no blank line between input and output".into()))?;
        let leading = lines.iter().take_while(|l| l.trim().is_empty()).count();
        let input = lines[leading..leading + split].join("\n").trim().to_string();
        let output = lines[leading + split..].join("\n").trim().to_string();
        if output.is_empty() {
            return Err(bad("empty output block".into()));
        }
        let exemplar = Exemplar { input, output };
        task.check(&exemplar).map_err(bad)?;
        pool.push(exemplar);
    }
    if pool.len() > MAX_EXEMPLARS {
        return Err(PromptError::Pool {
            origin: source.to_string(),
            record: pool.len(),
            reason: format!("more than {MAX_EXEMPLARS} exemplars"),
        });
    }
    Ok(pool)
}

/// Exemplar pools for the three few-shot tasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExemplarLibrary {
    relation_filtering: Vec<Exemplar>,
    answer_trying: Vec<Exemplar>,
    simplify: Vec<Exemplar>,
}

impl ExemplarLibrary {
    /// The shared pools compiled into the crate.
    pub fn builtin() -> Self {
        let load = |text, task| parse_pool(text, task, "builtin").expect("builtin exemplar pool is valid");
        Self {
            relation_filtering: load(RELATION_FILTERING, ExemplarTask::RelationFiltering),
            answer_trying: load(ANSWER_TRYING, ExemplarTask::AnswerTrying),
            simplify: load(SIMPLIFY, ExemplarTask::Simplify),
        }
    }

    /// Shared pools overridden by whichever pool files exist in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut lib = Self::builtin();
        for task in ExemplarTask::ALL {
            let path = dir.join(task.file_name());
            if path.exists() {
                let text = std::fs::read_to_string(&path)?;
                lib.set(task, parse_pool(&text, task, &path.display().to_string())?);
            }
        }
        Ok(lib)
    }

    pub fn pool(&self, task: ExemplarTask) -> &[Exemplar] {
        match task {
            ExemplarTask::RelationFiltering => &self.relation_filtering,
            ExemplarTask::AnswerTrying => &self.answer_trying,
            ExemplarTask::Simplify => &self.simplify,
        }
    }

    pub fn set(&mut self, task: ExemplarTask, pool: Vec<Exemplar>) {
        match task {
            ExemplarTask::RelationFiltering => self.relation_filtering = pool,
            ExemplarTask::AnswerTrying => self.answer_trying = pool,
            ExemplarTask::Simplify => self.simplify = pool,
        }
    }

    /// `k` exemplars starting at `offset`, wrapping around the pool.
    pub fn take(&self, task: ExemplarTask, k: usize, offset: usize) -> Result<Vec<&Exemplar>, PromptError> {
        let pool = self.pool(task);
        if k > pool.len() {
            return Err(PromptError::TooManyExemplars {
                task,
                requested: k,
                available: pool.len(),
            });
        }
        Ok((0..k).map(|i| &pool[(offset + i) % pool.len()]).collect())
    }
}

impl Default for ExemplarLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_pools_are_full() {
        let lib = ExemplarLibrary::builtin();
        for task in ExemplarTask::ALL {
            assert_eq!(lib.pool(task).len(), MAX_EXEMPLARS, "{task:?}");
        }
        assert!(lib.pool(ExemplarTask::RelationFiltering)[0]
            .input
            .contains("Bottle Rocket"));
        assert!(lib.pool(ExemplarTask::AnswerTrying)[1].input.contains("qilin"));
        assert!(lib.pool(ExemplarTask::Simplify)[1].input.contains("Vampires Suck"));
    }

    #[test]
    fn pool_record_errors_name_the_record() {
        let text = "Question: q?\n\nAnswer: {Yes}. ok\n---\nQuestion: r?\nAnswer: {No}\n";
        match parse_pool(text, ExemplarTask::AnswerTrying, "t.txt") {
            Err(PromptError::Pool { record, origin, .. }) => {
                assert_eq!(record, 2);
                assert_eq!(origin, "t.txt");
            }
            other => panic!("unexpected {other:?}"),
        }
        let unparseable = "Question: q?\n\nAnswer: maybe\n";
        assert!(parse_pool(unparseable, ExemplarTask::AnswerTrying, "t").is_err());
    }

    #[test]
    fn take_wraps_and_bounds() {
        let lib = ExemplarLibrary::builtin();
        let two = lib.take(ExemplarTask::Simplify, 2, 9).unwrap();
        assert!(two[1].input.contains("Last Passenger"));
        assert!(lib.take(ExemplarTask::Simplify, 11, 0).is_err());
    }

    #[test]
    fn overrides_replace_only_present_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("simplify.txt"),
            "N-hop Question: a b?\nKnowledge triple: (a, r, b)\n\nSimplified_question: b?\n",
        )
        .unwrap();
        let lib = ExemplarLibrary::with_overrides(dir.path()).unwrap();
        assert_eq!(lib.pool(ExemplarTask::Simplify).len(), 1);
        assert_eq!(lib.pool(ExemplarTask::AnswerTrying).len(), MAX_EXEMPLARS);
    }
}
