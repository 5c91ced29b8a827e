//! Datasets, Hits@1 scoring, failure tagging, and the ablation and sweep drivers.
//!
//! Instances run concurrently but records keep dataset order and carry no
//! timing, so two runs with the same inputs produce identical reports.

mod dataset;
mod metric;
mod tagging;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::debate::{DebateConfig, RoleId};
use crate::kg::KgBackend;
use crate::llm::ChatProvider;
use crate::prompts::{ExemplarTask, PromptForge};
use crate::reasoner::{AnswerSource, FailureTag, ReasonError, Reasoner, ReasonerConfig, RunFailure, TraceDocument};

pub use dataset::{bracketed_topic, load_metaqa_qa, load_tabular, sample_uniform, DatasetError, QAInstance};
pub use metric::{exact_match, hits_at_1, near_miss, overlap_coefficient, NEAR_MISS_OVERLAP};
pub use tagging::tag_failure;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Config(#[from] ReasonError),
    #[error("writing {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// What every evaluation run shares: the graph, the model and the prompts.
#[derive(Clone)]
pub struct EvalContext<'a> {
    pub kg: &'a dyn KgBackend,
    pub provider: &'a dyn ChatProvider,
    pub forge: PromptForge,
}

impl<'a> EvalContext<'a> {
    pub fn new(kg: &'a dyn KgBackend, provider: &'a dyn ChatProvider) -> Self {
        Self {
            kg,
            provider,
            forge: PromptForge::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub label: String,
    pub parallel: usize,
    /// Per-question trace files go to `<dir>/<id>.json`.
    pub trace_dir: Option<PathBuf>,
    /// Recorded in the report; the sample itself is drawn by the caller.
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            label: "eval".into(),
            parallel: 4,
            trace_dir: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub question: String,
    pub gold: Vec<String>,
    pub prediction: Option<String>,
    pub source: Option<AnswerSource>,
    pub correct: bool,
    pub steps: usize,
    pub failure_tag: Option<FailureTag>,
    pub error: Option<String>,
    pub trace: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub config: ReasonerConfig,
    pub seed: u64,
    pub n: usize,
    pub hits_at_1: f64,
    /// How failure tags were assigned.
    pub tagging: String,
    pub tag_counts: BTreeMap<FailureTag, usize>,
    pub records: Vec<EvalRecord>,
    #[serde(skip)]
    pub traces: Vec<TraceDocument>,
}

impl EvalReport {
    pub fn write_json(&self, path: &Path) -> Result<(), EvalError> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        write_file(path, &text)
    }

    /// `hits@1=0.600 n=5`
    pub fn summary(&self) -> String {
        format!("hits@1={:.3} n={}", self.hits_at_1, self.n)
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), EvalError> {
    let wrap = |source| EvalError::Write {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(wrap)?;
    }
    fs::write(path, text).map_err(wrap)
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn run_instance(reasoner: &Reasoner<'_>, kg: &dyn KgBackend, inst: &QAInstance) -> TraceDocument {
    let config = reasoner.config();
    let fail = |tag, message: String| TraceDocument {
        id: inst.id.clone(),
        question: inst.question.clone(),
        config: config.clone(),
        events: Vec::new(),
        answer: None,
        failure: Some(RunFailure { tag, message }),
        steps: 0,
        wall_time_ms: 0,
    };
    let topic = match &inst.topic {
        Some(key) => match kg.resolve(key) {
            Ok(t) => Some(t),
            Err(e) => return fail(FailureTag::Other, format!("topic {key:?}: {e}")),
        },
        None => None,
    };
    let run = catch_unwind(AssertUnwindSafe(|| {
        reasoner.answer_question(&inst.question, topic.as_ref(), inst.hops)
    }));
    match run {
        Ok(run) => TraceDocument::from_run(inst.id.clone(), inst.question.clone(), config, &run),
        Err(panic) => {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            fail(FailureTag::Other, format!("crashed: {message}"))
        }
    }
}

fn record_for(inst: &QAInstance, doc: &TraceDocument, trace: Option<String>) -> EvalRecord {
    let prediction = doc.answer.as_ref().map(|a| a.text.clone());
    let correct = prediction.as_deref().is_some_and(|p| exact_match(p, &inst.gold));
    EvalRecord {
        id: inst.id.clone(),
        question: inst.question.clone(),
        gold: inst.gold.clone(),
        source: doc.answer.as_ref().map(|a| a.source),
        correct,
        steps: doc.steps,
        failure_tag: (!correct).then(|| tag_failure(doc, &inst.gold, inst.hops)),
        error: doc.failure.as_ref().map(|f| f.message.clone()),
        prediction,
        trace,
    }
}

/// Runs every instance; per-instance errors become tagged failures.
pub fn evaluate(
    ctx: &EvalContext<'_>,
    dataset: &[QAInstance],
    config: &ReasonerConfig,
    options: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let kg = ctx.kg;
    let reasoner = Reasoner::new(kg, ctx.provider, config.clone())?.with_forge(ctx.forge.clone());
    let slots: Mutex<Vec<Option<(EvalRecord, TraceDocument)>>> = Mutex::new(vec![None; dataset.len()]);
    let next = AtomicUsize::new(0);
    let write_error: Mutex<Option<EvalError>> = Mutex::new(None);
    let workers = options.parallel.max(1).min(dataset.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(inst) = dataset.get(i) else { break };
                let doc = run_instance(&reasoner, kg, inst);
                let mut trace_ref = None;
                if let Some(dir) = &options.trace_dir {
                    let path = dir.join(format!("{}.json", file_stem(&inst.id)));
                    let text = serde_json::to_string_pretty(&doc).expect("trace serializes");
                    match write_file(&path, &text) {
                        Ok(()) => trace_ref = Some(path.display().to_string()),
                        Err(e) => {
                            write_error.lock().unwrap().get_or_insert(e);
                        }
                    }
                }
                let record = record_for(inst, &doc, trace_ref);
                slots.lock().unwrap()[i] = Some((record, doc));
            });
        }
    });
    if let Some(e) = write_error.into_inner().unwrap() {
        return Err(e);
    }
    let (records, traces): (Vec<_>, Vec<_>) = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every instance ran"))
        .unzip();
    let mut tag_counts = BTreeMap::new();
    for tag in records.iter().filter_map(|r| r.failure_tag) {
        *tag_counts.entry(tag).or_insert(0) += 1;
    }
    Ok(EvalReport {
        label: options.label.clone(),
        config: config.clone(),
        seed: options.seed,
        n: records.len(),
        hits_at_1: hits_at_1(records.iter().map(|r| r.correct)),
        tagging: "heuristic".into(),
        tag_counts,
        records,
        traces,
    })
}

/// The five ablation configurations, built on `base`.
pub fn ablation_rows(base: &ReasonerConfig) -> Vec<(String, ReasonerConfig)> {
    let stepwise = |debate: DebateConfig| ReasonerConfig {
        mode: crate::reasoner::Mode::Stepwise,
        debate: DebateConfig {
            rounds: base.debate.rounds,
            early_exit: base.debate.early_exit,
            exemplars: base.debate.exemplars,
            ..debate
        },
        ..base.clone()
    };
    vec![
        (
            "w/o SF and QS".to_string(),
            ReasonerConfig {
                mode: crate::reasoner::Mode::PathCollect,
                answer_mode: crate::reasoner::AnswerMode::LlmGenerate,
                ..base.clone()
            },
        ),
        (
            "w/ SF and R1".to_string(),
            stepwise(DebateConfig::with_roles(&[RoleId::Simplifier])),
        ),
        (
            "w/ SF, R1 and R2".to_string(),
            stepwise(DebateConfig::with_roles(&[RoleId::Simplifier, RoleId::Critic])),
        ),
        (
            "w/ SF, R1, R2 and R3".to_string(),
            stepwise(DebateConfig::with_roles(&RoleId::DEBATERS)),
        ),
        ("w/ SF and QS'".to_string(), stepwise(DebateConfig::merged())),
    ]
}

fn sub_options(options: &EvalOptions, label: &str, dir: &str) -> EvalOptions {
    EvalOptions {
        label: label.to_string(),
        trace_dir: options.trace_dir.as_ref().map(|d| d.join(dir)),
        ..options.clone()
    }
}

pub fn run_ablation(
    ctx: &EvalContext<'_>,
    dataset: &[QAInstance],
    base: &ReasonerConfig,
    options: &EvalOptions,
) -> Result<Vec<EvalReport>, EvalError> {
    ablation_rows(base)
        .into_iter()
        .enumerate()
        .map(|(i, (label, config))| {
            let opts = sub_options(options, &label, &format!("row{}", i + 1));
            evaluate(ctx, dataset, &config, &opts)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    DebateRounds,
    Exemplars(ExemplarTask),
}

impl SweepAxis {
    pub fn default_values(self) -> Vec<usize> {
        match self {
            SweepAxis::DebateRounds => vec![1, 2, 3],
            SweepAxis::Exemplars(_) => vec![0, 1, 5, 10],
        }
    }

    pub fn apply(self, base: &ReasonerConfig, value: usize) -> ReasonerConfig {
        let mut c = base.clone();
        match self {
            SweepAxis::DebateRounds => c.debate.rounds = value as u32,
            SweepAxis::Exemplars(ExemplarTask::RelationFiltering) => c.exemplars.relation_filtering = value,
            SweepAxis::Exemplars(ExemplarTask::AnswerTrying) => c.exemplars.answer_trying = value,
            SweepAxis::Exemplars(ExemplarTask::Simplify) => {
                c.exemplars.simplify = value;
                c.debate.exemplars = value;
            }
        }
        c
    }

    pub fn label(self, value: usize) -> String {
        match self {
            SweepAxis::DebateRounds => format!("rounds={value}"),
            SweepAxis::Exemplars(task) => format!("exemplars.{}={value}", task.file_name().trim_end_matches(".txt")),
        }
    }
}

pub fn run_sweep(
    ctx: &EvalContext<'_>,
    dataset: &[QAInstance],
    base: &ReasonerConfig,
    axis: SweepAxis,
    values: &[usize],
    options: &EvalOptions,
) -> Result<Vec<EvalReport>, EvalError> {
    values
        .iter()
        .map(|&v| {
            let label = axis.label(v);
            let opts = sub_options(options, &label, &file_stem(&label));
            evaluate(ctx, dataset, &axis.apply(base, v), &opts)
        })
        .collect()
}

/// Aligned plain-text comparison; deltas are percentage points against the first row.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.label.len())
        .max()
        .unwrap_or(0)
        .max("configuration".len());
    let mut out = format!(
        "{:<4} {:<width$}  {:>7}  {:>6}  {:>5}\n",
        "row", "configuration", "hits@1", "delta", "n"
    );
    let baseline = reports.first().map(|r| r.hits_at_1 * 100.0);
    for (i, r) in reports.iter().enumerate() {
        let pct = r.hits_at_1 * 100.0;
        let delta = match (i, baseline) {
            (0, _) | (_, None) => "-".to_string(),
            (_, Some(b)) => format!("{:+.1}", pct - b),
        };
        out.push_str(&format!(
            "{:<4} {:<width$}  {:>7.1}  {:>6}  {:>5}\n",
            i + 1,
            r.label,
            pct,
            delta,
            r.n
        ));
    }
    out
}

/// Failure-tag histogram, one line per tag.
pub fn tag_table(report: &EvalReport) -> String {
    let failures: usize = report.tag_counts.values().sum();
    let mut out = format!("failures={failures} (tags are heuristic)\n");
    for tag in FailureTag::ALL {
        let n = report.tag_counts.get(&tag).copied().unwrap_or(0);
        out.push_str(&format!("{:<22} {n}\n", tag.as_str()));
    }
    out
}
