//! The `dog` command line: ask, eval, ablate, sweep and trace.
//!
//! Every shared flag can also come from a config file of `key = <json>`
//! lines, keys spelled like the long flags. Flags win over the file.
//! Exit codes: 0 on success, 2 for usage and configuration errors, 1 for
//! runtime and I/O failures. Wrong answers are not failures.

use std::fmt;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::debate::{DebateConfig, RoleId};
use crate::eval::{
    bracketed_topic, comparison_table, evaluate, load_metaqa_qa, load_tabular, run_ablation, run_sweep, sample_uniform,
    tag_table, EvalContext, EvalOptions, EvalReport, QAInstance, SweepAxis,
};
use crate::kg::{KgBackend, KnowledgeGraph, SparqlConfig, SparqlKg};
use crate::llm::{CachedProvider, ChatProvider, ConcurrencyLimit, HttpChatProvider, ScriptedProvider};
use crate::oracle::OracleProvider;
use crate::prompts::{ExemplarLibrary, ExemplarTask, PromptForge};
use crate::reasoner::{AnswerMode, Mode, Reasoner, ReasonerConfig, TraceDocument};

/// Marks errors the user can fix by changing flags or config.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "dog", about = "Multi-hop question answering over a knowledge graph", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one question.
    Ask {
        question: String,
        /// Topic entity id or name; defaults to the `[bracketed]` entity.
        #[arg(long)]
        topic: Option<String>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Score a dataset and write a report plus per-question traces.
    Eval {
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Run the five ablation rows on one dataset.
    Ablate {
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Vary debate rounds or an exemplar count.
    Sweep {
        /// rounds, exemplars-rf, exemplars-at or exemplars-qs
        #[arg(long, default_value = "rounds")]
        axis: String,
        /// Comma-separated values; each axis has defaults.
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Render a trace file, a report, or a directory of traces.
    Trace {
        path: PathBuf,
        /// Only runs that ended with a failure tag.
        #[arg(long)]
        failures_only: bool,
    },
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SharedArgs {
    /// Config file of `key = <json>` lines.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Graph file with `head|relation|tail` lines.
    #[arg(long)]
    pub kg: Option<PathBuf>,
    #[arg(long)]
    pub sparql_endpoint: Option<String>,
    /// Property holding friendly names at the SPARQL endpoint.
    #[arg(long)]
    pub name_property: Option<String>,
    /// scripted, http or oracle
    #[arg(long)]
    pub provider: Option<String>,
    /// Rules file for the scripted provider.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Chat endpoint for the http provider; defaults to DOG_LLM_ENDPOINT.
    #[arg(long)]
    pub llm_endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Append-only response cache file.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Directory of exemplar files overriding the built-in pools.
    #[arg(long)]
    pub exemplar_dir: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// metaqa or tabular
    #[arg(long)]
    pub dataset_format: Option<String>,
    #[arg(long)]
    pub hops: Option<usize>,
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Comma-separated debate roles (simplifier, critic, linguist) or `merged`.
    #[arg(long)]
    pub roles: Option<String>,
    #[arg(long)]
    pub exemplars_rf: Option<usize>,
    #[arg(long)]
    pub exemplars_at: Option<usize>,
    #[arg(long)]
    pub exemplars_qs: Option<usize>,
    /// stepwise or path-collect
    #[arg(long)]
    pub mode: Option<String>,
    /// last-triple or llm-generate
    #[arg(long)]
    pub answer_mode: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub parallel: Option<usize>,
}

macro_rules! overlay {
    ($flags:expr, $file:expr, $($field:ident),+) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field.take(); } )+
    };
}

/// Parses `key = <json>` lines; `#` starts a comment line.
pub fn parse_config_text(text: &str) -> Result<SharedArgs> {
    let mut map = serde_json::Map::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", i + 1)))?;
        let value: serde_json::Value =
            serde_json::from_str(value.trim()).map_err(|e| usage(format!("config line {}: {e}", i + 1)))?;
        map.insert(key.trim().to_string(), value);
    }
    serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| usage(format!("config: {e}")))
}

impl SharedArgs {
    /// Fills unset flags from the config file, if one was given.
    pub fn resolved(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let mut file = parse_config_text(&text)?;
        overlay!(
            self,
            file,
            kg,
            sparql_endpoint,
            name_property,
            provider,
            rules,
            llm_endpoint,
            model,
            cache,
            exemplar_dir,
            dataset,
            dataset_format,
            hops,
            sample,
            seed,
            max_steps,
            rounds,
            roles,
            exemplars_rf,
            exemplars_at,
            exemplars_qs,
            mode,
            answer_mode,
            out,
            parallel
        );
        Ok(self)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("dog-out"))
    }

    fn parallel(&self) -> usize {
        self.parallel.unwrap_or(4).max(1)
    }

    pub fn reasoner_config(&self) -> Result<ReasonerConfig> {
        let mut c = match self.mode.as_deref() {
            None | Some("stepwise") => ReasonerConfig::default(),
            Some("path-collect" | "path_collect") => ReasonerConfig::path_collect(),
            Some(other) => return Err(usage(format!("unknown mode {other:?}"))),
        };
        match self.answer_mode.as_deref() {
            None => {}
            Some("last-triple" | "last_triple") => c.answer_mode = AnswerMode::LastTriple,
            Some("llm-generate" | "llm_generate") => c.answer_mode = AnswerMode::LlmGenerate,
            Some(other) => return Err(usage(format!("unknown answer mode {other:?}"))),
        }
        c.max_steps = self.max_steps.or(c.max_steps);
        if let Some(roles) = &self.roles {
            let rounds = c.debate.rounds;
            c.debate = parse_roles(roles)?;
            c.debate.rounds = rounds;
        }
        if let Some(r) = self.rounds {
            c.debate.rounds = r;
        }
        if let Some(k) = self.exemplars_rf {
            c.exemplars.relation_filtering = k;
        }
        if let Some(k) = self.exemplars_at {
            c.exemplars.answer_trying = k;
        }
        if let Some(k) = self.exemplars_qs {
            c.exemplars.simplify = k;
            c.debate.exemplars = k;
        }
        if let Some(m) = &self.model {
            c.model.model = m.clone();
        }
        c.validate().map_err(|e| usage(e.to_string()))?;
        if c.mode == Mode::Stepwise {
            c.debate.validate().map_err(|e| usage(e.to_string()))?;
        }
        Ok(c)
    }

    fn forge(&self) -> Result<PromptForge> {
        let library = match &self.exemplar_dir {
            Some(dir) => ExemplarLibrary::with_overrides(dir).map_err(|e| usage(e.to_string()))?,
            None => ExemplarLibrary::builtin(),
        };
        Ok(PromptForge::new(library))
    }

    pub fn open_kg(&self) -> Result<Graph> {
        match (&self.kg, &self.sparql_endpoint) {
            (Some(path), None) => {
                let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                let kg = KnowledgeGraph::load_metaqa(BufReader::new(file))
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?;
                Ok(Graph::Memory(kg))
            }
            (None, Some(endpoint)) => {
                let mut config = SparqlConfig::freebase(endpoint.clone());
                if let Some(p) = &self.name_property {
                    config.name_property = p.clone();
                }
                Ok(Graph::Sparql(SparqlKg::new(config).map_err(|e| usage(e.to_string()))?))
            }
            (Some(_), Some(_)) => Err(usage("give either --kg or --sparql-endpoint, not both")),
            (None, None) => Err(usage("a graph is required: --kg or --sparql-endpoint")),
        }
    }

    pub fn open_provider(&self, graph: &Graph) -> Result<Box<dyn ChatProvider>> {
        let kind = self
            .provider
            .as_deref()
            .or(self.rules.as_ref().map(|_| "scripted"))
            .ok_or_else(|| usage("a provider is required: --provider scripted|http|oracle"))?;
        let base: Box<dyn ChatProvider> = match kind {
            "scripted" => {
                let path = self
                    .rules
                    .as_ref()
                    .ok_or_else(|| usage("the scripted provider needs --rules"))?;
                Box::new(ScriptedProvider::from_file(path).map_err(|e| usage(e.to_string()))?)
            }
            "http" => {
                let p = match &self.llm_endpoint {
                    Some(url) => HttpChatProvider::new(url.clone(), std::env::var("DOG_LLM_API_KEY").ok()),
                    None => HttpChatProvider::from_env(),
                };
                Box::new(p.map_err(|e| usage(e.to_string()))?)
            }
            "oracle" => match graph {
                Graph::Memory(kg) => Box::new(OracleProvider::new(kg)),
                Graph::Sparql(_) => return Err(usage("the oracle provider needs an in-memory graph (--kg)")),
            },
            other => return Err(usage(format!("unknown provider {other:?}"))),
        };
        let cached: Box<dyn ChatProvider> = match &self.cache {
            Some(path) => Box::new(CachedProvider::with_overflow_file(base, path).map_err(|e| usage(e.to_string()))?),
            None => base,
        };
        Ok(Box::new(ConcurrencyLimit::new(cached, self.parallel())))
    }

    pub fn load_dataset(&self) -> Result<Vec<QAInstance>> {
        let path = self.dataset.as_ref().ok_or_else(|| usage("--dataset is required"))?;
        let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let reader = BufReader::new(file);
        let data = match self.dataset_format.as_deref() {
            None | Some("metaqa") => load_metaqa_qa(reader, self.hops),
            Some("tabular") => load_tabular(reader).map(|mut d| {
                if let Some(h) = self.hops {
                    d.iter_mut().filter(|q| q.hops.is_none()).for_each(|q| q.hops = Some(h));
                }
                d
            }),
            Some(other) => return Err(usage(format!("unknown dataset format {other:?}"))),
        }
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        match self.sample {
            Some(0) => Err(usage("--sample must be at least 1")),
            Some(n) => sample_uniform(&data, n, self.seed.unwrap_or(0)).map_err(|e| usage(e.to_string())),
            None => Ok(data),
        }
    }

    fn eval_options(&self, label: &str) -> EvalOptions {
        EvalOptions {
            label: label.to_string(),
            parallel: self.parallel(),
            trace_dir: Some(self.out_dir().join("traces")),
            seed: self.seed.unwrap_or(0),
        }
    }
}

fn parse_roles(text: &str) -> Result<DebateConfig> {
    if text.trim() == "merged" {
        return Ok(DebateConfig::merged());
    }
    let roles = text
        .split(',')
        .map(|r| match r.trim() {
            "simplifier" | "r1" => Ok(RoleId::Simplifier),
            "critic" | "r2" => Ok(RoleId::Critic),
            "linguist" | "r3" => Ok(RoleId::Linguist),
            other => Err(usage(format!("unknown role {other:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DebateConfig::with_roles(&roles))
}

pub enum Graph {
    Memory(KnowledgeGraph),
    Sparql(SparqlKg),
}

impl Graph {
    pub fn backend(&self) -> &dyn KgBackend {
        match self {
            Graph::Memory(kg) => kg,
            Graph::Sparql(kg) => kg,
        }
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_ask(question: &str, topic: Option<String>, shared: SharedArgs) -> Result<()> {
    let config = shared.reasoner_config()?;
    let key = topic
        .or_else(|| bracketed_topic(question).map(String::from))
        .ok_or_else(|| usage("no topic: pass --topic or mark it in the question with [brackets]"))?;
    let graph = shared.open_kg()?;
    let provider = shared.open_provider(&graph)?;
    let kg = graph.backend();
    let entity = kg.resolve(&key).map_err(|e| usage(format!("topic {key:?}: {e}")))?;
    let reasoner = Reasoner::new(kg, provider.as_ref(), config.clone())
        .map_err(|e| usage(e.to_string()))?
        .with_forge(shared.forge()?);
    let run = reasoner.answer_question(question, Some(&entity), shared.hops);
    let doc = TraceDocument::from_run("ask", question, &config, &run);
    let path = shared.out_dir().join("traces").join("ask.json");
    write_json(&path, &doc)?;
    match &run {
        Ok(a) => {
            println!("answer: {}", a.text);
            println!("source: {}", a.source);
            println!("steps: {}", a.steps);
        }
        Err(f) => {
            println!("failure: {} ({})", f.error.failure_tag(), f.error);
            println!("steps: {}", f.steps);
        }
    }
    println!("trace: {}", path.display());
    Ok(())
}

struct Session {
    graph: Graph,
    provider: Box<dyn ChatProvider>,
    forge: PromptForge,
    dataset: Vec<QAInstance>,
    config: ReasonerConfig,
}

impl Session {
    fn open(shared: &SharedArgs) -> Result<Self> {
        let config = shared.reasoner_config()?;
        let forge = shared.forge()?;
        let dataset = shared.load_dataset()?;
        let graph = shared.open_kg()?;
        let provider = shared.open_provider(&graph)?;
        Ok(Self {
            graph,
            provider,
            forge,
            dataset,
            config,
        })
    }

    fn context(&self) -> EvalContext<'_> {
        EvalContext {
            kg: self.graph.backend(),
            provider: self.provider.as_ref(),
            forge: self.forge.clone(),
        }
    }
}

fn cmd_eval(shared: SharedArgs) -> Result<()> {
    let s = Session::open(&shared)?;
    let report = evaluate(&s.context(), &s.dataset, &s.config, &shared.eval_options("eval"))?;
    let path = shared.out_dir().join("report.json");
    report.write_json(&path)?;
    println!("{}", report.summary());
    print!("{}", tag_table(&report));
    println!("report: {}", path.display());
    Ok(())
}

fn print_reports(reports: &[EvalReport], path: &Path) -> Result<()> {
    write_json(path, &reports)?;
    print!("{}", comparison_table(reports));
    println!("report: {}", path.display());
    Ok(())
}

fn cmd_ablate(shared: SharedArgs) -> Result<()> {
    let s = Session::open(&shared)?;
    let reports = run_ablation(&s.context(), &s.dataset, &s.config, &shared.eval_options("ablate"))?;
    print_reports(&reports, &shared.out_dir().join("ablation.json"))
}

fn parse_axis(text: &str) -> Result<SweepAxis> {
    Ok(match text {
        "rounds" => SweepAxis::DebateRounds,
        "exemplars-rf" => SweepAxis::Exemplars(ExemplarTask::RelationFiltering),
        "exemplars-at" => SweepAxis::Exemplars(ExemplarTask::AnswerTrying),
        "exemplars-qs" => SweepAxis::Exemplars(ExemplarTask::Simplify),
        other => return Err(usage(format!("unknown sweep axis {other:?}"))),
    })
}

fn cmd_sweep(axis: &str, values: Vec<usize>, shared: SharedArgs) -> Result<()> {
    let axis = parse_axis(axis)?;
    let values = if values.is_empty() {
        axis.default_values()
    } else {
        values
    };
    let s = Session::open(&shared)?;
    for &v in &values {
        let c = axis.apply(&s.config, v);
        c.validate().map_err(|e| usage(format!("{}: {e}", axis.label(v))))?;
    }
    let reports = run_sweep(
        &s.context(),
        &s.dataset,
        &s.config,
        axis,
        &values,
        &shared.eval_options("sweep"),
    )?;
    print_reports(&reports, &shared.out_dir().join("sweep.json"))
}

/// Human-readable walk-through of one trace.
pub fn render_trace(doc: &TraceDocument) -> String {
    let mut out = format!("# {}  {}\n", doc.id, doc.question);
    if doc.events.is_empty() {
        out.push_str("no events\n");
    }
    for e in &doc.events {
        out.push_str(&format!(
            "[step {} +{}ms] {}: {}\n",
            e.step,
            e.elapsed_ms,
            e.kind.name(),
            e.kind.summary()
        ));
    }
    match (&doc.answer, &doc.failure) {
        (Some(a), _) => out.push_str(&format!(
            "answer: {} ({}) after {} steps\n",
            a.text, a.source, doc.steps
        )),
        (None, Some(f)) => out.push_str(&format!(
            "failure: {} ({}) after {} steps\n",
            f.tag, f.message, doc.steps
        )),
        (None, None) => out.push_str(&format!("no answer after {} steps\n", doc.steps)),
    }
    out
}

fn read_trace(path: &Path) -> Result<TraceDocument> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing trace {}", path.display()))
}

fn cmd_trace(path: &Path, failures_only: bool) -> Result<()> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("reading {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        for f in files {
            let doc = read_trace(&f)?;
            if !failures_only || doc.failure.is_some() {
                print!("{}", render_trace(&doc));
            }
        }
        return Ok(());
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("records").is_some() {
        let report: EvalReport =
            serde_json::from_value(value).with_context(|| format!("parsing report {}", path.display()))?;
        println!("{} {}", report.label, report.summary());
        for r in &report.records {
            if failures_only && r.failure_tag.is_none() {
                continue;
            }
            match &r.trace {
                Some(t) => print!("{}", render_trace(&read_trace(Path::new(t))?)),
                None => println!(
                    "# {}  {}\nprediction: {}\n",
                    r.id,
                    r.question,
                    r.prediction.as_deref().unwrap_or("-")
                ),
            }
            if let Some(tag) = r.failure_tag {
                println!("tag: {tag}");
            }
        }
        return Ok(());
    }
    let doc: TraceDocument =
        serde_json::from_value(value).with_context(|| format!("parsing trace {}", path.display()))?;
    if !failures_only || doc.failure.is_some() {
        print!("{}", render_trace(&doc));
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ask {
            question,
            topic,
            shared,
        } => cmd_ask(&question, topic, shared.resolved()?),
        Command::Eval { shared } => cmd_eval(shared.resolved()?),
        Command::Ablate { shared } => cmd_ablate(shared.resolved()?),
        Command::Sweep { axis, values, shared } => cmd_sweep(&axis, values, shared.resolved()?),
        Command::Trace { path, failures_only } => cmd_trace(&path, failures_only),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}
