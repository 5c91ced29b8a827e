//! Deterministic provider driven by an ordered rule list.

use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::Deserialize;

use super::{ChatProvider, CompletionRequest, Exchange, LlmError};
use crate::text::preview;

type Hook = Arc<dyn Fn(&CompletionRequest) -> bool + Send + Sync>;

/// Predicate over the rendered request.
#[derive(Clone)]
pub enum Matcher {
    Contains(String),
    /// Every substring must be present.
    AllOf(Vec<String>),
    Hook(Hook),
}

impl Matcher {
    pub fn hook(f: impl Fn(&CompletionRequest) -> bool + Send + Sync + 'static) -> Self {
        Matcher::Hook(Arc::new(f))
    }

    fn matches(&self, request: &CompletionRequest, rendered: &str) -> bool {
        match self {
            Matcher::Contains(s) => rendered.contains(s.as_str()),
            Matcher::AllOf(all) => all.iter().all(|s| rendered.contains(s.as_str())),
            Matcher::Hook(f) => f(request),
        }
    }
}

impl fmt::Debug for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Matcher::Contains(s) => f.debug_tuple("Contains").field(s).finish(),
            Matcher::AllOf(v) => f.debug_tuple("AllOf").field(v).finish(),
            Matcher::Hook(_) => f.write_str("Hook(..)"),
        }
    }
}

#[derive(Debug)]
pub struct ScriptedRule {
    pub matcher: Matcher,
    pub response: String,
    pub consume_once: bool,
    fired: AtomicBool,
}

impl ScriptedRule {
    pub fn new(matcher: Matcher, response: impl Into<String>) -> Self {
        Self {
            matcher,
            response: response.into(),
            consume_once: false,
            fired: AtomicBool::new(false),
        }
    }

    pub fn once(mut self) -> Self {
        self.consume_once = true;
        self
    }

    /// Claims the rule; a `consume_once` rule can be claimed by exactly one request.
    fn claim(&self) -> bool {
        !self.consume_once
            || self
                .fired
                .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
                .is_ok()
    }
}

/// On-disk rule as found in a rules file.
///
/// ```json
/// [{"contains": ["choose which relation", "Bottle Rocket"], "response": "Output: relation_2: written_by"}]
/// ```
#[derive(Debug, Clone, Deserialize)]
pub struct RuleSpec {
    pub contains: Needles,
    pub response: String,
    #[serde(default)]
    pub consume_once: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Needles {
    One(String),
    Many(Vec<String>),
}

impl From<RuleSpec> for ScriptedRule {
    fn from(spec: RuleSpec) -> Self {
        let matcher = match spec.contains {
            Needles::One(s) => Matcher::Contains(s),
            Needles::Many(v) => Matcher::AllOf(v),
        };
        let rule = ScriptedRule::new(matcher, spec.response);
        if spec.consume_once {
            rule.once()
        } else {
            rule
        }
    }
}

/// First matching unconsumed rule wins; no match is an error.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    rules: Vec<ScriptedRule>,
    calls: AtomicUsize,
    history: Mutex<Vec<Exchange>>,
}

impl ScriptedProvider {
    pub fn new(rules: Vec<ScriptedRule>) -> Self {
        Self {
            rules,
            ..Self::default()
        }
    }

    pub fn rule(mut self, needle: &str, response: impl Into<String>) -> Self {
        self.rules
            .push(ScriptedRule::new(Matcher::Contains(needle.to_string()), response));
        self
    }

    pub fn rule_all(mut self, needles: &[&str], response: impl Into<String>) -> Self {
        let needles = needles.iter().map(|s| s.to_string()).collect();
        self.rules.push(ScriptedRule::new(Matcher::AllOf(needles), response));
        self
    }

    pub fn push(mut self, rule: ScriptedRule) -> Self {
        self.rules.push(rule);
        self
    }

    /// Parses a JSON array of [`RuleSpec`].
    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        let specs: Vec<RuleSpec> =
            serde_json::from_str(text).map_err(|e| LlmError::Config(format!("rules file: {e}")))?;
        Ok(Self::new(specs.into_iter().map(Into::into).collect()))
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Every exchange answered so far, in order.
    pub fn history(&self) -> Vec<Exchange> {
        self.history.lock().map(|h| h.clone()).unwrap_or_default()
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let rendered = request.render();
        let rule = self
            .rules
            .iter()
            .filter(|r| !(r.consume_once && r.fired.load(Ordering::Acquire)))
            .find(|r| r.matcher.matches(request, &rendered) && r.claim())
            .ok_or_else(|| LlmError::Unmatched {
                preview: preview(&rendered, 80),
            })?;
        if let Ok(mut h) = self.history.lock() {
            h.push(Exchange {
                prompt: rendered,
                response: rule.response.clone(),
            });
        }
        Ok(rule.response.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ChatMessage;

    fn req(text: &str) -> CompletionRequest {
        CompletionRequest::new("m", vec![ChatMessage::user(text)])
    }

    #[test]
    fn first_matching_rule_fires() {
        let p = ScriptedProvider::default()
            .rule("choose which relation", "Output: relation_2: written_by")
            .rule("choose", "never");
        assert_eq!(
            p.complete(&req("please choose which relation applies")).unwrap(),
            "Output: relation_2: written_by"
        );
    }

    #[test]
    fn unmatched_request_names_prompt_prefix() {
        let p = ScriptedProvider::default().rule("xyz", "r");
        let long = "a".repeat(200);
        match p.complete(&req(&long)) {
            Err(LlmError::Unmatched { preview }) => {
                assert_eq!(preview.chars().count(), 80);
                assert!(preview.starts_with("[user]\naaa"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn consume_once_falls_through_to_next_rule() {
        let p = ScriptedProvider::new(vec![
            ScriptedRule::new(Matcher::Contains("q".into()), "first").once(),
            ScriptedRule::new(Matcher::Contains("q".into()), "second"),
        ]);
        assert_eq!(p.complete(&req("q")).unwrap(), "first");
        assert_eq!(p.complete(&req("q")).unwrap(), "second");
        assert_eq!(p.complete(&req("q")).unwrap(), "second");
        assert_eq!(p.call_count(), 3);
        assert_eq!(p.history().len(), 3);
    }

    #[test]
    fn pure_without_consumption() {
        let p = ScriptedProvider::default().rule_all(&["a", "b"], "ab");
        for _ in 0..5 {
            assert_eq!(p.complete(&req("b then a")).unwrap(), "ab");
        }
        assert!(p.complete(&req("only a")).is_err());
    }

    #[test]
    fn hook_matcher_sees_request() {
        let p = ScriptedProvider::new(vec![ScriptedRule::new(
            Matcher::hook(|r| r.model == "special"),
            "hooked",
        )]);
        let mut r = req("x");
        assert!(p.complete(&r).is_err());
        r.model = "special".into();
        assert_eq!(p.complete(&r).unwrap(), "hooked");
    }

    #[test]
    fn consume_once_is_atomic_across_threads() {
        let p = ScriptedProvider::new(vec![
            ScriptedRule::new(Matcher::Contains("q".into()), "once").once(),
            ScriptedRule::new(Matcher::Contains("q".into()), "rest"),
        ]);
        let outs: Vec<String> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..16).map(|_| s.spawn(|| p.complete(&req("q")).unwrap())).collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert_eq!(outs.iter().filter(|o| *o == "once").count(), 1);
    }

    #[test]
    fn rules_file_accepts_string_or_list() {
        let json = r#"[
            {"contains": "alpha", "response": "A"},
            {"contains": ["beta", "gamma"], "response": "BG", "consume_once": true}
        ]"#;
        let p = ScriptedProvider::from_json(json).unwrap();
        assert_eq!(p.complete(&req("alpha")).unwrap(), "A");
        assert_eq!(p.complete(&req("gamma beta")).unwrap(), "BG");
        assert!(p.complete(&req("gamma beta")).is_err());
        assert!(ScriptedProvider::from_json("{").is_err());
    }
}
