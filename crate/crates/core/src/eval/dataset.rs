use std::io::BufRead;
use std::sync::OnceLock;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cannot sample {requested} of {available} instances")]
    SampleTooLarge { requested: usize, available: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAInstance {
    pub id: String,
    /// As given; MetaQA marks the topic entity with `[brackets]`.
    pub question: String,
    /// Entity id or friendly name, resolved against the graph at run time.
    pub topic: Option<String>,
    /// Accepted answers, aliases included. Never empty.
    pub gold: Vec<String>,
    pub hops: Option<usize>,
}

/// The text inside the first `[...]` of a question.
pub fn bracketed_topic(question: &str) -> Option<&str> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\[([^\[\]]*)\]").unwrap());
    re.captures(question)
        .map(|c| c.get(1).map_or("", |m| m.as_str()).trim())
}

fn split_gold(field: &str) -> Vec<String> {
    let mut gold: Vec<String> = Vec::new();
    for a in field.split('|').map(str::trim).filter(|a| !a.is_empty()) {
        if !gold.iter().any(|g| g == a) {
            gold.push(a.to_string());
        }
    }
    gold
}

/// MetaQA QA lines: `question with [topic]<TAB>answer1|answer2`.
pub fn load_metaqa_qa(source: impl BufRead, hops: Option<usize>) -> Result<Vec<QAInstance>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| DatasetError::Malformed {
            line: n,
            reason: reason.to_string(),
        };
        let (question, answers) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
        let gold = split_gold(answers);
        if gold.is_empty() {
            return Err(bad("no answers"));
        }
        let topic = match bracketed_topic(question) {
            Some("") => return Err(bad("empty [] topic")),
            Some(t) => Some(t.to_string()),
            None => None,
        };
        out.push(QAInstance {
            id: format!("q{n:05}"),
            question: question.trim().to_string(),
            topic,
            gold,
            hops,
        });
    }
    Ok(out)
}

/// Generic lines: `id<TAB>question<TAB>topic<TAB>answer1|answer2[<TAB>hops]`.
/// Blank lines and lines starting with `#` are skipped.
pub fn load_tabular(source: impl BufRead) -> Result<Vec<QAInstance>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| DatasetError::Malformed { line: n, reason };
        let fields: Vec<&str> = line.split('\t').collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(bad(format!(
                "expected 4 or 5 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let gold = split_gold(fields[3]);
        if gold.is_empty() {
            return Err(bad("no answers".into()));
        }
        let hops = match fields.get(4).map(|h| h.trim()) {
            None | Some("") => None,
            Some(h) => Some(h.parse().map_err(|_| bad(format!("bad hop count {h:?}")))?),
        };
        let topic = fields[2].trim();
        out.push(QAInstance {
            id: fields[0].trim().to_string(),
            question: fields[1].trim().to_string(),
            topic: (!topic.is_empty()).then(|| topic.to_string()),
            gold,
            hops,
        });
    }
    Ok(out)
}

/// `n` instances without replacement, kept in dataset order.
pub fn sample_uniform(dataset: &[QAInstance], n: usize, seed: u64) -> Result<Vec<QAInstance>, DatasetError> {
    if n > dataset.len() {
        return Err(DatasetError::SampleTooLarge {
            requested: n,
            available: dataset.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, dataset.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| dataset[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn metaqa_line() {
        let d = load_metaqa_qa(
            "what movies did [Joe Anderson] act in\tHigh Life|The Crew|Amelia\n".as_bytes(),
            Some(1),
        )
        .unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].gold.len(), 3);
        assert_eq!(d[0].topic.as_deref(), Some("Joe Anderson"));
        assert_eq!(d[0].hops, Some(1));
    }

    #[test]
    fn metaqa_errors_carry_line_numbers() {
        let e = load_metaqa_qa("a [b]\tc\nno tab here\n".as_bytes(), None).unwrap_err();
        assert!(matches!(e, DatasetError::Malformed { line: 2, .. }), "{e}");
        let e = load_metaqa_qa("a [b]\t | \n".as_bytes(), None).unwrap_err();
        assert!(matches!(e, DatasetError::Malformed { line: 1, .. }));
    }

    #[test]
    fn metaqa_without_brackets_keeps_instance() {
        let d = load_metaqa_qa("who is it\tX\n".as_bytes(), None).unwrap();
        assert_eq!(d[0].topic, None);
        assert!(load_metaqa_qa("".as_bytes(), None).unwrap().is_empty());
    }

    #[test]
    fn tabular_lines() {
        let text = "# id\tq\ttopic\tgold\thops\nw1\twhat language do jamaican people speak\tm.03_r3\tJamaican English|Jamaican Creole English Language\t1\nw2\tq2\t\tA\n";
        let d = load_tabular(text.as_bytes()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].topic.as_deref(), Some("m.03_r3"));
        assert_eq!(d[0].gold.len(), 2);
        assert_eq!(d[0].hops, Some(1));
        assert_eq!(d[1].topic, None);
        assert!(load_tabular("a\tb\n".as_bytes()).is_err());
    }

    fn synthetic(n: usize) -> Vec<QAInstance> {
        (0..n)
            .map(|i| QAInstance {
                id: format!("s{i}"),
                question: format!("q{i}"),
                topic: None,
                gold: vec!["x".into()],
                hops: None,
            })
            .collect()
    }

    #[test]
    fn sampling_is_deterministic_and_distinct() {
        let d = synthetic(1000);
        let a = sample_uniform(&d, 500, 0).unwrap();
        let b = sample_uniform(&d, 500, 0).unwrap();
        assert_eq!(a, b);
        let ids: HashSet<_> = a.iter().map(|x| x.id.clone()).collect();
        assert_eq!(ids.len(), 500);
        assert_ne!(sample_uniform(&d, 500, 1).unwrap(), a);
        assert_eq!(sample_uniform(&d, 1000, 7).unwrap(), d);
        assert!(sample_uniform(&d, 1001, 0).is_err());
    }
}
