//! Pulling labels out of raw generations.

use serde::{Deserialize, Serialize};

use crate::labels::{canonical_label, TaskId};
use crate::prompt::ANSWER_TOKEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseStatus {
    Ok,
    Unparsable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub text: String,
    /// No delimiter pair was found; `text` is the whole generation.
    pub fallback: bool,
}

/// Text between the first two delimiters, trimmed. Falls back to the whole string.
pub fn extract(raw: &str) -> Span {
    let mut parts = raw.splitn(3, ANSWER_TOKEN);
    let _before = parts.next();
    match (parts.next(), parts.next()) {
        (Some(inner), Some(_)) => Span {
            text: inner.trim().to_string(),
            fallback: false,
        },
        _ => Span {
            text: raw.trim().to_string(),
            fallback: true,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub status: ParseStatus,
    pub label: Option<String>,
    pub raw_span: String,
}

impl ParsedAnswer {
    pub fn is_ok(&self) -> bool {
        self.status == ParseStatus::Ok
    }
}

pub fn normalize(span: &str, task: TaskId) -> ParsedAnswer {
    match canonical_label(task, span) {
        Some(label) => ParsedAnswer {
            status: ParseStatus::Ok,
            label: Some(label.to_string()),
            raw_span: span.to_string(),
        },
        None => ParsedAnswer {
            status: ParseStatus::Unparsable,
            label: None,
            raw_span: span.to_string(),
        },
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub task: TaskId,
    pub status: ParseStatus,
    pub label: Option<String>,
    pub raw_span: String,
    pub fallback: bool,
    /// Labels from extra sampled completions (FD multi-prediction scoring).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<Option<String>>,
}

pub fn parse(id: &str, task: TaskId, raw: &str) -> Prediction {
    let span = extract(raw);
    let ans = normalize(&span.text, task);
    Prediction {
        id: id.to_string(),
        task,
        status: ans.status,
        label: ans.label,
        raw_span: ans.raw_span,
        fallback: span.fallback,
        samples: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{alias_key, FALLACIES};
    use crate::prompt::answer_line;
    use std::collections::BTreeMap;

    #[test]
    fn first_pair() {
        assert_eq!(extract("<|ANSWER|> For <|ANSWER|>").text, "For");
        let s = extract("<|ANSWER|>attack<|ANSWER|> because <|ANSWER|> support <|ANSWER|>");
        assert_eq!(s.text, "attack");
        assert!(!s.fallback);
    }

    #[test]
    fn fallback_to_whole() {
        let s = extract("  I think the answer is Claim\n");
        assert_eq!(s.text, "I think the answer is Claim");
        assert!(s.fallback);
        assert!(extract("<|ANSWER|> Claim").fallback);
        assert!(!normalize(&s.text, TaskId::Cd).is_ok());
    }

    #[test]
    fn aliases() {
        assert_eq!(normalize("premise", TaskId::Acc).label.as_deref(), Some("Premise"));
        assert_eq!(normalize("Premises", TaskId::Acc).label.as_deref(), Some("Premise"));
        assert_eq!(normalize("non claim", TaskId::Cd).label.as_deref(), Some("Non-claim"));
        assert_eq!(
            normalize("no-relation", TaskId::Ar).label.as_deref(),
            Some("no relation")
        );
        assert_eq!(
            normalize("Appeal To Authority.", TaskId::Fd).label.as_deref(),
            Some("appeal to authority")
        );
        let m = normalize("maybe", TaskId::Sd);
        assert_eq!(m.status, ParseStatus::Unparsable);
        assert!(m.label.is_none());
    }

    #[test]
    fn fallacy_normalization_oracle() {
        // Independent lowercase + punctuation strip over the catalog must be bijective
        // and agree with the parser.
        let strip = |s: &str| -> String {
            s.chars()
                .map(|c| {
                    if c.is_alphanumeric() {
                        c.to_ascii_lowercase()
                    } else {
                        ' '
                    }
                })
                .collect::<String>()
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
        };
        let keys: BTreeMap<String, &str> = FALLACIES.iter().map(|f| (strip(f), *f)).collect();
        assert_eq!(keys.len(), FALLACIES.len());
        for f in FALLACIES {
            let shouted = format!("{}.", f.to_uppercase());
            assert_eq!(normalize(&shouted, TaskId::Fd).label.as_deref(), Some(f));
            assert_eq!(keys[&strip(&shouted)], f);
            assert_eq!(alias_key(&shouted), strip(&shouted));
        }
    }

    #[test]
    fn round_trip_every_label() {
        for task in TaskId::ALL {
            for l in task.labels() {
                let p = parse("x", task, &answer_line(l));
                assert_eq!(p.label.as_deref(), Some(*l), "{task} {l}");
                // idempotent on canonical labels
                assert_eq!(normalize(l, task).label.as_deref(), Some(*l));
            }
        }
    }

    #[test]
    fn prediction_json_shape() {
        let p = parse("a:1", TaskId::Sd, "<|ANSWER|> against <|ANSWER|>");
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"id": "a:1", "task": "SD", "status": "ok", "label": "Against", "raw_span": "against", "fallback": false})
        );
    }
}
