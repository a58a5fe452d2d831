//! Prompt templates and zero/few-shot rendering with the `<|ANSWER|>` protocol.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::TaskInstance;
use crate::labels::{TaskId, QUALITY_DIMENSIONS};
use crate::sampler::stream_rng;
use crate::{Error, Result};

pub const ANSWER_TOKEN: &str = "<|ANSWER|>";
const FORMAT_LINE: &str = "<|ANSWER|> <answer> <|ANSWER|>.";

pub const TEMPLATE_MANIFEST: &str = include_str!("../templates/MANIFEST.json");

fn builtin_source(task: TaskId) -> (&'static str, &'static str) {
    match task {
        TaskId::Acc => ("acc.txt", include_str!("../templates/acc.txt")),
        TaskId::Cd => ("cd.txt", include_str!("../templates/cd.txt")),
        TaskId::Ed => ("ed.txt", include_str!("../templates/ed.txt")),
        TaskId::Ar => ("ar.txt", include_str!("../templates/ar.txt")),
        TaskId::Et => ("et.txt", include_str!("../templates/et.txt")),
        TaskId::Sd => ("sd.txt", include_str!("../templates/sd.txt")),
        TaskId::Fd => ("fd.txt", include_str!("../templates/fd.txt")),
        TaskId::Aq => ("aq.txt", include_str!("../templates/aq.txt")),
    }
}

/// Placeholder text → instance input key.
fn input_placeholder(name: &str) -> Option<&'static str> {
    Some(match name {
        "topic" => "topic",
        "sentence" => "sentence",
        "full text" => "full_text",
        "source argument" => "source",
        "argument target" => "target",
        "claim" => "claim",
        "title" => "title",
        "stance" => "stance",
        "definition" => "definition",
        "quality dimension" => "quality_dimension",
        _ => return None,
    })
}

fn label_placeholder(task: TaskId) -> Option<&'static str> {
    match task {
        TaskId::Ar => Some("relation"),
        TaskId::Et => Some("type"),
        TaskId::Fd => Some("fallacies"),
        TaskId::Aq => Some("quality"),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Input(&'static str),
    Labels,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Paragraph {
    pieces: Vec<Piece>,
}

impl Paragraph {
    fn is_label_set(&self) -> bool {
        self.pieces.contains(&Piece::Labels)
    }
}

/// A parsed prompt template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub task: TaskId,
    pub body: String,
    header: String,
    paragraphs: Vec<Paragraph>,
}

impl PromptTemplate {
    pub fn builtin(task: TaskId) -> Self {
        Self::parse(task, builtin_source(task).1).expect("bundled template is valid")
    }

    /// Parses and validates a template body.
    ///
    /// The body is an instruction block ending with the answer-format line, followed by
    /// blank-line separated field paragraphs. Its input placeholders must be exactly the
    /// task's required input keys.
    pub fn parse(task: TaskId, body: &str) -> Result<Self> {
        let body = body.trim_end_matches(['\n', '\r']).to_string();
        if body.matches(ANSWER_TOKEN).count() != 2 {
            return Err(Error::Template(
                "body must contain exactly two answer delimiters".into(),
            ));
        }
        let end = body
            .find(FORMAT_LINE)
            .ok_or_else(|| Error::Template(format!("missing format line {FORMAT_LINE:?}")))?
            + FORMAT_LINE.len();
        let header = body[..end].to_string();
        let rest = body[end..]
            .strip_prefix("\n\n")
            .ok_or_else(|| Error::Template("format line must be followed by a blank line".into()))?;
        let label_name = label_placeholder(task);
        let paragraphs = rest
            .split("\n\n")
            .map(|p| parse_pieces(p, label_name).map(|pieces| Paragraph { pieces }))
            .collect::<Result<Vec<_>>>()?;

        let used: BTreeSet<&str> = paragraphs
            .iter()
            .flat_map(|p| &p.pieces)
            .filter_map(|p| match p {
                Piece::Input(k) => Some(*k),
                _ => None,
            })
            .collect();
        let required: BTreeSet<&str> = task.required_inputs().iter().copied().collect();
        if used != required {
            return Err(Error::Template(format!(
                "{task} placeholders {used:?} do not match required inputs {required:?}"
            )));
        }
        let label_sets = paragraphs.iter().filter(|p| p.is_label_set()).count();
        if label_sets != usize::from(label_name.is_some()) {
            return Err(Error::Template(format!(
                "{task} template has {label_sets} label-set placeholders"
            )));
        }
        Ok(PromptTemplate {
            task,
            body,
            header,
            paragraphs,
        })
    }

    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.body.as_bytes()))
    }

    fn render_paragraph(&self, p: &Paragraph, inst: &TaskInstance, out: &mut String) -> Result<()> {
        for piece in &p.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Input(key) => out.push_str(inst.input(key)?),
                Piece::Labels => out.push_str(&self.task.labels().join(", ")),
            }
        }
        Ok(())
    }

    fn render_fields(&self, inst: &TaskInstance, label_sets: bool, out: &mut String) -> Result<()> {
        let mut first = true;
        for p in self.paragraphs.iter().filter(|p| p.is_label_set() == label_sets) {
            if !first {
                out.push_str("\n\n");
            }
            first = false;
            self.render_paragraph(p, inst, out)?;
        }
        Ok(())
    }

    /// Renders the instance into the template, substituting values verbatim.
    pub fn render(&self, inst: &TaskInstance, mode: PromptMode, bundle: Option<&FewShotBundle>) -> Result<String> {
        if inst.task != self.task {
            return Err(Error::Template(format!(
                "{} template used for {} instance",
                self.task, inst.task
            )));
        }
        for key in self.task.required_inputs() {
            inst.input(key)?;
        }
        let mut out = String::with_capacity(self.body.len() + 256);
        match mode {
            PromptMode::Zero => {
                out.push_str(&self.header);
                for p in &self.paragraphs {
                    out.push_str("\n\n");
                    self.render_paragraph(p, inst, &mut out)?;
                }
            }
            PromptMode::Few => {
                let bundle = bundle.ok_or_else(|| Error::Template("few-shot mode needs an example bundle".into()))?;
                if bundle.task != inst.task {
                    return Err(Error::BundleMismatch {
                        bundle: bundle.task.to_string(),
                        instance: inst.task.to_string(),
                    });
                }
                out.push_str(&self.header);
                if self.paragraphs.iter().any(Paragraph::is_label_set) {
                    out.push_str("\n\n");
                    self.render_fields(inst, true, &mut out)?;
                }
                for (k, ex) in bundle.examples.iter().enumerate() {
                    out.push_str(&format!("\n\nExample {}:\n", k + 1));
                    self.render_fields(&ex.instance, false, &mut out)?;
                    out.push_str("\n\n");
                    out.push_str(&answer_line(&ex.label));
                }
                out.push_str("\n\n");
                self.render_fields(inst, false, &mut out)?;
            }
        }
        Ok(out)
    }
}

fn parse_pieces(text: &str, label_name: Option<&str>) -> Result<Vec<Piece>> {
    let mut pieces = Vec::new();
    let mut literal = String::new();
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        let close = match c {
            '<' => Some('>'),
            '{' => Some('}'),
            _ => None,
        };
        if let Some(close) = close {
            if let Some(end) = rest[1..].find(close) {
                let name = &rest[1..1 + end];
                let piece = match c {
                    '<' => input_placeholder(name).map(Piece::Input),
                    _ if Some(name) == label_name => Some(Piece::Labels),
                    _ => return Err(Error::Template(format!("unknown label placeholder {{{name}}}"))),
                };
                if let Some(piece) = piece {
                    if !literal.is_empty() {
                        pieces.push(Piece::Text(std::mem::take(&mut literal)));
                    }
                    pieces.push(piece);
                    rest = &rest[end + 2..];
                    continue;
                }
            }
        }
        literal.push(c);
        rest = &rest[c.len_utf8()..];
    }
    if !literal.is_empty() {
        pieces.push(Piece::Text(literal));
    }
    Ok(pieces)
}

/// `<|ANSWER|> label <|ANSWER|>`
pub fn answer_line(label: &str) -> String {
    format!("{ANSWER_TOKEN} {label} {ANSWER_TOKEN}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    Zero,
    Few,
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptMode::Zero => "zero",
            PromptMode::Few => "few",
        })
    }
}

impl FromStr for PromptMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "zero-shot" => Ok(PromptMode::Zero),
            "few" | "few-shot" => Ok(PromptMode::Few),
            other => Err(Error::Config(format!("unknown prompt mode {other:?}"))),
        }
    }
}

/// All eight templates, keyed by task.
#[derive(Debug, Clone)]
pub struct TemplateSet(BTreeMap<TaskId, PromptTemplate>);

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet(TaskId::ALL.iter().map(|t| (*t, PromptTemplate::builtin(*t))).collect())
    }
}

impl TemplateSet {
    pub fn get(&self, task: TaskId) -> &PromptTemplate {
        &self.0[&task]
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.0.insert(template.task, template);
    }
}

/// Compares bundled templates against the checksum manifest. Returns the names of
/// templates whose checksum drifted.
pub fn verify_template_manifest() -> Result<Vec<String>> {
    #[derive(Deserialize)]
    struct Manifest {
        templates: BTreeMap<String, String>,
    }
    let m: Manifest = serde_json::from_str(TEMPLATE_MANIFEST)?;
    let mut drifted = Vec::new();
    for task in TaskId::ALL {
        let (name, text) = builtin_source(task);
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        if m.templates.get(name) != Some(&digest) {
            drifted.push(name.to_string());
        }
    }
    Ok(drifted)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub instance: TaskInstance,
    pub label: String,
}

/// Worked examples shown before the query: one per label (one per label and quality
/// dimension for AQ).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotBundle {
    pub task: TaskId,
    pub examples: Vec<FewShotExample>,
}

impl FewShotBundle {
    pub fn expected_len(task: TaskId) -> usize {
        match task {
            TaskId::Aq => task.labels().len() * QUALITY_DIMENSIONS.len(),
            _ => task.labels().len(),
        }
    }
}

/// Picks the first instance per label from a seeded shuffle of the training split.
pub fn build_bundle(train: &[TaskInstance], task: TaskId, seed: u64) -> Result<FewShotBundle> {
    let mut pool: Vec<&TaskInstance> = train.iter().filter(|i| i.task == task).collect();
    pool.sort_by(|a, b| (a.dataset, &a.id).cmp(&(b.dataset, &b.id)));
    pool.shuffle(&mut stream_rng(seed, &["fewshot", task.as_str()]));

    // Prefer single-label instances so the example answer is unambiguous.
    let pick = |label: &str, dim: Option<&str>| -> Option<&TaskInstance> {
        let fits =
            |i: &&&TaskInstance| dim.is_none_or(|d| i.inputs.get("quality_dimension").map(String::as_str) == Some(d));
        pool.iter()
            .filter(fits)
            .find(|i| i.gold.len() == 1 && i.gold[0] == label)
            .or_else(|| pool.iter().filter(fits).find(|i| i.gold.iter().any(|g| g == label)))
            .copied()
    };

    let mut examples = Vec::new();
    let dims: Vec<Option<&str>> = if task == TaskId::Aq {
        QUALITY_DIMENSIONS.iter().map(|d| Some(d.name)).collect()
    } else {
        vec![None]
    };
    for dim in dims {
        for label in task.labels() {
            let inst = pick(label, dim).ok_or_else(|| {
                Error::MissingLabel(match dim {
                    Some(d) => format!("{label} ({d})"),
                    None => label.to_string(),
                })
            })?;
            examples.push(FewShotExample {
                instance: inst.clone(),
                label: label.to_string(),
            });
        }
    }
    Ok(FewShotBundle { task, examples })
}
