//! Task identifiers, dataset registry, label catalogs and label aliases.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::Error;

/// The eight classification tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskId {
    #[serde(rename = "ACC")]
    Acc,
    #[serde(rename = "CD")]
    Cd,
    #[serde(rename = "ED")]
    Ed,
    #[serde(rename = "AR")]
    Ar,
    #[serde(rename = "ET")]
    Et,
    #[serde(rename = "SD")]
    Sd,
    #[serde(rename = "FD")]
    Fd,
    #[serde(rename = "AQ")]
    Aq,
}

impl TaskId {
    pub const ALL: [TaskId; 8] = [
        TaskId::Acc,
        TaskId::Cd,
        TaskId::Ed,
        TaskId::Ar,
        TaskId::Et,
        TaskId::Sd,
        TaskId::Fd,
        TaskId::Aq,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::Acc => "ACC",
            TaskId::Cd => "CD",
            TaskId::Ed => "ED",
            TaskId::Ar => "AR",
            TaskId::Et => "ET",
            TaskId::Sd => "SD",
            TaskId::Fd => "FD",
            TaskId::Aq => "AQ",
        }
    }

    /// Canonical labels in catalog order.
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            TaskId::Acc => &["Claim", "Premise"],
            TaskId::Cd => &["Claim", "Non-claim"],
            TaskId::Ed => &["Evidence", "Non-evidence"],
            TaskId::Ar => &["attack", "support", "no relation"],
            TaskId::Et => &["NONE", "ANECDOTAL", "EXPERT", "EXPLANATION", "STUDY"],
            TaskId::Sd => &["For", "Against"],
            TaskId::Fd => &FALLACIES,
            TaskId::Aq => &["Low", "Average", "High"],
        }
    }

    pub fn has_label(self, label: &str) -> bool {
        self.labels().contains(&label)
    }

    /// Input keys every instance of this task must carry.
    pub fn required_inputs(self) -> &'static [&'static str] {
        match self {
            TaskId::Acc | TaskId::Cd => &["topic", "sentence", "full_text"],
            TaskId::Ed | TaskId::Et => &["topic", "claim", "sentence"],
            TaskId::Ar => &["topic", "source", "target"],
            TaskId::Sd => &["topic", "sentence"],
            TaskId::Fd => &["title", "sentence", "full_text"],
            TaskId::Aq => &["topic", "stance", "sentence", "quality_dimension", "definition"],
        }
    }

    /// Datasets that feed this task.
    pub fn datasets(self) -> &'static [DatasetId] {
        use DatasetId::*;
        match self {
            TaskId::Acc => &[Microtext1, Microtext2, PersuasiveEssays, Abstrct],
            TaskId::Cd => &[Iam, IbmClaim, IbmArgument],
            TaskId::Ed => &[Argsum, Iam, IbmEvidence],
            TaskId::Ar => &[
                Microtext1,
                Microtext2,
                PersuasiveEssays,
                Abstrct,
                NixonKennedy,
                Node,
                IbmClaimPolarity,
                Comarg,
            ],
            TaskId::Et => &[Argsum, IbmType, Aqm],
            TaskId::Sd => &[IbmClaimPolarity, Comarg, Iam, Fever, Aqm],
            TaskId::Fd => &[Cocolofa, Mafalda],
            TaskId::Aq => &[Dagstuhl15512],
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownTask(s.to_string()))
    }
}

pub const FALLACIES: [&str; 20] = [
    "none",
    "appeal to fear",
    "hasty generalization",
    "appeal to worse problem",
    "appeal to authority",
    "false causality",
    "appeal to tradition",
    "ad populum",
    "guilt by association",
    "causal oversimplification",
    "false dilemma",
    "appeal to ridicule",
    "false analogy",
    "slippery slope",
    "appeal to majority",
    "appeal to nature",
    "straw man",
    "circular reasoning",
    "equivocation",
    "ad hominem",
];

/// The registered source datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetId {
    Abstrct,
    Aqm,
    Argsum,
    Comarg,
    Cocolofa,
    #[serde(rename = "dagstuhl15512")]
    Dagstuhl15512,
    Fever,
    Iam,
    IbmClaimPolarity,
    IbmType,
    IbmClaim,
    IbmEvidence,
    IbmArgument,
    Mafalda,
    #[serde(rename = "microtext1")]
    Microtext1,
    #[serde(rename = "microtext2")]
    Microtext2,
    NixonKennedy,
    Node,
    PersuasiveEssays,
}

impl DatasetId {
    pub const ALL: [DatasetId; 19] = [
        DatasetId::Abstrct,
        DatasetId::Aqm,
        DatasetId::Argsum,
        DatasetId::Comarg,
        DatasetId::Cocolofa,
        DatasetId::Dagstuhl15512,
        DatasetId::Fever,
        DatasetId::Iam,
        DatasetId::IbmClaimPolarity,
        DatasetId::IbmType,
        DatasetId::IbmClaim,
        DatasetId::IbmEvidence,
        DatasetId::IbmArgument,
        DatasetId::Mafalda,
        DatasetId::Microtext1,
        DatasetId::Microtext2,
        DatasetId::NixonKennedy,
        DatasetId::Node,
        DatasetId::PersuasiveEssays,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::Abstrct => "abstrct",
            DatasetId::Aqm => "aqm",
            DatasetId::Argsum => "argsum",
            DatasetId::Comarg => "comarg",
            DatasetId::Cocolofa => "cocolofa",
            DatasetId::Dagstuhl15512 => "dagstuhl15512",
            DatasetId::Fever => "fever",
            DatasetId::Iam => "iam",
            DatasetId::IbmClaimPolarity => "ibm_claim_polarity",
            DatasetId::IbmType => "ibm_type",
            DatasetId::IbmClaim => "ibm_claim",
            DatasetId::IbmEvidence => "ibm_evidence",
            DatasetId::IbmArgument => "ibm_argument",
            DatasetId::Mafalda => "mafalda",
            DatasetId::Microtext1 => "microtext1",
            DatasetId::Microtext2 => "microtext2",
            DatasetId::NixonKennedy => "nixon_kennedy",
            DatasetId::Node => "node",
            DatasetId::PersuasiveEssays => "persuasive_essays",
        }
    }

    pub fn feeds(self, task: TaskId) -> bool {
        task.datasets().contains(&self)
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetId::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim())
            .ok_or_else(|| Error::UnknownDataset(s.to_string()))
    }
}

/// A quality rubric axis with the definition shown to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QualityDimension {
    pub name: &'static str,
    pub definition: &'static str,
}

pub const QUALITY_DIMENSIONS: [QualityDimension; 15] = [
    QualityDimension {
        name: "overall quality",
        definition: "The quality of the argumentation taken as a whole, combining its logical, rhetorical and dialectical strength.",
    },
    QualityDimension {
        name: "local acceptability",
        definition: "The premises are worth believing to be true by a reasonable audience.",
    },
    QualityDimension {
        name: "appropriateness",
        definition: "The language fits the issue, supports credibility and emotion where suitable, and stays proportional to the topic.",
    },
    QualityDimension {
        name: "arrangement",
        definition: "The issue, the arguments and the conclusion are presented in a sensible order.",
    },
    QualityDimension {
        name: "clarity",
        definition: "The language is correct and unambiguous, without needless complexity or drifting away from the issue.",
    },
    QualityDimension {
        name: "cogency",
        definition: "The premises are acceptable, relevant to the conclusion and together sufficient to draw it.",
    },
    QualityDimension {
        name: "effectiveness",
        definition: "The argumentation succeeds in persuading the audience of the author's stance.",
    },
    QualityDimension {
        name: "global acceptability",
        definition: "The target audience would accept both the stated arguments and the way they are stated.",
    },
    QualityDimension {
        name: "global relevance",
        definition: "The argumentation contributes to resolving the issue by providing arguments and information that help reach a conclusion.",
    },
    QualityDimension {
        name: "global sufficiency",
        definition: "The argumentation anticipates and adequately rebuts the relevant counter-arguments.",
    },
    QualityDimension {
        name: "reasonableness",
        definition: "The argumentation is acceptable, relevant and sufficient with respect to the whole debate.",
    },
    QualityDimension {
        name: "local relevance",
        definition: "The premises contribute to the acceptance or rejection of the conclusion.",
    },
    QualityDimension {
        name: "credibility",
        definition: "The argumentation makes the author appear worthy of trust.",
    },
    QualityDimension {
        name: "emotional appeal",
        definition: "The argumentation evokes emotions that make the audience more open to the author's position.",
    },
    QualityDimension {
        name: "sufficiency",
        definition: "The premises provide enough support to accept the conclusion.",
    },
];

pub fn quality_dimension(name: &str) -> Option<&'static QualityDimension> {
    let key = alias_key(name);
    QUALITY_DIMENSIONS.iter().find(|q| q.name == key)
}

/// Lowercases, maps every non-alphanumeric character to a space and collapses runs of
/// whitespace. Two strings with the same key are treated as the same label.
pub fn alias_key(raw: &str) -> String {
    let mapped: String = raw
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .flat_map(char::to_lowercase)
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

// Alternate spellings a model may produce. Keys are stored in `alias_key` form.
fn model_aliases(task: TaskId) -> &'static [(&'static str, &'static str)] {
    match task {
        TaskId::Acc => &[("claims", "Claim"), ("premises", "Premise")],
        TaskId::Cd => &[
            ("claims", "Claim"),
            ("nonclaim", "Non-claim"),
            ("non claims", "Non-claim"),
        ],
        TaskId::Ed => &[
            ("evidences", "Evidence"),
            ("nonevidence", "Non-evidence"),
            ("non evidences", "Non-evidence"),
        ],
        TaskId::Ar => &[
            ("attacks", "attack"),
            ("supports", "support"),
            ("norelation", "no relation"),
            ("no relations", "no relation"),
        ],
        TaskId::Et => &[],
        TaskId::Sd => &[],
        TaskId::Fd => &[("false dillema", "false dilemma")],
        TaskId::Aq => &[],
    }
}

// Raw annotation labels found in source corpora, accepted only at extraction time.
fn corpus_aliases(task: TaskId) -> &'static [(&'static str, &'static str)] {
    match task {
        TaskId::Acc => &[("majorclaim", "Claim"), ("major claim", "Claim")],
        TaskId::Sd => &[("pro", "For"), ("con", "Against"), ("opp", "Against"), ("favor", "For")],
        TaskId::Fd => &[("nothing", "none")],
        TaskId::Aq => &[("1", "Low"), ("2", "Average"), ("3", "High")],
        _ => &[],
    }
}

type AliasTable = HashMap<TaskId, HashMap<String, &'static str>>;

fn build_table(with_corpus: bool) -> AliasTable {
    let mut table = HashMap::new();
    for task in TaskId::ALL {
        let mut map: HashMap<String, &'static str> = HashMap::new();
        let canon = task.labels().iter().map(|l| (alias_key(l), *l));
        let model = model_aliases(task).iter().map(|(k, l)| (alias_key(k), *l));
        let corpus: Vec<_> = if with_corpus {
            corpus_aliases(task).iter().map(|(k, l)| (alias_key(k), *l)).collect()
        } else {
            Vec::new()
        };
        for (key, label) in canon.chain(model).chain(corpus) {
            assert!(task.has_label(label), "alias target {label:?} not in {task} catalog");
            if let Some(prev) = map.insert(key.clone(), label) {
                assert_eq!(prev, label, "alias {key:?} maps to two {task} labels");
            }
        }
        table.insert(task, map);
    }
    table
}

fn model_table() -> &'static AliasTable {
    static TABLE: OnceLock<AliasTable> = OnceLock::new();
    TABLE.get_or_init(|| build_table(false))
}

fn corpus_table() -> &'static AliasTable {
    static TABLE: OnceLock<AliasTable> = OnceLock::new();
    TABLE.get_or_init(|| build_table(true))
}

/// Maps model output text to a canonical label, or `None` when nothing matches.
pub fn canonical_label(task: TaskId, raw: &str) -> Option<&'static str> {
    model_table()[&task].get(&alias_key(raw)).copied()
}

/// Like [`canonical_label`] but also accepts raw corpus annotation labels.
pub fn canonical_corpus_label(task: TaskId, raw: &str) -> Option<&'static str> {
    corpus_table()[&task].get(&alias_key(raw)).copied()
}
