use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::labels::{DatasetId, TaskId};
use crate::{Error, Result};

/// One source record in the unified corpus schema.
///
/// Fields a dataset does not use are left out of the serialized form rather than
/// written as `null` or empty collections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub id: String,
    pub dataset: DatasetId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub units: Vec<Unit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<Component>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<Relation>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Unit {
    pub id: String,
    pub text: String,
}

/// An argumentative component anchored on a unit. A unit may carry several
/// components, e.g. one per fallacy label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub id: String,
    pub unit: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance: Option<String>,
}

/// A directed relation. `target` may name a component or another relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relation {
    pub id: String,
    pub source: String,
    pub target: String,
    #[serde(rename = "type")]
    pub relation_type: String,
}

impl CorpusRecord {
    pub fn new(id: impl Into<String>, dataset: DatasetId) -> Self {
        CorpusRecord {
            id: id.into(),
            dataset,
            topic: None,
            stance: None,
            units: Vec::new(),
            components: Vec::new(),
            relations: Vec::new(),
            extras: BTreeMap::new(),
        }
    }

    pub fn unit(&self, id: &str) -> Option<&Unit> {
        self.units.iter().find(|u| u.id == id)
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn relation(&self, id: &str) -> Option<&Relation> {
        self.relations.iter().find(|r| r.id == id)
    }

    /// Text of the unit a component is anchored on.
    pub fn component_text(&self, component_id: &str) -> Option<&str> {
        let c = self.component(component_id)?;
        self.unit(&c.unit).map(|u| u.text.as_str())
    }

    /// `extras["full_text"]` when present, otherwise the unit texts joined by spaces.
    pub fn full_text(&self) -> String {
        match self.extras.get("full_text") {
            Some(t) => t.clone(),
            None => self.units.iter().map(|u| u.text.as_str()).collect::<Vec<_>>().join(" "),
        }
    }

    /// Checks the structural invariants. Returns a human-readable reason on failure.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty record id".into());
        }
        let mut units = HashSet::new();
        for u in &self.units {
            if !units.insert(u.id.as_str()) {
                return Err(format!("duplicate unit id {:?}", u.id));
            }
        }
        let mut nodes = HashSet::new();
        for c in &self.components {
            if !nodes.insert(c.id.as_str()) {
                return Err(format!("duplicate component id {:?}", c.id));
            }
            if !units.contains(c.unit.as_str()) {
                return Err(format!("component {:?} on unknown unit {:?}", c.id, c.unit));
            }
        }
        for r in &self.relations {
            if !nodes.insert(r.id.as_str()) {
                return Err(format!("duplicate relation id {:?}", r.id));
            }
        }
        for r in &self.relations {
            if !nodes.contains(r.source.as_str()) {
                return Err("dangling relation source".into());
            }
            if !nodes.contains(r.target.as_str()) {
                return Err("dangling relation target".into());
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|reason| Error::InvalidRecord {
            id: self.id.clone(),
            reason,
        })
    }
}

/// One classification example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskInstance {
    pub task: TaskId,
    pub dataset: DatasetId,
    pub id: String,
    pub inputs: BTreeMap<String, String>,
    pub gold: Vec<String>,
}

const ALLOWED_INPUTS: [&str; 10] = [
    "topic",
    "sentence",
    "full_text",
    "claim",
    "source",
    "target",
    "title",
    "stance",
    "quality_dimension",
    "definition",
];

impl TaskInstance {
    pub fn input(&self, key: &str) -> Result<&str> {
        self.inputs
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::MissingInput {
                task: self.task.to_string(),
                id: self.id.clone(),
                key: key.to_string(),
            })
    }

    /// The label used for stratification: the single gold label, or the first one
    /// for multi-label fallacy instances.
    pub fn primary_label(&self) -> &str {
        self.gold.first().map(String::as_str).unwrap_or("")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidRecord {
            id: self.id.clone(),
            reason,
        };
        for key in self.task.required_inputs() {
            self.input(key)?;
        }
        if let Some(k) = self.inputs.keys().find(|k| !ALLOWED_INPUTS.contains(&k.as_str())) {
            return Err(fail(format!("input key {k:?} not allowed")));
        }
        if self.gold.is_empty() {
            return Err(fail("empty gold label set".into()));
        }
        if self.gold.len() > 1 && self.task != TaskId::Fd {
            return Err(fail(format!("{} instances take a single gold label", self.task)));
        }
        if let Some(l) = self.gold.iter().find(|l| !self.task.has_label(l)) {
            return Err(fail(format!("gold label {l:?} not in the {} catalog", self.task)));
        }
        Ok(())
    }
}
