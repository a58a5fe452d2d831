//! Turning corpus records into per-task classification instances.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{CorpusRecord, TaskInstance};
use crate::labels::{self, canonical_corpus_label, TaskId};
use crate::{Error, Result};

/// Raw relation type → canonical relation label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationMap(pub BTreeMap<String, String>);

impl Default for RelationMap {
    fn default() -> Self {
        serde_json::from_str(include_str!("../../config/relation_map.json")).expect("bundled relation map is valid")
    }
}

impl RelationMap {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: RelationMap = serde_json::from_str(&text)?;
        if let Some((k, v)) = map.0.iter().find(|(_, v)| !TaskId::Ar.has_label(v)) {
            return Err(Error::Config(format!("relation {k:?} maps to unknown label {v:?}")));
        }
        Ok(map)
    }

    pub fn get(&self, raw: &str) -> Option<&str> {
        self.0
            .get(raw)
            .or_else(|| self.0.get(&labels::alias_key(raw)))
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub record: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractOutcome {
    pub instances: Vec<TaskInstance>,
    pub skipped: Vec<Skip>,
}

impl ExtractOutcome {
    fn skip(&mut self, record: &CorpusRecord, reason: String) {
        log::info!("skipping {}: {reason}", record.id);
        self.skipped.push(Skip {
            record: record.id.clone(),
            reason,
        });
    }
}

/// Extracts instances of `task` from every record whose dataset feeds that task.
pub fn extract(records: &[CorpusRecord], task: TaskId) -> ExtractOutcome {
    extract_with(records, task, &RelationMap::default())
}

pub fn extract_with(records: &[CorpusRecord], task: TaskId, relations: &RelationMap) -> ExtractOutcome {
    let mut out = ExtractOutcome::default();
    for rec in records.iter().filter(|r| r.dataset.feeds(task)) {
        let before = out.instances.len();
        match task {
            TaskId::Acc | TaskId::Cd | TaskId::Ed | TaskId::Et => component_task(rec, task, &mut out),
            TaskId::Sd => stance_task(rec, &mut out),
            TaskId::Ar => relation_task(rec, relations, &mut out),
            TaskId::Fd => fallacy_task(rec, &mut out),
            TaskId::Aq => quality_task(rec, &mut out),
        }
        for inst in &out.instances[before..] {
            debug_assert!(inst.validate().is_ok(), "{inst:?}");
        }
    }
    out
}

fn base(rec: &CorpusRecord, task: TaskId, id: String, gold: Vec<String>) -> TaskInstance {
    TaskInstance {
        task,
        dataset: rec.dataset,
        id,
        inputs: BTreeMap::new(),
        gold,
    }
}

fn set(inst: &mut TaskInstance, key: &str, value: impl Into<String>) {
    inst.inputs.insert(key.to_string(), value.into());
}

// ACC, CD, ED and ET: one instance per component whose label belongs to the catalog.
fn component_task(rec: &CorpusRecord, task: TaskId, out: &mut ExtractOutcome) {
    let Some(topic) = rec.topic.as_deref() else {
        out.skip(rec, format!("{task} needs a topic"));
        return;
    };
    let needs_claim = matches!(task, TaskId::Ed | TaskId::Et);
    let claim = rec.extras.get("claim");
    if needs_claim && claim.is_none() {
        out.skip(rec, format!("{task} needs a claim"));
        return;
    }
    let full_text = rec.full_text();
    for c in &rec.components {
        let Some(label) = canonical_corpus_label(task, &c.label) else {
            continue;
        };
        let Some(text) = rec.component_text(&c.id) else {
            continue;
        };
        let mut inst = base(rec, task, format!("{}:{}", rec.id, c.id), vec![label.to_string()]);
        set(&mut inst, "topic", topic);
        set(&mut inst, "sentence", text);
        if needs_claim {
            set(&mut inst, "claim", claim.unwrap().as_str());
        } else {
            set(&mut inst, "full_text", full_text.as_str());
        }
        out.instances.push(inst);
    }
}

fn stance_task(rec: &CorpusRecord, out: &mut ExtractOutcome) {
    let Some(topic) = rec.topic.as_deref() else {
        out.skip(rec, "SD needs a topic".into());
        return;
    };
    let mut found = false;
    for c in &rec.components {
        let Some(stance) = c.stance.as_deref() else {
            continue;
        };
        let (Some(label), Some(text)) = (canonical_corpus_label(TaskId::Sd, stance), rec.component_text(&c.id)) else {
            continue;
        };
        found = true;
        let mut inst = base(rec, TaskId::Sd, format!("{}:{}", rec.id, c.id), vec![label.into()]);
        set(&mut inst, "topic", topic);
        set(&mut inst, "sentence", text);
        out.instances.push(inst);
    }
    if found {
        return;
    }
    // Record-level stance on a single-sentence record.
    match (rec.stance.as_deref(), rec.units.as_slice()) {
        (Some(stance), [unit]) => match canonical_corpus_label(TaskId::Sd, stance) {
            Some(label) => {
                let mut inst = base(rec, TaskId::Sd, format!("{}:{}", rec.id, unit.id), vec![label.into()]);
                set(&mut inst, "topic", topic);
                set(&mut inst, "sentence", unit.text.as_str());
                out.instances.push(inst);
            }
            None => out.skip(rec, format!("unknown stance {stance:?}")),
        },
        _ => out.skip(rec, "no stance annotation".into()),
    }
}

/// Follows relation-typed targets to a component: a relation aimed at another
/// relation is attributed to that relation's source.
fn resolve_target<'a>(rec: &'a CorpusRecord, mut target: &'a str) -> Option<&'a str> {
    for _ in 0..=rec.relations.len() {
        if rec.component(target).is_some() {
            return Some(target);
        }
        target = rec.relation(target)?.source.as_str();
    }
    None
}

fn relation_task(rec: &CorpusRecord, map: &RelationMap, out: &mut ExtractOutcome) {
    let topic = rec.topic.clone().unwrap_or_default();
    if rec.topic.is_none() {
        out.skip(rec, "AR needs a topic".into());
        return;
    }
    let mut linked = BTreeSet::new();
    let mut counts = BTreeMap::<&str, usize>::new();
    let mut pairs = Vec::new();
    for r in &rec.relations {
        let Some(label) = map.get(&r.relation_type) else {
            out.skip(rec, format!("unmapped relation type {:?} on {}", r.relation_type, r.id));
            continue;
        };
        let Some(target) = resolve_target(rec, &r.target) else {
            out.skip(rec, format!("relation {} does not resolve to a component", r.id));
            continue;
        };
        let (Some(src_text), Some(trg_text)) = (rec.component_text(&r.source), rec.component_text(target)) else {
            continue;
        };
        linked.insert((r.source.clone(), target.to_string()));
        linked.insert((target.to_string(), r.source.clone()));
        *counts.entry(label).or_default() += 1;
        pairs.push((format!("{}:{}", rec.id, r.id), label, src_text, trg_text));
    }
    for (id, label, src, trg) in pairs {
        let mut inst = base(rec, TaskId::Ar, id, vec![label.to_string()]);
        set(&mut inst, "topic", topic.as_str());
        set(&mut inst, "source", src);
        set(&mut inst, "target", trg);
        out.instances.push(inst);
    }

    // Negative pairs: unlinked component pairs, downsampled to the larger linked class.
    let quota = counts
        .iter()
        .filter(|(l, _)| **l != "no relation")
        .map(|(_, n)| *n)
        .max()
        .unwrap_or(0);
    if quota == 0 {
        return;
    }
    let mut candidates = Vec::new();
    for (i, a) in rec.components.iter().enumerate() {
        for (j, b) in rec.components.iter().enumerate() {
            if i != j && !linked.contains(&(a.id.clone(), b.id.clone())) {
                let key = Sha256::digest(format!("{}\u{0}{}\u{0}{}", rec.id, a.id, b.id));
                candidates.push((key, i, j));
            }
        }
    }
    candidates.sort();
    let mut chosen: Vec<(usize, usize)> = candidates.into_iter().take(quota).map(|(_, i, j)| (i, j)).collect();
    chosen.sort();
    for (i, j) in chosen {
        let (a, b) = (&rec.components[i], &rec.components[j]);
        let (Some(src), Some(trg)) = (rec.component_text(&a.id), rec.component_text(&b.id)) else {
            continue;
        };
        let mut inst = base(
            rec,
            TaskId::Ar,
            format!("{}:{}~{}", rec.id, a.id, b.id),
            vec!["no relation".into()],
        );
        set(&mut inst, "topic", topic.as_str());
        set(&mut inst, "source", src);
        set(&mut inst, "target", trg);
        out.instances.push(inst);
    }
}

// One instance per unit; all fallacy components on the unit form the gold set.
fn fallacy_task(rec: &CorpusRecord, out: &mut ExtractOutcome) {
    let Some(title) = rec.extras.get("title") else {
        out.skip(rec, "FD needs a title".into());
        return;
    };
    let full_text = rec.full_text();
    for unit in &rec.units {
        let mut gold: Vec<String> = Vec::new();
        let mut unknown = None;
        for c in rec.components.iter().filter(|c| c.unit == unit.id) {
            match canonical_corpus_label(TaskId::Fd, &c.label) {
                Some(l) if !gold.iter().any(|g| g == l) => gold.push(l.to_string()),
                Some(_) => {}
                None => unknown = Some(c.label.clone()),
            }
        }
        if let Some(label) = unknown {
            out.skip(rec, format!("unit {}: unknown fallacy label {label:?}", unit.id));
            continue;
        }
        if gold.is_empty() {
            continue;
        }
        if gold.len() > 1 {
            gold.retain(|g| g != "none");
        }
        let mut inst = base(rec, TaskId::Fd, format!("{}:{}", rec.id, unit.id), gold);
        set(&mut inst, "title", title.as_str());
        set(&mut inst, "sentence", unit.text.as_str());
        set(&mut inst, "full_text", full_text.as_str());
        out.instances.push(inst);
    }
}

// One instance per rated quality dimension (`quality:<dimension>` extras).
fn quality_task(rec: &CorpusRecord, out: &mut ExtractOutcome) {
    let (Some(topic), Some(stance), Some(unit)) = (rec.topic.as_deref(), rec.stance.as_deref(), rec.units.first())
    else {
        out.skip(rec, "AQ needs topic, stance and an argument".into());
        return;
    };
    for (key, rating) in &rec.extras {
        let Some(dim_name) = key.strip_prefix("quality:") else {
            continue;
        };
        let Some(dim) = labels::quality_dimension(dim_name) else {
            out.skip(rec, format!("unknown quality dimension {dim_name:?}"));
            continue;
        };
        let Some(label) = canonical_corpus_label(TaskId::Aq, rating) else {
            out.skip(rec, format!("unknown quality rating {rating:?} for {}", dim.name));
            continue;
        };
        let definition = rec
            .extras
            .get(&format!("definition:{}", dim.name))
            .map(String::as_str)
            .unwrap_or(dim.definition);
        let slug = dim.name.replace(' ', "_");
        let mut inst = base(rec, TaskId::Aq, format!("{}:{slug}", rec.id), vec![label.into()]);
        set(&mut inst, "topic", topic);
        set(&mut inst, "stance", stance);
        set(&mut inst, "sentence", unit.text.as_str());
        set(&mut inst, "quality_dimension", dim.name);
        set(&mut inst, "definition", definition);
        out.instances.push(inst);
    }
}
