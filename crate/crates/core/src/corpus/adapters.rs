//! Format adapters turning raw dataset files into [`CorpusRecord`]s.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::model::{Component, CorpusRecord, Relation, Unit};
use crate::labels::DatasetId;
use crate::{Error, Result};

/// A source record that could not be converted, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub source: String,
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOutcome {
    pub records: Vec<CorpusRecord>,
    pub rejects: Vec<Reject>,
}

impl IngestOutcome {
    fn push(&mut self, source: &str, index: usize, rec: std::result::Result<CorpusRecord, String>) {
        let rec = rec.and_then(|r| r.check().map(|_| r));
        match rec {
            Ok(r) => self.records.push(r),
            Err(reason) => {
                log::warn!("rejecting {source}#{index}: {reason}");
                self.rejects.push(Reject {
                    source: source.to_string(),
                    index,
                    reason,
                });
            }
        }
    }
}

/// Column manifest for delimited-text datasets.
///
/// `column_map` maps a unified role to a column header. Recognised roles:
/// `id`, `topic`, `stance`, `sentence`, `label`, `claim`, `full_text`, `title`,
/// `source`, `target`, `relation`, `quality:<dimension>` and `extra:<name>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabularManifest {
    pub dataset_id: DatasetId,
    pub format: TabularFormat,
    pub column_map: BTreeMap<String, String>,
    /// Optional rewrite of raw label cells, e.g. `"1" -> "Claim"`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub label_map: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TabularFormat {
    Csv,
    Tsv,
}

impl TabularManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: TabularManifest = serde_json::from_str(&text)?;
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        const ROLES: [&str; 11] = [
            "id",
            "topic",
            "stance",
            "sentence",
            "label",
            "claim",
            "full_text",
            "title",
            "source",
            "target",
            "relation",
        ];
        for role in self.column_map.keys() {
            let ok = ROLES.contains(&role.as_str()) || role.starts_with("quality:") || role.starts_with("extra:");
            if !ok {
                return Err(Error::Manifest(format!("unknown role {role:?}")));
            }
        }
        let has = |r: &str| self.column_map.contains_key(r);
        if !has("sentence") && !(has("source") && has("target")) {
            return Err(Error::Manifest(
                "column_map needs `sentence` or both `source` and `target`".into(),
            ));
        }
        if has("source") != has("target") || (has("relation") && !has("source")) {
            return Err(Error::Manifest(
                "`source`, `target` and `relation` must be mapped together".into(),
            ));
        }
        Ok(())
    }
}

/// A registered raw-format reader.
#[derive(Debug, Clone, PartialEq)]
pub enum Adapter {
    /// Microtext `arggraph` XML (parts 1 and 2).
    Microtext(DatasetId),
    /// MAFALDA JSON/JSONL entries with `sentences_with_labels`.
    Mafalda,
    Tabular(TabularManifest),
}

impl Adapter {
    /// Resolves the adapter for a dataset. Delimited-text datasets need a manifest.
    pub fn for_dataset(dataset: DatasetId, manifest: Option<TabularManifest>) -> Result<Self> {
        match (dataset, manifest) {
            (_, Some(m)) if m.dataset_id != dataset => Err(Error::Manifest(format!(
                "manifest is for {}, not {dataset}",
                m.dataset_id
            ))),
            (_, Some(m)) => Ok(Adapter::Tabular(m)),
            (DatasetId::Microtext1 | DatasetId::Microtext2, None) => Ok(Adapter::Microtext(dataset)),
            (DatasetId::Mafalda, None) => Ok(Adapter::Mafalda),
            (other, None) => Err(Error::UnknownAdapter(format!(
                "{other} (no built-in reader; supply a column manifest)"
            ))),
        }
    }

    pub fn from_name(name: &str, manifest: Option<TabularManifest>) -> Result<Self> {
        let dataset: DatasetId = name.parse().map_err(|_| Error::UnknownAdapter(name.to_string()))?;
        Adapter::for_dataset(dataset, manifest)
    }

    pub fn dataset(&self) -> DatasetId {
        match self {
            Adapter::Microtext(d) => *d,
            Adapter::Mafalda => DatasetId::Mafalda,
            Adapter::Tabular(m) => m.dataset_id,
        }
    }
}

/// Reads a raw file (or, for Microtext, a directory of XML files) into validated records.
pub fn ingest(raw_path: impl AsRef<Path>, adapter: &Adapter) -> Result<IngestOutcome> {
    let raw_path = raw_path.as_ref();
    match adapter {
        Adapter::Microtext(d) => {
            let mut out = IngestOutcome::default();
            for (i, file) in xml_files(raw_path)?.iter().enumerate() {
                let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
                out.push(&file.display().to_string(), i, parse_arggraph(&text, *d));
            }
            Ok(out)
        }
        Adapter::Mafalda => {
            let text = fs::read_to_string(raw_path).map_err(|e| Error::io(raw_path, e))?;
            Ok(ingest_mafalda_str(&text, &raw_path.display().to_string()))
        }
        Adapter::Tabular(m) => {
            let bytes = fs::read(raw_path).map_err(|e| Error::io(raw_path, e))?;
            ingest_tabular_bytes(&bytes, m, &raw_path.display().to_string())
        }
    }
}

fn xml_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let p = entry.map_err(|e| Error::io(path, e))?.path();
        if p.extension().is_some_and(|e| e == "xml") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Converts one Microtext `arggraph` document.
///
/// `edu` elements become units, each `adu` becomes a component anchored through its
/// `seg` edge, and every other edge becomes a relation. The ADU that is the source of
/// no relation is the central claim; all others are premises.
pub fn parse_arggraph(xml: &str, dataset: DatasetId) -> std::result::Result<CorpusRecord, String> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| format!("malformed XML: {e}"))?;
    let root = doc.root_element();
    if root.tag_name().name() != "arggraph" {
        return Err(format!(
            "root element is <{}>, expected <arggraph>",
            root.tag_name().name()
        ));
    }
    let id = root.attribute("id").ok_or("arggraph without id")?;
    let mut rec = CorpusRecord::new(id, dataset);
    rec.topic = root.attribute("topic_id").map(str::to_string);
    rec.stance = root.attribute("stance").map(str::to_string);

    let mut adus = Vec::new();
    let mut seg = BTreeMap::new();
    let mut edges = Vec::new();
    for node in root.children().filter(|n| n.is_element()) {
        let attr = |name: &str| {
            node.attribute(name)
                .map(str::to_string)
                .ok_or_else(|| format!("<{}> without {name}", node.tag_name().name()))
        };
        match node.tag_name().name() {
            "edu" => rec.units.push(Unit {
                id: attr("id")?,
                text: node.text().unwrap_or_default().to_string(),
            }),
            "adu" => adus.push((attr("id")?, node.attribute("type").map(str::to_string))),
            "edge" => {
                let (eid, src, trg) = (attr("id")?, attr("src")?, attr("trg")?);
                let kind = attr("type")?;
                if kind == "seg" {
                    seg.insert(trg, src);
                } else {
                    edges.push(Relation {
                        id: eid,
                        source: src,
                        target: trg,
                        relation_type: kind,
                    });
                }
            }
            _ => {}
        }
    }
    for (adu, stance) in adus {
        let unit = seg
            .get(&adu)
            .cloned()
            .ok_or_else(|| format!("adu {adu:?} has no seg edge"))?;
        let is_source = edges.iter().any(|e| e.source == adu);
        rec.components.push(Component {
            id: adu,
            unit,
            label: if is_source { "Premise" } else { "Claim" }.to_string(),
            stance,
        });
    }
    rec.relations = edges;
    Ok(rec)
}

/// Parses MAFALDA entries, either a JSON array or one object per line.
pub fn ingest_mafalda_str(text: &str, source: &str) -> IngestOutcome {
    let mut out = IngestOutcome::default();
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return out;
    }
    if trimmed.starts_with('[') {
        match serde_json::from_str::<Vec<Value>>(trimmed) {
            Ok(entries) => {
                for (i, v) in entries.iter().enumerate() {
                    out.push(source, i, mafalda_entry(v, i));
                }
            }
            Err(e) => out.push(source, 0, Err(format!("malformed JSON array: {e}"))),
        }
        return out;
    }
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec = serde_json::from_str::<Value>(line)
            .map_err(|e| format!("malformed JSON: {e}"))
            .and_then(|v| mafalda_entry(&v, i));
        out.push(source, i, rec);
    }
    out
}

fn mafalda_entry(v: &Value, index: usize) -> std::result::Result<CorpusRecord, String> {
    let text = v.get("text").and_then(Value::as_str).ok_or("entry without text")?;
    let id = match v.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => format!("mafalda_{n}"),
        _ => format!("mafalda_{index:04}"),
    };
    let swl = match v.get("sentences_with_labels") {
        Some(Value::String(s)) => {
            serde_json::from_str::<Value>(s).map_err(|e| format!("malformed sentences_with_labels: {e}"))?
        }
        Some(obj @ Value::Object(_)) => obj.clone(),
        _ => return Err("entry without sentences_with_labels".into()),
    };
    let sentences = swl.as_object().ok_or("sentences_with_labels is not an object")?;

    let mut rec = CorpusRecord::new(id, DatasetId::Mafalda);
    rec.extras.insert("full_text".into(), text.to_string());
    rec.extras.insert("title".into(), mafalda_title(text));
    if let Some(spans) = v.get("labels").filter(|l| !l.is_null()) {
        rec.extras.insert("fallacy_spans".into(), spans.to_string());
    }
    for (i, (sentence, labels)) in sentences.iter().enumerate() {
        let unit = format!("s{}", i + 1);
        rec.units.push(Unit {
            id: unit.clone(),
            text: sentence.clone(),
        });
        let mut seen: Vec<&str> = Vec::new();
        for label in flatten_labels(labels)? {
            if !seen.contains(&label) {
                seen.push(label);
            }
        }
        for (j, label) in seen.into_iter().enumerate() {
            rec.components.push(Component {
                id: format!("{unit}_f{}", j + 1),
                unit: unit.clone(),
                label: label.to_string(),
                stance: None,
            });
        }
    }
    Ok(rec)
}

fn flatten_labels(v: &Value) -> std::result::Result<Vec<&str>, String> {
    match v {
        Value::String(s) => Ok(vec![s.as_str()]),
        Value::Array(items) => {
            let mut out = Vec::new();
            for item in items {
                out.extend(flatten_labels(item)?);
            }
            Ok(out)
        }
        other => Err(format!("unexpected label value {other}")),
    }
}

/// Text between a leading `TITLE:` marker and `POST:`; empty when there is no marker.
fn mafalda_title(text: &str) -> String {
    let Some(rest) = text.trim_start().strip_prefix("TITLE:") else {
        return String::new();
    };
    let end = rest.find("POST:").unwrap_or(rest.len());
    rest[..end].trim().to_string()
}

/// Reads delimited text using a column manifest. One row yields one record.
pub fn ingest_tabular_bytes(bytes: &[u8], m: &TabularManifest, source: &str) -> Result<IngestOutcome> {
    let delim = match m.format {
        TabularFormat::Csv => b',',
        TabularFormat::Tsv => b'\t',
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delim)
        .flexible(true)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| Error::Manifest(format!("{source}: unreadable header: {e}")))?
        .clone();
    let mut columns = BTreeMap::new();
    for (role, col) in &m.column_map {
        let idx = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::Manifest(format!("column {col:?} (role {role}) not in header")))?;
        columns.insert(role.as_str(), idx);
    }

    let mut out = IngestOutcome::default();
    for (i, row) in reader.records().enumerate() {
        let rec = row
            .map_err(|e| format!("malformed row: {e}"))
            .and_then(|row| tabular_row(&row, &columns, m, i));
        out.push(source, i, rec);
    }
    Ok(out)
}

fn tabular_row(
    row: &csv::StringRecord,
    columns: &BTreeMap<&str, usize>,
    m: &TabularManifest,
    index: usize,
) -> std::result::Result<CorpusRecord, String> {
    let cell = |role: &str| -> std::result::Result<Option<String>, String> {
        match columns.get(role) {
            None => Ok(None),
            Some(&i) => row
                .get(i)
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| format!("row has no value for {role}")),
        }
    };
    let required = |role: &str| -> std::result::Result<Option<String>, String> {
        match cell(role)? {
            Some(v) if v.trim().is_empty() => Err(format!("empty {role}")),
            v => Ok(v),
        }
    };
    let relabel = |raw: String| m.label_map.get(&raw).cloned().unwrap_or(raw);

    let id = cell("id")?
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| format!("{}_{index:06}", m.dataset_id));
    let mut rec = CorpusRecord::new(id, m.dataset_id);
    rec.topic = cell("topic")?;
    rec.stance = cell("stance")?.filter(|s| !s.is_empty()).map(relabel);
    for role in ["claim", "full_text", "title"] {
        if let Some(v) = cell(role)? {
            rec.extras.insert(role.to_string(), v);
        }
    }
    for role in columns.keys() {
        if let Some(dim) = role.strip_prefix("quality:") {
            if let Some(v) = cell(role)?.filter(|s| !s.is_empty()) {
                rec.extras.insert(format!("quality:{dim}"), relabel(v));
            }
        } else if let Some(name) = role.strip_prefix("extra:") {
            if let Some(v) = cell(role)? {
                rec.extras.insert(name.to_string(), v);
            }
        }
    }

    if let Some(sentence) = required("sentence")? {
        rec.units.push(Unit {
            id: "u1".into(),
            text: sentence,
        });
        if let Some(label) = required("label")? {
            rec.components.push(Component {
                id: "c1".into(),
                unit: "u1".into(),
                label: relabel(label),
                stance: None,
            });
        }
    }
    if let (Some(src), Some(trg)) = (required("source")?, required("target")?) {
        rec.units.push(Unit {
            id: "src".into(),
            text: src,
        });
        rec.units.push(Unit {
            id: "trg".into(),
            text: trg,
        });
        for (c, u) in [("a_src", "src"), ("a_trg", "trg")] {
            rec.components.push(Component {
                id: c.into(),
                unit: u.into(),
                label: "argument".into(),
                stance: None,
            });
        }
        if let Some(kind) = required("relation")? {
            rec.relations.push(Relation {
                id: "r1".into(),
                source: "a_src".into(),
                target: "a_trg".into(),
                relation_type: relabel(kind),
            });
        }
    }
    Ok(rec)
}
