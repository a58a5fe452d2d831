//! Precision / recall / F1 over parsed predictions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::corpus::TaskInstance;
use crate::labels::TaskId;
use crate::parser::Prediction;
use crate::{Error, Result};

/// Column order of the report table.
pub const REPORT_COLUMNS: [&str; 9] = ["ACC", "CD", "ED", "AR", "ET", "SD", "FD_Single", "FD_Multi", "AQ"];

pub const DEFAULT_MULTI_K: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Per-label counts. An unparsable prediction is a false positive of a reserved
/// non-label (tracked in `n_unparsable`) plus a false negative of the gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTable {
    pub task: TaskId,
    pub counts: BTreeMap<String, LabelCounts>,
    pub n_instances: u64,
    pub n_unparsable: u64,
}

fn ratio(num: u64, den: u64) -> Ratio<u64> {
    if den == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(num, den)
    }
}

pub fn f1_of(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl ConfusionTable {
    pub fn new(task: TaskId) -> Self {
        ConfusionTable {
            task,
            counts: task
                .labels()
                .iter()
                .map(|l| (l.to_string(), LabelCounts::default()))
                .collect(),
            n_instances: 0,
            n_unparsable: 0,
        }
    }

    /// Records one instance. `pred` is `None` when unparsable.
    pub fn add(&mut self, gold: &str, pred: Option<&str>) {
        self.n_instances += 1;
        match pred {
            Some(p) if p == gold => self.entry(gold).tp += 1,
            Some(p) => {
                self.entry(gold).fn_ += 1;
                self.entry(p).fp += 1;
            }
            None => {
                self.entry(gold).fn_ += 1;
                self.n_unparsable += 1;
            }
        }
    }

    fn entry(&mut self, label: &str) -> &mut LabelCounts {
        self.counts.entry(label.to_string()).or_default()
    }

    /// Counts are additive, so partial tables merge in any order.
    pub fn merge(&mut self, other: &ConfusionTable) {
        for (l, c) in &other.counts {
            let e = self.entry(l);
            e.tp += c.tp;
            e.fp += c.fp;
            e.fn_ += c.fn_;
        }
        self.n_instances += other.n_instances;
        self.n_unparsable += other.n_unparsable;
    }

    fn sums(&self) -> (u64, u64, u64) {
        self.counts
            .values()
            .fold((0, self.n_unparsable, 0), |(tp, fp, fn_), c| {
                (tp + c.tp, fp + c.fp, fn_ + c.fn_)
            })
    }

    pub fn micro_precision(&self) -> Ratio<u64> {
        let (tp, fp, _) = self.sums();
        ratio(tp, tp + fp)
    }

    pub fn micro_recall(&self) -> Ratio<u64> {
        let (tp, _, fn_) = self.sums();
        ratio(tp, tp + fn_)
    }

    pub fn micro_f1(&self) -> Ratio<u64> {
        let (tp, fp, fn_) = self.sums();
        ratio(2 * tp, 2 * tp + fp + fn_)
    }

    /// Unweighted mean of per-label F1 over labels that occur as gold or prediction.
    pub fn macro_f1(&self) -> f64 {
        let active: Vec<&LabelCounts> = self.counts.values().filter(|c| c.tp + c.fp + c.fn_ > 0).collect();
        if active.is_empty() {
            return 0.0;
        }
        active
            .iter()
            .map(|c| to_f64(ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_)))
            .sum::<f64>()
            / active.len() as f64
    }

    pub fn score(&self) -> TaskScore {
        TaskScore {
            precision: to_f64(self.micro_precision()),
            recall: to_f64(self.micro_recall()),
            f1: to_f64(self.micro_f1()),
            macro_f1: Some(self.macro_f1()),
            n: self.n_instances,
            unparsable: to_f64(ratio(self.n_unparsable, self.n_instances)),
        }
    }
}

/// Pairs predictions with gold instances by id.
fn pair_up<'a>(preds: &'a [Prediction], golds: &'a [TaskInstance]) -> Result<Vec<(&'a Prediction, &'a TaskInstance)>> {
    let by_id: HashMap<&str, &TaskInstance> = golds.iter().map(|g| (g.id.as_str(), g)).collect();
    if by_id.len() != golds.len() {
        return Err(Error::IdMismatch("duplicate gold ids".into()));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(preds.len());
    for p in preds {
        let g = by_id
            .get(p.id.as_str())
            .ok_or_else(|| Error::IdMismatch(format!("prediction {} has no gold instance", p.id)))?;
        if !seen.insert(p.id.as_str()) {
            return Err(Error::IdMismatch(format!("duplicate prediction {}", p.id)));
        }
        out.push((p, *g));
    }
    if let Some(missing) = golds.iter().find(|g| !seen.contains(g.id.as_str())) {
        return Err(Error::IdMismatch(format!("no prediction for {}", missing.id)));
    }
    Ok(out)
}

/// Single-label scoring: one prediction per instance, singleton gold.
pub fn score_single(preds: &[Prediction], golds: &[TaskInstance], task: TaskId) -> Result<ConfusionTable> {
    let mut table = ConfusionTable::new(task);
    for (p, g) in pair_up(preds, golds)? {
        if g.gold.len() != 1 {
            return Err(Error::InvalidRecord {
                id: g.id.clone(),
                reason: format!("expected one gold label, found {}", g.gold.len()),
            });
        }
        table.add(&g.gold[0], p.label.as_deref());
    }
    Ok(table)
}

/// FD instances with exactly one gold fallacy.
pub fn fd_single_subset(golds: &[TaskInstance]) -> Vec<TaskInstance> {
    golds.iter().filter(|g| g.gold.len() == 1).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiPrediction {
    pub id: String,
    /// One entry per completion; `None` is an unparsable completion.
    pub predictions: Vec<Option<String>>,
    pub gold: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n: u64,
}

/// Per-instance (precision, recall) after deduplicating predictions.
pub fn multi_instance_scores(m: &MultiPrediction) -> (Ratio<u64>, Ratio<u64>) {
    let distinct: BTreeSet<&Option<String>> = m.predictions.iter().collect();
    if distinct.is_empty() || m.gold.is_empty() {
        return (Ratio::from_integer(0), Ratio::from_integer(0));
    }
    let hits = distinct
        .iter()
        .filter(|p| p.as_ref().is_some_and(|l| m.gold.contains(l)))
        .count() as u64;
    (ratio(hits, distinct.len() as u64), ratio(hits, m.gold.len() as u64))
}

/// Instance-averaged precision and recall; F1 is their harmonic mean.
pub fn score_fd_multi(multi: &[MultiPrediction]) -> MultiScore {
    if multi.is_empty() {
        return MultiScore {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            n: 0,
        };
    }
    let (mut p, mut r) = (Ratio::<u128>::from_integer(0), Ratio::<u128>::from_integer(0));
    for m in multi {
        let (pi, ri) = multi_instance_scores(m);
        p += Ratio::new(*pi.numer() as u128, *pi.denom() as u128);
        r += Ratio::new(*ri.numer() as u128, *ri.denom() as u128);
    }
    let n = multi.len() as u128;
    let p = p / n;
    let r = r / n;
    let (p, r) = (
        *p.numer() as f64 / *p.denom() as f64,
        *r.numer() as f64 / *r.denom() as f64,
    );
    MultiScore {
        precision: p,
        recall: r,
        f1: f1_of(p, r),
        n: multi.len() as u64,
    }
}

/// Builds multi-prediction inputs from FD predictions (primary label plus samples).
pub fn multi_from_predictions(preds: &[Prediction], golds: &[TaskInstance]) -> Result<Vec<MultiPrediction>> {
    Ok(pair_up(preds, golds)?
        .into_iter()
        .map(|(p, g)| MultiPrediction {
            id: p.id.clone(),
            predictions: std::iter::once(p.label.clone())
                .chain(p.samples.iter().cloned())
                .collect(),
            gold: g.gold.iter().cloned().collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_f1: Option<f64>,
    pub n: u64,
    pub unparsable: f64,
}

impl From<MultiScore> for TaskScore {
    fn from(m: MultiScore) -> Self {
        TaskScore {
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            macro_f1: None,
            n: m.n,
            unparsable: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub model: String,
    pub mode: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
}

/// Scores keyed by report column (`FD_Single` / `FD_Multi` for fallacies).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EvalReport {
    pub tasks: BTreeMap<String, TaskScore>,
}

impl EvalReport {
    pub fn insert(&mut self, column: &str, score: TaskScore) {
        self.tasks.insert(column.to_string(), score);
    }

    pub fn to_json(&self) -> Result<String> {
        if self.tasks.is_empty() {
            return Err(Error::EmptyReport);
        }
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.json`, `report.txt` and `report.meta.json` into `dir`.
    pub fn write(&self, dir: &std::path::Path, row_name: &str, meta: &ReportMeta) -> Result<()> {
        let json = self.to_json()?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        put("report.json", json)?;
        put("report.txt", render_table(&[(row_name, self)]))?;
        put("report.meta.json", serde_json::to_string_pretty(meta)?)
    }
}

/// F1 × 100 per column, one row per model; blank where a column was not scored.
pub fn render_table(rows: &[(&str, &EvalReport)]) -> String {
    let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Model".len());
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "Model");
    for c in REPORT_COLUMNS {
        let _ = write!(out, " {c:>9}");
    }
    out.push('\n');
    for (name, report) in rows {
        let _ = write!(out, "{name:<name_w$}");
        for c in REPORT_COLUMNS {
            match report.tasks.get(c) {
                Some(s) => {
                    let _ = write!(out, " {:>9.2}", s.f1 * 100.0);
                }
                None => {
                    let _ = write!(out, " {:>9}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
