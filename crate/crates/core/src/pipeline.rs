//! Run directories, stage bookkeeping and the stage functions behind the CLI.
//!
//! Layout under a run directory:
//!
//! ```text
//! manifest.json
//! corpus/<dataset>.jsonl            ingest
//! instances/<TASK>.jsonl            extract
//! splits/<TASK>/{train,val,test}.jsonl
//! sampled/<TASK>/{train,val,test}.jsonl
//! prompts/<TASK>.<mode>.jsonl       render
//! generations/<TASK>.<mode>.jsonl   infer
//! predictions/<TASK>.<mode>.jsonl   score
//! reports/<mode>/report.{json,txt}
//! train/<TASK>.jsonl, recipes/*.json
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::client::{run_batch, Client, EndpointConfig, GenerationRecord};
use crate::corpus::{self, Adapter, RelationMap, TabularManifest, TaskInstance};
use crate::jsonl;
use crate::labels::{DatasetId, TaskId};
use crate::metrics::{self, EvalReport, ReportMeta};
use crate::parser::{self, Prediction};
use crate::prompt::{self, answer_line, FewShotBundle, PromptMode, PromptTemplate};
use crate::sampler::{self, ClassCountTable, Split};
use crate::{Error, Result};

pub const TOOL_VERSION: &str = concat!("argmine ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub params: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub stages: BTreeMap<String, StageEntry>,
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            stages: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    Skipped,
}

/// SHA-256 of a file, or of a directory's sorted (relative path, contents) pairs.
pub fn digest_path(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        for f in files {
            let rel = f.strip_prefix(path).unwrap_or(&f);
            h.update(rel.to_string_lossy().as_bytes());
            h.update([0]);
            h.update(std::fs::read(&f).map_err(|e| Error::io(&f, e))?);
        }
    } else {
        h.update(std::fs::read(path).map_err(|e| Error::io(path, e))?);
    }
    Ok(hex::encode(h.finalize()))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// A run directory and its manifest.
pub struct Run {
    pub dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Run> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mpath = dir.join("manifest.json");
        let manifest = if mpath.exists() {
            let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", mpath.display())))?
        } else {
            RunManifest::default()
        };
        Ok(Run { dir, manifest })
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.dir.join(rel)
    }

    fn display(&self, p: &Path) -> String {
        p.strip_prefix(&self.dir).unwrap_or(p).to_string_lossy().into_owned()
    }

    fn digests(&self, paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
        paths
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: self.display(p),
                    sha256: digest_path(p)?,
                })
            })
            .collect()
    }

    fn save(&self) -> Result<()> {
        let p = self.dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&self.manifest)? + "\n";
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    }

    /// Runs `work` unless the manifest already holds this stage with the same params,
    /// the same input checksums, and outputs that are still intact.
    pub fn stage(
        &mut self,
        key: &str,
        params: Value,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
        work: impl FnOnce() -> Result<()>,
    ) -> Result<StageStatus> {
        let in_digests = self.digests(inputs)?;
        if let Some(prev) = self.manifest.stages.get(key) {
            let outputs_intact =
                outputs.iter().all(|p| p.exists()) && self.digests(outputs).map(|d| d == prev.outputs).unwrap_or(false);
            if prev.params == params && prev.inputs == in_digests && outputs_intact {
                log::info!("{key}: up to date");
                return Ok(StageStatus::Skipped);
            }
        }
        for p in outputs {
            if let Some(d) = p.parent() {
                std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            }
        }
        work()?;
        let entry = StageEntry {
            params,
            inputs: in_digests,
            outputs: self.digests(outputs)?,
        };
        self.manifest.stages.insert(key.to_string(), entry);
        self.save()?;
        Ok(StageStatus::Ran)
    }

    pub fn corpus_file(&self, d: DatasetId) -> PathBuf {
        self.path(format!("corpus/{d}.jsonl"))
    }

    pub fn instances_file(&self, t: TaskId) -> PathBuf {
        self.path(format!("instances/{t}.jsonl"))
    }

    pub fn split_file(&self, t: TaskId, s: Split) -> PathBuf {
        self.path(format!("splits/{t}/{s}.jsonl"))
    }

    pub fn sampled_file(&self, t: TaskId, s: Split) -> PathBuf {
        self.path(format!("sampled/{t}/{s}.jsonl"))
    }

    pub fn bundle_file(&self, t: TaskId) -> PathBuf {
        self.path(format!("bundles/{t}.json"))
    }

    pub fn prompts_file(&self, t: TaskId, m: PromptMode) -> PathBuf {
        self.path(format!("prompts/{t}.{m}.jsonl"))
    }

    pub fn generations_file(&self, t: TaskId, m: PromptMode) -> PathBuf {
        self.path(format!("generations/{t}.{m}.jsonl"))
    }

    pub fn predictions_file(&self, t: TaskId, m: PromptMode) -> PathBuf {
        self.path(format!("predictions/{t}.{m}.jsonl"))
    }

    pub fn report_dir(&self, m: PromptMode) -> PathBuf {
        self.path(format!("reports/{m}"))
    }
}

/// One raw input for `ingest`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub dataset: DatasetId,
    pub path: PathBuf,
    /// Column manifest for delimited-text datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

pub fn ingest(run: &mut Run, source: &SourceSpec) -> Result<StageStatus> {
    let manifest = source.manifest.as_ref().map(TabularManifest::load).transpose()?;
    let adapter = Adapter::for_dataset(source.dataset, manifest)?;
    let out = run.corpus_file(source.dataset);
    let rejects = run.path(format!("corpus/{}.rejects.jsonl", source.dataset));
    let mut inputs = vec![source.path.clone()];
    inputs.extend(source.manifest.clone());
    let params = json!({"dataset": source.dataset});
    let (o, r) = (out.clone(), rejects.clone());
    run.stage(
        &format!("ingest:{}", source.dataset),
        params,
        &inputs,
        &[out, rejects],
        || {
            let outcome = corpus::ingest(&source.path, &adapter)?;
            log::info!(
                "{}: {} records, {} rejected",
                source.dataset,
                outcome.records.len(),
                outcome.rejects.len()
            );
            jsonl::write_jsonl(&o, &outcome.records)?;
            jsonl::write_jsonl(&r, &outcome.rejects)
        },
    )
}

pub fn extract(run: &mut Run, task: TaskId, relation_map: Option<&Path>) -> Result<StageStatus> {
    let mut inputs: Vec<PathBuf> = task
        .datasets()
        .iter()
        .map(|d| run.corpus_file(*d))
        .filter(|p| p.exists())
        .collect();
    if inputs.is_empty() {
        return Err(Error::Config(format!("no ingested corpus feeds {task}")));
    }
    let map = match relation_map {
        Some(p) => {
            inputs.push(p.to_path_buf());
            RelationMap::load(p)?
        }
        None => RelationMap::default(),
    };
    let out = run.instances_file(task);
    let skipped = run.path(format!("instances/{task}.skipped.jsonl"));
    let (o, s, corpora) = (out.clone(), skipped.clone(), inputs.clone());
    run.stage(
        &format!("extract:{task}"),
        json!({"task": task}),
        &inputs,
        &[out, skipped],
        || {
            let mut records = Vec::new();
            for p in corpora.iter().filter(|p| p.extension().is_some_and(|e| e == "jsonl")) {
                records.extend(jsonl::read_jsonl::<corpus::CorpusRecord>(p)?);
            }
            let outcome = corpus::extract_with(&records, task, &map);
            log::info!(
                "{task}: {} instances, {} skipped",
                outcome.instances.len(),
                outcome.skipped.len()
            );
            jsonl::write_jsonl(&o, &outcome.instances)?;
            jsonl::write_jsonl(&s, &outcome.skipped)
        },
    )
}

pub fn split(run: &mut Run, task: TaskId, seed: u64) -> Result<StageStatus> {
    let input = run.instances_file(task);
    let assignment = run.path(format!("splits/{task}/assignment.json"));
    let mut outputs: Vec<PathBuf> = Split::ALL.iter().map(|s| run.split_file(task, *s)).collect();
    outputs.push(assignment.clone());
    let files = outputs.clone();
    run.stage(
        &format!("split:{task}"),
        json!({"seed": seed}),
        std::slice::from_ref(&input),
        &outputs,
        || {
            let instances: Vec<TaskInstance> = jsonl::read_jsonl(&input)?;
            let manifests = sampler::split_by_dataset(&instances, seed)?;
            let parts = sampler::partition(&instances, &manifests);
            for (k, s) in Split::ALL.iter().enumerate() {
                jsonl::write_jsonl(&files[k], &parts[s])?;
            }
            std::fs::write(&assignment, serde_json::to_string_pretty(&manifests)?)
                .map_err(|e| Error::io(&assignment, e))
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSizes {
    pub train: u64,
    pub val: u64,
    pub test: u64,
}

impl Default for SampleSizes {
    fn default() -> Self {
        SampleSizes {
            train: sampler::DEFAULT_N_TRAIN,
            val: sampler::DEFAULT_N_VAL,
            test: sampler::DEFAULT_N_TEST,
        }
    }
}

impl SampleSizes {
    pub fn get(&self, s: Split) -> u64 {
        match s {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }
}

/// Largest `n <= wanted` that keeps every class target within its population.
fn capped(counts: &ClassCountTable, wanted: u64) -> u64 {
    let classes = counts.classes();
    let Some(min) = classes.iter().map(|c| counts.class_total(c)).min() else {
        return wanted;
    };
    wanted.min(min * classes.len() as u64)
}

/// Draws the balanced sample of every split. With `cap`, sizes shrink to what the
/// smallest class allows instead of failing.
pub fn sample(run: &mut Run, task: TaskId, sizes: SampleSizes, seed: u64, cap: bool) -> Result<StageStatus> {
    let inputs: Vec<PathBuf> = Split::ALL.iter().map(|s| run.split_file(task, *s)).collect();
    let plan_file = run.path(format!("sampled/{task}/plan.json"));
    let mut outputs: Vec<PathBuf> = Split::ALL.iter().map(|s| run.sampled_file(task, *s)).collect();
    outputs.push(plan_file.clone());
    let files = outputs.clone();
    let params = json!({"sizes": sizes, "seed": seed, "cap": cap});
    run.stage(&format!("sample:{task}"), params, &inputs.clone(), &outputs, || {
        let mut plans = BTreeMap::new();
        for (k, s) in Split::ALL.iter().enumerate() {
            let population: Vec<TaskInstance> = jsonl::read_jsonl(&inputs[k])?;
            let counts = ClassCountTable::from_instances(task, &population);
            let n = if cap {
                capped(&counts, sizes.get(*s))
            } else {
                sizes.get(*s)
            };
            let plan = sampler::plan(&counts, n)?;
            let drawn = sampler::draw(&population, &plan, *s, seed)?;
            jsonl::write_jsonl(&files[k], &drawn)?;
            plans.insert(s.as_str(), plan);
        }
        std::fs::write(&plan_file, serde_json::to_string_pretty(&plans)?).map_err(|e| Error::io(&plan_file, e))
    })
}

fn template_for(task: TaskId, path: Option<&Path>) -> Result<PromptTemplate> {
    match path {
        Some(p) => {
            let body = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            PromptTemplate::parse(task, &body)
        }
        None => Ok(PromptTemplate::builtin(task)),
    }
}

fn load_bundle(run: &Run, task: TaskId, mode: PromptMode) -> Result<Option<FewShotBundle>> {
    if mode == PromptMode::Zero {
        return Ok(None);
    }
    let p = run.bundle_file(task);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(Some(serde_json::from_str(&text)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub id: String,
    pub prompt: String,
    pub prompt_sha256: String,
}

/// Renders the sampled test split. Few-shot mode first builds the example bundle
/// from the sampled training split.
pub fn render(
    run: &mut Run,
    task: TaskId,
    mode: PromptMode,
    seed: u64,
    template: Option<&Path>,
) -> Result<StageStatus> {
    let tpl = template_for(task, template)?;
    let test = run.sampled_file(task, Split::Test);
    let train = run.sampled_file(task, Split::Train);
    let mut inputs = vec![test.clone()];
    let mut outputs = vec![run.prompts_file(task, mode)];
    if mode == PromptMode::Few {
        inputs.push(train.clone());
        outputs.push(run.bundle_file(task));
    }
    let params = json!({"mode": mode, "seed": seed, "template_sha256": tpl.checksum()});
    let files = outputs.clone();
    run.stage(&format!("render:{task}:{mode}"), params, &inputs, &outputs, || {
        let bundle = if mode == PromptMode::Few {
            let train: Vec<TaskInstance> = jsonl::read_jsonl(&train)?;
            let b = prompt::build_bundle(&train, task, seed)?;
            std::fs::write(&files[1], serde_json::to_string_pretty(&b)?).map_err(|e| Error::io(&files[1], e))?;
            Some(b)
        } else {
            None
        };
        let instances: Vec<TaskInstance> = jsonl::read_jsonl(&test)?;
        let prompts = instances
            .iter()
            .map(|i| {
                let text = tpl.render(i, mode, bundle.as_ref())?;
                Ok(RenderedPrompt {
                    id: i.id.clone(),
                    prompt_sha256: crate::client::prompt_sha256(&text),
                    prompt: text,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        jsonl::write_jsonl(&files[0], &prompts)
    })
}

/// Sends the rendered test prompts. Resumes from a partial generations file; any
/// instance that still fails makes the stage return an error after writing.
pub fn infer(
    run: &mut Run,
    task: TaskId,
    mode: PromptMode,
    endpoint: &EndpointConfig,
    template: Option<&Path>,
) -> Result<StageStatus> {
    let tpl = template_for(task, template)?;
    let test = run.sampled_file(task, Split::Test);
    let mut inputs = vec![test.clone(), run.prompts_file(task, mode)];
    if mode == PromptMode::Few {
        inputs.push(run.bundle_file(task));
    }
    let out = run.generations_file(task, mode);
    let bundle = load_bundle(run, task, mode)?;
    let params = json!({"mode": mode, "endpoint": endpoint, "template_sha256": tpl.checksum()});
    let o = out.clone();
    run.stage(&format!("infer:{task}:{mode}"), params, &inputs, &[out], || {
        let instances: Vec<TaskInstance> = jsonl::read_jsonl(&test)?;
        let client = Client::new(endpoint.clone())?;
        let outcome = run_batch(&client, &instances, &tpl, mode, bundle.as_ref(), Some(&o))?;
        log::info!(
            "{task}: {} requested, {} failed",
            outcome.requested,
            outcome.failures.len()
        );
        if outcome.failures.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{task}: {} of {} requests failed (see {}); re-run to retry them",
                outcome.failures.len(),
                outcome.records.len(),
                crate::client::failures_path(&o).display()
            )))
        }
    })
}

/// Parses generations into predictions.
pub fn predictions_from(records: &[GenerationRecord]) -> Vec<Prediction> {
    records
        .iter()
        .map(|r| {
            let mut p = parser::parse(&r.id, r.task, r.raw_text.as_deref().unwrap_or(""));
            p.samples = r
                .samples
                .iter()
                .map(|s| parser::normalize(&parser::extract(s).text, r.task).label)
                .collect();
            p
        })
        .collect()
}

/// Scores one task; FD yields both the single-gold and multi-gold columns.
pub fn score_task(
    task: TaskId,
    preds: &[Prediction],
    golds: &[TaskInstance],
) -> Result<Vec<(String, metrics::TaskScore)>> {
    if task != TaskId::Fd {
        let t = metrics::score_single(preds, golds, task)?;
        return Ok(vec![(task.to_string(), t.score())]);
    }
    let single_gold = metrics::fd_single_subset(golds);
    let ids: std::collections::HashSet<&str> = single_gold.iter().map(|g| g.id.as_str()).collect();
    let single_preds: Vec<Prediction> = preds.iter().filter(|p| ids.contains(p.id.as_str())).cloned().collect();
    let single = metrics::score_single(&single_preds, &single_gold, task)?;
    let multi = metrics::score_fd_multi(&metrics::multi_from_predictions(preds, golds)?);
    Ok(vec![
        ("FD_Single".into(), single.score()),
        ("FD_Multi".into(), multi.into()),
    ])
}

/// Parses and scores every selected task, then writes the report.
pub fn score(run: &mut Run, tasks: &[TaskId], mode: PromptMode, model: &str, seed: u64) -> Result<StageStatus> {
    let started = now_unix();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for t in tasks {
        inputs.push(run.generations_file(*t, mode));
        inputs.push(run.sampled_file(*t, Split::Test));
        outputs.push(run.predictions_file(*t, mode));
    }
    let rdir = run.report_dir(mode);
    outputs.push(rdir.join("report.json"));
    outputs.push(rdir.join("report.txt"));
    let params = json!({"tasks": tasks, "mode": mode, "model": model});
    let (ins, outs) = (inputs.clone(), outputs.clone());
    run.stage(&format!("score:{mode}"), params, &inputs, &outputs, || {
        let mut report = EvalReport::default();
        for (k, t) in tasks.iter().enumerate() {
            let records: Vec<GenerationRecord> = jsonl::read_jsonl(&ins[2 * k])?;
            let golds: Vec<TaskInstance> = jsonl::read_jsonl(&ins[2 * k + 1])?;
            let preds = predictions_from(&records);
            jsonl::write_jsonl(&outs[k], &preds)?;
            for (col, s) in score_task(*t, &preds, &golds)? {
                report.insert(&col, s);
            }
        }
        let meta = ReportMeta {
            model: model.to_string(),
            mode: mode.to_string(),
            seed,
            started_unix: started,
            finished_unix: now_unix(),
        };
        report.write(&rdir, model, &meta)
    })
}

/// Scores a directory holding `<TASK>.gold.jsonl` next to `<TASK>.predictions.jsonl`
/// (or `<TASK>.generations.jsonl`). The report is written into the same directory.
pub fn score_dir(dir: &Path, model: &str) -> Result<EvalReport> {
    let started = now_unix();
    let mut report = EvalReport::default();
    for task in TaskId::ALL {
        let gold = dir.join(format!("{task}.gold.jsonl"));
        if !gold.exists() {
            continue;
        }
        let golds: Vec<TaskInstance> = jsonl::read_jsonl(&gold)?;
        let pred_path = dir.join(format!("{task}.predictions.jsonl"));
        let gen_path = dir.join(format!("{task}.generations.jsonl"));
        let preds: Vec<Prediction> = if pred_path.exists() {
            jsonl::read_jsonl(&pred_path)?
        } else if gen_path.exists() {
            predictions_from(&jsonl::read_jsonl::<GenerationRecord>(&gen_path)?)
        } else {
            return Err(Error::Config(format!(
                "{} has gold but no predictions for {task}",
                dir.display()
            )));
        };
        for (col, s) in score_task(task, &preds, &golds)? {
            report.insert(&col, s);
        }
    }
    let meta = ReportMeta {
        model: model.to_string(),
        mode: "external".into(),
        seed: 0,
        started_unix: started,
        finished_unix: now_unix(),
    };
    report.write(dir, model, &meta)?;
    Ok(report)
}

fn default_epochs() -> u32 {
    2
}
fn default_batch() -> u32 {
    32
}
fn default_rank() -> u32 {
    16
}

/// Hand-off to an external LoRA trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecipe {
    pub base_model: String,
    #[serde(default = "default_epochs")]
    pub epochs: u32,
    #[serde(default = "default_batch")]
    pub batch_size: u32,
    #[serde(default = "default_rank")]
    pub adapter_rank: u32,
    pub multi_task: bool,
    pub tasks: Vec<TaskId>,
    /// `{prompt, completion}` JSONL files.
    pub data_paths: Vec<PathBuf>,
}

impl TrainRecipe {
    pub fn new(base_model: &str, tasks: Vec<TaskId>, multi_task: bool) -> Self {
        TrainRecipe {
            base_model: base_model.to_string(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            adapter_rank: default_rank(),
            multi_task,
            tasks,
            data_paths: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainExample {
    pub id: String,
    pub task: TaskId,
    pub prompt: String,
    pub completion: String,
}

/// Writes zero-shot training pairs for each task's sampled train split and a recipe
/// listing them: one recipe per task, or a single multi-task recipe.
pub fn train_recipe(run: &mut Run, tasks: &[TaskId], multi_task: bool, base_model: &str) -> Result<Vec<PathBuf>> {
    if tasks.is_empty() {
        return Err(Error::Config("no tasks selected for the training recipe".into()));
    }
    for t in tasks {
        let p = run.sampled_file(*t, Split::Train);
        if !p.exists() {
            return Err(Error::Config(format!("missing sampled train file {}", p.display())));
        }
    }
    let mut data = Vec::new();
    for t in tasks {
        let input = run.sampled_file(*t, Split::Train);
        let out = run.path(format!("train/{t}.jsonl"));
        let o = out.clone();
        let task = *t;
        run.stage(
            &format!("train-data:{t}"),
            json!({"mode": "zero"}),
            std::slice::from_ref(&input),
            std::slice::from_ref(&out),
            || {
                let tpl = PromptTemplate::builtin(task);
                let instances: Vec<TaskInstance> = jsonl::read_jsonl(&input)?;
                let examples = instances
                    .iter()
                    .map(|i| {
                        Ok(TrainExample {
                            id: i.id.clone(),
                            task,
                            prompt: tpl.render(i, PromptMode::Zero, None)?,
                            completion: answer_line(i.primary_label()),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                jsonl::write_jsonl(&o, &examples)
            },
        )?;
        data.push(out);
    }
    let mut written = Vec::new();
    let mut emit = |name: String, tasks: Vec<TaskId>, paths: Vec<PathBuf>, multi: bool| -> Result<()> {
        let mut r = TrainRecipe::new(base_model, tasks, multi);
        r.data_paths = paths;
        let p = run.path(format!("recipes/{name}.json"));
        if let Some(d) = p.parent() {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        std::fs::write(&p, serde_json::to_string_pretty(&r)? + "\n").map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    if multi_task {
        emit("multitask".into(), tasks.to_vec(), data, true)?;
    } else {
        for (t, p) in tasks.iter().zip(data) {
            emit(t.to_string(), vec![*t], vec![p], false)?;
        }
    }
    Ok(written)
}

/// Declarative run configuration; CLI flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run_dir: PathBuf,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub tasks: Vec<TaskId>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub sizes: SampleSizes,
    #[serde(default)]
    pub cap_sizes: bool,
    #[serde(default = "default_mode")]
    pub mode: PromptMode,
    #[serde(default)]
    pub endpoint: Option<EndpointConfig>,
    #[serde(default)]
    pub relation_map: Option<PathBuf>,
    /// Per-task template overrides.
    #[serde(default)]
    pub templates: BTreeMap<TaskId, PathBuf>,
    #[serde(default)]
    pub preset: Option<String>,
}

fn default_mode() -> PromptMode {
    PromptMode::Zero
}

impl RunConfig {
    pub fn new(run_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            run_dir: run_dir.into(),
            sources: Vec::new(),
            tasks: Vec::new(),
            seed: None,
            sizes: SampleSizes::default(),
            cap_sizes: false,
            mode: PromptMode::Zero,
            endpoint: None,
            relation_map: None,
            templates: BTreeMap::new(),
            preset: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.run_dir);
        for s in &mut cfg.sources {
            fix(&mut s.path);
            if let Some(m) = &mut s.manifest {
                fix(m);
            }
        }
        if let Some(m) = &mut cfg.relation_map {
            fix(m);
        }
        cfg.templates.values_mut().for_each(fix);
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required (--seed or \"seed\" in the config)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::Config("task selection is empty".into()));
        }
        let missing = self
            .sources
            .iter()
            .flat_map(|s| std::iter::once(&s.path).chain(s.manifest.as_ref()))
            .chain(self.relation_map.as_ref())
            .chain(self.templates.values())
            .find(|p| !p.exists());
        if let Some(p) = missing {
            return Err(Error::Config(format!("{} does not exist", p.display())));
        }
        if let Some(e) = &self.endpoint {
            e.validate()?;
        }
        if let Some(p) = &self.preset {
            crate::merger::emit_preset(p)?;
        }
        Ok(())
    }

    pub fn template(&self, task: TaskId) -> Option<&Path> {
        self.templates.get(&task).map(PathBuf::as_path)
    }
}

/// Every stage from ingest through score for the configured tasks.
pub fn run_all(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    let endpoint = cfg
        .endpoint
        .as_ref()
        .ok_or_else(|| Error::Config("an endpoint is required for inference".into()))?;
    let mut run = Run::open(&cfg.run_dir)?;
    for s in &cfg.sources {
        ingest(&mut run, s)?;
    }
    for t in &cfg.tasks {
        if !cfg.sources.is_empty() {
            extract(&mut run, *t, cfg.relation_map.as_deref())?;
        }
        split(&mut run, *t, seed)?;
        sample(&mut run, *t, cfg.sizes, seed, cfg.cap_sizes)?;
        render(&mut run, *t, cfg.mode, seed, cfg.template(*t))?;
        infer(&mut run, *t, cfg.mode, endpoint, cfg.template(*t))?;
    }
    score(&mut run, &cfg.tasks, cfg.mode, &endpoint.model, seed)?;
    let p = run.report_dir(cfg.mode).join("report.json");
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(serde_json::from_str(&text)?)
}
