//! Task-vector merging of fine-tuned checkpoints.

mod ops;
mod preset;
mod tensor;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ops::{
    check_della, check_density, combine, dare, della, keep_probabilities, task_vector, Accumulator, Delta, TaskVector,
};
pub use preset::{
    classify_difficulty, default_tiers, emit_preset, DifficultyTier, MergeMethod, MergePreset, TierAssignment,
    TierParams, TierThresholds, PRESET_NAMES,
};
pub use tensor::{load_model, save_model, DType, Tensor, TensorMap};

use crate::labels::TaskId;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedInput {
    pub task: TaskId,
    pub path: PathBuf,
    pub sha256: String,
    pub tier: DifficultyTier,
    pub params: TierParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeManifest {
    pub preset: MergePreset,
    pub seed: u64,
    pub base: PathBuf,
    pub base_sha256: String,
    pub models: Vec<MergedInput>,
    pub output: PathBuf,
    pub output_sha256: String,
}

fn file_digest(path: &Path) -> Result<(Vec<u8>, String)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let d = hex::encode(Sha256::digest(&bytes));
    Ok((bytes, d))
}

/// Prunes one task vector with the parameters of its tier.
pub fn process(tv: &TaskVector, params: TierParams, method: MergeMethod, seed: u64) -> Result<TaskVector> {
    match (method, params.eps) {
        (MergeMethod::Della, Some(eps)) => della(tv, params.rho, eps, seed),
        (MergeMethod::Della, None) => Err(Error::InvalidParam("DELLA needs eps".into())),
        (MergeMethod::Dare, _) => dare(tv, params.rho, seed),
    }
}

/// Loads every input, prunes each task vector, combines, and writes `out` plus
/// `<out>.manifest.json`. Nothing is written if any input fails to load.
pub fn merge_run(
    base_path: &Path,
    models: &BTreeMap<TaskId, PathBuf>,
    preset: &MergePreset,
    tiers: &TierAssignment,
    seed: u64,
    out: &Path,
) -> Result<MergeManifest> {
    preset.validate()?;
    if models.is_empty() {
        return Err(Error::InvalidParam("no fine-tuned models given".into()));
    }
    let (base_bytes, base_sha256) = file_digest(base_path)?;
    let base = TensorMap::from_bytes(&base_bytes)?;
    let mut acc = Accumulator::new(base.clone());
    let mut inputs = Vec::new();
    for (task, path) in models {
        let (bytes, sha256) = file_digest(path)?;
        let tuned = TensorMap::from_bytes(&bytes)?;
        let tier = *tiers
            .get(task)
            .ok_or_else(|| Error::InvalidParam(format!("no difficulty tier for {task}")))?;
        let params = preset.tier(tier);
        let tv = task_vector(&base, &tuned, task.as_str())?;
        let pruned = process(&tv, params, preset.method, seed)?;
        acc.add(&pruned, params.w)?;
        log::info!("merged {task} ({tier}) rho={} w={}", params.rho, params.w);
        inputs.push(MergedInput {
            task: *task,
            path: path.clone(),
            sha256,
            tier,
            params,
        });
    }
    let merged = acc.finish()?;
    let bytes = merged.to_bytes()?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(out, &bytes).map_err(|e| Error::io(out, e))?;
    let manifest = MergeManifest {
        preset: preset.clone(),
        seed,
        base: base_path.to_path_buf(),
        base_sha256,
        models: inputs,
        output: out.to_path_buf(),
        output_sha256: hex::encode(Sha256::digest(&bytes)),
    };
    let mpath = manifest_path(out);
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
