//! Task vectors, random pruning with rescaling, and linear combination.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{Tensor, TensorMap};
use crate::sampler::stream_rng;
use crate::{Error, Result};

/// Values are kept in f64 regardless of the checkpoint dtype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Fine-tuned minus base, per tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskVector {
    pub source: String,
    pub deltas: BTreeMap<String, Delta>,
}

pub fn task_vector(base: &TensorMap, tuned: &TensorMap, source: &str) -> Result<TaskVector> {
    let bad = base.mismatches(tuned);
    if !bad.is_empty() {
        return Err(Error::TensorMismatch(bad));
    }
    let deltas = base
        .tensors
        .iter()
        .map(|(name, b)| {
            let t = &tuned.tensors[name];
            let values = t.to_f64().iter().zip(b.to_f64()).map(|(t, b)| t - b).collect();
            (
                name.clone(),
                Delta {
                    shape: b.shape.clone(),
                    values,
                },
            )
        })
        .collect();
    Ok(TaskVector {
        source: source.to_string(),
        deltas,
    })
}

/// Keeps element `i` when a uniform draw falls below `p[i]`, rescaling by `1/p[i]`.
/// DARE and DELLA both go through here so equal probabilities give equal output.
fn prune_with(delta: &TaskVector, seed: u64, probs: impl Fn(&Delta) -> Vec<f64>) -> TaskVector {
    let deltas = delta
        .deltas
        .iter()
        .map(|(name, d)| {
            let p = probs(d);
            let mut rng = stream_rng(seed, &["prune", &delta.source, name]);
            let values = d
                .values
                .iter()
                .zip(&p)
                .map(|(&x, &p)| {
                    let u: f64 = rng.random();
                    if u < p {
                        x / p
                    } else {
                        0.0
                    }
                })
                .collect();
            (
                name.clone(),
                Delta {
                    shape: d.shape.clone(),
                    values,
                },
            )
        })
        .collect();
    TaskVector {
        source: delta.source.clone(),
        deltas,
    }
}

pub fn check_density(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidParam(format!("density {rho} must be in (0, 1]")));
    }
    Ok(())
}

/// Slack for presets whose upper keep probability lands on 1 up to rounding.
const CLAMP_SLACK: f64 = 1e-9;

pub fn check_della(rho: f64, eps: f64) -> Result<()> {
    check_density(rho)?;
    if eps.is_nan() || eps < 0.0 || rho - eps <= 0.0 || rho + eps > 1.0 + CLAMP_SLACK {
        return Err(Error::InvalidParam(format!(
            "keep-probability range {rho}±{eps} must lie in (0, 1]"
        )));
    }
    Ok(())
}

/// Random drop with probability `1 - rho`, survivors scaled by `1/rho`.
pub fn dare(delta: &TaskVector, rho: f64, seed: u64) -> Result<TaskVector> {
    check_density(rho)?;
    Ok(prune_with(delta, seed, |d| vec![rho; d.values.len()]))
}

/// Linear ramp of keep probabilities over magnitude ranks: `rho - eps` for the
/// smallest |x|, `rho + eps` for the largest, ties broken by index. Clamped to 1.
pub fn keep_probabilities(values: &[f64], rho: f64, eps: f64) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()).then(a.cmp(&b)));
    let mut p = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        let step = if n > 1 { rank as f64 / (n - 1) as f64 } else { 0.5 };
        p[i] = ((rho - eps) + 2.0 * eps * step).min(1.0);
    }
    p
}

/// Magnitude-aware pruning, per tensor.
pub fn della(delta: &TaskVector, rho: f64, eps: f64, seed: u64) -> Result<TaskVector> {
    check_della(rho, eps)?;
    Ok(prune_with(delta, seed, |d| keep_probabilities(&d.values, rho, eps)))
}

/// Running `base + Σ w·delta` in f64; cast to the base dtypes on `finish`.
pub struct Accumulator {
    base: TensorMap,
    sums: BTreeMap<String, Vec<f64>>,
}

impl Accumulator {
    pub fn new(base: TensorMap) -> Self {
        let sums = base.tensors.iter().map(|(k, t)| (k.clone(), t.to_f64())).collect();
        Accumulator { base, sums }
    }

    pub fn add(&mut self, tv: &TaskVector, w: f64) -> Result<()> {
        let mut bad = Vec::new();
        for (name, t) in &self.base.tensors {
            match tv.deltas.get(name) {
                None => bad.push(format!("{name}: missing from {}", tv.source)),
                Some(d) if d.shape != t.shape => bad.push(format!("{name}: shape {:?} vs {:?}", d.shape, t.shape)),
                _ => {}
            }
        }
        bad.extend(
            tv.deltas
                .keys()
                .filter(|k| !self.base.tensors.contains_key(*k))
                .map(|k| format!("{k}: unexpected in {}", tv.source)),
        );
        if !bad.is_empty() {
            return Err(Error::TensorMismatch(bad));
        }
        for (name, sum) in &mut self.sums {
            for (s, d) in sum.iter_mut().zip(&tv.deltas[name].values) {
                *s += w * d;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<TensorMap> {
        let mut out = TensorMap {
            tensors: BTreeMap::new(),
            metadata: self.base.metadata,
        };
        for (name, t) in self.base.tensors {
            let merged = Tensor::from_f64(t.dtype, t.shape, &self.sums[&name])?;
            out.tensors.insert(name, merged);
        }
        Ok(out)
    }
}

pub fn combine(base: &TensorMap, processed: &[(&TaskVector, f64)]) -> Result<TensorMap> {
    let mut acc = Accumulator::new(base.clone());
    for (tv, w) in processed {
        if w.is_nan() || *w < 0.0 {
            return Err(Error::InvalidParam(format!("weight {w} for {} is negative", tv.source)));
        }
        acc.add(tv, *w)?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merger::tensor::DType;

    fn map(entries: &[(&str, Vec<usize>, Vec<f64>)]) -> TensorMap {
        let mut m = TensorMap::default();
        for (n, s, v) in entries {
            m.tensors
                .insert(n.to_string(), Tensor::from_f64(DType::F32, s.clone(), v).unwrap());
        }
        m
    }

    fn tv(values: Vec<f64>) -> TaskVector {
        TaskVector {
            source: "m".into(),
            deltas: [(
                "t".to_string(),
                Delta {
                    shape: vec![values.len()],
                    values,
                },
            )]
            .into(),
        }
    }

    #[test]
    fn identical_models_give_zero_delta() {
        let b = map(&[("a", vec![2], vec![1.0, 2.0])]);
        let d = task_vector(&b, &b, "x").unwrap();
        assert!(d.deltas["a"].values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mismatch_lists_offenders() {
        let b = map(&[("a", vec![2], vec![1.0, 2.0]), ("b", vec![1], vec![0.0])]);
        let t = map(&[("a", vec![1, 2], vec![1.0, 2.0]), ("c", vec![1], vec![0.0])]);
        match task_vector(&b, &t, "x") {
            Err(Error::TensorMismatch(list)) => assert_eq!(list.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn subtraction_oracle() {
        let bv = [0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.8, 0.9];
        let tvv = [1.1, 0.2, -0.3, 0.45, 0.0, -0.65, 0.75, 1.8, -0.9];
        let b = map(&[("w", vec![3, 3], bv.to_vec())]);
        let t = map(&[("w", vec![3, 3], tvv.to_vec())]);
        let d = task_vector(&b, &t, "x").unwrap();
        for i in 0..9 {
            assert_eq!(d.deltas["w"].values[i], tvv[i] as f32 as f64 - bv[i] as f32 as f64);
        }
        let back = combine(&b, &[(&d, 1.0)]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn dare_edges() {
        let d = tv(vec![0.5, -1.5, 2.0, 0.0]);
        assert_eq!(dare(&d, 1.0, 7).unwrap(), d);
        let z = tv(vec![0.0; 50]);
        assert_eq!(dare(&z, 0.3, 9).unwrap(), z);
        assert!(dare(&d, 0.0, 1).is_err());
        assert!(dare(&d, 1.5, 1).is_err());
    }

    #[test]
    fn ramp_example() {
        let p = keep_probabilities(&[1.0, 2.0, 3.0, 4.0], 0.5, 0.4);
        let want = [0.1, 0.5 - 0.4 + 0.8 / 3.0, 0.5 - 0.4 + 1.6 / 3.0, 0.9];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p[1] - 0.3667).abs() < 1e-4 && (p[2] - 0.6333).abs() < 1e-4);
        // order-independent: ranks follow magnitude, not position
        let q = keep_probabilities(&[-4.0, 1.0, 3.0, -2.0], 0.5, 0.4);
        assert!((q[0] - 0.9).abs() < 1e-12 && (q[1] - 0.1).abs() < 1e-12);
        assert_eq!(keep_probabilities(&[3.0], 0.7, 0.2), vec![0.7]);
    }

    #[test]
    fn della_eps_zero_is_dare() {
        let d = tv((0..500).map(|i| (i as f64 * 0.37).sin()).collect());
        assert_eq!(della(&d, 0.6, 0.0, 42).unwrap(), dare(&d, 0.6, 42).unwrap());
        assert!(della(&d, 0.3, 0.3, 1).is_err());
        assert!(della(&d, 0.8, 0.3, 1).is_err());
        assert!(della(&d, 0.9, 0.1, 1).is_ok());
    }

    #[test]
    fn combine_oracle() {
        let b = map(&[("w", vec![2, 2], vec![0.5, -0.25, 1.0, 2.0])]);
        let d1 = TaskVector {
            source: "a".into(),
            deltas: [(
                "w".to_string(),
                Delta {
                    shape: vec![2, 2],
                    values: vec![0.1, 0.2, -0.3, 0.4],
                },
            )]
            .into(),
        };
        let d2 = TaskVector {
            source: "b".into(),
            deltas: [(
                "w".to_string(),
                Delta {
                    shape: vec![2, 2],
                    values: vec![-1.0, 0.5, 0.25, 0.0],
                },
            )]
            .into(),
        };
        let m = combine(&b, &[(&d1, 0.2), (&d2, 0.15)]).unwrap();
        let base = b.tensors["w"].to_f64();
        let got = m.tensors["w"].to_f64();
        for i in 0..4 {
            let want = (base[i] + 0.2 * d1.deltas["w"].values[i] + 0.15 * d2.deltas["w"].values[i]) as f32 as f64;
            assert_eq!(got[i], want);
        }
        assert_eq!(combine(&b, &[(&d1, 0.0), (&d2, 0.0)]).unwrap(), b);
        let bad = TaskVector {
            source: "c".into(),
            deltas: [(
                "w".to_string(),
                Delta {
                    shape: vec![4],
                    values: vec![0.0; 4],
                },
            )]
            .into(),
        };
        assert!(matches!(combine(&b, &[(&bad, 1.0)]), Err(Error::TensorMismatch(_))));
    }
}
