//! Checkpoint tensors and safetensors IO.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use half::{bf16, f16};
use safetensors::tensor::{Dtype, SafeTensors, View};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Floating point storage types we can do arithmetic on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DType {
    F16,
    BF16,
    F32,
    F64,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F16 | DType::BF16 => 2,
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    fn parse(name: &str) -> Option<DType> {
        Some(match name {
            "F16" => DType::F16,
            "BF16" => DType::BF16,
            "F32" => DType::F32,
            "F64" => DType::F64,
            _ => return None,
        })
    }

    fn to_st(self) -> Dtype {
        match self {
            DType::F16 => Dtype::F16,
            DType::BF16 => Dtype::BF16,
            DType::F32 => Dtype::F32,
            DType::F64 => Dtype::F64,
        }
    }
}

/// A dense little-endian tensor; `data` holds the raw bytes as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub data: Vec<u8>,
}

impl Tensor {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn from_f64(dtype: DType, shape: Vec<usize>, values: &[f64]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Format(format!(
                "shape {shape:?} does not hold {} values",
                values.len()
            )));
        }
        let mut data = Vec::with_capacity(n * dtype.size());
        for &v in values {
            match dtype {
                DType::F16 => data.extend(f16::from_f64(v).to_le_bytes()),
                DType::BF16 => data.extend(bf16::from_f64(v).to_le_bytes()),
                DType::F32 => data.extend((v as f32).to_le_bytes()),
                DType::F64 => data.extend(v.to_le_bytes()),
            }
        }
        Ok(Tensor { dtype, shape, data })
    }

    pub fn to_f64(&self) -> Vec<f64> {
        let w = self.dtype.size();
        self.data
            .chunks_exact(w)
            .map(|b| match self.dtype {
                DType::F16 => f16::from_le_bytes([b[0], b[1]]).to_f64(),
                DType::BF16 => bf16::from_le_bytes([b[0], b[1]]).to_f64(),
                DType::F32 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
                DType::F64 => f64::from_le_bytes(b.try_into().unwrap()),
            })
            .collect()
    }
}

impl View for &Tensor {
    fn dtype(&self) -> Dtype {
        self.dtype.to_st()
    }

    fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn data(&self) -> Cow<'_, [u8]> {
        Cow::Borrowed(&self.data)
    }

    fn data_len(&self) -> usize {
        self.data.len()
    }
}

/// Named tensors plus the free-form `__metadata__` map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TensorMap {
    pub tensors: BTreeMap<String, Tensor>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct RawInfo {
    dtype: String,
    shape: Vec<usize>,
    data_offsets: (usize, usize),
}

/// Checks the header ourselves first so errors can name the offending tensor.
fn precheck(bytes: &[u8]) -> Result<()> {
    if bytes.len() < 8 {
        return Err(Error::Format("file shorter than the 8-byte header length".into()));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let header = usize::try_from(n)
        .ok()
        .and_then(|n| bytes.get(8..8usize.checked_add(n)?))
        .ok_or_else(|| Error::Format(format!("header length {n} exceeds file size")))?;
    let entries: BTreeMap<String, serde_json::Value> =
        serde_json::from_slice(header).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let body = bytes.len() - 8 - header.len();
    for (name, v) in entries {
        if name == "__metadata__" {
            continue;
        }
        let info: RawInfo =
            serde_json::from_value(v).map_err(|e| Error::Format(format!("tensor {name}: bad entry: {e}")))?;
        let dtype = DType::parse(&info.dtype)
            .ok_or_else(|| Error::UnsupportedDtype(format!("{} (tensor {name})", info.dtype)))?;
        let (start, end) = info.data_offsets;
        if end > body || start > end {
            return Err(Error::Format(format!(
                "tensor {name}: offsets {start}..{end} outside a {body}-byte buffer"
            )));
        }
        let want = info.shape.iter().product::<usize>() * dtype.size();
        if end - start != want {
            return Err(Error::Format(format!(
                "tensor {name}: {} bytes for shape {:?} {:?}",
                end - start,
                info.shape,
                dtype
            )));
        }
    }
    Ok(())
}

impl TensorMap {
    pub fn from_bytes(bytes: &[u8]) -> Result<TensorMap> {
        precheck(bytes)?;
        let (_, meta) = SafeTensors::read_metadata(bytes).map_err(|e| Error::Format(e.to_string()))?;
        let st = SafeTensors::deserialize(bytes).map_err(|e| Error::Format(e.to_string()))?;
        let mut map = TensorMap {
            metadata: meta
                .metadata()
                .as_ref()
                .map(|m| m.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
                .unwrap_or_default(),
            ..Default::default()
        };
        for (name, view) in st.iter() {
            let dtype = match view.dtype() {
                Dtype::F16 => DType::F16,
                Dtype::BF16 => DType::BF16,
                Dtype::F32 => DType::F32,
                Dtype::F64 => DType::F64,
                other => return Err(Error::UnsupportedDtype(format!("{other:?} (tensor {name})"))),
            };
            map.tensors.insert(
                name.to_string(),
                Tensor {
                    dtype,
                    shape: view.shape().to_vec(),
                    data: view.data().to_vec(),
                },
            );
        }
        Ok(map)
    }

    /// Serialized layout is a function of the map alone, so equal maps give equal files.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta: Option<HashMap<String, String>> = if self.metadata.is_empty() {
            None
        } else {
            Some(self.metadata.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
        };
        safetensors::serialize(self.tensors.iter(), meta).map_err(|e| Error::Format(e.to_string()))
    }

    /// Lists names present in only one map and names whose shapes differ.
    pub fn mismatches(&self, other: &TensorMap) -> Vec<String> {
        let mut bad = Vec::new();
        for (name, t) in &self.tensors {
            match other.tensors.get(name) {
                None => bad.push(format!("{name}: missing")),
                Some(o) if o.shape != t.shape => bad.push(format!("{name}: shape {:?} vs {:?}", t.shape, o.shape)),
                _ => {}
            }
        }
        for name in other.tensors.keys().filter(|n| !self.tensors.contains_key(*n)) {
            bad.push(format!("{name}: unexpected"));
        }
        bad
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TensorMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    TensorMap::from_bytes(&bytes)
}

pub fn save_model(map: &TensorMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = map.to_bytes()?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use sha2::{Digest, Sha256};

    fn one() -> TensorMap {
        let mut m = TensorMap::default();
        m.tensors.insert(
            "w".into(),
            Tensor::from_f64(DType::F32, vec![2, 2], &[1.0, -2.0, 0.5, 3.25]).unwrap(),
        );
        m
    }

    #[test]
    fn single_tensor_round_trip() {
        let m = one();
        let bytes = m.to_bytes().unwrap();
        let back = TensorMap::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.tensors["w"].to_f64(), vec![1.0, -2.0, 0.5, 3.25]);
    }

    #[test]
    fn truncated_names_tensor() {
        let mut bytes = one().to_bytes().unwrap();
        bytes.truncate(bytes.len() - 3);
        match TensorMap::from_bytes(&bytes) {
            Err(Error::Format(msg)) => assert!(msg.contains("tensor w"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_dtype() {
        let header = br#"{"x":{"dtype":"Q4","shape":[1],"data_offsets":[0,1]}}"#;
        let mut bytes = (header.len() as u64).to_le_bytes().to_vec();
        bytes.extend_from_slice(header);
        bytes.push(0);
        assert!(matches!(TensorMap::from_bytes(&bytes), Err(Error::UnsupportedDtype(_))));
        // a dtype the container knows but we do not compute on
        let header = br#"{"x":{"dtype":"I32","shape":[1],"data_offsets":[0,4]}}"#;
        let mut bytes = (header.len() as u64).to_le_bytes().to_vec();
        bytes.extend_from_slice(header);
        bytes.extend([0; 4]);
        assert!(matches!(TensorMap::from_bytes(&bytes), Err(Error::UnsupportedDtype(_))));
    }

    #[test]
    fn half_types_and_metadata() {
        let mut m = TensorMap::default();
        m.metadata.insert("format".into(), "pt".into());
        m.tensors.insert(
            "a".into(),
            Tensor::from_f64(DType::F16, vec![3], &[0.5, 1.0, -2.0]).unwrap(),
        );
        m.tensors.insert(
            "b".into(),
            Tensor::from_f64(DType::BF16, vec![1, 2], &[0.25, 8.0]).unwrap(),
        );
        m.tensors.insert(
            "c".into(),
            Tensor::from_f64(DType::F64, vec![], &[std::f64::consts::PI]).unwrap(),
        );
        let back = TensorMap::from_bytes(&m.to_bytes().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.tensors["a"].to_f64(), vec![0.5, 1.0, -2.0]);
    }

    #[test]
    fn hundred_random_tensors_checksum() {
        let mut rng = crate::sampler::stream_rng(1, &["st"]);
        let mut m = TensorMap::default();
        let dtypes = [DType::F16, DType::BF16, DType::F32, DType::F64];
        for i in 0..100 {
            let dtype = dtypes[i % 4];
            let shape = vec![rng.random_range(1..6), rng.random_range(1..6)];
            let n = shape[0] * shape[1] * dtype.size();
            let data: Vec<u8> = (0..n).map(|_| rng.random()).collect();
            m.tensors.insert(format!("layer.{i}"), Tensor { dtype, shape, data });
        }
        let digest = |m: &TensorMap| {
            let mut h = Sha256::new();
            for (k, t) in &m.tensors {
                h.update(k.as_bytes());
                h.update(&t.data);
            }
            h.finalize()
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.safetensors");
        save_model(&m, &p).unwrap();
        let back = load_model(&p).unwrap();
        assert_eq!(digest(&back), digest(&m));
        let p2 = dir.path().join("m2.safetensors");
        save_model(&back, &p2).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
    }
}
