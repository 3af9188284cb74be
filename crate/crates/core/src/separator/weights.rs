use std::collections::BTreeMap;
use std::path::Path;

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SeparatorConfig, SeparatorError};

const MAGIC: &[u8; 4] = b"CTN1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, SeparatorError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(SeparatorError::MalformedHeader(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn matrix(&self) -> ArrayView2<'_, f32> {
        let (r, c) = match self.shape.as_slice() {
            [r, c] => (*r, *c),
            [r] => (*r, 1),
            _ => panic!("tensor of shape {:?} is not a matrix", self.shape),
        };
        ArrayView2::from_shape((r, c), &self.data).expect("shape checked on construction")
    }
}

/// Named float32 tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    /// Checks that every tensor the config needs is present with the right shape and finite values.
    pub fn validate(&self, config: &SeparatorConfig) -> Result<(), SeparatorError> {
        for spec in tensor_specs(config) {
            let t = self
                .tensors
                .get(&spec.name)
                .ok_or_else(|| SeparatorError::MissingTensor(spec.name.clone()))?;
            if t.shape != spec.shape {
                return Err(SeparatorError::ShapeMismatch {
                    what: spec.name,
                    expected: spec.shape,
                    found: t.shape.clone(),
                });
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(SeparatorError::NonFinite(spec.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Init {
    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    Uniform { fan_in: usize },
    Const(f32),
}

#[derive(Debug, Clone)]
pub(crate) struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

/// Every tensor for `config`, in a fixed order used for seeded initialization.
pub(crate) fn tensor_specs(config: &SeparatorConfig) -> Vec<TensorSpec> {
    let (n, l, b, h, p) = (
        config.encoder_filters,
        config.kernel_len,
        config.bottleneck,
        config.conv_channels,
        config.kernel_size,
    );
    let mut out = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, init: Init| out.push(TensorSpec { name, shape, init });
    let uni = |fan_in| Init::Uniform { fan_in };
    push("encoder.weight".into(), vec![n, l], uni(l));
    push("tcn.input_norm.gamma".into(), vec![n], Init::Const(1.0));
    push("tcn.input_norm.beta".into(), vec![n], Init::Const(0.0));
    push("tcn.bottleneck.weight".into(), vec![b, n], uni(n));
    push("tcn.bottleneck.bias".into(), vec![b], uni(n));
    for i in 0..config.repeats * config.blocks_per_repeat {
        let pre = format!("tcn.blocks.{i}");
        push(format!("{pre}.in_conv.weight"), vec![h, b], uni(b));
        push(format!("{pre}.in_conv.bias"), vec![h], uni(b));
        push(format!("{pre}.prelu1"), vec![1], Init::Const(0.25));
        push(format!("{pre}.norm1.gamma"), vec![h], Init::Const(1.0));
        push(format!("{pre}.norm1.beta"), vec![h], Init::Const(0.0));
        push(format!("{pre}.depthwise.weight"), vec![h, p], uni(p));
        push(format!("{pre}.depthwise.bias"), vec![h], uni(p));
        push(format!("{pre}.prelu2"), vec![1], Init::Const(0.25));
        push(format!("{pre}.norm2.gamma"), vec![h], Init::Const(1.0));
        push(format!("{pre}.norm2.beta"), vec![h], Init::Const(0.0));
        push(format!("{pre}.res_conv.weight"), vec![b, h], uni(h));
        push(format!("{pre}.res_conv.bias"), vec![b], uni(h));
        push(format!("{pre}.skip_conv.weight"), vec![b, h], uni(h));
        push(format!("{pre}.skip_conv.bias"), vec![b], uni(h));
    }
    push("tcn.output_prelu".into(), vec![1], Init::Const(0.25));
    push("tcn.mask_conv.weight".into(), vec![n, b], uni(b));
    push("tcn.mask_conv.bias".into(), vec![n], uni(b));
    push("decoder.weight".into(), vec![n, l], uni(n));
    out
}

/// Seeded weights; the same `(config, seed)` always yields bit-identical tensors.
pub fn random_weights(config: &SeparatorConfig, seed: u64) -> WeightStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = WeightStore::new();
    for spec in tensor_specs(config) {
        let len: usize = spec.shape.iter().product();
        let data: Vec<f32> = match spec.init {
            Init::Const(v) => vec![v; len],
            Init::Uniform { fan_in } => {
                let k = 1.0 / (fan_in as f32).sqrt();
                (0..len).map(|_| rng.gen_range(-k..=k)).collect()
            }
        };
        store.insert(spec.name, Tensor { shape: spec.shape, data });
    }
    store
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    shape: Vec<usize>,
    dtype: String,
    /// Byte offset into the payload.
    offset: usize,
    /// Number of elements.
    len: usize,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Serializes `store` (and optionally its config) into container bytes.
pub fn encode_container(store: &WeightStore, config: Option<&SeparatorConfig>) -> Vec<u8> {
    let mut header = serde_json::Map::new();
    let mut payload = Vec::new();
    for (name, t) in store.iter() {
        let entry = TensorEntry {
            shape: t.shape.clone(),
            dtype: "f32".into(),
            offset: payload.len(),
            len: t.data.len(),
        };
        for v in &t.data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        header.insert(name.clone(), serde_json::to_value(entry).expect("entry serializes"));
    }
    if let Some(cfg) = config {
        header.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    }
    let header = serde_json::to_vec(&serde_json::Value::Object(header)).expect("header serializes");
    let mut out = Vec::with_capacity(16 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&fnv1a(&payload).to_le_bytes());
    out
}

/// Parses container bytes into the stored config (if any) and tensors.
pub fn decode_container(bytes: &[u8]) -> Result<(Option<SeparatorConfig>, WeightStore), SeparatorError> {
    if bytes.len() < 8 {
        return Err(if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            SeparatorError::BadMagic
        } else {
            SeparatorError::TruncatedFile(format!("{} bytes is shorter than the fixed header", bytes.len()))
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(SeparatorError::BadMagic);
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    if bytes.len() < 8 + header_len + 8 {
        return Err(SeparatorError::TruncatedFile(format!(
            "header declares {header_len} bytes but the file has {}",
            bytes.len()
        )));
    }
    let header: serde_json::Map<String, serde_json::Value> = serde_json::from_slice(&bytes[8..8 + header_len])
        .map_err(|e| SeparatorError::MalformedHeader(e.to_string()))?;
    let payload = &bytes[8 + header_len..bytes.len() - 8];
    let stored_sum = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes"));

    let mut config = None;
    let mut entries = Vec::new();
    for (name, value) in header {
        if name == "config" {
            let cfg: SeparatorConfig =
                serde_json::from_value(value).map_err(|e| SeparatorError::MalformedHeader(format!("config: {e}")))?;
            config = Some(cfg);
            continue;
        }
        let entry: TensorEntry =
            serde_json::from_value(value).map_err(|e| SeparatorError::MalformedHeader(format!("{name}: {e}")))?;
        if entry.dtype != "f32" {
            return Err(SeparatorError::UnsupportedDtype(entry.dtype));
        }
        let end = entry
            .len
            .checked_mul(4)
            .and_then(|n| n.checked_add(entry.offset))
            .ok_or_else(|| SeparatorError::MalformedHeader(format!("{name}: extent overflows")))?;
        if end > payload.len() {
            return Err(SeparatorError::TruncatedFile(format!(
                "{name} needs payload bytes up to {end}, payload has {}",
                payload.len()
            )));
        }
        entries.push((name, entry));
    }
    if fnv1a(payload) != stored_sum {
        return Err(SeparatorError::ChecksumMismatch);
    }
    let mut store = WeightStore::new();
    for (name, entry) in entries {
        let raw = &payload[entry.offset..entry.offset + 4 * entry.len];
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let tensor = Tensor::new(entry.shape, data).map_err(|e| match e {
            SeparatorError::MalformedHeader(m) => SeparatorError::MalformedHeader(format!("{name}: {m}")),
            other => other,
        })?;
        store.insert(name, tensor);
    }
    Ok((config, store))
}

pub fn save_weights(
    path: &Path,
    store: &WeightStore,
    config: Option<&SeparatorConfig>,
) -> Result<(), SeparatorError> {
    std::fs::write(path, encode_container(store, config))?;
    Ok(())
}

/// Reads a container file, returning its embedded config alongside the tensors.
pub fn read_container(path: &Path) -> Result<(Option<SeparatorConfig>, WeightStore), SeparatorError> {
    decode_container(&std::fs::read(path)?)
}

pub fn load_weights(path: &Path) -> Result<WeightStore, SeparatorError> {
    Ok(read_container(path)?.1)
}
