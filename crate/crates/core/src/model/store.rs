use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelConfig, Variant};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::ops::{init_params, InitKind};
use crate::tensor::{DType, Data, Tensor};

/// How a parameter starts out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamInit {
    /// Random weights scaled by the fan-in.
    Weight { fan_in: usize },
    Zeros,
    Ones,
    /// `[1, 0, 0, 1]` per channel (complex layer-norm gain).
    Identity2x2,
    Constant(f64),
    /// Small normal draws, std 0.02.
    Small,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: DType,
    pub init: ParamInit,
}

impl ParamSpec {
    fn new(name: impl Into<String>, shape: &[usize], dtype: DType, init: ParamInit) -> Self {
        Self { name: name.into(), shape: shape.to_vec(), dtype, init }
    }

    pub fn scalar_count(&self) -> usize {
        let n: usize = self.shape.iter().product();
        match self.dtype {
            DType::Real => n,
            DType::Complex => 2 * n,
        }
    }
}

/// Every learnable tensor of the model, in a fixed order.
pub fn param_shapes(cfg: &ModelConfig) -> Vec<ParamSpec> {
    use ParamInit::*;
    let c = cfg.channels;
    let cx = DType::Complex;
    let fd = cfg.variant.feature_dtype();
    let width = cfg.heads * cfg.head_dim;
    let hidden = cfg.mlp_ratio * c;
    let mf_out = cfg.inner * cfg.mf_filters;
    let mut specs = vec![
        ParamSpec::new("mf.linear.weight", &[cfg.n, mf_out], cx, Weight { fan_in: cfg.n }),
        ParamSpec::new("mf.linear.bias", &[mf_out], cx, Zeros),
        ParamSpec::new("mf.conv.weight", &[c, cfg.mf_filters, 3], cx, Weight { fan_in: 3 * cfg.mf_filters }),
        ParamSpec::new("mf.conv.bias", &[c], cx, Zeros),
    ];
    let norm = |specs: &mut Vec<ParamSpec>, p: &str| match cfg.variant {
        Variant::SwinFreq => {
            specs.push(ParamSpec::new(format!("{p}.gamma"), &[c], DType::Real, Ones));
            specs.push(ParamSpec::new(format!("{p}.beta"), &[c], DType::Real, Zeros));
        }
        Variant::CvSwinFreq => {
            specs.push(ParamSpec::new(format!("{p}.gamma"), &[c, 4], DType::Real, Identity2x2));
            specs.push(ParamSpec::new(format!("{p}.beta"), &[c], cx, Zeros));
        }
    };
    let dense = |specs: &mut Vec<ParamSpec>, p: &str, fan_in: usize, fan_out: usize| {
        specs.push(ParamSpec::new(format!("{p}.weight"), &[fan_in, fan_out], fd, Weight { fan_in }));
        specs.push(ParamSpec::new(format!("{p}.bias"), &[fan_out], fd, Zeros));
    };
    for b in 0..cfg.blocks {
        for l in 0..cfg.depth {
            let p = format!("blocks.{b}.layers.{l}");
            norm(&mut specs, &format!("{p}.norm1"));
            for proj in ["q", "k", "v"] {
                dense(&mut specs, &format!("{p}.attn.{proj}"), c, width);
            }
            specs.push(ParamSpec::new(format!("{p}.attn.rpe"), &[cfg.heads, 2 * cfg.window - 1], fd, Small));
            dense(&mut specs, &format!("{p}.attn.out"), width, c);
            norm(&mut specs, &format!("{p}.norm2"));
            dense(&mut specs, &format!("{p}.mlp.fc1"), c, hidden);
            if cfg.variant == Variant::CvSwinFreq {
                specs.push(ParamSpec::new(format!("{p}.mlp.act.slopes"), &[2], DType::Real, Constant(0.25)));
            }
            dense(&mut specs, &format!("{p}.mlp.fc2"), hidden, c);
        }
        specs.push(ParamSpec::new(format!("blocks.{b}.conv.weight"), &[c, c, 3], fd, Weight { fan_in: 3 * c }));
        specs.push(ParamSpec::new(format!("blocks.{b}.conv.bias"), &[c], fd, Zeros));
    }
    let (k, _) = cfg.head_geometry();
    specs.push(ParamSpec::new("head.weight", &[c, 1, k], DType::Real, Small));
    specs.push(ParamSpec::new("head.bias", &[1], DType::Real, Zeros));
    specs
}

/// Total number of real scalars; complex entries count twice.
pub fn param_count(cfg: &ModelConfig) -> usize {
    param_shapes(cfg).iter().map(ParamSpec::scalar_count).sum()
}

/// AdamW moments, stored per parameter as real coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizerState {
    /// Number of updates applied so far.
    pub t: u64,
    pub m: BTreeMap<String, Vec<f64>>,
    pub v: BTreeMap<String, Vec<f64>>,
}

/// Named parameters of one model plus training metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterStore {
    config: ModelConfig,
    params: BTreeMap<String, Arc<Tensor>>,
    pub step: u64,
    pub epoch: u64,
    pub optimizer: OptimizerState,
}

impl ParameterStore {
    /// Freshly initialized parameters.
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut params = BTreeMap::new();
        for spec in param_shapes(cfg) {
            let n: usize = spec.shape.iter().product();
            let tensor = match (spec.init, spec.dtype) {
                (ParamInit::Weight { fan_in }, DType::Complex) => {
                    init_params(&spec.shape, fan_in, InitKind::CvKaimingRayleigh, rng)?
                }
                (ParamInit::Weight { fan_in }, DType::Real) => init_params(&spec.shape, fan_in, InitKind::RealKaiming, rng)?,
                (ParamInit::Zeros, dt) => Tensor::zeros(&spec.shape, dt),
                (ParamInit::Ones, dt) => constant(&spec.shape, dt, 1.0)?,
                (ParamInit::Constant(v), dt) => constant(&spec.shape, dt, v)?,
                (ParamInit::Identity2x2, _) => Tensor::real(&spec.shape, [1.0, 0.0, 0.0, 1.0].repeat(n / 4))?,
                (ParamInit::Small, DType::Real) => {
                    let d = Normal::new(0.0, 0.02).expect("finite std");
                    Tensor::real(&spec.shape, (0..n).map(|_| d.sample(rng)).collect())?
                }
                (ParamInit::Small, DType::Complex) => {
                    let d = Normal::new(0.0, 0.02).expect("finite std");
                    let v = (0..n).map(|_| Complex64::new(d.sample(rng), d.sample(rng))).collect();
                    Tensor::complex(&spec.shape, v)?
                }
            };
            params.insert(spec.name, Arc::new(tensor));
        }
        Ok(Self { config: cfg.clone(), params, step: 0, epoch: 0, optimizer: OptimizerState::default() })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn get(&self, name: &str) -> Option<&Arc<Tensor>> {
        self.params.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Arc<Tensor>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total real scalar count.
    pub fn scalar_count(&self) -> usize {
        self.params.values().map(|t| t.scalar_count()).sum()
    }

    /// Replace a parameter; the shape and dtype must stay the same.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::invalid(format!("no parameter named '{name}'")))?;
        if slot.shape() != value.shape() || slot.dtype() != value.dtype() {
            return Err(Error::shape("set", format!("{name}: {:?} vs {:?}", slot.shape(), value.shape())));
        }
        *slot = Arc::new(value);
        Ok(())
    }

    /// Put every parameter on `graph` as a leaf.
    pub fn bind<'g>(&self, graph: &'g Graph) -> Params<'g> {
        Params { vars: self.params.iter().map(|(k, v)| (k.clone(), graph.leaf(v.clone()))).collect() }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::fsutil::write_atomic(path, |w| self.write_to(w))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(&bytes, path)
    }

    /// Load and insist on a particular model configuration.
    pub fn load_expecting(path: &Path, expected: &ModelConfig) -> Result<Self> {
        let store = Self::load(path)?;
        let (want, got) = (expected.hash(), store.config.hash());
        if want != got {
            return Err(Error::ConfigHashMismatch { expected: want, found: got });
        }
        Ok(store)
    }
}

fn constant(shape: &[usize], dtype: DType, v: f64) -> Result<Tensor> {
    let n = shape.iter().product();
    match dtype {
        DType::Real => Tensor::real(shape, vec![v; n]),
        DType::Complex => Tensor::complex(shape, vec![Complex64::new(v, 0.0); n]),
    }
}

/// Parameters bound to one graph.
pub struct Params<'g> {
    vars: BTreeMap<String, Var<'g>>,
}

impl<'g> Params<'g> {
    /// Bind explicit variables, e.g. perturbed copies of the parameters.
    pub fn from_vars(vars: impl IntoIterator<Item = (String, Var<'g>)>) -> Self {
        Self { vars: vars.into_iter().collect() }
    }

    pub fn get(&self, name: &str) -> Result<Var<'g>> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(format!("missing parameter '{name}'")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var<'g>)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

const MAGIC: &[u8; 4] = b"SWFC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    config_hash: String,
    step: u64,
    epoch: u64,
    optimizer_t: u64,
}

impl ParameterStore {
    // Layout, all little-endian:
    //   "SWFC" | u32 version | u64 header length | header JSON
    //   | u32 tensor count | tensors | 32-byte SHA-256 of everything before
    // tensor: u32 name length | name | u8 dtype (0 real, 1 complex)
    //   | u32 rank | u64 dims | f64 payload (complex as re, im)
    // Optimizer moments are stored as real tensors named "adam.m.<param>"
    // and "adam.v.<param>".
    fn write_to(&self, w: &mut dyn Write) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let header = Header {
            config: self.config.clone(),
            config_hash: self.config.hash(),
            step: self.step,
            epoch: self.epoch,
            optimizer_t: self.optimizer.t,
        };
        let json = serde_json::to_vec(&header)?;
        buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
        buf.extend_from_slice(&json);

        let mut entries: Vec<(String, Tensor)> = self.params.iter().map(|(k, v)| (k.clone(), (**v).clone())).collect();
        for (prefix, moments) in [("adam.m.", &self.optimizer.m), ("adam.v.", &self.optimizer.v)] {
            for (k, v) in moments {
                entries.push((format!("{prefix}{k}"), Tensor::real(&[v.len()], v.clone())?));
            }
        }
        buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
        for (name, t) in &entries {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.push(match t.dtype() {
                DType::Real => 0,
                DType::Complex => 1,
            });
            buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for d in t.shape() {
                buf.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for v in t.data().real_coords() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&buf);
        buf.extend_from_slice(&digest);
        w.write_all(&buf)?;
        Ok(())
    }

    fn read_from(bytes: &[u8], path: &Path) -> Result<Self> {
        let corrupt = |reason: &str| Error::Corrupt { path: path.to_path_buf(), reason: reason.to_string() };
        if bytes.len() < 4 + 4 + 32 || &bytes[..4] != MAGIC {
            return Err(corrupt("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version { expected: CHECKPOINT_VERSION, found: version });
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch (truncated or modified)"));
        }
        let mut r = &body[8..];
        let header_len = read_u64(&mut r).map_err(|_| corrupt("truncated header"))? as usize;
        if header_len > r.len() {
            return Err(corrupt("truncated header"));
        }
        let header: Header = serde_json::from_slice(&r[..header_len]).map_err(|e| corrupt(&format!("bad header: {e}")))?;
        r = &r[header_len..];
        if header.config.hash() != header.config_hash {
            return Err(Error::ConfigHashMismatch { expected: header.config_hash, found: header.config.hash() });
        }
        let count = read_u32(&mut r).map_err(|_| corrupt("truncated tensor table"))?;
        let mut params = BTreeMap::new();
        let mut optimizer = OptimizerState { t: header.optimizer_t, ..Default::default() };
        for _ in 0..count {
            let (name, t) = read_tensor(&mut r).map_err(|_| corrupt("truncated tensor"))?;
            if let Some(p) = name.strip_prefix("adam.m.") {
                optimizer.m.insert(p.to_string(), t.into_data().real_coords());
            } else if let Some(p) = name.strip_prefix("adam.v.") {
                optimizer.v.insert(p.to_string(), t.into_data().real_coords());
            } else {
                params.insert(name, Arc::new(t));
            }
        }
        if !r.is_empty() {
            return Err(corrupt("trailing bytes"));
        }
        for spec in param_shapes(&header.config) {
            match params.get(&spec.name) {
                Some(t) if t.shape() == spec.shape && t.dtype() == spec.dtype => {}
                _ => return Err(corrupt(&format!("parameter '{}' missing or misshapen", spec.name))),
            }
        }
        Ok(Self { config: header.config, params, step: header.step, epoch: header.epoch, optimizer })
    }
}

fn read_u32(r: &mut &[u8]) -> std::io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut &[u8]) -> std::io::Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_tensor(r: &mut &[u8]) -> std::io::Result<(String, Tensor)> {
    let bad = || std::io::Error::from(std::io::ErrorKind::InvalidData);
    let name_len = read_u32(r)? as usize;
    if name_len > r.len() {
        return Err(bad());
    }
    let name = String::from_utf8(r[..name_len].to_vec()).map_err(|_| bad())?;
    *r = &r[name_len..];
    let mut dt = [0u8; 1];
    r.read_exact(&mut dt)?;
    let rank = read_u32(r)? as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u64(r)? as usize);
    }
    let n: usize = shape.iter().product();
    let coords = if dt[0] == 1 { 2 * n } else { n };
    if coords * 8 > r.len() {
        return Err(bad());
    }
    let vals: Vec<f64> = r[..coords * 8]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    *r = &r[coords * 8..];
    let data = match dt[0] {
        0 => Data::Real(vals),
        1 => Data::Complex(vals.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()),
        _ => return Err(bad()),
    };
    Ok((name, Tensor::new(shape, data).map_err(|_| bad())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts_near_published_sizes() {
        let swin = param_count(&ModelConfig::swinfreq());
        let cv = param_count(&ModelConfig::cvswinfreq());
        assert!(swin < cv);
        assert!((swin as f64 / 249_700.0 - 1.0).abs() <= 0.10, "{swin}");
        assert!((cv as f64 / 260_200.0 - 1.0).abs() <= 0.10, "{cv}");
    }

    #[test]
    fn one_channel_one_position_hand_count() {
        // N=2, C=1, M=1, W=1, h=1, d=1, D=1, B=1, ratio 2, F=1, N_SR=2 (stride 2, kernel 4)
        let cfg = ModelConfig {
            variant: Variant::SwinFreq,
            n: 2,
            n_sr: 2,
            channels: 1,
            inner: 1,
            window: 1,
            heads: 1,
            head_dim: 1,
            depth: 1,
            blocks: 1,
            mlp_ratio: 2,
            mf_filters: 1,
        };
        // front end: linear 2x1 + 1 complex, conv 1x1x3 + 1 complex -> 2 * (3 + 4) = 14
        // layer: 2 norms (2 each) = 4; q, k, v, out (1 + 1 each) = 8; rpe 1;
        //        fc1 1x2 + 2 = 4; fc2 2x1 + 1 = 3 -> 20
        // block conv 1x1x3 + 1 = 4; head 1x1x4 + 1 = 5
        assert_eq!(param_count(&cfg), 14 + 20 + 4 + 5);
        let cv = ModelConfig { variant: Variant::CvSwinFreq, ..cfg };
        // layer complex: norms (4 real + 1 complex) x2 = 12; q,k,v,out 8 complex = 16;
        //   rpe 1 complex = 2; fc1 + fc2 7 complex = 14; slopes 2 -> 46; block conv 8
        assert_eq!(param_count(&cv), 14 + 46 + 8 + 5);
    }

    #[test]
    fn store_matches_spec() {
        let cfg = ModelConfig::micro(Variant::CvSwinFreq);
        let store = ParameterStore::init(&cfg, &mut crate::rng::seeded(0)).unwrap();
        assert_eq!(store.scalar_count(), param_count(&cfg));
        assert_eq!(store.len(), param_shapes(&cfg).len());
    }

    #[test]
    fn checkpoint_round_trip_and_errors() {
        let cfg = ModelConfig::micro(Variant::SwinFreq);
        let mut store = ParameterStore::init(&cfg, &mut crate::rng::seeded(1)).unwrap();
        store.step = 7;
        store.optimizer.t = 7;
        store.optimizer.m.insert("head.bias".into(), vec![0.5]);
        store.optimizer.v.insert("head.bias".into(), vec![0.25]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        store.save(&path).unwrap();
        let back = ParameterStore::load(&path).unwrap();
        assert_eq!(back, store);

        let other = ModelConfig { depth: 1, ..cfg.clone() };
        assert!(matches!(
            ParameterStore::load_expecting(&path, &other),
            Err(Error::ConfigHashMismatch { .. })
        ));

        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.ckpt");
        std::fs::write(&cut, &bytes[..bytes.len() - 100]).unwrap();
        assert!(matches!(ParameterStore::load(&cut), Err(Error::Corrupt { .. })));
    }
}
