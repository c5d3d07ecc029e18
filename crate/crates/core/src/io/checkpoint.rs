//! Named tensor container.
//!
//! Layout, all integers little-endian:
//!
//! | field        | type            |
//! |--------------|-----------------|
//! | magic        | `b"MOMU"`       |
//! | version      | u32             |
//! | tensor count | u32             |
//! | per tensor   | name_len u32, UTF-8 name, ndim u32, dims u64 × ndim, data f32 × product(dims) |

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use super::bytes::{read_exact, read_u32, read_u64, Reader};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams, ASEU_TAG};
use crate::momentum::MemoryBank;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MOMU";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Prefix of tensors that describe rather than parameterize the model.
pub const META_PREFIX: &str = "meta.";
pub const BANK_PREFIX: &str = "bank.";
const CONFIG_TENSOR: &str = "meta.model_config";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::Format(format!("duplicate tensor name {name:?}")));
        }
        self.tensors.push((name, t));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = Reader::new(r);
        let magic = read_exact::<4>(&mut r, "magic")?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format(format!("not a checkpoint (magic {magic:?})")));
        }
        let version = read_u32(&mut r, "version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedFormat(format!("checkpoint version {version}")));
        }
        let count = read_u32(&mut r, "tensor count")?;
        let mut ckpt = Checkpoint::new();
        for _ in 0..count {
            let len = read_u32(&mut r, "name length")? as usize;
            let name = String::from_utf8(r.take_vec(len, "name")?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let ndim = read_u32(&mut r, "ndim")? as usize;
            let shape = (0..ndim)
                .map(|_| read_u64(&mut r, "dim").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let n = n.ok_or_else(|| Error::Format(format!("{name}: dims overflow")))?;
            let bytes = r.take_vec(n.checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?, &name)?;
            let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            ckpt.insert(name, Tensor::new(shape, data)?)?;
        }
        if !r.at_end()? {
            return Err(Error::Format("trailing bytes after last tensor".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn config_tensor(c: &ModelConfig) -> Tensor {
    let v = [
        c.hidden,
        c.kernel,
        c.stride,
        c.blocks,
        c.visual_dim,
        c.tcn_depth,
        c.speakers,
        c.sample_rate as usize,
        c.video_fps as usize,
        c.spk_kernel,
        c.spk_depth,
    ];
    Tensor::row(&v.map(|x| x as f32))
}

fn config_from_tensor(t: &Tensor) -> Result<ModelConfig> {
    let d = t.data();
    if d.len() != 11 || d.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
        return Err(Error::Format(format!("{CONFIG_TENSOR} must hold 11 non-negative integers")));
    }
    let u = |i: usize| d[i] as usize;
    let c = ModelConfig {
        hidden: u(0),
        kernel: u(1),
        stride: u(2),
        blocks: u(3),
        visual_dim: u(4),
        tcn_depth: u(5),
        speakers: u(6),
        sample_rate: d[7] as u32,
        video_fps: d[8] as u32,
        spk_kernel: u(9),
        spk_depth: u(10),
    };
    c.validate()?;
    Ok(c)
}

impl ModelParams<f32> {
    /// All parameters plus a `meta.model_config` record.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new();
        ckpt.insert(CONFIG_TENSOR, config_tensor(&self.config)).expect("fresh checkpoint");
        for p in self.store.iter() {
            ckpt.insert(p.name.clone(), p.value.clone()).expect("parameter names are unique");
        }
        ckpt
    }

    /// Rebuilds a model from a checkpoint written by [`Self::to_checkpoint`].
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let meta = ckpt
            .get(CONFIG_TENSOR)
            .ok_or_else(|| Error::Format(format!("checkpoint has no {CONFIG_TENSOR} record")))?;
        let mut params = Self::init(&config_from_tensor(meta)?, 0)?;
        load_named(&mut params, ckpt, |_| true)?;
        Ok(params)
    }

    /// Names of parameters outside the attention-fusion sub-module.
    pub fn non_aseu_names(&self) -> Vec<String> {
        self.store.iter().filter(|p| !p.name.contains(ASEU_TAG)).map(|p| p.name.clone()).collect()
    }
}

/// Copies every model parameter accepted by `select` from `ckpt`. The
/// checkpoint must hold exactly those names (ignoring meta and bank records
/// and names rejected by `select`) with matching shapes.
pub(crate) fn load_named(
    params: &mut ModelParams<f32>,
    ckpt: &Checkpoint,
    select: impl Fn(&str) -> bool,
) -> Result<()> {
    let expected: BTreeSet<String> = params.store.iter().map(|p| p.name.clone()).filter(|n| select(n)).collect();
    let offered: BTreeSet<String> = ckpt
        .names()
        .filter(|n| !n.starts_with(META_PREFIX) && !n.starts_with(BANK_PREFIX))
        .map(str::to_owned)
        .collect();
    let missing: Vec<String> = expected.difference(&offered).cloned().collect();
    let unexpected: Vec<String> = offered.iter().filter(|n| !expected.contains(*n) && select(n)).cloned().collect();
    let mismatched: Vec<String> = expected
        .intersection(&offered)
        .filter_map(|n| {
            let model = &params.store.get(params.store.id(n).unwrap()).value;
            let saved = ckpt.get(n).unwrap();
            (model.shape() != saved.shape())
                .then(|| format!("{n}: checkpoint {:?} vs model {:?}", saved.shape(), model.shape()))
        })
        .collect();
    if !(missing.is_empty() && unexpected.is_empty() && mismatched.is_empty()) {
        return Err(Error::Load { missing, unexpected, mismatched });
    }
    for n in &expected {
        let id = params.store.id(n).unwrap();
        params.store.get_mut(id).value = ckpt.get(n).unwrap().clone();
    }
    Ok(())
}

/// Adds the bank state as `bank.theta`, `bank.anchor.{r}` and
/// `bank.last_update.{r}` records. An empty bank writes only its threshold.
/// `bank.theta` holds the f64 bit pattern of θ as two f32 slots (low word
/// first) so the threshold survives exactly.
pub fn save_bank(ckpt: &mut Checkpoint, bank: &MemoryBank) -> Result<()> {
    let b = bank.theta().to_bits();
    let words = [f32::from_bits(b as u32), f32::from_bits((b >> 32) as u32)];
    ckpt.insert("bank.theta", Tensor::row(&words))?;
    ckpt.insert("bank.blocks", Tensor::scalar(bank.blocks() as f32))?;
    if let Some(anchors) = bank.anchors() {
        for (r, a) in anchors.iter().enumerate() {
            ckpt.insert(format!("bank.anchor.{r}"), a.clone())?;
            ckpt.insert(format!("bank.last_update.{r}"), Tensor::scalar(bank.last_update_step()[r] as f32))?;
        }
    }
    Ok(())
}

/// Restores a bank written by [`save_bank`]; `None` when absent.
pub fn load_bank(ckpt: &Checkpoint) -> Result<Option<MemoryBank>> {
    let Some(theta) = ckpt.get("bank.theta") else { return Ok(None) };
    let [lo, hi] = theta.data() else {
        return Err(Error::Format(format!("bank.theta has {} values, expected 2", theta.len())));
    };
    let theta = f64::from_bits(u64::from(lo.to_bits()) | u64::from(hi.to_bits()) << 32);
    let blocks = ckpt.get("bank.blocks").ok_or_else(|| Error::Format("bank.blocks missing".into()))?.item()? as usize;
    if ckpt.get("bank.anchor.0").is_none() {
        return MemoryBank::empty(blocks, theta).map(Some);
    }
    let mut anchors = Vec::with_capacity(blocks);
    let mut steps = Vec::with_capacity(blocks);
    for r in 0..blocks {
        let missing = |what: &str| Error::Format(format!("bank.{what}.{r} missing"));
        anchors.push(ckpt.get(&format!("bank.anchor.{r}")).ok_or_else(|| missing("anchor"))?.clone());
        steps.push(ckpt.get(&format!("bank.last_update.{r}")).ok_or_else(|| missing("last_update"))?.item()? as usize);
    }
    MemoryBank::restore(theta, anchors, steps).map(Some)
}
