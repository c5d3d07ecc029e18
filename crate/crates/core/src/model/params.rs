use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, TCN_KERNEL};
use crate::error::Result;
use crate::params::{ParamId, ParamStore};
use crate::tensor::{Real, Tensor};

/// Marker in parameter names of the attention fusion sub-module.
pub const ASEU_TAG: &str = ".aseu.";

#[derive(Clone, Copy, Debug)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
}

/// Additive attention fusing current and anchor embeddings.
#[derive(Clone, Copy, Debug)]
pub struct AseuLayout {
    /// Projection of the visual features, shared by both branches.
    pub visual: Dense,
    pub current: Dense,
    pub anchor: Dense,
    pub score_current: Dense,
    pub score_anchor: Dense,
}

#[derive(Clone, Copy, Debug)]
pub struct TcnLayout {
    pub conv: Dense,
    pub proj: Dense,
    pub dilation: usize,
}

#[derive(Clone, Debug)]
pub struct BlockLayout {
    pub spk_in: Dense,
    pub spk_convs: Vec<Dense>,
    pub aseu: AseuLayout,
    pub mask_in: Dense,
    pub tcn: Vec<TcnLayout>,
    pub mask_out: Dense,
    pub classifier: ParamId,
}

#[derive(Clone, Debug)]
pub struct Layout {
    pub encoder: ParamId,
    pub decoder: ParamId,
    pub visual: Dense,
    pub blocks: Vec<BlockLayout>,
}

/// All trainable weights of the network plus the geometry they belong to.
#[derive(Clone, Debug)]
pub struct ModelParams<T: Real = f32> {
    pub config: ModelConfig,
    pub store: ParamStore<T>,
    pub layout: Layout,
}

struct Builder<'a, T: Real> {
    store: &'a mut ParamStore<T>,
    rng: ChaCha8Rng,
}

impl<T: Real> Builder<'_, T> {
    fn uniform(&mut self, name: String, shape: &[usize], fan_in: usize) -> ParamId {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let rng = &mut self.rng;
        let t = Tensor::from_fn(shape, |_| T::of(rng.gen_range(-bound..bound)));
        self.store.add(name, t)
    }

    fn dense(&mut self, name: &str, out: usize, inp: usize) -> Dense {
        Dense {
            w: self.uniform(format!("{name}.weight"), &[out, inp], inp),
            b: self.uniform(format!("{name}.bias"), &[out], inp),
        }
    }

    fn conv(&mut self, name: &str, out: usize, inp: usize, k: usize) -> Dense {
        Dense {
            w: self.uniform(format!("{name}.weight"), &[out, inp, k], inp * k),
            b: self.uniform(format!("{name}.bias"), &[out], inp * k),
        }
    }
}

impl<T: Real> ModelParams<T> {
    /// Fresh weights, uniform in `±1/sqrt(fan_in)`, fully determined by `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (h, k) = (config.hidden, config.kernel);
        let mut store = ParamStore::new();
        let mut b = Builder { store: &mut store, rng: ChaCha8Rng::seed_from_u64(seed) };

        let encoder = b.uniform("audio_enc.weight".into(), &[h, 1, k], k);
        let decoder = b.uniform("audio_dec.weight".into(), &[h, 1, k], h);
        let visual = b.dense("visual_adapter", h, config.visual_dim);
        let mut blocks = Vec::with_capacity(config.blocks);
        for r in 0..config.blocks {
            let p = format!("blocks.{r}");
            let spk_in = b.dense(&format!("{p}.spk.in"), h, 2 * h);
            let spk_convs = (0..config.spk_depth)
                .map(|i| b.conv(&format!("{p}.spk.conv.{i}"), h, h, config.spk_kernel))
                .collect();
            let aseu = AseuLayout {
                visual: b.dense(&format!("{p}.aseu.visual"), h, h),
                current: b.dense(&format!("{p}.aseu.current"), h, h),
                anchor: b.dense(&format!("{p}.aseu.anchor"), h, h),
                score_current: b.dense(&format!("{p}.aseu.score_current"), 1, h),
                score_anchor: b.dense(&format!("{p}.aseu.score_anchor"), 1, h),
            };
            let mask_in = b.dense(&format!("{p}.mask.in"), h, 2 * h);
            let tcn = (0..config.tcn_depth)
                .map(|d| TcnLayout {
                    conv: b.conv(&format!("{p}.mask.tcn.{d}.conv"), h, h, TCN_KERNEL),
                    proj: b.dense(&format!("{p}.mask.tcn.{d}.proj"), h, h),
                    dilation: 1 << d,
                })
                .collect();
            let mask_out = b.dense(&format!("{p}.mask.out"), h, h);
            let classifier = b.uniform(format!("{p}.classifier.weight"), &[config.speakers, h], h);
            blocks.push(BlockLayout { spk_in, spk_convs, aseu, mask_in, tcn, mask_out, classifier });
        }
        Ok(Self { config: config.clone(), store, layout: Layout { encoder, decoder, visual, blocks } })
    }

    /// Re-draws only the attention-fusion weights.
    pub fn reseed_aseu(&mut self, seed: u64) -> Result<()> {
        let fresh = Self::init(&self.config, seed)?;
        for (dst, src) in self.store.iter_mut().zip(fresh.store.iter()) {
            if dst.name.contains(ASEU_TAG) {
                dst.value = src.value.clone();
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams { config: self.config.clone(), store: self.store.cast(), layout: self.layout.clone() }
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.store.get(id).value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.store.get_mut(id).value
    }
}
