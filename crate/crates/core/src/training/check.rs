//! Finite-difference check of the full training losses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::procedure::{seg_loss, utt_loss, Example, SegPlan};
use crate::error::{Error, Result};
use crate::gradcheck::{grad_check, GradCheckReport};
use crate::model::{ModelConfig, ModelParams, Net};
use crate::params::ParamStore;
use crate::tensor::{Real, Tensor, TwoFloat};

/// Arithmetic used for the check. The network loss in dB is only accurate
/// to about `1e-14` in `f64`, which is too coarse for the smallest
/// gradients of a deep stack, hence the double-double default.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    F32,
    F64,
    DoubleDouble,
}

impl std::str::FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Self::F32),
            "f64" => Ok(Self::F64),
            "dd" | "double-double" => Ok(Self::DoubleDouble),
            _ => Err(Error::Config(format!("unknown precision {s:?} (f32, f64, dd)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelCheckConfig {
    pub model: ModelConfig,
    /// Utterance length in samples.
    pub samples: usize,
    pub seed: u64,
    pub eps: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub precision: Precision,
}

impl Default for ModelCheckConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::tiny(),
            samples: 256,
            seed: 0,
            eps: 1e-5,
            lambda: 0.1,
            gamma: 0.05,
            precision: Precision::DoubleDouble,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelCheck {
    pub utt: GradCheckReport,
    /// Seg loss plus `γ` times the attention penalty.
    pub seg: GradCheckReport,
    pub plan: SegPlan,
}

impl ModelCheck {
    pub fn max_rel_err(&self) -> f64 {
        self.utt.max_rel_err.max(self.seg.max_rel_err)
    }
}

/// Seeded speech-like example: a noisy tone as target, a slower tone as
/// interference, and one random visual frame per started video frame.
pub fn check_example(config: &ModelConfig, samples: usize, seed: u64) -> Example<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(10));
    let target: Vec<f64> =
        (0..samples).map(|i| (i as f64 * 0.21).sin() * 0.5 + rng.gen_range(-0.1..0.1)).collect();
    let mixture = target.iter().enumerate().map(|(i, t)| t + 0.3 * (i as f64 * 0.05).sin()).collect();
    let frames = samples.div_ceil(config.samples_per_frame()).max(1);
    let visual = Tensor::from_fn(&[config.visual_dim, frames], |_| rng.gen_range(-1.0..1.0));
    Example { mixture, target, visual, label: 1 % config.speakers }
}

/// Seg geometry scaled to the utterance: first segment half of it, shift a
/// quarter, window five eighths.
pub fn check_plan(samples: usize) -> SegPlan {
    SegPlan { init: samples / 2, shift: samples / 4, win: samples * 5 / 8 }
}

pub fn model_grad_check(cfg: &ModelCheckConfig) -> Result<ModelCheck> {
    match cfg.precision {
        Precision::F32 => run::<f32>(cfg),
        Precision::F64 => run::<f64>(cfg),
        Precision::DoubleDouble => run::<TwoFloat>(cfg),
    }
}

fn run<T: Real>(cfg: &ModelCheckConfig) -> Result<ModelCheck> {
    let plan = check_plan(cfg.samples);
    if plan.init == 0 || plan.shift == 0 {
        return Err(Error::InputTooShort { needed: 4, got: cfg.samples });
    }
    let mut params = ModelParams::<f32>::init(&cfg.model, cfg.seed)?.cast::<T>();
    let ex = check_example(&cfg.model, cfg.samples, cfg.seed).cast::<T>();
    let (config, layout) = (params.config.clone(), params.layout.clone());
    let bind = |store: &ParamStore<T>| ModelParams { config: config.clone(), store: store.clone(), layout: layout.clone() };

    let utt = grad_check(
        |s, tape| {
            let p = bind(s);
            utt_loss(&Net::new(&p), tape, &ex, cfg.lambda)
        },
        &mut params.store,
        cfg.eps,
    )?;
    let seg = grad_check(
        |s, tape| {
            let p = bind(s);
            let v = seg_loss(&Net::new(&p), tape, &ex, plan, cfg.lambda)?;
            tape.weighted_sum(&[(v.loss, 1.0), (v.penalty, cfg.gamma)])
        },
        &mut params.store,
        cfg.eps,
    )?;
    Ok(ModelCheck { utt, seg, plan })
}
