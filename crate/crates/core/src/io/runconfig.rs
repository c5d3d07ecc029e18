//! Plain-text `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; unknown keys and repeated keys are errors. [`RunConfig::to_text`]
//! lists every key with its current value.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::streaming::{Normalization, StreamConfig};
use crate::training::{LossWeights, DEFAULT_LR, DEMO_LAMBDA};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub stream: StreamConfig,
    pub loss: LossWeights,
    /// Seeds parameter initialization.
    pub model_seed: u64,
    /// Seeds simulated data and segment sampling.
    pub data_seed: u64,
    pub lr: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            stream: StreamConfig::default(),
            loss: LossWeights::default(),
            model_seed: 0,
            data_seed: 0,
            lr: DEFAULT_LR,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn normalization_name(n: Normalization) -> &'static str {
    match n {
        Normalization::None => "none",
        Normalization::OverlapRescale => "overlap-rescale",
    }
}

impl RunConfig {
    /// Defaults of the training demo: the demo model geometry and the
    /// demo classification weight.
    pub fn demo() -> Self {
        let loss = LossWeights { lambda: DEMO_LAMBDA, ..LossWeights::default() };
        Self { model: ModelConfig::demo(), loss, ..Self::default() }
    }

    /// Every accepted key.
    pub const KEYS: [&'static str; 25] = [
        "model.hidden",
        "model.kernel",
        "model.stride",
        "model.blocks",
        "model.visual_dim",
        "model.tcn_depth",
        "model.speakers",
        "model.sample_rate",
        "model.video_fps",
        "model.spk_kernel",
        "model.spk_depth",
        "stream.l_init",
        "stream.l_win",
        "stream.l_shift",
        "stream.normalization",
        "stream.norm_min",
        "stream.norm_max",
        "stream.theta",
        "stream.use_bank",
        "loss.alpha",
        "loss.beta",
        "loss.gamma",
        "loss.lambda",
        "seed.model",
        "seed.data",
    ];

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let m = &mut self.model;
        let s = &mut self.stream;
        match key {
            "model.hidden" => m.hidden = parse(key, v)?,
            "model.kernel" => m.kernel = parse(key, v)?,
            "model.stride" => m.stride = parse(key, v)?,
            "model.blocks" => m.blocks = parse(key, v)?,
            "model.visual_dim" => m.visual_dim = parse(key, v)?,
            "model.tcn_depth" => m.tcn_depth = parse(key, v)?,
            "model.speakers" => m.speakers = parse(key, v)?,
            "model.sample_rate" => m.sample_rate = parse(key, v)?,
            "model.video_fps" => m.video_fps = parse(key, v)?,
            "model.spk_kernel" => m.spk_kernel = parse(key, v)?,
            "model.spk_depth" => m.spk_depth = parse(key, v)?,
            "stream.l_init" => s.l_init = parse(key, v)?,
            "stream.l_win" => s.l_win = parse(key, v)?,
            "stream.l_shift" => s.l_shift = parse(key, v)?,
            "stream.normalization" => {
                s.normalization = match v {
                    "none" => Normalization::None,
                    "overlap-rescale" => Normalization::OverlapRescale,
                    _ => return Err(Error::Config(format!("{key}: expected none or overlap-rescale, got {v:?}"))),
                }
            }
            "stream.norm_min" => s.norm_clamp.0 = parse(key, v)?,
            "stream.norm_max" => s.norm_clamp.1 = parse(key, v)?,
            "stream.theta" => s.theta = parse(key, v)?,
            "stream.use_bank" => s.use_bank = parse_bool(key, v)?,
            "loss.alpha" => self.loss.alpha = parse(key, v)?,
            "loss.beta" => self.loss.beta = parse(key, v)?,
            "loss.gamma" => self.loss.gamma = parse(key, v)?,
            "loss.lambda" => self.loss.lambda = parse(key, v)?,
            "seed.model" => self.model_seed = parse(key, v)?,
            "seed.data" => self.data_seed = parse(key, v)?,
            "train.lr" => self.lr = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `text` over `base`.
    pub fn parse_over(base: Self, text: &str) -> Result<Self> {
        let mut cfg = base;
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_owned()) {
                return Err(Error::Config(format!("line {}: key {k:?} given twice", i + 1)));
            }
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.stream.samples()?;
        self.loss.validate()?;
        if self.stream.sample_rate != self.model.sample_rate {
            return Err(Error::Config("stream and model sample rates differ".into()));
        }
        if !(self.stream.theta > 0.0 && self.stream.theta < 1.0) {
            return Err(Error::Config(format!("theta {} outside (0, 1)", self.stream.theta)));
        }
        let (lo, hi) = self.stream.norm_clamp;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!("gain clamp ({lo}, {hi}) invalid")));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_over(Self::default(), &std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let (m, s, l) = (&self.model, &self.stream, &self.loss);
        let lines = [
            format!("model.hidden = {}", m.hidden),
            format!("model.kernel = {}", m.kernel),
            format!("model.stride = {}", m.stride),
            format!("model.blocks = {}", m.blocks),
            format!("model.visual_dim = {}", m.visual_dim),
            format!("model.tcn_depth = {}", m.tcn_depth),
            format!("model.speakers = {}", m.speakers),
            format!("model.sample_rate = {}", m.sample_rate),
            format!("model.video_fps = {}", m.video_fps),
            format!("model.spk_kernel = {}", m.spk_kernel),
            format!("model.spk_depth = {}", m.spk_depth),
            format!("stream.l_init = {}", s.l_init),
            format!("stream.l_win = {}", s.l_win),
            format!("stream.l_shift = {}", s.l_shift),
            format!("stream.normalization = {}", normalization_name(s.normalization)),
            format!("stream.norm_min = {}", s.norm_clamp.0),
            format!("stream.norm_max = {}", s.norm_clamp.1),
            format!("stream.theta = {}", s.theta),
            format!("stream.use_bank = {}", s.use_bank),
            format!("loss.alpha = {}", l.alpha),
            format!("loss.beta = {}", l.beta),
            format!("loss.gamma = {}", l.gamma),
            format!("loss.lambda = {}", l.lambda),
            format!("seed.model = {}", self.model_seed),
            format!("seed.data = {}", self.data_seed),
            format!("train.lr = {}", self.lr),
        ];
        lines.join("\n") + "\n"
    }
}

impl FromStr for RunConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_over(Self::default(), s)
    }
}
