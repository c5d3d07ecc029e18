//! Overfitting one fixed two-speaker mixture.
//!
//! Every step trains on both speakers of the mixture as targets, so the
//! network has to follow the visual cue (or the remembered anchor) to know
//! whom to extract. A fixed cycle of scenarios, each a Seg geometry and one
//! impairment per speaker, is drawn once and repeated, so a moving average
//! over one cycle compares the same examples at every step. Some scenarios
//! lose the visual stream for good after the first segment, the situation
//! the memory bank exists for.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{training_loss, Adam, Example, LossWeights, SegPlan, SegSampler, DEFAULT_LR};
use crate::data::{
    apply_impairment, impair_span, mix_at_snr, si_snr_metric, synth_speech, synth_visual_features, ImpairmentKind,
    ImpairmentSpec, SpeakerProfile,
};
use crate::error::{Error, Result};
use crate::model::{extract, ModelConfig, ModelParams, VisualSlice};
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Header line of the loss log.
pub const LOSS_LOG_HEADER: &str = "# step l_utt l_seg l_pe total";

/// Clean lead, in seconds, before the visuals of a tail scenario stop.
const TAIL_LEAD: f64 = 0.25;

/// Speaker-classification weight of the demo. The default weight is tuned
/// for long training; at a few hundred steps a larger weight is what makes
/// the speaker embedding depend on the visual stream.
pub const DEMO_LAMBDA: f64 = 1.0;

/// One mixture and the references of both of its speakers.
#[derive(Clone, Debug)]
pub struct DemoData {
    pub mixture: Vec<f32>,
    /// Speaker 0 then speaker 1, scaled as in the mixture.
    pub sources: [Vec<f32>; 2],
    /// Clean features of each source.
    pub visuals: [Tensor; 2],
}

/// A low voice and a high voice mixed at 0 dB.
pub fn demo_data(model: &ModelConfig, duration: f64, seed: u64) -> Result<DemoData> {
    let low = SpeakerProfile { f0_range: (100.0, 140.0), ..SpeakerProfile::for_label(0) };
    let high = SpeakerProfile { f0_range: (400.0, 600.0), ..SpeakerProfile::for_label(0) };
    let a = synth_speech(&low, duration, model.sample_rate, seed);
    let b = synth_speech(&high, duration, model.sample_rate, seed.wrapping_add(1));
    let mix = mix_at_snr(&a, &b, 0.0)?;
    let visuals = [synth_visual_features(&mix.target, model), synth_visual_features(&mix.interferer, model)];
    Ok(DemoData { mixture: mix.mixture, sources: [mix.target, mix.interferer], visuals })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoConfig {
    pub steps: usize,
    pub lr: f64,
    pub weights: LossWeights,
    pub seg: SegSampler,
    /// Impairment ratios are drawn from `[0, ratio_max)`.
    pub ratio_max: f64,
    /// Scenarios per cycle. A divisor of 20 keeps a 20-step moving average
    /// of the loss log over whole cycles.
    pub cycle: usize,
    /// Every `tail_every`-th scenario (starting with the first) drops every
    /// frame from the start of the second Seg window on, instead of a random
    /// span, so the second pass sees no visuals at all.
    pub tail_every: usize,
    /// The learning rate follows a cosine from `lr` down to
    /// `lr * final_lr_ratio` at the last step; 1 keeps it constant.
    pub final_lr_ratio: f64,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            lr: DEFAULT_LR,
            weights: LossWeights { lambda: DEMO_LAMBDA, ..LossWeights::default() },
            seg: SegSampler::default(),
            ratio_max: 0.8,
            cycle: 10,
            tail_every: 4,
            final_lr_ratio: 0.05,
            seed: 0,
        }
    }
}

/// Loss values of one step, averaged over its examples. Seg terms are
/// absent when the plan did not fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub utt: f64,
    pub seg: Option<f64>,
    pub pe: Option<f64>,
    pub total: f64,
}

impl StepRecord {
    /// `step l_utt l_seg l_pe total`, with `-` for absent terms.
    pub fn line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_owned(), |v| format!("{v:.6}"));
        format!("{} {:.6} {} {} {:.6}", self.step, self.utt, opt(self.seg), opt(self.pe), self.total)
    }
}

/// The training example of `role` (0 or 1) with the given features.
pub fn demo_example(data: &DemoData, role: usize, visual: Tensor) -> Result<Example> {
    if role > 1 {
        return Err(Error::LabelOutOfRange { label: role, classes: 2 });
    }
    Ok(Example { mixture: data.mixture.clone(), target: data.sources[role].clone(), visual, label: role })
}

struct Scenario {
    plan: SegPlan,
    examples: [Example; 2],
}

fn scenarios(data: &DemoData, model: &ModelConfig, cfg: &DemoConfig) -> Result<Vec<Scenario>> {
    if cfg.cycle == 0 || cfg.tail_every == 0 {
        return Err(Error::Config("scenario cycle and tail interval must be positive".into()));
    }
    let spf = model.samples_per_frame();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.cycle);
    for i in 0..cfg.cycle {
        let tail = i % cfg.tail_every == 0;
        let plan = if tail { tail_plan(cfg, &mut rng)? } else { cfg.seg.sample(&mut rng) };
        let visual = |role: usize, rng: &mut ChaCha8Rng| -> Result<Tensor> {
            let clean = &data.visuals[role];
            if tail {
                let from = (plan.second_window().0 / spf).min(clean.cols());
                return impair_span(clean, ImpairmentKind::VisualMissing, from..clean.cols(), 0);
            }
            let kind = ImpairmentKind::ALL[rng.gen_range(0..3)];
            let ratio = if cfg.ratio_max > 0.0 { rng.gen_range(0.0..cfg.ratio_max) } else { 0.0 };
            Ok(apply_impairment(clean, &ImpairmentSpec { kind, ratio, seed: rng.gen() })?.frames)
        };
        let v0 = visual(0, &mut rng)?;
        let v1 = visual(1, &mut rng)?;
        out.push(Scenario { plan, examples: [demo_example(data, 0, v0)?, demo_example(data, 1, v1)?] });
    }
    Ok(out)
}

/// A plan whose second window starts at least `TAIL_LEAD` seconds in, so
/// that step 1 sees clean frames and step 2 none.
fn tail_plan(cfg: &DemoConfig, rng: &mut ChaCha8Rng) -> Result<SegPlan> {
    let lead = (TAIL_LEAD * cfg.seg.sample_rate as f64) as usize;
    for _ in 0..10_000 {
        let plan = cfg.seg.sample(rng);
        if plan.second_window().0 >= lead {
            return Ok(plan);
        }
    }
    Err(Error::Config("segment ranges never start the second window after the lead".into()))
}

/// Runs `cfg.steps` Adam steps, calling `on_step` after each.
pub fn train_demo(
    params: &mut ModelParams,
    data: &DemoData,
    cfg: &DemoConfig,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<Vec<StepRecord>> {
    if params.config.speakers < 2 {
        return Err(Error::Config("the demo needs a classifier over at least two speakers".into()));
    }
    let scenarios = scenarios(data, &params.config, cfg)?;
    let mut adam = Adam::new(&params.store, cfg.lr);
    let mut log = Vec::with_capacity(cfg.steps);
    for step in 1..=cfg.steps {
        let sc = &scenarios[(step - 1) % scenarios.len()];
        params.store.zero_grads();
        let mut sums = [0.0f64; 4];
        let mut seg_seen = true;
        for ex in &sc.examples {
            let mut tape = Tape::new();
            let vars = training_loss(params, &mut tape, ex, Some(sc.plan), &cfg.weights)?;
            tape.backward(vars.total, &mut params.store)?;
            let scalar = |v| tape.value(v).data()[0] as f64;
            sums[0] += scalar(vars.utt);
            sums[3] += scalar(vars.total);
            match &vars.seg {
                Some(s) => {
                    sums[1] += scalar(s.loss);
                    sums[2] += scalar(s.penalty);
                }
                None => seg_seen = false,
            }
        }
        adam.lr = cosine_lr(cfg, step);
        adam.step(&mut params.store);

        let k = sc.examples.len() as f64;
        let rec = StepRecord {
            step,
            utt: sums[0] / k,
            seg: seg_seen.then(|| sums[1] / k),
            pe: seg_seen.then(|| sums[2] / k),
            total: sums[3] / k,
        };
        on_step(&rec);
        log.push(rec);
    }
    Ok(log)
}

fn cosine_lr(cfg: &DemoConfig, step: usize) -> f64 {
    let span = cfg.steps.saturating_sub(1).max(1) as f64;
    let phase = (step - 1) as f64 / span;
    let r = cfg.final_lr_ratio;
    cfg.lr * (r + (1.0 - r) * 0.5 * (1.0 + (std::f64::consts::PI * phase).cos()))
}

/// Offline SI-SNR in dB of the extraction of `role` with clean features.
pub fn demo_si_snr(params: &ModelParams, data: &DemoData, role: usize) -> Result<f64> {
    let out = extract(params, &data.mixture, &VisualSlice::aligned(data.visuals[role].clone()), None)?;
    si_snr_metric(&data.sources[role], &out.waveform)
}
