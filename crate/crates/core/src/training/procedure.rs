//! Whole-utterance (Utt) and two-segment (Seg) training passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::LossWeights;
use crate::error::{shape_err, Error, Result};
use crate::model::{ForwardVars, ModelParams, Net, VisualSlice};
use crate::streaming::seconds_to_samples;
use crate::tape::{Tape, Var};
use crate::tensor::{Real, Tensor};

/// One labelled training mixture. `visual` is aligned with sample 0.
#[derive(Clone, Debug)]
pub struct Example<T: Real = f32> {
    pub mixture: Vec<T>,
    pub target: Vec<T>,
    pub visual: Tensor<T>,
    pub label: usize,
}

impl<T: Real> Example<T> {
    pub fn cast<U: Real>(&self) -> Example<U> {
        Example {
            mixture: self.mixture.iter().map(|v| U::of(v.f64())).collect(),
            target: self.target.iter().map(|v| U::of(v.f64())).collect(),
            visual: self.visual.cast(),
            label: self.label,
        }
    }

    fn check(&self) -> Result<()> {
        if self.mixture.len() != self.target.len() {
            return Err(shape_err(format!(
                "mixture has {} samples, target {}",
                self.mixture.len(),
                self.target.len()
            )));
        }
        Ok(())
    }
}

/// Runs the network on `y[start..end]` padded to cover every sample and
/// returns the forward record together with the estimate cut to the window.
fn forward_window<T: Real>(
    net: &Net<'_, T>,
    tape: &mut Tape<T>,
    ex: &Example<T>,
    (start, end): (usize, usize),
    anchors: Option<&[Var]>,
) -> Result<(ForwardVars, Var)> {
    let c = &net.params.config;
    let len = end - start;
    let mut y = ex.mixture[start..end].to_vec();
    y.resize(c.padded_len(len), T::zero());
    let visual = VisualSlice::window(&ex.visual, start, end, c.samples_per_frame())?;
    let yv = tape.constant(Tensor::row(&y));
    let vv = tape.constant(visual.frames);
    let out = net.forward(tape, yv, vv, visual.offset, anchors)?;
    let est = tape.truncate_columns(out.waveform, len)?;
    Ok((out, est))
}

fn target_row<T: Real>(ex: &Example<T>, start: usize, end: usize) -> Tensor<T> {
    Tensor::row(&ex.target[start..end])
}

/// Recorded Utt loss `SI-SNR + λ·Σ_r CE(e_cʳ)` on the whole utterance, bank
/// absent.
pub fn utt_loss<T: Real>(net: &Net<'_, T>, tape: &mut Tape<T>, ex: &Example<T>, lambda: f64) -> Result<Var> {
    ex.check()?;
    let n = ex.mixture.len();
    let (out, est) = forward_window(net, tape, ex, (0, n), None)?;
    let si = tape.si_snr_loss(est, &target_row(ex, 0, n))?;
    let mut terms = vec![(si, 1.0)];
    for (r, b) in out.blocks.iter().enumerate() {
        let logits = net.classify(tape, r, b.e_c)?;
        terms.push((tape.cross_entropy(logits, ex.label)?, lambda));
    }
    tape.weighted_sum(&terms)
}

/// Segment boundaries of one Seg pass, in samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegPlan {
    pub init: usize,
    pub shift: usize,
    pub win: usize,
}

impl SegPlan {
    /// The second window `[start, end)`.
    pub fn second_window(&self) -> (usize, usize) {
        let end = self.init + self.shift;
        (end.saturating_sub(self.win), end)
    }

    pub fn fits(&self, len: usize) -> bool {
        self.init > 0 && self.shift > 0 && self.init + self.shift <= len
    }
}

/// Draws Seg window geometry uniformly within ranges given in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegSampler {
    pub win_range: (f64, f64),
    pub shift_range: (f64, f64),
    pub init_range: (f64, f64),
    pub sample_rate: u32,
}

impl Default for SegSampler {
    fn default() -> Self {
        Self { win_range: (1.05, 3.2), shift_range: (0.05, 0.2), init_range: (0.05, 3.0), sample_rate: 16_000 }
    }
}

impl SegSampler {
    pub fn sample(&self, rng: &mut impl Rng) -> SegPlan {
        let sr = self.sample_rate as f64;
        let mut draw = |(lo, hi): (f64, f64)| {
            let s = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            ((s * sr).round() as usize).max(1)
        };
        let win = draw(self.win_range);
        let shift = draw(self.shift_range);
        let init = draw(self.init_range);
        SegPlan { init, shift, win }
    }

    /// Fixed plan from seconds, for reproducible runs.
    pub fn fixed(init: f64, shift: f64, win: f64, sample_rate: u32) -> Result<SegPlan> {
        Ok(SegPlan {
            init: seconds_to_samples(init, sample_rate, "init")?,
            shift: seconds_to_samples(shift, sample_rate, "shift")?,
            win: seconds_to_samples(win, sample_rate, "win")?,
        })
    }
}

/// Scalars recorded by one Seg pass.
#[derive(Clone, Debug)]
pub struct SegVars {
    pub loss: Var,
    /// `Σ_r mean(a_aʳ)` over the step-2 attention.
    pub penalty: Var,
    pub a_a: Vec<Var>,
}

/// Recorded Seg loss. Step 1 runs on `y[0..init]` without a bank and its
/// speaker embeddings become the anchors of step 2, which covers the window
/// ending at `init + shift`. Gradients reach both passes through the anchors.
pub fn seg_loss<T: Real>(
    net: &Net<'_, T>,
    tape: &mut Tape<T>,
    ex: &Example<T>,
    plan: SegPlan,
    lambda: f64,
) -> Result<SegVars> {
    ex.check()?;
    if !plan.fits(ex.mixture.len()) {
        return Err(Error::InputTooShort { needed: plan.init + plan.shift, got: ex.mixture.len() });
    }
    let (first, _) = forward_window(net, tape, ex, (0, plan.init), None)?;
    let anchors: Vec<Var> = first.blocks.iter().map(|b| b.e_c).collect();

    let (start, end) = plan.second_window();
    let (second, est) = forward_window(net, tape, ex, (start, end), Some(&anchors))?;
    let si = tape.si_snr_loss(est, &target_row(ex, start, end))?;
    let mut terms = vec![(si, 1.0)];
    let mut penalties = Vec::new();
    let mut a_a = Vec::new();
    for (r, b) in second.blocks.iter().enumerate() {
        let (Some(e_m), Some(aa)) = (b.e_m, b.a_a) else {
            unreachable!("anchored forward always records attention")
        };
        let pooled = tape.mean_over_time(e_m)?;
        let logits = net.classify(tape, r, pooled)?;
        terms.push((tape.cross_entropy(logits, ex.label)?, lambda));
        penalties.push((tape.mean(aa)?, 1.0));
        a_a.push(aa);
    }
    let loss = tape.weighted_sum(&terms)?;
    let penalty = tape.weighted_sum(&penalties)?;
    Ok(SegVars { loss, penalty, a_a })
}

/// Recorded components of the total loss.
#[derive(Clone, Debug)]
pub struct LossVars {
    pub total: Var,
    pub utt: Var,
    pub seg: Option<SegVars>,
}

/// `α·L_utt + β·L_seg + γ·L_pe`. Without a plan that fits the utterance the
/// Seg and penalty terms are skipped with a warning.
pub fn training_loss<T: Real>(
    params: &ModelParams<T>,
    tape: &mut Tape<T>,
    ex: &Example<T>,
    plan: Option<SegPlan>,
    w: &LossWeights,
) -> Result<LossVars> {
    let net = Net::new(params);
    let utt = utt_loss(&net, tape, ex, w.lambda)?;
    let mut terms = vec![(utt, w.alpha)];
    let seg = match plan {
        Some(p) if p.fits(ex.mixture.len()) => {
            let s = seg_loss(&net, tape, ex, p, w.lambda)?;
            terms.push((s.loss, w.beta));
            terms.push((s.penalty, w.gamma));
            Some(s)
        }
        Some(p) => {
            log::warn!(
                "utterance of {} samples is shorter than init+shift = {}; Seg loss skipped",
                ex.mixture.len(),
                p.init + p.shift
            );
            None
        }
        None => None,
    };
    let total = tape.weighted_sum(&terms)?;
    Ok(LossVars { total, utt, seg })
}
