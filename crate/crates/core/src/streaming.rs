//! Online extraction over sliding windows.
//!
//! The first window covers the initialization span and seeds the memory
//! bank. Every later step ends `l_shift` further on, looks back at most
//! `l_win`, and emits only its newest `l_shift` samples, rescaled to agree
//! with the previous window on their overlap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{extract, ModelParams, VisualSlice};
use crate::momentum::{mean_attention, MemoryBank, UpdateDecision, DEFAULT_THETA};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    None,
    /// Least-squares gain matching the overlap with the previous window.
    OverlapRescale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    /// Seconds buffered before the first window.
    pub l_init: f64,
    /// Longest window in seconds.
    pub l_win: f64,
    /// Hop between windows in seconds.
    pub l_shift: f64,
    pub sample_rate: u32,
    pub normalization: Normalization,
    /// Clamp range of the overlap gain.
    pub norm_clamp: (f64, f64),
    /// Memory bank threshold.
    pub theta: f64,
    /// With `false` every window runs without the bank.
    pub use_bank: bool,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            l_init: 1.0,
            l_win: 2.7,
            l_shift: 0.2,
            sample_rate: 16_000,
            normalization: Normalization::OverlapRescale,
            norm_clamp: (0.25, 4.0),
            theta: DEFAULT_THETA,
            use_bank: true,
        }
    }
}

/// Window lengths in samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowSamples {
    pub init: usize,
    pub win: usize,
    pub shift: usize,
}

pub(crate) fn seconds_to_samples(seconds: f64, sample_rate: u32, what: &str) -> Result<usize> {
    let exact = seconds * sample_rate as f64;
    let n = exact.round();
    if (exact - n).abs() > 1e-6 || n < 0.0 {
        return Err(Error::Config(format!("{what} = {seconds} s is not a whole number of samples")));
    }
    Ok(n as usize)
}

impl StreamConfig {
    pub fn samples(&self) -> Result<WindowSamples> {
        let init = seconds_to_samples(self.l_init, self.sample_rate, "l_init")?;
        let win = seconds_to_samples(self.l_win, self.sample_rate, "l_win")?;
        let shift = seconds_to_samples(self.l_shift, self.sample_rate, "l_shift")?;
        if init == 0 || shift == 0 || shift > win {
            return Err(Error::Config(format!(
                "need l_init > 0 and 0 < l_shift <= l_win, got {init}/{win}/{shift} samples"
            )));
        }
        let (lo, hi) = self.norm_clamp;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!("invalid gain clamp [{lo}, {hi}]")));
        }
        Ok(WindowSamples { init, win, shift })
    }
}

/// One processing step: the window `[start, end)` and the span it emits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowPlan {
    pub step: usize,
    pub start: usize,
    pub end: usize,
    pub emit_start: usize,
    pub emit_end: usize,
}

impl WindowSamples {
    /// Plan of step `t ≥ 2` when at least `end_t` samples exist.
    fn step_plan(&self, t: usize) -> WindowPlan {
        let end = self.init + (t - 1) * self.shift;
        WindowPlan { step: t, start: end.saturating_sub(self.win), end, emit_start: end - self.shift, emit_end: end }
    }

    fn first_plan(&self, total: usize) -> WindowPlan {
        let end = self.init.min(total);
        WindowPlan { step: 1, start: 0, end, emit_start: 0, emit_end: end }
    }

    /// Last, truncated step emitting `[emitted, total)`.
    fn final_plan(&self, t: usize, emitted: usize, total: usize) -> WindowPlan {
        WindowPlan { step: t, start: total.saturating_sub(self.win), end: total, emit_start: emitted, emit_end: total }
    }
}

/// Complete window schedule for `total` samples. Emitted spans partition
/// `[0, total)`.
pub fn plan_windows(total: usize, cfg: &StreamConfig) -> Result<Vec<WindowPlan>> {
    let s = cfg.samples()?;
    if total < s.init {
        return Err(Error::InsufficientInput { needed: s.init, got: total });
    }
    let mut plans = vec![s.first_plan(total)];
    let mut t = 2;
    while plans.last().unwrap().emit_end < total {
        let p = s.step_plan(t);
        plans.push(if p.end <= total { p } else { s.final_plan(t, plans.last().unwrap().emit_end, total) });
        t += 1;
    }
    Ok(plans)
}

/// Least-squares gain `<prev, cur> / (<cur, cur> + 1e-8)`, clamped.
pub fn overlap_gain(prev: &[f32], cur: &[f32], clamp: (f64, f64)) -> f64 {
    let pc: f64 = prev.iter().zip(cur).map(|(&a, &b)| a as f64 * b as f64).sum();
    let cc: f64 = cur.iter().map(|&b| b as f64 * b as f64).sum();
    (pc / (cc + 1e-8)).clamp(clamp.0, clamp.1)
}

/// Scales the emitted span of the current window so its overlap with the
/// previous window's output agrees in level. Returns `(gain, chunk)`.
/// Without a previous window the chunk is emitted unscaled.
pub fn normalize_chunk(
    cur: &[f32],
    cur_start: usize,
    prev: Option<(&[f32], usize)>,
    emit: (usize, usize),
    cfg: &StreamConfig,
) -> (f64, Vec<f32>) {
    let span = &cur[emit.0 - cur_start..emit.1 - cur_start];
    let gain = match (cfg.normalization, prev) {
        (Normalization::OverlapRescale, Some((prev, prev_start))) => {
            let lo = cur_start.max(prev_start);
            let hi = (prev_start + prev.len()).min(emit.0);
            if hi > lo {
                overlap_gain(&prev[lo - prev_start..hi - prev_start], &cur[lo - cur_start..hi - cur_start], cfg.norm_clamp)
            } else {
                1.0
            }
        }
        _ => 1.0,
    };
    let g = gain as f32;
    (gain, span.iter().map(|&v| v * g).collect())
}

/// A span of output produced by one window step.
#[derive(Clone, Debug)]
pub struct EmittedChunk {
    pub plan: WindowPlan,
    pub samples: Vec<f32>,
    pub gain: f64,
    /// Bank decisions at steps after the first (bank enabled only).
    pub decision: Option<UpdateDecision>,
}

/// Mutable state of one stream.
#[derive(Clone, Debug)]
pub struct StreamState {
    pub audio: Vec<f32>,
    /// Visual frames received so far, frame-major.
    pub frames: Vec<f32>,
    pub frame_count: usize,
    /// Completed window steps.
    pub step: usize,
    pub emitted: usize,
    pub bank: MemoryBank,
    /// Start sample and (rescaled) output of the last window.
    pub prev_window: Option<(usize, Vec<f32>)>,
}

pub struct StreamEngine<'p> {
    params: &'p ModelParams<f32>,
    cfg: StreamConfig,
    sizes: WindowSamples,
    state: StreamState,
}

impl<'p> StreamEngine<'p> {
    pub fn new(params: &'p ModelParams<f32>, cfg: StreamConfig) -> Result<Self> {
        let sizes = cfg.samples()?;
        if cfg.sample_rate != params.config.sample_rate {
            return Err(Error::Config(format!(
                "stream runs at {} Hz but the model expects {} Hz",
                cfg.sample_rate, params.config.sample_rate
            )));
        }
        let bank = MemoryBank::empty(params.config.blocks, cfg.theta)?;
        let state = StreamState {
            audio: Vec::new(),
            frames: Vec::new(),
            frame_count: 0,
            step: 0,
            emitted: 0,
            bank,
            prev_window: None,
        };
        Ok(Self { params, cfg, sizes, state })
    }

    pub fn state(&self) -> &StreamState {
        &self.state
    }

    pub fn bank(&self) -> &MemoryBank {
        &self.state.bank
    }

    fn spf(&self) -> usize {
        self.params.config.samples_per_frame()
    }

    /// Buffers audio and the visual frames (`F_v × n`) that arrived with it,
    /// then runs every window that is now complete. Frames may lead or lag
    /// the audio by at most one frame; a push that breaks this is refused
    /// and leaves the stream untouched.
    pub fn push(&mut self, audio: &[f32], frames: &Tensor) -> Result<Vec<EmittedChunk>> {
        let fv = self.params.config.visual_dim;
        if frames.cols() > 0 && frames.rows() != fv {
            return Err(Error::Shape(format!("visual frames have {} dims, model expects {fv}", frames.rows())));
        }
        let samples = self.state.audio.len() + audio.len();
        let frame_count = self.state.frame_count + frames.cols();
        let expected = samples as f64 / self.spf() as f64;
        if (frame_count as f64 - expected).abs() > 1.0 + 1e-9 {
            return Err(Error::Alignment(format!(
                "{frame_count} video frames for {samples} audio samples ({expected:.2} frames expected)"
            )));
        }
        self.state.audio.extend_from_slice(audio);
        for f in 0..frames.cols() {
            self.state.frames.extend((0..fv).map(|d| frames.at(d, f)));
        }
        self.state.frame_count = frame_count;

        let mut out = Vec::new();
        while let Some(plan) = self.next_full_plan() {
            let needed_frames = plan.end.div_ceil(self.spf());
            if self.state.frame_count < needed_frames {
                break;
            }
            out.push(self.run(plan)?);
        }
        Ok(out)
    }

    fn next_full_plan(&self) -> Option<WindowPlan> {
        let total = self.state.audio.len();
        let plan = match self.state.step {
            0 => self.sizes.first_plan(self.sizes.init),
            t => self.sizes.step_plan(t + 1),
        };
        (plan.end <= total).then_some(plan)
    }

    /// Processes everything still buffered: pending full windows first, then
    /// one truncated window for the remainder (or a single short window when
    /// the stream never reached the initialization length).
    pub fn flush(&mut self) -> Result<Vec<EmittedChunk>> {
        let mut out = Vec::new();
        while let Some(plan) = self.next_full_plan() {
            out.push(self.run(plan)?);
        }
        let total = self.state.audio.len();
        if total > self.state.emitted {
            let plan = match self.state.step {
                0 => self.sizes.first_plan(total),
                t => self.sizes.final_plan(t + 1, self.state.emitted, total),
            };
            out.push(self.run(plan)?);
        }
        Ok(out)
    }

    fn visual_for(&self, start: usize, end: usize) -> Result<VisualSlice> {
        let spf = self.spf();
        let fv = self.params.config.visual_dim;
        let first = (start / spf).min(self.state.frame_count);
        let last = end.div_ceil(spf).min(self.state.frame_count).max(first);
        let n = last - first;
        let mut data = vec![0.0f32; fv * n];
        for (j, f) in (first..last).enumerate() {
            for d in 0..fv {
                data[d * n + j] = self.state.frames[f * fv + d];
            }
        }
        Ok(VisualSlice { frames: Tensor::new(vec![fv, n], data)?, offset: start - first * spf })
    }

    fn run(&mut self, plan: WindowPlan) -> Result<EmittedChunk> {
        let y = &self.state.audio[plan.start..plan.end];
        let visual = self.visual_for(plan.start, plan.end)?;
        let first = plan.step == 1;
        let anchors = if self.cfg.use_bank && !first { self.state.bank.anchors() } else { None };
        let result = extract(self.params, y, &visual, anchors)?;
        let embeddings: Vec<Tensor> = result.blocks.iter().map(|b| b.e_c.clone()).collect();

        let decision = if !self.cfg.use_bank {
            None
        } else if first {
            self.state.bank.init(&embeddings)?;
            None
        } else {
            let means = result
                .blocks
                .iter()
                .map(|b| mean_attention(b.a_c.as_ref().expect("bank present yields attention")))
                .collect::<Result<Vec<_>>>()?;
            Some(self.state.bank.update(&embeddings, &means, plan.step)?)
        };

        let prev = self.state.prev_window.as_ref().map(|(s, w)| (w.as_slice(), *s));
        let (gain, samples) =
            normalize_chunk(&result.waveform, plan.start, prev, (plan.emit_start, plan.emit_end), &self.cfg);
        let g = gain as f32;
        self.state.prev_window = Some((plan.start, result.waveform.iter().map(|&v| v * g).collect()));
        self.state.step = plan.step;
        self.state.emitted = plan.emit_end;
        Ok(EmittedChunk { plan, samples, gain, decision })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SR: usize = 16_000;

    #[test]
    fn three_second_plan() {
        let cfg = StreamConfig::default();
        let plans = plan_windows(3 * SR, &cfg).unwrap();
        assert_eq!(plans.len(), 11);
        assert_eq!((plans[1].start, plans[1].end), (0, 19_200));
        assert_eq!((plans[10].start, plans[10].end), (4_800, 48_000));
        let emitted: usize = plans.iter().map(|p| p.emit_end - p.emit_start).sum();
        assert_eq!(emitted, 3 * SR);
    }

    #[test]
    fn plan_edge_cases() {
        let cfg = StreamConfig::default();
        let one = plan_windows(SR, &cfg).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!((one[0].emit_start, one[0].emit_end), (0, SR));
        assert!(matches!(plan_windows(SR - 1, &cfg), Err(Error::InsufficientInput { .. })));

        let tiling = StreamConfig { l_init: 0.5, l_win: 0.5, l_shift: 0.5, ..cfg.clone() };
        let plans = plan_windows(2 * SR, &tiling).unwrap();
        assert_eq!(plans.len(), 4);
        for p in &plans {
            assert_eq!((p.start, p.end), (p.emit_start, p.emit_end));
        }

        let residue = plan_windows(17_120, &cfg).unwrap();
        let last = residue.last().unwrap();
        assert_eq!(last.emit_end - last.emit_start, 1_120);
    }

    #[test]
    fn plans_partition_input() {
        let cfg = StreamConfig { l_init: 0.05, l_win: 0.3, l_shift: 0.0625, ..Default::default() };
        for total in [800, 801, 1799, 5000, 12_345] {
            let plans = plan_windows(total, &cfg).unwrap();
            let mut next = 0;
            for p in &plans {
                assert_eq!(p.emit_start, next);
                assert!(p.start <= p.emit_start && p.emit_end == p.end);
                assert!(p.end - p.start <= 4800);
                next = p.emit_end;
            }
            assert_eq!(next, total);
        }
    }

    #[test]
    fn config_validation() {
        assert!(StreamConfig { l_shift: 3.0, ..Default::default() }.samples().is_err());
        assert!(StreamConfig { l_init: 1.00001, ..Default::default() }.samples().is_err());
        assert!(StreamConfig { norm_clamp: (0.0, 1.0), ..Default::default() }.samples().is_err());
    }

    #[test]
    fn gain_cases() {
        let prev = [0.5f32, -1.0, 0.25, 2.0];
        assert!((overlap_gain(&prev, &prev, (0.25, 4.0)) - 1.0).abs() < 1e-6);
        let doubled: Vec<f32> = prev.iter().map(|v| 2.0 * v).collect();
        assert!((overlap_gain(&prev, &doubled, (0.25, 4.0)) - 0.5).abs() < 1e-6);
        assert_eq!(overlap_gain(&[1.0, 0.0], &[0.0, 1.0], (0.25, 4.0)), 0.25);
    }

    #[test]
    fn normalize_halves_doubled_window() {
        let cfg = StreamConfig::default();
        let prev: Vec<f32> = (0..10).map(|i| (i as f32 * 0.7).sin()).collect();
        // Current window starts 2 samples later and is twice as loud.
        let cur: Vec<f32> = (2..14).map(|i| 2.0 * (i as f32 * 0.7).sin()).collect();
        let (g, chunk) = normalize_chunk(&cur, 2, Some((&prev, 0)), (10, 14), &cfg);
        assert!((g - 0.5).abs() < 1e-6);
        for (c, i) in chunk.iter().zip(10..14) {
            assert!((c - (i as f32 * 0.7).sin()).abs() < 1e-5);
        }
        let (g, _) = normalize_chunk(&cur, 2, None, (2, 14), &cfg);
        assert_eq!(g, 1.0);
    }
}
