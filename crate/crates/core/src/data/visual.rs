//! Synthetic visual features and visual impairments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::tensor::Tensor;

/// Upper edge of the band energies in Hz.
const BAND_TOP_HZ: f64 = 4_000.0;
const LOG_FLOOR: f64 = 1e-8;

/// Per-frame features of the target waveform: log-energy followed by
/// `F_v − 1` log band energies between 0 and 4 kHz, each channel
/// standardized over the utterance. Frame count is `round(duration·fps)`.
pub fn synth_visual_features(target: &[f32], cfg: &ModelConfig) -> Tensor {
    let spf = cfg.samples_per_frame();
    let frames = (target.len() as f64 / spf as f64).round() as usize;
    let fv = cfg.visual_dim;
    let nfft = spf.next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let bin_hz = cfg.sample_rate as f64 / nfft as f64;
    let top_bin = ((BAND_TOP_HZ / bin_hz) as usize).clamp(1, nfft / 2);
    let bands = fv - 1;

    let mut raw = vec![vec![0.0f64; frames]; fv];
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    for f in 0..frames {
        let lo = (f * spf).min(target.len());
        let hi = ((f + 1) * spf).min(target.len());
        let seg = &target[lo..hi];
        let energy = seg.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / spf as f64;
        raw[0][f] = (energy + LOG_FLOOR).ln();
        if bands == 0 {
            continue;
        }
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (b, &v) in buf.iter_mut().zip(seg) {
            b.re = v as f64;
        }
        fft.process(&mut buf);
        for (band, row) in raw[1..].iter_mut().enumerate() {
            let b0 = 1 + band * (top_bin - 1) / bands;
            let b1 = (1 + (band + 1) * (top_bin - 1) / bands).max(b0 + 1);
            let power = buf[b0..b1].iter().map(|c| c.norm_sqr()).sum::<f64>() / ((b1 - b0) * nfft) as f64;
            row[f] = (power + LOG_FLOOR).ln();
        }
    }

    let mut data = Vec::with_capacity(fv * frames);
    for row in &raw {
        let n = row.len().max(1) as f64;
        let mean = row.iter().sum::<f64>() / n;
        let std = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        data.extend(row.iter().map(|v| if std > 1e-6 { ((v - mean) / std) as f32 } else { 0.0 }));
    }
    Tensor::new(vec![fv, frames], data).expect("sized above")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImpairmentKind {
    /// Frames dropped entirely.
    VisualMissing,
    /// Mouth region hidden: the lower half of the feature dimensions.
    LipConcealment,
    /// Blurred along time and noisy.
    LowResolution,
}

impl ImpairmentKind {
    pub const ALL: [ImpairmentKind; 3] = [Self::VisualMissing, Self::LipConcealment, Self::LowResolution];

    pub fn name(self) -> &'static str {
        match self {
            Self::VisualMissing => "visual-missing",
            Self::LipConcealment => "lip-concealment",
            Self::LowResolution => "low-resolution",
        }
    }
}

impl std::str::FromStr for ImpairmentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown impairment {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentSpec {
    pub kind: ImpairmentKind,
    /// Fraction of frames to impair, in `[0, 1)`.
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Impaired {
    pub frames: Tensor,
    /// First impaired frame and number of impaired frames.
    pub span: (usize, usize),
    pub realized_ratio: f64,
}

const BLUR_WIDTH: usize = 5;
const BLUR_NOISE_STD: f64 = 0.1;

/// Impairs one contiguous span of `round(ratio·frames)` frames starting at a
/// seeded position. Frames outside the span are untouched.
pub fn apply_impairment(frames: &Tensor, spec: &ImpairmentSpec) -> Result<Impaired> {
    if !(0.0..1.0).contains(&spec.ratio) {
        return Err(Error::Config(format!("impairment ratio {} outside [0, 1)", spec.ratio)));
    }
    let n = frames.cols();
    let len = (spec.ratio * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let start = rng.gen_range(0..=n - len);
    let out = impair_with(frames, spec.kind, start..start + len, &mut rng);
    let realized_ratio = if n == 0 { 0.0 } else { len as f64 / n as f64 };
    Ok(Impaired { frames: out, span: (start, len), realized_ratio })
}

/// Impairs frames `span` with `kind`; `seed` drives the low-resolution
/// noise.
pub fn impair_span(frames: &Tensor, kind: ImpairmentKind, span: std::ops::Range<usize>, seed: u64) -> Result<Tensor> {
    if span.start > span.end || span.end > frames.cols() {
        return Err(crate::error::shape_err(format!("span {span:?} outside {} frames", frames.cols())));
    }
    Ok(impair_with(frames, kind, span, &mut ChaCha8Rng::seed_from_u64(seed)))
}

fn impair_with(frames: &Tensor, kind: ImpairmentKind, span: std::ops::Range<usize>, rng: &mut ChaCha8Rng) -> Tensor {
    let (fv, n) = (frames.rows(), frames.cols());
    let mut out = frames.clone();
    match kind {
        ImpairmentKind::VisualMissing => {
            for d in 0..fv {
                for f in span.clone() {
                    out.data_mut()[d * n + f] = 0.0;
                }
            }
        }
        ImpairmentKind::LipConcealment => {
            for d in 0..fv / 2 {
                for f in span.clone() {
                    out.data_mut()[d * n + f] = 0.0;
                }
            }
        }
        ImpairmentKind::LowResolution => {
            let noise = Normal::new(0.0, BLUR_NOISE_STD).expect("valid std");
            let half = BLUR_WIDTH / 2;
            for d in 0..fv {
                let row = frames.row_slice(d);
                for f in span.clone() {
                    let (lo, hi) = (f.saturating_sub(half), (f + half + 1).min(n));
                    let avg = row[lo..hi].iter().map(|&v| v as f64).sum::<f64>() / (hi - lo) as f64;
                    out.data_mut()[d * n + f] = (avg + noise.sample(rng)) as f32;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silent_target_gives_zero_features() {
        let cfg = ModelConfig::default();
        let f = synth_visual_features(&vec![0.0; 16_000], &cfg);
        assert_eq!(f.shape(), &[cfg.visual_dim, 25]);
        assert!(f.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frame_count_rounds_duration() {
        let cfg = ModelConfig::default();
        for (n, frames) in [(17_120, 27), (16_300, 25), (16_330, 26), (100, 0)] {
            assert_eq!(synth_visual_features(&vec![0.1; n], &cfg).cols(), frames, "{n}");
        }
    }

    #[test]
    fn impairment_span_length() {
        let frames = Tensor::from_fn(&[4, 100], |i| i as f32 + 1.0);
        for kind in ImpairmentKind::ALL {
            let out = apply_impairment(&frames, &ImpairmentSpec { kind, ratio: 0.5, seed: 2 }).unwrap();
            assert_eq!(out.span.1, 50);
            assert_eq!(out.realized_ratio, 0.5);
            let changed: Vec<usize> = (0..100)
                .filter(|&f| (0..4).any(|d| out.frames.at(d, f) != frames.at(d, f)))
                .collect();
            assert_eq!(changed, (out.span.0..out.span.0 + 50).collect::<Vec<_>>(), "{kind:?}");
        }
        let none = apply_impairment(&frames, &ImpairmentSpec { kind: ImpairmentKind::VisualMissing, ratio: 0.0, seed: 2 })
            .unwrap();
        assert_eq!((none.frames, none.realized_ratio), (frames.clone(), 0.0));
        assert!(apply_impairment(&frames, &ImpairmentSpec { kind: ImpairmentKind::VisualMissing, ratio: 1.0, seed: 0 })
            .is_err());
    }

    #[test]
    fn lip_concealment_zeroes_lower_dims() {
        let frames = Tensor::full(&[4, 10], 1.0);
        let out = apply_impairment(
            &frames,
            &ImpairmentSpec { kind: ImpairmentKind::LipConcealment, ratio: 0.3, seed: 9 },
        )
        .unwrap();
        let (s, l) = out.span;
        for f in s..s + l {
            assert_eq!([out.frames.at(0, f), out.frames.at(1, f)], [0.0, 0.0]);
            assert_eq!([out.frames.at(2, f), out.frames.at(3, f)], [1.0, 1.0]);
        }
    }

    #[test]
    fn explicit_span() {
        let frames = Tensor::full(&[2, 10], 1.0);
        let out = impair_span(&frames, ImpairmentKind::VisualMissing, 7..10, 0).unwrap();
        assert_eq!(out.row_slice(0), [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(impair_span(&frames, ImpairmentKind::VisualMissing, 7..11, 0).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ImpairmentKind::ALL {
            assert_eq!(k.name().parse::<ImpairmentKind>().unwrap(), k);
        }
        assert!("blur".parse::<ImpairmentKind>().is_err());
    }
}
