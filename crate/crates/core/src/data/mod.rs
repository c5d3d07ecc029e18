//! Two-speaker mixtures, synthetic visual features, visual impairments and
//! evaluation metrics.

mod metrics;
mod speech;
mod visual;

pub use metrics::{sdr_metric, si_snr_metric, snr_db};
pub use speech::{synth_speech, SpeakerProfile};
pub use visual::{apply_impairment, impair_span, synth_visual_features, Impaired, ImpairmentKind, ImpairmentSpec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::tensor::Tensor;

/// Peak level of a normalized mixture.
pub const PEAK: f32 = 0.9;

/// A labelled target with one interfering speaker.
#[derive(Clone, Debug)]
pub struct Utterance {
    pub target: Vec<f32>,
    pub interferer: Vec<f32>,
    pub speaker_label: usize,
    pub sample_rate: u32,
}

impl Utterance {
    /// Loops or truncates the interferer to the target length.
    pub fn new(target: Vec<f32>, interferer: &[f32], speaker_label: usize, sample_rate: u32) -> Result<Self> {
        if energy(&target) == 0.0 {
            return Err(Error::ZeroEnergy("target"));
        }
        if interferer.is_empty() {
            return Err(Error::ZeroEnergy("interferer"));
        }
        let interferer = interferer.iter().copied().cycle().take(target.len()).collect();
        Ok(Self { target, interferer, speaker_label, sample_rate })
    }
}

fn energy(x: &[f32]) -> f64 {
    x.iter().map(|&v| (v as f64).powi(2)).sum()
}

#[derive(Clone, Debug)]
pub struct Mixture {
    pub mixture: Vec<f32>,
    /// Target scaled by the same peak gain as the mixture.
    pub target: Vec<f32>,
    /// Interferer after SNR scaling and peak gain.
    pub interferer: Vec<f32>,
}

/// Scales the interferer so the target-to-interferer power ratio is
/// `snr_db`, adds it to the target, and brings the mixture peak to at most
/// [`PEAK`] with the same gain on both references.
pub fn mix_at_snr(target: &[f32], interferer: &[f32], snr_db: f64) -> Result<Mixture> {
    if target.len() != interferer.len() {
        return Err(crate::error::shape_err(format!(
            "target has {} samples, interferer {}",
            target.len(),
            interferer.len()
        )));
    }
    let (et, ei) = (energy(target), energy(interferer));
    if et == 0.0 {
        return Err(Error::ZeroEnergy("target"));
    }
    if ei == 0.0 {
        return Err(Error::ZeroEnergy("interferer"));
    }
    let g = (et / (ei * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled: Vec<f64> = interferer.iter().map(|&v| v as f64 * g).collect();
    let mix: Vec<f64> = target.iter().zip(&scaled).map(|(&t, &i)| t as f64 + i).collect();
    let peak = mix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let k = if peak > PEAK as f64 { PEAK as f64 / peak } else { 1.0 };
    Ok(Mixture {
        mixture: mix.iter().map(|v| (v * k) as f32).collect(),
        target: target.iter().map(|&v| (v as f64 * k) as f32).collect(),
        interferer: scaled.iter().map(|v| (v * k) as f32).collect(),
    })
}

/// Parameters of a simulated corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub duration: f64,
    pub snr_range: (f64, f64),
    /// Impairment ratios are drawn from `[0, ratio_max)`.
    pub ratio_max: f64,
    pub speakers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { seed: 0, duration: 4.0, snr_range: (-10.0, 10.0), ratio_max: 0.8, speakers: 8 }
    }
}

/// One simulated example.
#[derive(Clone, Debug)]
pub struct SimItem {
    pub mixture: Vec<f32>,
    pub target: Vec<f32>,
    /// Impaired features of the target.
    pub features: Tensor,
    pub label: usize,
    pub interferer_label: usize,
    pub impairment: ImpairmentSpec,
    pub realized_ratio: f64,
    pub snr_db: f64,
}

/// Simulates item `index`, seeded by `seed + index`.
pub fn simulate_item(sim: &SimConfig, model: &ModelConfig, index: u64) -> Result<SimItem> {
    if sim.speakers < 2 {
        return Err(Error::Config("simulation needs at least two speakers".into()));
    }
    if !(0.0..=1.0).contains(&sim.ratio_max) || sim.snr_range.0 > sim.snr_range.1 {
        return Err(Error::Config("invalid ratio or SNR range".into()));
    }
    let seed = sim.seed.wrapping_add(index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label = rng.gen_range(0..sim.speakers);
    let interferer_label = (label + rng.gen_range(1..sim.speakers)) % sim.speakers;
    let sr = model.sample_rate;
    let target = synth_speech(&SpeakerProfile::for_label(label), sim.duration, sr, rng.gen());
    let other = synth_speech(&SpeakerProfile::for_label(interferer_label), sim.duration, sr, rng.gen());
    let utt = Utterance::new(target, &other, label, sr)?;
    let (lo, hi) = sim.snr_range;
    let snr = if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let mix = mix_at_snr(&utt.target, &utt.interferer, snr)?;
    let clean = synth_visual_features(&mix.target, model);
    let kind = ImpairmentKind::ALL[rng.gen_range(0..3)];
    let ratio = if sim.ratio_max > 0.0 { rng.gen_range(0.0..sim.ratio_max) } else { 0.0 };
    let impairment = ImpairmentSpec { kind, ratio, seed: rng.gen() };
    let impaired = apply_impairment(&clean, &impairment)?;
    Ok(SimItem {
        mixture: mix.mixture,
        target: mix.target,
        features: impaired.frames,
        label,
        interferer_label,
        impairment,
        realized_ratio: impaired.realized_ratio,
        snr_db: snr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_hits_requested_snr() {
        let t: Vec<f32> = (0..1000).map(|i| (i as f32 * 0.05).sin()).collect();
        let n: Vec<f32> = (0..1000).map(|i| (i as f32 * 0.31).cos() * 3.0).collect();
        for snr in [-10.0, 0.0, 3.5, 10.0] {
            let m = mix_at_snr(&t, &n, snr).unwrap();
            assert!((snr_db(&m.target, &m.interferer).unwrap() - snr).abs() < 1e-6, "{snr}");
            assert!(m.mixture.iter().all(|v| v.abs() <= PEAK));
        }
        assert!(mix_at_snr(&t, &vec![0.0; 1000], 0.0).is_err());
    }

    #[test]
    fn utterance_loops_interferer() {
        let u = Utterance::new(vec![1.0; 5], &[1.0, 2.0], 0, 16_000).unwrap();
        assert_eq!(u.interferer, [1.0, 2.0, 1.0, 2.0, 1.0]);
        assert!(Utterance::new(vec![0.0; 5], &[1.0], 0, 16_000).is_err());
    }

    #[test]
    fn simulation_is_seeded() {
        let sim = SimConfig { duration: 0.5, ..Default::default() };
        let cfg = ModelConfig::default();
        let a = simulate_item(&sim, &cfg, 3).unwrap();
        let b = simulate_item(&sim, &cfg, 3).unwrap();
        assert_eq!((&a.mixture, &a.features, a.label), (&b.mixture, &b.features, b.label));
        assert_ne!(a.label, a.interferer_label);
        assert_eq!(a.features.cols(), 13);
        assert!(a.realized_ratio < 0.8 + 1.0 / 13.0);
    }
}
