use momuse::data::{
    apply_impairment, mix_at_snr, snr_db, synth_speech, synth_visual_features, ImpairmentKind, ImpairmentSpec, SpeakerProfile,
};
use momuse::{ModelConfig, Tensor};
use proptest::prelude::*;

fn frames(n: usize) -> Tensor {
    Tensor::from_fn(&[8, n], |i| ((i * 37 % 101) as f32 - 50.0) / 25.0)
}

fn column(t: &Tensor, c: usize) -> Vec<f32> {
    (0..t.rows()).map(|r| t.at(r, c)).collect()
}

#[test]
fn realized_ratio_tracks_request() {
    let v = frames(100);
    for kind in ImpairmentKind::ALL {
        for ratio in [0.1, 0.5, 0.79] {
            let spec = ImpairmentSpec { kind, ratio, seed: 11 };
            let out = apply_impairment(&v, &spec).unwrap();
            assert!((out.realized_ratio - ratio).abs() <= 0.01, "{kind:?} {ratio}");
            let (start, len) = out.span;
            for c in (0..100).filter(|c| !(start..start + len).contains(c)) {
                let (a, b) = (column(&v, c), column(&out.frames, c));
                assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()), "frame {c} changed");
            }
            let again = apply_impairment(&v, &spec).unwrap();
            assert_eq!(again.frames.data(), out.frames.data());
            assert_eq!(again.span, out.span);
        }
    }
}

#[test]
fn visual_missing_zeroes_its_span() {
    let v = frames(100);
    let out = apply_impairment(&v, &ImpairmentSpec { kind: ImpairmentKind::VisualMissing, ratio: 0.5, seed: 4 }).unwrap();
    let (start, len) = out.span;
    assert_eq!(len, 50);
    assert!((start..start + len).all(|c| column(&out.frames, c).iter().all(|&x| x == 0.0)));
}

proptest! {
    #[test]
    fn span_is_seeded_and_contained(ratio in 0.0f64..0.99, seed in any::<u64>(), n in 1usize..300) {
        let v = frames(n);
        let spec = ImpairmentSpec { kind: ImpairmentKind::LowResolution, ratio, seed };
        let out = apply_impairment(&v, &spec).unwrap();
        prop_assert!(out.span.0 + out.span.1 <= n);
        prop_assert_eq!(out.span.1, (ratio * n as f64).round() as usize);
        let again = apply_impairment(&v, &spec).unwrap();
        prop_assert_eq!(again.frames.data(), out.frames.data());
    }

    #[test]
    fn remeasured_snr_matches_request(snr in -10.0f64..10.0, seed in 0u64..1000) {
        let a = synth_speech(&SpeakerProfile::for_label(1), 0.25, 16_000, seed);
        let b = synth_speech(&SpeakerProfile::for_label(5), 0.25, 16_000, seed + 1);
        let m = mix_at_snr(&a, &b, snr).unwrap();
        prop_assert!((snr_db(&m.target, &m.interferer).unwrap() - snr).abs() < 1e-6);
        prop_assert!(m.mixture.iter().all(|v| v.abs() <= 0.9));
    }
}

fn envelope(x: &[f32], spf: usize) -> Vec<f64> {
    x.chunks(spf).map(|c| (c.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / spf as f64 + 1e-8).ln()).collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let (ma, mb) = (a.iter().sum::<f64>() / n as f64, b.iter().sum::<f64>() / n as f64);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn features_follow_their_own_speaker() {
    let cfg = ModelConfig::default();
    let spf = cfg.samples_per_frame();
    let a = synth_speech(&SpeakerProfile::for_label(0), 4.0, cfg.sample_rate, 21);
    let b = synth_speech(&SpeakerProfile::for_label(3), 4.0, cfg.sample_rate, 22);
    let feats = synth_visual_features(&a, &cfg);
    assert_eq!(feats.cols(), 100);
    let row: Vec<f64> = feats.row_slice(0).iter().map(|&v| v as f64).collect();
    let own = pearson(&row, &envelope(&a, spf));
    let other = pearson(&row, &envelope(&b, spf));
    assert!(own - other > 0.2, "own {own:.3} other {other:.3}");
}
