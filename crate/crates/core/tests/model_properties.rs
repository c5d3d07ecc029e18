mod common;

use momuse::model::{extract, ModelConfig, ModelParams, VisualSlice};
use momuse::Tensor;
use proptest::prelude::*;

fn tiny() -> ModelConfig {
    ModelConfig::tiny()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn attention_is_a_convex_pair(seed in 0u64..10_000, len in 9usize..900) {
        let cfg = tiny();
        let params = ModelParams::init(&cfg, seed % 7).unwrap();
        let y = common::noise(len, 0.8, seed);
        let v = common::frames_for(&cfg, len, seed + 1);
        let anchors: Vec<Tensor> = (0..cfg.blocks)
            .map(|r| Tensor::from_fn(&[cfg.hidden, 1], |i| ((i + r) as f32 * 0.37 + seed as f32).sin()))
            .collect();
        let out = extract(&params, &y, &VisualSlice::aligned(v), Some(&anchors)).unwrap();
        prop_assert_eq!(out.waveform.len(), len);
        for (b, anchor) in out.blocks.iter().zip(&anchors) {
            let (a_c, a_a, e_m) = (b.a_c.as_ref().unwrap(), b.a_a.as_ref().unwrap(), b.e_m.as_ref().unwrap());
            for (c, a) in a_c.data().iter().zip(a_a.data()) {
                prop_assert!((c + a - 1.0).abs() <= 1e-6);
                prop_assert!((0.0..=1.0).contains(c) && (0.0..=1.0).contains(a));
            }
            for h in 0..cfg.hidden {
                let (p, q) = (b.e_c.at(h, 0), anchor.at(h, 0));
                let (lo, hi) = (p.min(q), p.max(q));
                for &m in e_m.row_slice(h) {
                    prop_assert!(m >= lo - 1e-6 && m <= hi + 1e-6, "{} outside [{}, {}]", m, lo, hi);
                }
            }
        }
    }
}

#[test]
fn seeded_init_is_deterministic() {
    let cfg = tiny();
    let (a, b) = (ModelParams::init(&cfg, 4).unwrap(), ModelParams::init(&cfg, 4).unwrap());
    assert!(a.store.iter().zip(b.store.iter()).all(|(p, q)| p.value == q.value));
    let y = common::noise(300, 0.5, 1);
    let v = VisualSlice::aligned(common::frames_for(&cfg, 300, 2));
    assert_eq!(extract(&a, &y, &v, None).unwrap().waveform, extract(&b, &y, &v, None).unwrap().waveform);
    let c = ModelParams::init(&cfg, 5).unwrap();
    assert_ne!(extract(&c, &y, &v, None).unwrap().waveform, extract(&a, &y, &v, None).unwrap().waveform);
}

#[test]
fn anchor_equal_to_current_reproduces_plain_path_conditioning() {
    // With E_a = E_c the fused sequence equals E_c whatever the weights.
    let cfg = tiny();
    let params = ModelParams::init(&cfg, 1).unwrap();
    let y = common::noise(400, 0.5, 3);
    let v = VisualSlice::aligned(common::frames_for(&cfg, 400, 4));
    let plain = extract(&params, &y, &v, None).unwrap();
    let anchors = vec![plain.blocks[0].e_c.clone(), Tensor::zeros(&[cfg.hidden, 1])];
    let fused = extract(&params, &y, &v, Some(&anchors)).unwrap();
    let b0 = &fused.blocks[0];
    assert_eq!(b0.e_c, plain.blocks[0].e_c);
    let e_m = b0.e_m.as_ref().unwrap();
    for h in 0..cfg.hidden {
        assert!(e_m.row_slice(h).iter().all(|&m| (m - b0.e_c.at(h, 0)).abs() < 1e-6));
    }
}

#[test]
fn visual_features_change_the_output() {
    let cfg = tiny();
    let params = ModelParams::init(&cfg, 2).unwrap();
    let y = common::noise(640, 0.5, 5);
    let a = extract(&params, &y, &VisualSlice::aligned(common::frames_for(&cfg, 640, 6)), None).unwrap();
    let b = extract(&params, &y, &VisualSlice::aligned(common::frames_for(&cfg, 640, 7)), None).unwrap();
    assert_ne!(a.waveform, b.waveform);
}

#[test]
fn misaligned_visuals_are_rejected() {
    let cfg = tiny();
    let params = ModelParams::init(&cfg, 0).unwrap();
    let y = common::noise(16_000, 0.5, 5);
    let few = common::frames_for(&cfg, 8_000, 1);
    let err = extract(&params, &y, &VisualSlice::aligned(few), None).unwrap_err();
    assert!(matches!(err, momuse::Error::Alignment(_)), "{err}");
}
