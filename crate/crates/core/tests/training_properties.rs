mod common;

use momuse::training::{penalty_loss, si_snr_loss, total_loss, LossWeights};
use momuse::{MemoryBank, Tensor};
use proptest::prelude::*;

fn signal() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (16usize..200).prop_flat_map(|n| {
        (prop::collection::vec(-1.0f64..1.0, n), prop::collection::vec(-0.5f64..0.5, n))
    })
}

#[test]
fn hand_projection_case() {
    // s_t = 1.5x, |s_t|² = 4.5, |e|² = 1.5.
    let expected = 10.0 * (4.5f64 / 1.5).log10();
    let loss = si_snr_loss(&[1.0f64, 0.0, -1.0], &[1.0, 1.0, -2.0]).unwrap();
    assert!((loss + expected).abs() < 1e-3, "{loss}");
    assert!((expected - 4.771).abs() < 1e-3);
}

#[test]
fn perfect_estimate_hits_the_cap() {
    let x = [0.3f64, -0.1, 0.7, -0.9];
    assert_eq!(si_snr_loss(&x, &x).unwrap(), -80.0);
}

proptest! {
    #[test]
    fn si_snr_is_scale_invariant((x, noise) in signal()) {
        let est: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let base = si_snr_loss(&x, &est).unwrap();
        for alpha in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = est.iter().map(|v| v * alpha).collect();
            prop_assert!((si_snr_loss(&x, &scaled).unwrap() - base).abs() < 1e-6);
        }
    }

    #[test]
    fn si_snr_ignores_offsets((x, noise) in signal(), c in -3.0f64..3.0) {
        let est: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let shifted: Vec<f64> = est.iter().map(|v| v + c).collect();
        let d = si_snr_loss(&x, &est).unwrap() - si_snr_loss(&x, &shifted).unwrap();
        prop_assert!(d.abs() < 1e-6);
    }

    #[test]
    fn penalty_stays_within_block_count(blocks in prop::collection::vec(prop::collection::vec(0.0f32..=1.0, 1..40), 1..5)) {
        let a: Vec<Tensor> = blocks.iter().map(|b| Tensor::row(b)).collect();
        let p = penalty_loss(&a).unwrap();
        prop_assert!((0.0..=blocks.len() as f64).contains(&p));
    }
}

#[test]
fn half_attention_on_two_blocks_costs_one() {
    let a = vec![Tensor::full(&[1, 37], 0.5f32); 2];
    assert_eq!(penalty_loss(&a).unwrap(), 1.0);
}

#[test]
fn weighted_total() {
    let w = LossWeights::default();
    assert!((total_loss(2.0, 4.0, 1.0, &w) - (0.3 * 2.0 + 0.7 * 4.0 + 0.05)).abs() < 1e-12);
}

#[test]
fn scripted_momentum_sequence() {
    let e = |v: f32| Tensor::column(&[v, -v, 2.0 * v]);
    let mut bank = MemoryBank::empty(1, 0.7).unwrap();
    bank.init(&[e(1.0)]).unwrap();
    let mut history = vec![bank.anchors().unwrap()[0].clone()];
    let mut replaced = Vec::new();
    for (i, mean) in [0.8, 0.6, 0.9].into_iter().enumerate() {
        let step = i + 2;
        let d = bank.update(&[e(step as f32)], &[mean], step).unwrap();
        replaced.push(d.blocks[0].replaced);
        history.push(bank.anchors().unwrap()[0].clone());
    }
    assert_eq!(replaced, [true, false, true]);
    assert_eq!(history[1], e(2.0));
    assert_eq!(history[2].data(), history[1].data(), "anchor must be untouched by a rejected update");
    assert_eq!(history[3], e(4.0));
    assert_eq!(bank.last_update_step(), [4]);
}

#[test]
fn threshold_is_strict() {
    let mut bank = MemoryBank::empty(2, 0.7).unwrap();
    let z = Tensor::column(&[0.0f32, 0.0]);
    bank.init(&[z.clone(), z.clone()]).unwrap();
    let d = bank.update(&[Tensor::column(&[1.0, 1.0]), Tensor::column(&[2.0, 2.0])], &[0.7, 0.7000001], 2).unwrap();
    assert_eq!(d.blocks.iter().map(|b| b.replaced).collect::<Vec<_>>(), [false, true]);
    assert_eq!(bank.anchors().unwrap()[0], z);
}

proptest! {
    #[test]
    fn bank_only_moves_above_threshold(means in prop::collection::vec(0.0f64..1.0, 1..30)) {
        let mut bank = MemoryBank::empty(1, 0.7).unwrap();
        bank.init(&[Tensor::column(&[0.0f32])]).unwrap();
        let mut expect = 0.0f32;
        for (i, &m) in means.iter().enumerate() {
            let step = i + 2;
            bank.update(&[Tensor::column(&[step as f32])], &[m], step).unwrap();
            if m > 0.7 {
                expect = step as f32;
            }
            prop_assert_eq!(bank.anchors().unwrap()[0].data()[0], expect);
        }
    }
}
