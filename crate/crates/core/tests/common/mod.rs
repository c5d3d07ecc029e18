#![allow(dead_code)]

use momuse::{ModelConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise(n: usize, amp: f32, seed: u64) -> Vec<f32> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen_range(-amp..amp)).collect()
}

/// Random features, one frame per started video frame of `samples`.
pub fn frames_for(cfg: &ModelConfig, samples: usize, seed: u64) -> Tensor {
    let n = samples.div_ceil(cfg.samples_per_frame());
    let mut r = rng(seed);
    Tensor::from_fn(&[cfg.visual_dim, n], |_| r.gen_range(-1.0..1.0))
}

pub fn columns(t: &Tensor, range: std::ops::Range<usize>) -> Tensor {
    let n = t.cols();
    let cols = range.len();
    Tensor::from_fn(&[t.rows(), cols], |i| t.data()[(i / cols) * n + range.start + i % cols])
}
