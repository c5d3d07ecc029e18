use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network geometry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Feature channels `H`.
    pub hidden: usize,
    /// Audio encoder kernel in samples.
    pub kernel: usize,
    /// Audio encoder stride in samples.
    pub stride: usize,
    /// Number of extractor blocks `R`.
    pub blocks: usize,
    /// Visual feature dimension per video frame.
    pub visual_dim: usize,
    /// Dilated residual blocks per mask estimator.
    pub tcn_depth: usize,
    /// Number of training speakers `N` (classifier width).
    pub speakers: usize,
    pub sample_rate: u32,
    pub video_fps: u32,
    /// Kernel width of the speaker encoder conv stack (odd).
    pub spk_kernel: usize,
    /// Layers in the speaker encoder conv stack.
    pub spk_depth: usize,
}

/// Kernel width of the dilated mask-estimator convolutions.
pub const TCN_KERNEL: usize = 3;

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            kernel: 40,
            stride: 20,
            blocks: 4,
            visual_dim: 8,
            tcn_depth: 4,
            speakers: 8,
            sample_rate: 16_000,
            video_fps: 25,
            spk_kernel: 3,
            spk_depth: 1,
        }
    }
}

impl ModelConfig {
    /// The smallest configuration used for gradient checks.
    pub fn tiny() -> Self {
        Self {
            hidden: 8,
            kernel: 8,
            stride: 4,
            blocks: 2,
            visual_dim: 4,
            tcn_depth: 2,
            speakers: 4,
            ..Self::default()
        }
    }

    /// Desk-scale configuration used by the training demo.
    pub fn demo() -> Self {
        Self {
            hidden: 16,
            kernel: 40,
            stride: 20,
            blocks: 2,
            visual_dim: 8,
            tcn_depth: 4,
            speakers: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.hidden < 4 {
            return fail(format!("hidden must be at least 4, got {}", self.hidden));
        }
        if self.blocks < 1 {
            return fail("at least one extractor block is required".into());
        }
        if self.kernel < 1 || self.stride < 1 {
            return fail("kernel and stride must be positive".into());
        }
        if self.visual_dim < 1 || self.speakers < 1 {
            return fail("visual_dim and speakers must be positive".into());
        }
        if self.spk_kernel.is_multiple_of(2) {
            return fail(format!("spk_kernel must be odd, got {}", self.spk_kernel));
        }
        if self.video_fps == 0 || !self.sample_rate.is_multiple_of(self.video_fps) {
            return fail(format!(
                "sample rate {} is not a whole multiple of {} fps",
                self.sample_rate, self.video_fps
            ));
        }
        if !self.samples_per_frame().is_multiple_of(self.stride) {
            return fail(format!(
                "visual upsample factor {}/({}·{}) is not a positive integer",
                self.sample_rate, self.stride, self.video_fps
            ));
        }
        Ok(())
    }

    /// Audio samples per video frame.
    pub fn samples_per_frame(&self) -> usize {
        (self.sample_rate / self.video_fps) as usize
    }

    /// Latent steps per video frame, `sample_rate / (stride · fps)`.
    pub fn upsample_factor(&self) -> usize {
        self.samples_per_frame() / self.stride
    }

    /// Latent length for `samples` input samples.
    pub fn latent_len(&self, samples: usize) -> Option<usize> {
        (samples >= self.kernel).then(|| (samples - self.kernel) / self.stride + 1)
    }

    /// Smallest length `≥ samples` whose latent frames cover every sample.
    pub fn padded_len(&self, samples: usize) -> usize {
        if samples <= self.kernel {
            return self.kernel;
        }
        let steps = (samples - self.kernel).div_ceil(self.stride);
        self.kernel + steps * self.stride
    }

    /// Decoder output length for `latent` frames.
    pub fn decoded_len(&self, latent: usize) -> usize {
        (latent - 1) * self.stride + self.kernel
    }
}
