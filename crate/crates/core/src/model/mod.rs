//! The extraction network: audio encoder/decoder, visual adapter and `R`
//! extractor blocks, each with a speaker encoder, attention fusion, mask
//! estimator and speaker classifier.

mod config;
mod network;
mod params;

pub use config::{ModelConfig, TCN_KERNEL};
pub use network::{fuse_momentum, BlockVars, ForwardVars, Net};
pub use params::{AseuLayout, BlockLayout, Dense, Layout, ModelParams, TcnLayout, ASEU_TAG};

use crate::error::{Error, Result};
use crate::tape::Tape;
use crate::tensor::{Real, Tensor};

/// Visual frames for a stretch of audio, with the sample offset of the audio
/// start inside the first frame.
#[derive(Clone, Debug)]
pub struct VisualSlice<T: Real = f32> {
    pub frames: Tensor<T>,
    pub offset: usize,
}

impl<T: Real> VisualSlice<T> {
    /// Frames aligned with audio that starts at sample 0.
    pub fn aligned(frames: Tensor<T>) -> Self {
        Self { frames, offset: 0 }
    }

    /// Frames overlapping audio samples `[start, end)`: from the frame holding
    /// `start` (floor) through the frame holding `end − 1` (ceil on `end`),
    /// clipped to what is available.
    pub fn window(all: &Tensor<T>, start: usize, end: usize, samples_per_frame: usize) -> Result<Self> {
        let first = start / samples_per_frame;
        let last = end.div_ceil(samples_per_frame).min(all.cols());
        let first = first.min(last);
        let index: Vec<Option<usize>> = (first..last).map(Some).collect();
        let frames = crate::ops::gather_columns(all, &index)?;
        Ok(Self { frames, offset: start - first * samples_per_frame })
    }
}

/// Values of one block after an extraction.
#[derive(Clone, Debug)]
pub struct BlockSummary<T: Real = f32> {
    pub e_c: Tensor<T>,
    pub a_c: Option<Tensor<T>>,
    pub a_a: Option<Tensor<T>>,
    pub e_m: Option<Tensor<T>>,
}

#[derive(Clone, Debug)]
pub struct Extraction<T: Real = f32> {
    /// Estimated target, same length as the input.
    pub waveform: Vec<T>,
    pub blocks: Vec<BlockSummary<T>>,
}

/// Runs the network on a waveform of any length `≥ 1`.
///
/// The input is zero-padded at the end so that encoder frames cover every
/// sample, and the decoded output is cut back to the input length.
pub fn extract<T: Real>(
    params: &ModelParams<T>,
    y: &[T],
    visual: &VisualSlice<T>,
    anchors: Option<&[Tensor<T>]>,
) -> Result<Extraction<T>> {
    if y.is_empty() {
        return Err(Error::InputTooShort { needed: 1, got: 0 });
    }
    let padded_len = params.config.padded_len(y.len());
    let mut padded = y.to_vec();
    padded.resize(padded_len, T::zero());

    let mut tape = Tape::new();
    let yv = tape.constant(Tensor::row(&padded));
    let vv = tape.constant(visual.frames.clone());
    let anchor_vars: Option<Vec<_>> = anchors.map(|a| a.iter().map(|t| tape.constant(t.clone())).collect());
    let out = Net::new(params).forward(&mut tape, yv, vv, visual.offset, anchor_vars.as_deref())?;

    let mut waveform = tape.value(out.waveform).data().to_vec();
    waveform.truncate(y.len());
    let blocks = out
        .blocks
        .iter()
        .map(|b| BlockSummary {
            e_c: tape.value(b.e_c).clone(),
            a_c: b.a_c.map(|v| tape.value(v).clone()),
            a_a: b.a_a.map(|v| tape.value(v).clone()),
            e_m: b.e_m.map(|v| tape.value(v).clone()),
        })
        .collect();
    Ok(Extraction { waveform, blocks })
}
