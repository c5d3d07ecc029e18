//! Tape-level forward pass.

use super::config::TCN_KERNEL;
use super::params::{BlockLayout, Dense, ModelParams};
use crate::error::{shape_err, Error, Result};
use crate::ops::ConvGeom;
use crate::tape::{Tape, Var};
use crate::tensor::Real;

/// Per-block outputs recorded on the tape.
#[derive(Clone, Copy, Debug)]
pub struct BlockVars {
    /// Masked latent `X̂ʳ = Mʳ ⊗ Y`.
    pub x_hat: Var,
    pub mask: Var,
    /// Current speaker embedding, `H × 1`.
    pub e_c: Var,
    /// Attention on the current embedding, `1 × L` (bank present only).
    pub a_c: Option<Var>,
    /// Attention on the anchor embedding, `1 × L` (bank present only).
    pub a_a: Option<Var>,
    /// Fused embedding sequence, `H × L` (bank present only).
    pub e_m: Option<Var>,
}

#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub latent: Var,
    pub visual: Var,
    /// Decoded waveform, `1 × ((L−1)·S + K)`.
    pub waveform: Var,
    pub blocks: Vec<BlockVars>,
}

/// Binds a [`ModelParams`] to a tape.
pub struct Net<'p, T: Real> {
    pub params: &'p ModelParams<T>,
}

impl<'p, T: Real> Net<'p, T> {
    pub fn new(params: &'p ModelParams<T>) -> Self {
        Self { params }
    }

    fn dense(&self, tape: &mut Tape<T>, d: Dense, x: Var) -> Result<Var> {
        let w = tape.param(&self.params.store, d.w);
        let b = tape.param(&self.params.store, d.b);
        tape.linear(x, w, Some(b))
    }

    fn conv(&self, tape: &mut Tape<T>, d: Dense, x: Var, geom: ConvGeom) -> Result<Var> {
        let w = tape.param(&self.params.store, d.w);
        let b = tape.param(&self.params.store, d.b);
        tape.conv1d(x, w, Some(b), geom)
    }

    /// `1 × T` waveform to `H × L` latent: strided valid convolution and ReLU.
    pub fn encode_audio(&self, tape: &mut Tape<T>, y: Var) -> Result<Var> {
        let c = &self.params.config;
        let t = tape.value(y).cols();
        if t < c.kernel {
            return Err(Error::InputTooShort { needed: c.kernel, got: t });
        }
        let w = tape.param(&self.params.store, self.params.layout.encoder);
        let z = tape.conv1d(y, w, None, ConvGeom::valid(c.stride))?;
        Ok(tape.relu(z))
    }

    /// `H × L` latent to `1 × ((L−1)·S + K)` waveform.
    pub fn decode_audio(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        let w = tape.param(&self.params.store, self.params.layout.decoder);
        tape.conv_transpose1d(x, w, self.params.config.stride)
    }

    /// Projects `F_v × frames` features to `H` channels and holds each frame
    /// for the latent steps it covers. `offset` is the position, in samples,
    /// of the first latent step relative to the start of the first frame.
    pub fn encode_visual(&self, tape: &mut Tape<T>, v: Var, latent_len: usize, offset: usize) -> Result<Var> {
        let c = &self.params.config;
        let index = visual_index(
            tape.value(v).cols(),
            latent_len,
            offset,
            c.stride,
            c.samples_per_frame(),
        )?;
        if tape.value(v).rows() != c.visual_dim {
            return Err(shape_err(format!(
                "visual features have {} dims, model expects {}",
                tape.value(v).rows(),
                c.visual_dim
            )));
        }
        let projected = self.dense(tape, self.params.layout.visual, v)?;
        tape.gather_columns(projected, index)
    }

    /// Fuses the current estimate with the visual stream into `e_c` (`H × 1`).
    pub fn speaker_encode(&self, tape: &mut Tape<T>, block: &BlockLayout, x_prev: Var, v: Var) -> Result<Var> {
        let cat = tape.concat_channels(x_prev, v)?;
        let h = self.dense(tape, block.spk_in, cat)?;
        let mut h = tape.tanh(h);
        for conv in &block.spk_convs {
            let z = self.conv(tape, *conv, h, ConvGeom::same(self.params.config.spk_kernel, 1))?;
            h = tape.tanh(z);
        }
        tape.mean_over_time(h)
    }

    /// Attention scores `1 × L` for one embedding sequence. The visual
    /// projection `proj_v` is computed once and shared by both branches.
    pub fn aseu_score(&self, tape: &mut Tape<T>, embed: Dense, score: Dense, e: Var, proj_v: Var) -> Result<Var> {
        let pe = self.dense(tape, embed, e)?;
        let sum = tape.add(pe, proj_v)?;
        let act = tape.tanh(sum);
        self.dense(tape, score, act)
    }

    /// Scores, two-way softmax and fusion of `E_c` and `E_a`.
    /// Returns `(a_c, a_a, E_m)`.
    pub fn aseu(&self, tape: &mut Tape<T>, block: &BlockLayout, e_c: Var, e_a: Var, v: Var) -> Result<(Var, Var, Var)> {
        let a = block.aseu;
        let proj_v = self.dense(tape, a.visual, v)?;
        let s_c = self.aseu_score(tape, a.current, a.score_current, e_c, proj_v)?;
        let s_a = self.aseu_score(tape, a.anchor, a.score_anchor, e_a, proj_v)?;
        let (a_c, a_a) = tape.softmax_pair(s_c, s_a)?;
        let e_m = fuse_momentum(tape, a_c, a_a, e_c, e_a)?;
        Ok((a_c, a_a, e_m))
    }

    /// Non-negative mask `H × L` from the mixture latent and a conditioning
    /// sequence.
    pub fn estimate_mask(&self, tape: &mut Tape<T>, block: &BlockLayout, y: Var, e: Var) -> Result<Var> {
        let cat = tape.concat_channels(y, e)?;
        let mut h = self.dense(tape, block.mask_in, cat)?;
        for layer in &block.tcn {
            let z = self.conv(tape, layer.conv, h, ConvGeom::same(TCN_KERNEL, layer.dilation))?;
            let z = tape.relu(z);
            let z = self.dense(tape, layer.proj, z)?;
            h = tape.add(h, z)?;
        }
        let out = self.dense(tape, block.mask_out, h)?;
        Ok(tape.relu(out))
    }

    /// Speaker logits `N × 1` of block `r` for an `H × 1` embedding.
    pub fn classify(&self, tape: &mut Tape<T>, r: usize, e: Var) -> Result<Var> {
        let w = tape.param(&self.params.store, self.params.layout.blocks[r].classifier);
        tape.linear(e, w, None)
    }

    /// Full extraction. Without `anchors` every block conditions on its
    /// repeated current embedding; with anchors (one `H × 1` per block) the
    /// attention fusion supplies the conditioning sequence.
    pub fn forward(
        &self,
        tape: &mut Tape<T>,
        y: Var,
        v: Var,
        visual_offset: usize,
        anchors: Option<&[Var]>,
    ) -> Result<ForwardVars> {
        let blocks = &self.params.layout.blocks;
        if let Some(a) = anchors {
            if a.len() != blocks.len() {
                return Err(shape_err(format!("{} anchors for {} blocks", a.len(), blocks.len())));
            }
        }
        let latent = self.encode_audio(tape, y)?;
        let l = tape.value(latent).cols();
        let visual = self.encode_visual(tape, v, l, visual_offset)?;

        let mut outs = Vec::with_capacity(blocks.len());
        let mut x_prev = latent;
        for (r, block) in blocks.iter().enumerate() {
            let e_c = self.speaker_encode(tape, block, x_prev, visual)?;
            let e_c_seq = tape.repeat_columns(e_c, l)?;
            let (cond, a_c, a_a, e_m) = match anchors {
                None => (e_c_seq, None, None, None),
                Some(a) => {
                    let e_a_seq = tape.repeat_columns(a[r], l)?;
                    let (a_c, a_a, e_m) = self.aseu(tape, block, e_c_seq, e_a_seq, visual)?;
                    (e_m, Some(a_c), Some(a_a), Some(e_m))
                }
            };
            let mask = self.estimate_mask(tape, block, latent, cond)?;
            let x_hat = tape.mul(mask, latent)?;
            outs.push(BlockVars { x_hat, mask, e_c, a_c, a_a, e_m });
            x_prev = x_hat;
        }
        let waveform = self.decode_audio(tape, x_prev)?;
        Ok(ForwardVars { latent, visual, waveform, blocks: outs })
    }
}

/// `E_m = a_c ⊗ E_c + a_a ⊗ E_a` with the weights broadcast over channels.
pub fn fuse_momentum<T: Real>(tape: &mut Tape<T>, a_c: Var, a_a: Var, e_c: Var, e_a: Var) -> Result<Var> {
    let wc = tape.mul_row(a_c, e_c)?;
    let wa = tape.mul_row(a_a, e_a)?;
    tape.add(wc, wa)
}

/// Frame index feeding each latent step, `None` past the last frame. Frame
/// and latent spans may differ by up to two frames; more is a desync.
pub(crate) fn visual_index(
    frames: usize,
    latent_len: usize,
    offset: usize,
    stride: usize,
    samples_per_frame: usize,
) -> Result<Vec<Option<usize>>> {
    let covered = frames * samples_per_frame;
    let needed = offset + latent_len * stride;
    if covered.abs_diff(needed) > 2 * samples_per_frame {
        return Err(Error::Alignment(format!(
            "{frames} video frames cover {covered} samples but the audio spans {needed}"
        )));
    }
    Ok((0..latent_len)
        .map(|l| {
            let f = (offset + l * stride) / samples_per_frame;
            (f < frames).then_some(f)
        })
        .collect())
}
