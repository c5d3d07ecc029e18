use crate::error::Result;
use crate::io::{load_named, Checkpoint};
use crate::model::{ModelParams, ASEU_TAG};

use super::PRETRAINED_LR;

/// Loads every parameter outside the attention-fusion units from `ckpt`,
/// re-draws the fusion weights from `aseu_seed`, and returns the learning
/// rate to continue with. Fusion-unit records in `ckpt` are ignored, so both
/// plain and fusion-equipped checkpoints are accepted. On error `params` is
/// left unchanged.
pub fn param_init_from_checkpoint(params: &mut ModelParams<f32>, ckpt: &Checkpoint, aseu_seed: u64) -> Result<f64> {
    load_named(params, ckpt, |n| !n.contains(ASEU_TAG))?;
    params.reseed_aseu(aseu_seed)?;
    Ok(PRETRAINED_LR)
}
