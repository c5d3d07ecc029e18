//! Speaker-identity memory: one anchor embedding per extractor block and the
//! thresholded replacement policy that keeps it current.

use crate::error::{shape_err, Error, Result};
use crate::tensor::{Real, Tensor};

/// Default replacement threshold on the mean current-embedding attention.
pub const DEFAULT_THETA: f64 = 0.7;

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryBank<T: Real = f32> {
    blocks: usize,
    theta: f64,
    anchors: Option<Vec<Tensor<T>>>,
    last_update_step: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockDecision {
    pub a_c_mean: f64,
    pub replaced: bool,
}

/// Outcome of one window step, per block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateDecision {
    pub blocks: Vec<BlockDecision>,
}

/// Mean of an attention vector over time.
pub fn mean_attention<T: Real>(a_c: &Tensor<T>) -> Result<f64> {
    if a_c.is_empty() {
        return Err(shape_err("mean_attention: empty attention vector"));
    }
    Ok(a_c.sum_f64() / a_c.len() as f64)
}

impl<T: Real> MemoryBank<T> {
    pub fn empty(blocks: usize, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1), got {theta}")));
        }
        if blocks == 0 {
            return Err(Error::Config("a memory bank needs at least one block".into()));
        }
        Ok(Self { blocks, theta, anchors: None, last_update_step: vec![0; blocks] })
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_none()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn anchors(&self) -> Option<&[Tensor<T>]> {
        self.anchors.as_deref()
    }

    pub fn last_update_step(&self) -> &[usize] {
        &self.last_update_step
    }

    /// Stores copies of the first-step embeddings as anchors.
    pub fn init(&mut self, embeddings: &[Tensor<T>]) -> Result<()> {
        if !self.is_empty() {
            return Err(Error::BankState("bank is already initialized".into()));
        }
        self.check_embeddings(embeddings)?;
        self.anchors = Some(embeddings.to_vec());
        self.last_update_step.fill(1);
        Ok(())
    }

    fn check_embeddings(&self, embeddings: &[Tensor<T>]) -> Result<()> {
        if embeddings.len() != self.blocks {
            return Err(shape_err(format!("{} embeddings for {} blocks", embeddings.len(), self.blocks)));
        }
        let h = embeddings[0].rows();
        if embeddings.iter().any(|e| e.shape() != [h, 1]) {
            return Err(shape_err("anchor embeddings must all be H×1 with the same H"));
        }
        Ok(())
    }

    /// Replaces anchor `r` with `e_c` when `a_c_mean > θ`. Steps start at 2;
    /// step 1 goes through [`MemoryBank::init`].
    pub fn maybe_update(&mut self, r: usize, e_c: &Tensor<T>, a_c_mean: f64, t: usize) -> Result<BlockDecision> {
        if t < 2 {
            return Err(Error::Protocol(format!("update at step {t}; step 1 initializes the bank")));
        }
        let theta = self.theta;
        let anchors = self.anchors.as_mut().ok_or_else(|| Error::BankState("bank is empty".into()))?;
        let slot = anchors.get_mut(r).ok_or_else(|| shape_err(format!("block {r} out of range")))?;
        if slot.shape() != e_c.shape() {
            return Err(shape_err(format!("embedding {:?} does not match anchor {:?}", e_c.shape(), slot.shape())));
        }
        let replaced = a_c_mean > theta;
        if replaced {
            *slot = e_c.clone();
            self.last_update_step[r] = t;
        }
        Ok(BlockDecision { a_c_mean, replaced })
    }

    /// Applies [`MemoryBank::maybe_update`] to every block independently.
    pub fn update(&mut self, embeddings: &[Tensor<T>], a_c_means: &[f64], t: usize) -> Result<UpdateDecision> {
        if a_c_means.len() != self.blocks {
            return Err(shape_err(format!("{} attention means for {} blocks", a_c_means.len(), self.blocks)));
        }
        self.check_embeddings(embeddings)?;
        let blocks = embeddings
            .iter()
            .zip(a_c_means)
            .enumerate()
            .map(|(r, (e, &m))| self.maybe_update(r, e, m, t))
            .collect::<Result<_>>()?;
        Ok(UpdateDecision { blocks })
    }

    /// Rebuilds a bank from saved state.
    pub fn restore(theta: f64, anchors: Vec<Tensor<T>>, last_update_step: Vec<usize>) -> Result<Self> {
        let mut bank = Self::empty(anchors.len(), theta)?;
        bank.check_embeddings(&anchors)?;
        if last_update_step.len() != anchors.len() {
            return Err(shape_err("last_update_step length differs from anchor count"));
        }
        bank.anchors = Some(anchors);
        bank.last_update_step = last_update_step;
        Ok(bank)
    }
}
