//! Loss functions. The scalar math lives here and is shared with the tape
//! operations in [`crate::tape`].

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use num_traits::{Float, One, Zero};

use crate::tensor::{acc_sum, plain_sum, Real, Tensor};

/// Guard added to the error energy of SI-SNR.
pub const SI_SNR_EPS: f64 = 1e-8;
/// SI-SNR values are clamped to `±SI_SNR_CAP_DB`.
pub const SI_SNR_CAP_DB: f64 = 80.0;

/// Weights of the combined objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Utterance-level term.
    pub alpha: f64,
    /// Segment-level term.
    pub beta: f64,
    /// Attention penalty term.
    pub gamma: f64,
    /// Speaker classification inside the utterance and segment terms.
    pub lambda: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 0.3, beta: 0.7, gamma: 0.05, lambda: 0.1 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.beta, self.gamma, self.lambda].iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config(format!("loss weights must be non-negative: {self:?}")));
        }
        Ok(())
    }
}

pub(crate) struct SiSnrTerms<A> {
    pub si_snr_db: A,
    /// d(−SI-SNR)/d(estimate); `None` when the value sits on a clamp.
    pub grad: Option<Vec<A>>,
}

/// SI-SNR and its gradient, computed in the accumulator type of `T`.
pub(crate) fn si_snr_terms<T: Real>(target: &[T], est: &[T]) -> Result<SiSnrTerms<T::Acc>> {
    if target.len() != est.len() {
        return Err(shape_err(format!(
            "si_snr: target has {} samples, estimate {}",
            target.len(),
            est.len()
        )));
    }
    let n = target.len();
    if n < 2 {
        return Err(shape_err("si_snr: need at least 2 samples"));
    }
    let of = <T::Acc as Real>::of;
    let mean = |s: &[T]| acc_sum(s.iter().copied()) / of(n as f64);
    let (xm, um) = (mean(target), mean(est));
    let x: Vec<T::Acc> = target.iter().map(|v| v.widen() - xm).collect();
    let u: Vec<T::Acc> = est.iter().map(|v| v.widen() - um).collect();
    let dot = |a: &[T::Acc], b: &[T::Acc]| plain_sum(a.iter().zip(b).map(|(&p, &q)| p * q));
    let xx = dot(&x, &x);
    if !(xx > T::Acc::zero()) {
        return Err(Error::InvalidTarget);
    }
    let alpha = dot(&u, &x) / xx;
    let s: Vec<T::Acc> = x.iter().map(|&v| alpha * v).collect();
    let e: Vec<T::Acc> = u.iter().zip(&s).map(|(&a, &b)| a - b).collect();
    let ss = dot(&s, &s);
    let ee = dot(&e, &e) + of(SI_SNR_EPS);
    let raw = of(10.0) * (ss / ee).log10();
    let cap = of(SI_SNR_CAP_DB);
    if !(raw < cap && raw > -cap) {
        let capped = if raw.is_nan() { -cap } else { raw.max(-cap).min(cap) };
        return Ok(SiSnrTerms { si_snr_db: capped, grad: None });
    }
    // loss = −(10/ln10)(ln S − ln(E+ε)); dS/du = 2s, dE/du = 2e.
    let c = of(-20.0) / of(10.0).ln();
    let mut g: Vec<T::Acc> = s.iter().zip(&e).map(|(&sv, &ev)| c * (sv / ss - ev / ee)).collect();
    let gm = plain_sum(g.iter().copied()) / of(n as f64);
    g.iter_mut().for_each(|v| *v -= gm);
    Ok(SiSnrTerms { si_snr_db: raw, grad: Some(g) })
}

/// Negated scale-invariant SNR in dB. Both signals are zero-meaned first.
pub fn si_snr_loss<T: Real>(x: &[T], x_hat: &[T]) -> Result<f64> {
    Ok(-si_snr_terms(x, x_hat)?.si_snr_db.f64())
}

pub(crate) fn cross_entropy_terms<T: Real>(logits: &[T], label: usize) -> Result<(T::Acc, Vec<T::Acc>)> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange { label, classes: logits.len() });
    }
    let z: Vec<T::Acc> = logits.iter().map(|v| v.widen()).collect();
    let m = z.iter().copied().fold(T::Acc::neg_infinity(), |a, b| a.max(b));
    let lse = m + plain_sum(z.iter().map(|&v| (v - m).exp())).ln();
    let mut grad: Vec<T::Acc> = z.iter().map(|&v| (v - lse).exp()).collect();
    grad[label] -= T::Acc::one();
    Ok((lse - z[label], grad))
}

/// Cross-entropy of the speaker logits `W·e` against `label`.
pub fn ce_loss<T: Real>(e: &Tensor<T>, w: &Tensor<T>, label: usize) -> Result<f64> {
    let logits = crate::ops::linear(e, w, None)?;
    Ok(cross_entropy_terms(logits.data(), label)?.0.f64())
}

/// Mean anchor attention weight, summed over blocks.
pub fn penalty_loss<T: Real>(a_a_per_block: &[Tensor<T>]) -> Result<f64> {
    let mut total = 0.0;
    for a in a_a_per_block {
        if a.is_empty() {
            return Err(shape_err("penalty_loss: empty attention vector"));
        }
        total += a.data().iter().map(|v| v.f64().abs()).sum::<f64>() / a.len() as f64;
    }
    Ok(total)
}

pub fn total_loss(utt: f64, seg: f64, pe: f64, w: &LossWeights) -> f64 {
    w.alpha * utt + w.beta * seg + w.gamma * pe
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn si_snr_hand_case() {
        // s_t = 1.5x, |s_t|² = 4.5, |e|² = 1.5
        let loss = si_snr_loss(&[1.0f64, 0.0, -1.0], &[1.0, 1.0, -2.0]).unwrap();
        assert!((loss + 10.0 * 3f64.log10()).abs() < 1e-6);
        assert!((loss + 4.771).abs() < 1e-3);
    }

    #[test]
    fn si_snr_collinear_hits_cap() {
        // Enough energy that ε does not hold the ratio under the cap.
        let x: Vec<f32> = (0..200).map(|i| (i as f32 * 0.3).sin()).collect();
        let twice: Vec<f32> = x.iter().map(|v| 2.0 * v).collect();
        assert_eq!(si_snr_loss(&x, &twice).unwrap(), -SI_SNR_CAP_DB);
        assert_eq!(si_snr_loss(&x, &x).unwrap(), -SI_SNR_CAP_DB);
    }

    #[test]
    fn si_snr_ignores_offset() {
        let x = [0.3f64, -0.2, 0.5, 0.1, -0.7];
        let y = [0.2f64, -0.1, 0.4, 0.3, -0.5];
        let shifted: Vec<f64> = y.iter().map(|v| v + 0.8).collect();
        let a = si_snr_loss(&x, &y).unwrap();
        let b = si_snr_loss(&x, &shifted).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn si_snr_rejects_flat_target() {
        assert!(matches!(si_snr_loss(&[0.5f32, 0.5, 0.5], &[1.0, 0.0, 2.0]), Err(Error::InvalidTarget)));
        assert!(si_snr_loss(&[1.0f32, 0.0], &[1.0, 0.0, 2.0]).is_err());
    }

    #[test]
    fn ce_cases() {
        let e = Tensor::<f64>::column(&[0.3, -1.0, 2.0]);
        let w = Tensor::zeros(&[4, 3]);
        assert!((ce_loss(&e, &w, 2).unwrap() - 4f64.ln()).abs() < 1e-12);

        let w = Tensor::from_rows(&[&[1.0], &[0.0]]).unwrap();
        let one = Tensor::column(&[1.0]);
        assert!((ce_loss(&one, &w, 0).unwrap() - (1.0 + (-1f64).exp()).ln()).abs() < 1e-12);
        assert!((ce_loss(&one, &w, 0).unwrap() - 0.3133).abs() < 1e-4);

        let big = Tensor::from_rows(&[&[500.0], &[0.0]]).unwrap();
        assert!(ce_loss(&one, &big, 0).unwrap() < 1e-12);
        assert!(matches!(ce_loss(&one, &big, 2), Err(Error::LabelOutOfRange { .. })));
    }

    #[test]
    fn penalty_cases() {
        let half = Tensor::<f32>::full(&[1, 7], 0.5);
        assert_eq!(penalty_loss(&[half.clone(), half]).unwrap(), 1.0);
        assert_eq!(penalty_loss(&[Tensor::<f32>::zeros(&[1, 3])]).unwrap(), 0.0);
        let a = Tensor::<f64>::row(&[0.2, 0.4, 0.6]);
        assert!((penalty_loss(&[a]).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn total_loss_defaults() {
        let w = LossWeights::default();
        assert!((total_loss(1.0, 1.0, 1.0, &w) - 1.05).abs() < 1e-12);
        let no_pe = LossWeights { gamma: 0.0, ..w };
        assert_eq!(total_loss(2.0, 3.0, 100.0, &no_pe), 0.3 * 2.0 + 0.7 * 3.0);
    }
}
