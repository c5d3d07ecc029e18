use crate::error::{shape_err, Error, Result};
use crate::training::loss::{si_snr_loss, SI_SNR_CAP_DB};

/// SI-SNR of `x_hat` against reference `x`, in dB.
pub fn si_snr_metric(x: &[f32], x_hat: &[f32]) -> Result<f64> {
    Ok(-si_snr_loss(x, x_hat)?)
}

/// Plain energy-ratio SDR `10·log10(‖x‖² / ‖x − x̂‖²)`, clamped to ±80 dB.
/// This is not the BSS-Eval SDR.
pub fn sdr_metric(x: &[f32], x_hat: &[f32]) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(shape_err(format!("sdr: reference has {} samples, estimate {}", x.len(), x_hat.len())));
    }
    let xx: f64 = x.iter().map(|&v| (v as f64).powi(2)).sum();
    if xx == 0.0 {
        return Err(Error::InvalidTarget);
    }
    let ee: f64 = x.iter().zip(x_hat).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
    if ee == 0.0 {
        return Ok(SI_SNR_CAP_DB);
    }
    Ok((10.0 * (xx / ee).log10()).clamp(-SI_SNR_CAP_DB, SI_SNR_CAP_DB))
}

/// `10·log10(P_target / P_interferer)` from mean powers.
pub fn snr_db(target: &[f32], interferer: &[f32]) -> Result<f64> {
    let p = |s: &[f32]| s.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / s.len().max(1) as f64;
    let (pt, pi) = (p(target), p(interferer));
    if pt == 0.0 || pi == 0.0 {
        return Err(Error::ZeroEnergy("snr"));
    }
    Ok(10.0 * (pt / pi).log10())
}
