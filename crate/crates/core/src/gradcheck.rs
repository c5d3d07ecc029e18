//! Finite-difference gradient oracle.

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Real;

/// Outcome of [`grad_check`].
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric gradient at the worst entry.
    pub worst_values: Option<(f64, f64)>,
    /// Largest relative error seen in each trainable parameter.
    pub per_param: Vec<(String, f64)>,
    pub entries_checked: usize,
}

/// Compares tape gradients against central differences
/// `(f(p+ε) − f(p−ε)) / 2ε` for every entry of every trainable parameter.
///
/// The relative error of an entry is `|a − n| / max(|a|, |n|, 1e-8)`.
/// `f` must build the loss from `store` on the given tape and be
/// deterministic.
pub fn grad_check<T, F>(f: F, store: &mut ParamStore<T>, eps: f64) -> Result<GradCheckReport>
where
    T: Real,
    F: FnMut(&ParamStore<T>, &mut Tape<T>) -> Result<Var>,
{
    check_scaled(f, store, eps, 1.0)
}

/// `analytic_scale` multiplies the tape gradients before comparison; tests use
/// it to plant a wrong gradient.
fn check_scaled<T, F>(mut f: F, store: &mut ParamStore<T>, eps: f64, analytic_scale: f64) -> Result<GradCheckReport>
where
    T: Real,
    F: FnMut(&ParamStore<T>, &mut Tape<T>) -> Result<Var>,
{
    if !(1e-5..=1e-2).contains(&eps) {
        return Err(Error::Config(format!("grad_check eps {eps} outside [1e-5, 1e-2]")));
    }
    store.zero_grads();
    let base = {
        let mut tape = Tape::new();
        let loss = f(store, &mut tape)?;
        tape.backward(loss, store)?;
        tape.value(loss).item()?
    };

    let mut eval = |store: &ParamStore<T>| -> Result<T> {
        let mut tape = Tape::new();
        let loss = f(store, &mut tape)?;
        tape.value(loss).item()
    };
    if eval(store)? != base {
        return Err(Error::UnreliableCheck);
    }

    let mut report = GradCheckReport { max_rel_err: 0.0, worst: None, worst_values: None, per_param: Vec::new(), entries_checked: 0 };
    let mut probe = store.clone();
    for (i, p) in store.iter().enumerate() {
        if !p.trainable {
            continue;
        }
        let (name, analytic) = (p.name.clone(), p.grad.data());
        let id = ParamId(i);
        let mut worst_here: f64 = 0.0;
        for (j, &a) in analytic.iter().enumerate() {
            let orig = probe.get(id).value.data()[j];
            let plus = orig + T::of(eps);
            let minus = orig - T::of(eps);
            probe.get_mut(id).value.data_mut()[j] = plus;
            let fp = eval(&probe)?;
            probe.get_mut(id).value.data_mut()[j] = minus;
            let fm = eval(&probe)?;
            probe.get_mut(id).value.data_mut()[j] = orig;
            // Use the representable step so rounding of p±ε does not bias the quotient.
            let numeric = ((fp - fm) / (plus - minus)).f64();
            let a = a.f64() * analytic_scale;
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((name.clone(), j));
                report.worst_values = Some((a, numeric));
            }
            worst_here = worst_here.max(rel);
            report.entries_checked += 1;
        }
        report.per_param.push((name, worst_here));
    }
    Ok(report)
}
