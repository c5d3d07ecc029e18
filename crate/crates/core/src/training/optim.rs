use serde::{Deserialize, Serialize};

use crate::params::ParamStore;
use crate::tensor::{Real, Tensor};

pub const DEFAULT_LR: f64 = 1e-3;
/// Learning rate when starting from a pre-trained checkpoint.
pub const PRETRAINED_LR: f64 = 1e-4;

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam<T: Real = f32> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(store: &ParamStore<T>, lr: f64) -> Self {
        let zeros: Vec<Tensor<T>> = store.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients held in `store`.
    pub fn step(&mut self, store: &mut ParamStore<T>) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if !p.trainable {
                continue;
            }
            let g = p.grad.data();
            let (md, vd) = (m.data_mut(), v.data_mut());
            for (i, w) in p.value.data_mut().iter_mut().enumerate() {
                let gi = g[i].f64();
                let mi = self.beta1 * md[i].f64() + (1.0 - self.beta1) * gi;
                let vi = self.beta2 * vd[i].f64() + (1.0 - self.beta2) * gi * gi;
                md[i] = T::of(mi);
                vd[i] = T::of(vi);
                let update = self.lr * (mi / c1) / ((vi / c2).sqrt() + self.eps);
                *w = T::of(w.f64() - update);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleAction {
    Continue,
    Halve,
    Stop,
}

/// Halves the learning rate after `patience` epochs without a new best
/// validation loss and stops after `stop_patience` such epochs or at
/// `max_epochs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub patience: usize,
    pub stop_patience: usize,
    pub max_epochs: usize,
    pub best_val_loss: f64,
    pub plateau_count: usize,
    pub stop_count: usize,
    pub epochs: usize,
}

impl Default for PlateauSchedule {
    fn default() -> Self {
        Self {
            patience: 6,
            stop_patience: 10,
            max_epochs: 100,
            best_val_loss: f64::INFINITY,
            plateau_count: 0,
            stop_count: 0,
            epochs: 0,
        }
    }
}

impl PlateauSchedule {
    /// Records one epoch's validation loss and adjusts `lr` in place.
    pub fn observe(&mut self, val_loss: f64, lr: &mut f64) -> ScheduleAction {
        self.epochs += 1;
        if val_loss < self.best_val_loss {
            self.best_val_loss = val_loss;
            self.plateau_count = 0;
            self.stop_count = 0;
        } else {
            self.plateau_count += 1;
            self.stop_count += 1;
        }
        if self.stop_count >= self.stop_patience || self.epochs >= self.max_epochs {
            return ScheduleAction::Stop;
        }
        if self.plateau_count >= self.patience {
            self.plateau_count = 0;
            *lr *= 0.5;
            return ScheduleAction::Halve;
        }
        ScheduleAction::Continue
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_descends_on_square() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::scalar(1.0));
        let mut opt = Adam::new(&store, 0.1);
        for _ in 0..3 {
            let w = store.get(id).value.item().unwrap();
            store.zero_grads();
            store.get_mut(id).grad = Tensor::scalar(2.0 * w);
            opt.step(&mut store);
        }
        let w = store.get(id).value.item().unwrap();
        assert!(w < 1.0 && w > 0.0);
        // First bias-corrected step moves by exactly lr.
        let mut fresh = ParamStore::<f64>::new();
        let id = fresh.add("w", Tensor::scalar(1.0));
        fresh.get_mut(id).grad = Tensor::scalar(2.0);
        Adam::new(&fresh, 0.1).step(&mut fresh);
        assert!((fresh.get(id).value.item().unwrap() - 0.9).abs() < 1e-6);
    }

    #[test]
    fn frozen_params_stay() {
        let mut store = ParamStore::<f32>::new();
        let id = store.add("w", Tensor::scalar(1.0));
        store.get_mut(id).trainable = false;
        store.get_mut(id).grad = Tensor::scalar(1.0);
        Adam::new(&store, 0.1).step(&mut store);
        assert_eq!(store.get(id).value.item().unwrap(), 1.0);
    }

    #[test]
    fn plateau_halves_then_stops() {
        let mut s = PlateauSchedule::default();
        let mut lr = DEFAULT_LR;
        assert_eq!(s.observe(1.0, &mut lr), ScheduleAction::Continue);
        let actions: Vec<_> = (0..10).map(|_| s.observe(1.0, &mut lr)).collect();
        assert_eq!(actions[5], ScheduleAction::Halve);
        assert!(actions[..5].iter().all(|a| *a == ScheduleAction::Continue));
        assert_eq!(actions[9], ScheduleAction::Stop);
        assert!((lr - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn improvement_resets_and_cap_stops() {
        let mut s = PlateauSchedule::default();
        let mut lr = DEFAULT_LR;
        for e in 0..99 {
            let loss = if e % 5 == 0 { -(e as f64) } else { 1e9 };
            assert_ne!(s.observe(loss, &mut lr), ScheduleAction::Stop);
        }
        assert_eq!(lr, DEFAULT_LR);
        assert_eq!(s.observe(-1e9, &mut lr), ScheduleAction::Stop);
    }
}
