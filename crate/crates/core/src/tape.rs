//! Tape-based reverse-mode differentiation.
//!
//! Every operation on a [`Tape`] computes its value eagerly and records what
//! the reverse pass needs. [`Tape::backward`] replays the record in reverse
//! order and adds the parameter gradients into a [`ParamStore`].

use std::collections::HashMap;

use num_traits::Zero;

use crate::error::{shape_err, Error, Result};
use crate::ops::{self, ConvGeom};
use crate::params::{ParamId, ParamStore};
use crate::tensor::{plain_sum, Real, Tensor};
use crate::training::loss::{cross_entropy_terms, si_snr_terms};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T: Real> {
    Leaf,
    Linear { x: Var, w: Var, b: Option<Var> },
    Conv1d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    ConvTranspose1d { x: Var, w: Var, stride: usize },
    Tanh(Var),
    Relu(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MulRow { row: Var, x: Var },
    Concat(Var, Var),
    MeanOverTime(Var),
    RepeatColumns(Var),
    Gather { x: Var, index: Vec<Option<usize>> },
    Truncate(Var),
    /// One half of a two-way softmax; `other` is the competing score.
    PairSoftmax { own: Var, other: Var },
    Sum(Var),
    Mean(Var),
    WeightedSum(Vec<(Var, f64)>),
    /// Saved gradient of the loss with respect to the estimate.
    SiSnr { est: Var, grad: Option<Tensor<T>> },
    CrossEntropy { logits: Var, grad: Tensor<T> },
}

struct Node<T: Real> {
    value: Tensor<T>,
    op: Op<T>,
    param: Option<ParamId>,
}

/// Single-owner record of a forward computation.
pub struct Tape<T: Real = f32> {
    nodes: Vec<Node<T>>,
    param_vars: HashMap<ParamId, Var>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of one backward pass, indexed by [`Var`].
pub struct Gradients<T: Real> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), param_vars: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op, param: None });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Leaf for a parameter. Repeated calls for the same id return the same
    /// variable, so gradients from every use accumulate on one node.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).value.clone(), Op::Leaf);
        self.nodes[v.0].param = Some(id);
        self.param_vars.insert(id, v);
        v
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let out = ops::linear(self.value(x), self.value(w), b.map(|b| self.value(b)))?;
        Ok(self.push(out, Op::Linear { x, w, b }))
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, geom: ConvGeom) -> Result<Var> {
        let out = ops::conv1d_ext(self.value(x), self.value(w), b.map(|b| self.value(b)), geom)?;
        Ok(self.push(out, Op::Conv1d { x, w, b, geom }))
    }

    pub fn conv_transpose1d(&mut self, x: Var, w: Var, stride: usize) -> Result<Var> {
        let out = ops::conv_transpose1d(self.value(x), self.value(w), stride)?;
        Ok(self.push(out, Op::ConvTranspose1d { x, w, stride }))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = ops::tanh(self.value(x));
        self.push(out, Op::Tanh(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = ops::relu(self.value(x));
        self.push(out, Op::Relu(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = ops::add(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = ops::sub(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = ops::mul(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let f = T::of(factor);
        let out = self.value(x).map(|v| v * f);
        self.push(out, Op::Scale(x, factor))
    }

    pub fn mul_row(&mut self, row: Var, x: Var) -> Result<Var> {
        let out = ops::mul_row(self.value(row), self.value(x))?;
        Ok(self.push(out, Op::MulRow { row, x }))
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = ops::concat_channels(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Concat(a, b)))
    }

    pub fn mean_over_time(&mut self, x: Var) -> Result<Var> {
        let out = ops::mean_over_time(self.value(x))?;
        Ok(self.push(out, Op::MeanOverTime(x)))
    }

    pub fn repeat_columns(&mut self, x: Var, l: usize) -> Result<Var> {
        let out = ops::repeat_columns(self.value(x), l)?;
        Ok(self.push(out, Op::RepeatColumns(x)))
    }

    pub fn gather_columns(&mut self, x: Var, index: Vec<Option<usize>>) -> Result<Var> {
        let out = ops::gather_columns(self.value(x), &index)?;
        Ok(self.push(out, Op::Gather { x, index }))
    }

    pub fn truncate_columns(&mut self, x: Var, n: usize) -> Result<Var> {
        let out = ops::truncate_columns(self.value(x), n)?;
        Ok(self.push(out, Op::Truncate(x)))
    }

    /// Per-step two-way softmax, returning `(a_c, a_a)`.
    pub fn softmax_pair(&mut self, s_c: Var, s_a: Var) -> Result<(Var, Var)> {
        let (a_c, a_a) = ops::softmax_pair(self.value(s_c), self.value(s_a))?;
        let vc = self.push(a_c, Op::PairSoftmax { own: s_c, other: s_a });
        let va = self.push(a_a, Op::PairSoftmax { own: s_a, other: s_c });
        Ok((vc, va))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum_acc();
        self.push(Tensor::scalar(T::narrow(s)), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.is_empty() {
            return Err(shape_err("mean of an empty tensor"));
        }
        let m = t.sum_acc() / T::Acc::of(t.len() as f64);
        Ok(self.push(Tensor::scalar(T::narrow(m)), Op::Mean(x)))
    }

    /// `Σ wᵢ·xᵢ` over scalar variables.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let mut acc = T::Acc::zero();
        for &(v, w) in terms {
            acc += T::Acc::of(w) * self.value(v).item()?.widen();
        }
        Ok(self.push(Tensor::scalar(T::narrow(acc)), Op::WeightedSum(terms.to_vec())))
    }

    /// Negated SI-SNR in dB between `est` and a constant `target`.
    pub fn si_snr_loss(&mut self, est: Var, target: &Tensor<T>) -> Result<Var> {
        let terms = si_snr_terms(target.data(), self.value(est).data())?;
        let grad = terms
            .grad
            .map(|g| Tensor::new(self.value(est).shape().to_vec(), g.into_iter().map(T::narrow).collect()))
            .transpose()?;
        Ok(self.push(Tensor::scalar(T::narrow(-terms.si_snr_db)), Op::SiSnr { est, grad }))
    }

    /// Softmax cross-entropy of a logit column against a class label.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let (loss, grad) = cross_entropy_terms(self.value(logits).data(), label)?;
        let grad = Tensor::new(self.value(logits).shape().to_vec(), grad.into_iter().map(T::narrow).collect())?;
        Ok(self.push(Tensor::scalar(T::narrow(loss)), Op::CrossEntropy { logits, grad }))
    }

    /// Reverse pass from a scalar `loss`. Parameter gradients are added to
    /// `store`; all intermediate gradients are returned.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<T>) -> Result<Gradients<T>> {
        let grads = self.gradients(loss)?;
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Some(id), Some(g)) = (node.param, grads.grads[i].as_ref()) {
                store.accumulate(id, g);
            }
        }
        Ok(grads)
    }

    /// Reverse pass without touching any parameter store.
    pub fn gradients(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape(), T::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, i: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[i];
        let mut send = |v: Var, d: Tensor<T>| match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&d),
            slot @ None => *slot = Some(d),
        };
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (dx, dw, db) = ops::linear_backward(g, self.value(*x), self.value(*w));
                send(*x, dx);
                send(*w, dw);
                if let Some(b) = b {
                    send(*b, db.reshape(self.value(*b).shape()).unwrap());
                }
            }
            Op::Conv1d { x, w, b, geom } => {
                let (dx, dw, db) = ops::conv1d_backward(g, self.value(*x), self.value(*w), *geom);
                send(*x, dx);
                send(*w, dw);
                if let Some(b) = b {
                    send(*b, db.reshape(self.value(*b).shape()).unwrap());
                }
            }
            Op::ConvTranspose1d { x, w, stride } => {
                let (dx, dw) = ops::conv_transpose1d_backward(g, self.value(*x), self.value(*w), *stride);
                send(*x, dx);
                send(*w, dw);
            }
            Op::Tanh(x) => {
                let y = &node.value;
                let d = Tensor::new(
                    y.shape().to_vec(),
                    y.data().iter().zip(g.data()).map(|(&y, &g)| g * (T::one() - y * y)).collect(),
                )
                .unwrap();
                send(*x, d);
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let d = Tensor::new(
                    xv.shape().to_vec(),
                    xv.data()
                        .iter()
                        .zip(g.data())
                        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
                        .collect(),
                )
                .unwrap();
                send(*x, d);
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sub(a, b) => {
                send(*a, g.clone());
                send(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                send(*a, ops::mul(g, self.value(*b)).unwrap());
                send(*b, ops::mul(g, self.value(*a)).unwrap());
            }
            Op::Scale(x, f) => {
                let f = T::of(*f);
                send(*x, g.map(|v| v * f));
            }
            Op::MulRow { row, x } => {
                let xv = self.value(*x);
                let l = xv.cols();
                let mut drow = vec![T::zero(); l];
                for h in 0..xv.rows() {
                    for (d, (&xv, &gv)) in drow.iter_mut().zip(xv.row_slice(h).iter().zip(g.row_slice(h))) {
                        *d += xv * gv;
                    }
                }
                send(*row, Tensor::new(self.value(*row).shape().to_vec(), drow).unwrap());
                send(*x, ops::mul_row(self.value(*row), g).unwrap());
            }
            Op::Concat(a, b) => {
                let split = self.value(*a).len();
                let (ga, gb) = g.data().split_at(split);
                send(*a, Tensor::new(self.value(*a).shape().to_vec(), ga.to_vec()).unwrap());
                send(*b, Tensor::new(self.value(*b).shape().to_vec(), gb.to_vec()).unwrap());
            }
            Op::MeanOverTime(x) => {
                let xv = self.value(*x);
                let l = xv.cols();
                let inv = T::of(1.0 / l as f64);
                let mut d = Vec::with_capacity(xv.len());
                for &gv in g.data() {
                    d.extend(std::iter::repeat_n(gv * inv, l));
                }
                send(*x, Tensor::new(xv.shape().to_vec(), d).unwrap());
            }
            Op::RepeatColumns(x) => {
                let d: Vec<T> = (0..g.rows()).map(|h| plain_sum(g.row_slice(h).iter().copied())).collect();
                send(*x, Tensor::new(self.value(*x).shape().to_vec(), d).unwrap());
            }
            Op::Gather { x, index } => {
                let xv = self.value(*x);
                let (h, l) = (xv.rows(), xv.cols());
                let mut d = vec![T::zero(); h * l];
                for r in 0..h {
                    for (&gv, idx) in g.row_slice(r).iter().zip(index) {
                        if let Some(j) = idx {
                            d[r * l + j] += gv;
                        }
                    }
                }
                send(*x, Tensor::new(xv.shape().to_vec(), d).unwrap());
            }
            Op::Truncate(x) => {
                let xv = self.value(*x);
                let (h, l, n) = (xv.rows(), xv.cols(), g.cols());
                let mut d = vec![T::zero(); h * l];
                for r in 0..h {
                    d[r * l..r * l + n].copy_from_slice(g.row_slice(r));
                }
                send(*x, Tensor::new(xv.shape().to_vec(), d).unwrap());
            }
            Op::PairSoftmax { own, other } => {
                // d a / d own = a(1 − a), d a / d other = −a(1 − a)
                let a = &node.value;
                let local: Vec<T> =
                    a.data().iter().zip(g.data()).map(|(&a, &g)| g * a * (T::one() - a)).collect();
                let shape = a.shape().to_vec();
                send(*other, Tensor::new(shape.clone(), local.iter().map(|&v| -v).collect()).unwrap());
                send(*own, Tensor::new(shape, local).unwrap());
            }
            Op::Sum(x) => {
                let gv = g.data()[0];
                send(*x, Tensor::full(self.value(*x).shape(), gv));
            }
            Op::Mean(x) => {
                let xv = self.value(*x);
                let gv = g.data()[0] * T::of(1.0 / xv.len() as f64);
                send(*x, Tensor::full(xv.shape(), gv));
            }
            Op::WeightedSum(terms) => {
                for &(v, w) in terms {
                    send(v, g.map(|gv| gv * T::of(w)).reshape(self.value(v).shape()).unwrap());
                }
            }
            Op::SiSnr { est, grad } => {
                let gv = g.data()[0];
                let d = match grad {
                    Some(d) => d.map(|v| v * gv),
                    None => Tensor::zeros(self.value(*est).shape()),
                };
                send(*est, d);
            }
            Op::CrossEntropy { logits, grad } => {
                let gv = g.data()[0];
                send(*logits, grad.map(|v| v * gv));
            }
        }
    }
}
