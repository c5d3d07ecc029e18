//! Forward and backward kernels on plain tensors.
//!
//! Layout conventions: feature maps are `channels × time`, linear weights are
//! `out × in`, convolution weights are `out × in × kernel`, transposed
//! convolution weights are `in × out × kernel` (so the same weight tensor
//! drives a convolution and its adjoint).

use crate::error::{shape_err, Error, Result};
use crate::tensor::{acc_sum, plain_sum, Real, Tensor};

/// Geometry of a 1-D convolution. Padding is symmetric zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub dilation: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn valid(stride: usize) -> Self {
        Self { stride, dilation: 1, pad: 0 }
    }

    /// Length-preserving ("same") geometry for an odd kernel.
    pub fn same(kernel: usize, dilation: usize) -> Self {
        Self { stride: 1, dilation, pad: dilation * (kernel - 1) / 2 }
    }

    pub fn out_len(&self, len: usize, kernel: usize) -> Result<usize> {
        if self.stride == 0 || self.dilation == 0 {
            return Err(shape_err("stride and dilation must be at least 1"));
        }
        let span = self.dilation * (kernel - 1) + 1;
        let padded = len + 2 * self.pad;
        if padded < span {
            return Err(Error::InputTooShort { needed: span.saturating_sub(2 * self.pad), got: len });
        }
        Ok((padded - span) / self.stride + 1)
    }
}

fn check_bias<T: Real>(b: Option<&Tensor<T>>, n: usize, what: &str) -> Result<()> {
    if let Some(b) = b {
        if b.len() != n {
            return Err(shape_err(format!("{what}: bias has {} entries, expected {n}", b.len())));
        }
    }
    Ok(())
}

/// `out[:, l] = w · x[:, l] + b`.
pub fn linear<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    x.expect_rank(2, "linear input")?;
    w.expect_rank(2, "linear weight")?;
    let (h_out, h_in) = (w.shape()[0], w.shape()[1]);
    if x.rows() != h_in {
        return Err(shape_err(format!(
            "linear: weight {:?} cannot multiply input {:?}",
            w.shape(),
            x.shape()
        )));
    }
    check_bias(b, h_out, "linear")?;
    let l = x.cols();
    let (xd, wd) = (x.data(), w.data());
    let mut out = vec![T::zero(); h_out * l];
    for o in 0..h_out {
        let row = &mut out[o * l..(o + 1) * l];
        if let Some(b) = b {
            row.fill(b.data()[o]);
        }
        for i in 0..h_in {
            let wv = wd[o * h_in + i];
            for (r, &xv) in row.iter_mut().zip(&xd[i * l..(i + 1) * l]) {
                *r += wv * xv;
            }
        }
    }
    Tensor::new(vec![h_out, l], out)
}

pub(crate) fn linear_backward<T: Real>(
    g: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (h_out, h_in) = (w.shape()[0], w.shape()[1]);
    let l = x.cols();
    let (gd, xd, wd) = (g.data(), x.data(), w.data());
    let mut dx = vec![T::zero(); h_in * l];
    let mut dw = vec![T::zero(); h_out * h_in];
    let mut db = vec![T::zero(); h_out];
    for o in 0..h_out {
        let grow = &gd[o * l..(o + 1) * l];
        db[o] = plain_sum(grow.iter().copied());
        for i in 0..h_in {
            let xrow = &xd[i * l..(i + 1) * l];
            dw[o * h_in + i] = plain_sum(grow.iter().zip(xrow).map(|(&a, &b)| a * b));
            let wv = wd[o * h_in + i];
            for (d, &gv) in dx[i * l..(i + 1) * l].iter_mut().zip(grow) {
                *d += wv * gv;
            }
        }
    }
    (
        Tensor::new(vec![h_in, l], dx).unwrap(),
        Tensor::new(vec![h_out, h_in], dw).unwrap(),
        Tensor::new(vec![h_out], db).unwrap(),
    )
}

/// Valid (unpadded) strided correlation: `x` is `C_in × T`, `w` is
/// `C_out × C_in × K`, the result is `C_out × (floor((T−K)/stride)+1)`.
pub fn conv1d<T: Real>(x: &Tensor<T>, w: &Tensor<T>, stride: usize) -> Result<Tensor<T>> {
    conv1d_ext(x, w, None, ConvGeom::valid(stride))
}

pub fn conv1d_ext<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
    geom: ConvGeom,
) -> Result<Tensor<T>> {
    x.expect_rank(2, "conv1d input")?;
    w.expect_rank(3, "conv1d weight")?;
    let (c_out, c_in, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    if x.rows() != c_in {
        return Err(shape_err(format!(
            "conv1d: weight {:?} expects {c_in} input channels, got {:?}",
            w.shape(),
            x.shape()
        )));
    }
    check_bias(b, c_out, "conv1d")?;
    let t_in = x.cols();
    let t_out = geom.out_len(t_in, k)?;
    let (xd, wd) = (x.data(), w.data());
    let mut out = vec![T::zero(); c_out * t_out];
    for o in 0..c_out {
        let row = &mut out[o * t_out..(o + 1) * t_out];
        if let Some(b) = b {
            row.fill(b.data()[o]);
        }
        for c in 0..c_in {
            let xrow = &xd[c * t_in..(c + 1) * t_in];
            for kk in 0..k {
                let wv = wd[(o * c_in + c) * k + kk];
                let shift = (kk * geom.dilation) as isize - geom.pad as isize;
                let (lo, hi) = valid_range(t_out, geom.stride, shift, t_in);
                for t in lo..hi {
                    let p = (t * geom.stride) as isize + shift;
                    row[t] += wv * xrow[p as usize];
                }
            }
        }
    }
    Tensor::new(vec![c_out, t_out], out)
}

/// Output indices `t` in `[lo, hi)` for which `t*stride + shift` lands in `[0, t_in)`.
fn valid_range(t_out: usize, stride: usize, shift: isize, t_in: usize) -> (usize, usize) {
    let s = stride as isize;
    let lo = if shift >= 0 { 0 } else { ((-shift) + s - 1) / s };
    let hi = if (t_in as isize) <= shift { 0 } else { ((t_in as isize - shift) + s - 1) / s };
    let lo = lo.max(0) as usize;
    let hi = (hi.max(0) as usize).min(t_out);
    (lo.min(hi), hi)
}

pub(crate) fn conv1d_backward<T: Real>(
    g: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    geom: ConvGeom,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (c_out, c_in, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let (t_in, t_out) = (x.cols(), g.cols());
    let (gd, xd, wd) = (g.data(), x.data(), w.data());
    let mut dx = vec![T::zero(); c_in * t_in];
    let mut dw = vec![T::zero(); c_out * c_in * k];
    let mut db = vec![T::zero(); c_out];
    for o in 0..c_out {
        let grow = &gd[o * t_out..(o + 1) * t_out];
        db[o] = plain_sum(grow.iter().copied());
        for c in 0..c_in {
            let xrow = &xd[c * t_in..(c + 1) * t_in];
            let dxrow = &mut dx[c * t_in..(c + 1) * t_in];
            for kk in 0..k {
                let widx = (o * c_in + c) * k + kk;
                let wv = wd[widx];
                let shift = (kk * geom.dilation) as isize - geom.pad as isize;
                let (lo, hi) = valid_range(t_out, geom.stride, shift, t_in);
                let mut acc = T::zero();
                for t in lo..hi {
                    let p = ((t * geom.stride) as isize + shift) as usize;
                    acc += grow[t] * xrow[p];
                    dxrow[p] += wv * grow[t];
                }
                dw[widx] = acc;
            }
        }
    }
    (
        Tensor::new(vec![c_in, t_in], dx).unwrap(),
        Tensor::new(vec![c_out, c_in, k], dw).unwrap(),
        Tensor::new(vec![c_out], db).unwrap(),
    )
}

/// Transposed convolution, the adjoint of [`conv1d`] for the same weight:
/// `x` is `C × T'`, `w` is `C × C_out × K`, the result is
/// `C_out × ((T'−1)·stride + K)`.
pub fn conv_transpose1d<T: Real>(x: &Tensor<T>, w: &Tensor<T>, stride: usize) -> Result<Tensor<T>> {
    x.expect_rank(2, "conv_transpose1d input")?;
    w.expect_rank(3, "conv_transpose1d weight")?;
    if stride == 0 {
        return Err(shape_err("stride must be at least 1"));
    }
    let (c_in, c_out, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    if x.rows() != c_in {
        return Err(shape_err(format!(
            "conv_transpose1d: weight {:?} expects {c_in} input channels, got {:?}",
            w.shape(),
            x.shape()
        )));
    }
    let t_in = x.cols();
    if t_in == 0 {
        return Err(shape_err("conv_transpose1d: empty input"));
    }
    let t_out = (t_in - 1) * stride + k;
    let (xd, wd) = (x.data(), w.data());
    let mut out = vec![T::zero(); c_out * t_out];
    for c in 0..c_in {
        let xrow = &xd[c * t_in..(c + 1) * t_in];
        for o in 0..c_out {
            let row = &mut out[o * t_out..(o + 1) * t_out];
            let taps = &wd[(c * c_out + o) * k..(c * c_out + o + 1) * k];
            for (t, &xv) in xrow.iter().enumerate() {
                for (r, &wv) in row[t * stride..t * stride + k].iter_mut().zip(taps) {
                    *r += wv * xv;
                }
            }
        }
    }
    Tensor::new(vec![c_out, t_out], out)
}

pub(crate) fn conv_transpose1d_backward<T: Real>(
    g: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: usize,
) -> (Tensor<T>, Tensor<T>) {
    let (c_in, c_out, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let (t_in, t_out) = (x.cols(), g.cols());
    let (gd, xd, wd) = (g.data(), x.data(), w.data());
    let mut dx = vec![T::zero(); c_in * t_in];
    let mut dw = vec![T::zero(); c_in * c_out * k];
    for c in 0..c_in {
        let xrow = &xd[c * t_in..(c + 1) * t_in];
        for o in 0..c_out {
            let grow = &gd[o * t_out..(o + 1) * t_out];
            let base = (c * c_out + o) * k;
            let taps = &wd[base..base + k];
            for t in 0..t_in {
                let span = &grow[t * stride..t * stride + k];
                let mut acc = T::zero();
                for (kk, (&gv, &wv)) in span.iter().zip(taps).enumerate() {
                    acc += wv * gv;
                    dw[base + kk] += xrow[t] * gv;
                }
                dx[c * t_in + t] += acc;
            }
        }
    }
    (
        Tensor::new(vec![c_in, t_in], dx).unwrap(),
        Tensor::new(vec![c_in, c_out, k], dw).unwrap(),
    )
}

/// Stacks two feature maps along the channel axis.
pub fn concat_channels<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.expect_rank(2, "concat_channels")?;
    b.expect_rank(2, "concat_channels")?;
    if a.cols() != b.cols() {
        return Err(shape_err(format!(
            "concat_channels: time lengths differ ({:?} vs {:?})",
            a.shape(),
            b.shape()
        )));
    }
    let mut data = a.data().to_vec();
    data.extend_from_slice(b.data());
    Tensor::new(vec![a.rows() + b.rows(), a.cols()], data)
}

/// `H × L` to `H × 1`.
pub fn mean_over_time<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    x.expect_rank(2, "mean_over_time")?;
    let l = x.cols();
    if l == 0 {
        return Err(shape_err("mean_over_time: empty time axis"));
    }
    let data = (0..x.rows())
        .map(|h| T::narrow(acc_sum(x.row_slice(h).iter().copied()) / T::Acc::of(l as f64)))
        .collect();
    Tensor::new(vec![x.rows(), 1], data)
}

/// `H × 1` to `H × L` with `L` identical columns.
pub fn repeat_columns<T: Real>(e: &Tensor<T>, l: usize) -> Result<Tensor<T>> {
    if e.shape().len() != 2 || e.cols() != 1 {
        return Err(shape_err(format!("repeat_columns: expected an H×1 column, got {:?}", e.shape())));
    }
    let mut data = Vec::with_capacity(e.rows() * l);
    for &v in e.data() {
        data.extend(std::iter::repeat_n(v, l));
    }
    Tensor::new(vec![e.rows(), l], data)
}

pub fn tanh<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.tanh())
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

fn zip_with<T: Real>(a: &Tensor<T>, b: &Tensor<T>, what: &str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
    a.expect_same_shape(b, what)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn add<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_with(a, b, "add", |x, y| x + y)
}

pub fn sub<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_with(a, b, "sub", |x, y| x - y)
}

pub fn mul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_with(a, b, "mul", |x, y| x * y)
}

/// Two-way softmax `(exp(s_c), exp(s_a)) / (exp(s_c) + exp(s_a))` per time
/// step, evaluated with max subtraction.
pub fn softmax_pair<T: Real>(s_c: &Tensor<T>, s_a: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    s_c.expect_same_shape(s_a, "softmax_pair")?;
    let n = s_c.len();
    let mut a_c = Vec::with_capacity(n);
    let mut a_a = Vec::with_capacity(n);
    for (&c, &a) in s_c.data().iter().zip(s_a.data()) {
        let m = c.max(a);
        let (ec, ea) = ((c - m).exp(), (a - m).exp());
        let z = ec + ea;
        a_c.push(ec / z);
        a_a.push(ea / z);
    }
    Ok((
        Tensor::new(s_c.shape().to_vec(), a_c)?,
        Tensor::new(s_a.shape().to_vec(), a_a)?,
    ))
}

/// Row weights `1 × L` broadcast down the channels of `x: H × L`.
pub fn mul_row<T: Real>(row: &Tensor<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    x.expect_rank(2, "mul_row")?;
    if row.len() != x.cols() {
        return Err(shape_err(format!(
            "mul_row: weights {:?} do not match time axis of {:?}",
            row.shape(),
            x.shape()
        )));
    }
    let l = x.cols();
    let data = x.data().iter().enumerate().map(|(i, &v)| v * row.data()[i % l]).collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Selects columns by index; `None` yields a zero column.
pub fn gather_columns<T: Real>(x: &Tensor<T>, index: &[Option<usize>]) -> Result<Tensor<T>> {
    x.expect_rank(2, "gather_columns")?;
    let (h, l) = (x.rows(), x.cols());
    if let Some(bad) = index.iter().flatten().find(|&&i| i >= l) {
        return Err(shape_err(format!("gather_columns: column {bad} out of range {l}")));
    }
    let n = index.len();
    let mut out = vec![T::zero(); h * n];
    for r in 0..h {
        let src = x.row_slice(r);
        for (dst, idx) in out[r * n..(r + 1) * n].iter_mut().zip(index) {
            if let Some(i) = idx {
                *dst = src[*i];
            }
        }
    }
    Tensor::new(vec![h, n], out)
}

/// First `n` columns of a 2-D tensor.
pub fn truncate_columns<T: Real>(x: &Tensor<T>, n: usize) -> Result<Tensor<T>> {
    x.expect_rank(2, "truncate_columns")?;
    if n > x.cols() {
        return Err(shape_err(format!("truncate_columns: {n} exceeds {} columns", x.cols())));
    }
    let mut data = Vec::with_capacity(x.rows() * n);
    for r in 0..x.rows() {
        data.extend_from_slice(&x.row_slice(r)[..n]);
    }
    Tensor::new(vec![x.rows(), n], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn linear_identity_and_dot() {
        let x = Tensor::<f32>::from_rows(&[&[1.0, -2.0], &[3.5, 0.25]]).unwrap();
        let eye = Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let zero = Tensor::zeros(&[2]);
        assert_eq!(linear(&x, &eye, Some(&zero)).unwrap(), x);

        let w = Tensor::<f32>::from_rows(&[&[1.0, 1.0]]).unwrap();
        let x = Tensor::column(&[2.0, 3.0]);
        let out = linear(&x, &w, Some(&Tensor::zeros(&[1]))).unwrap();
        assert_eq!(out.data(), &[5.0]);
    }

    #[test]
    fn linear_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = rand_tensor(&mut rng, &[4, 3]);
        let w = rand_tensor(&mut rng, &[4, 4]);
        let b = rand_tensor(&mut rng, &[4]);
        let out = linear(&x, &w, Some(&b)).unwrap();
        for o in 0..4 {
            for l in 0..3 {
                let mut acc = b.data()[o];
                for i in 0..4 {
                    acc += w.at(o, i) * x.at(i, l);
                }
                assert!((out.at(o, l) - acc).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn linear_rejects_mismatch() {
        let x = Tensor::<f32>::zeros(&[3, 2]);
        let w = Tensor::zeros(&[2, 2]);
        assert!(matches!(linear(&x, &w, None), Err(Error::Shape(_))));
    }

    #[test]
    fn conv1d_examples() {
        let x = Tensor::<f32>::row(&[1.0, 2.0, 3.0, 4.0]);
        let w = Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(conv1d(&x, &w, 1).unwrap(), x);

        let w = Tensor::new(vec![1, 1, 2], vec![1.0, 1.0]).unwrap();
        assert_eq!(conv1d(&x, &w, 2).unwrap().data(), &[3.0, 7.0]);

        let w = Tensor::new(vec![1, 1, 5], vec![1.0; 5]).unwrap();
        assert!(matches!(conv1d(&x, &w, 1), Err(Error::InputTooShort { .. })));
    }

    #[test]
    fn conv1d_matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = rand_tensor(&mut rng, &[2, 20]);
        let w = rand_tensor(&mut rng, &[3, 2, 4]);
        for stride in [1, 2, 3] {
            let out = conv1d(&x, &w, stride).unwrap();
            let t_out = (20 - 4) / stride + 1;
            assert_eq!(out.shape(), &[3, t_out]);
            for o in 0..3 {
                for t in 0..t_out {
                    let mut acc = 0.0;
                    for c in 0..2 {
                        for k in 0..4 {
                            acc += w.data()[(o * 2 + c) * 4 + k] * x.at(c, t * stride + k);
                        }
                    }
                    assert!((out.at(o, t) - acc).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn dilated_same_conv_matches_padded_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = rand_tensor(&mut rng, &[2, 11]);
        let w = rand_tensor(&mut rng, &[2, 2, 3]);
        let b = rand_tensor(&mut rng, &[2]);
        for dilation in [1, 2, 4] {
            let geom = ConvGeom::same(3, dilation);
            let out = conv1d_ext(&x, &w, Some(&b), geom).unwrap();
            assert_eq!(out.shape(), &[2, 11]);
            for o in 0..2 {
                for t in 0..11isize {
                    let mut acc = b.data()[o];
                    for c in 0..2 {
                        for k in 0..3isize {
                            let p = t + (k - 1) * dilation as isize;
                            if (0..11).contains(&p) {
                                acc += w.data()[(o * 2 + c) * 3 + k as usize] * x.at(c, p as usize);
                            }
                        }
                    }
                    assert!((out.at(o, t as usize) - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conv_transpose_is_adjoint_of_conv() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (c_in, c_out) = (rng.gen_range(1..4), rng.gen_range(1..4));
            let k = rng.gen_range(1..6);
            let stride = rng.gen_range(1..4);
            let t_out = rng.gen_range(1..9);
            let t = (t_out - 1) * stride + k;
            let x = rand_tensor(&mut rng, &[c_in, t]);
            let w = rand_tensor(&mut rng, &[c_out, c_in, k]);
            let y = rand_tensor(&mut rng, &[c_out, t_out]);
            let lhs = conv1d(&x, &w, stride).unwrap().dot(&y).unwrap();
            let rhs = x.dot(&conv_transpose1d(&y, &w, stride).unwrap()).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "seed {seed}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn conv_transpose_tiling_and_zero() {
        let w = Tensor::<f32>::new(vec![1, 1, 2], vec![1.0, 2.0]).unwrap();
        let x = Tensor::row(&[1.0, 10.0, 100.0]);
        let out = conv_transpose1d(&x, &w, 2).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 10.0, 20.0, 100.0, 200.0]);
        let z = conv_transpose1d(&Tensor::zeros(&[1, 3]), &w, 2).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_transpose_matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_tensor(&mut rng, &[3, 6]);
        let w = rand_tensor(&mut rng, &[3, 2, 4]);
        let out = conv_transpose1d(&x, &w, 3).unwrap();
        assert_eq!(out.shape(), &[2, 5 * 3 + 4]);
        for o in 0..2 {
            for n in 0..out.cols() {
                let mut acc = 0.0;
                for c in 0..3 {
                    for t in 0..6 {
                        for k in 0..4 {
                            if t * 3 + k == n {
                                acc += w.data()[(c * 2 + o) * 4 + k] * x.at(c, t);
                            }
                        }
                    }
                }
                assert!((out.at(o, n) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn elementwise_examples() {
        let e = Tensor::<f32>::column(&[1.0, 2.0]);
        let r = repeat_columns(&e, 3).unwrap();
        assert_eq!(r, Tensor::from_rows(&[&[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0]]).unwrap());
        let c = Tensor::<f32>::full(&[2, 5], 0.75);
        assert_eq!(mean_over_time(&c).unwrap(), Tensor::column(&[0.75, 0.75]));
        assert_eq!(tanh(&Tensor::<f32>::scalar(0.0)).item().unwrap(), 0.0);
        assert_eq!(relu(&Tensor::<f32>::row(&[-1.0, 2.0])).data(), &[0.0, 2.0]);
        assert!(add(&Tensor::<f32>::zeros(&[2]), &Tensor::zeros(&[3])).is_err());
        let cat = concat_channels(&e, &Tensor::column(&[3.0])).unwrap();
        assert_eq!(cat.shape(), &[3, 1]);
    }

    #[test]
    fn softmax_pair_cases() {
        let s = Tensor::<f64>::row(&[0.3, -2.0, 7.0]);
        let (a_c, a_a) = softmax_pair(&s, &s).unwrap();
        assert!(a_c.data().iter().chain(a_a.data()).all(|&v| (v - 0.5).abs() < 1e-15));

        let s_a = Tensor::<f64>::row(&[0.0, 1.5]);
        let s_c = s_a.map(|v| v + 3f64.ln());
        let (a_c, _) = softmax_pair(&s_c, &s_a).unwrap();
        assert!(a_c.data().iter().all(|&v| (v - 0.75).abs() < 1e-12));

        let (a_c, a_a) = softmax_pair(&Tensor::<f32>::row(&[1000.0]), &Tensor::row(&[0.0])).unwrap();
        assert_eq!(a_c.data(), &[1.0]);
        assert_eq!(a_a.data(), &[0.0]);
    }

    #[test]
    fn gather_and_truncate() {
        let x = Tensor::<f32>::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let g = gather_columns(&x, &[Some(1), Some(1), None, Some(0)]).unwrap();
        assert_eq!(g.data(), &[2.0, 2.0, 0.0, 1.0, 4.0, 4.0, 0.0, 3.0]);
        assert!(gather_columns(&x, &[Some(2)]).is_err());
        assert_eq!(truncate_columns(&x, 1).unwrap().data(), &[1.0, 3.0]);
    }
}
