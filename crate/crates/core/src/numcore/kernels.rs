//! Forward kernels and their analytic backward passes.
//!
//! Broadcasting is deliberately narrow: `add` broadcasts a trailing-shape
//! operand over leading axes, and `expand` repeats a size-1 axis. Everything
//! else requires matching shapes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::{Error, Result};

fn shape_err(op: &'static str, detail: alloc::string::String) -> Error {
    Error::Shape { op, detail }
}

/// `[m×k] · [k×n] → [m×n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(shape_err("matmul", format!("lhs {:?}, rhs {:?}", a.shape(), b.shape())));
    }
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut out = vec![0.0; m * n];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = ad[i * k + p];
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// Returns `(dA, dB) = (G·Bᵀ, Aᵀ·G)`.
pub fn matmul_backward(a: &Tensor, b: &Tensor, grad: &Tensor) -> Result<(Tensor, Tensor)> {
    let ga = matmul(grad, &transpose(b)?)?;
    let gb = matmul(&transpose(a)?, grad)?;
    Ok((ga, gb))
}

pub fn transpose(a: &Tensor) -> Result<Tensor> {
    if a.ndim() != 2 {
        return Err(shape_err("transpose", format!("expected 2-D, got {:?}", a.shape())));
    }
    let (m, n) = (a.shape()[0], a.shape()[1]);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a.data()[i * n + j];
        }
    }
    Tensor::new(vec![n, m], out)
}

pub fn transpose_backward(grad: &Tensor) -> Result<Tensor> {
    transpose(grad)
}

/// Broadcast add: `b`'s shape must equal a suffix of `a`'s shape.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ash, bsh) = (a.shape(), b.shape());
    if bsh.len() > ash.len() || ash[ash.len() - bsh.len()..] != *bsh {
        return Err(shape_err("add", format!("cannot broadcast {:?} onto {:?}", bsh, ash)));
    }
    let block = b.len().max(1);
    let data = a.data().chunks(block).flat_map(|chunk| chunk.iter().zip(b.data()).map(|(x, y)| x + y)).collect();
    Tensor::new(ash.to_vec(), data)
}

/// Returns `(dA, dB)`; `dB` sums the upstream gradient over broadcast blocks.
pub fn add_backward(b_shape: &[usize], grad: &Tensor) -> Result<(Tensor, Tensor)> {
    let mut gb = Tensor::zeros(b_shape);
    let block = gb.len().max(1);
    for chunk in grad.data().chunks(block) {
        for (acc, g) in gb.data_mut().iter_mut().zip(chunk) {
            *acc += g;
        }
    }
    Ok((grad.clone(), gb))
}

/// Elementwise product of equally shaped tensors.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.same_shape(b, "mul")?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn mul_backward(a: &Tensor, b: &Tensor, grad: &Tensor) -> Result<(Tensor, Tensor)> {
    Ok((mul(grad, b)?, mul(grad, a)?))
}

/// `scale * a + shift`, elementwise.
pub fn affine(a: &Tensor, scale: f64, shift: f64) -> Tensor {
    a.map(|v| scale * v + shift)
}

pub fn affine_backward(scale: f64, grad: &Tensor) -> Tensor {
    grad.map(|g| scale * g)
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    // exp(-x) overflowing to +inf still gives the right limit, 0.
    1.0 / (1.0 + libm::exp(-x))
}

pub fn sigmoid(a: &Tensor) -> Tensor {
    a.map(sigmoid_scalar)
}

/// Takes the forward output `s = sigmoid(a)`.
pub fn sigmoid_backward(out: &Tensor, grad: &Tensor) -> Result<Tensor> {
    out.same_shape(grad, "sigmoid_backward")?;
    let data = out.data().iter().zip(grad.data()).map(|(s, g)| g * s * (1.0 - s)).collect();
    Tensor::new(out.shape().to_vec(), data)
}

/// Softmax over the last axis.
pub fn softmax_rows(a: &Tensor) -> Tensor {
    let n = a.last_dim();
    let mut out = a.clone();
    for row in out.data_mut().chunks_mut(n) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Takes the forward output `s`; per row `dA = s ⊙ (g − ⟨g, s⟩)`.
pub fn softmax_rows_backward(out: &Tensor, grad: &Tensor) -> Result<Tensor> {
    out.same_shape(grad, "softmax_rows_backward")?;
    let n = out.last_dim();
    let mut ga = grad.clone();
    for (grow, srow) in ga.data_mut().chunks_mut(n).zip(out.data().chunks(n)) {
        let dot: f64 = grow.iter().zip(srow).map(|(g, s)| g * s).sum();
        for (g, s) in grow.iter_mut().zip(srow) {
            *g = s * (*g - dot);
        }
    }
    Ok(ga)
}

/// Natural log; every entry must be strictly positive.
pub fn ln(a: &Tensor) -> Result<Tensor> {
    if let Some(v) = a.data().iter().find(|v| v.is_nan() || **v <= 0.0) {
        return Err(Error::Numeric(format!("ln of non-positive value {v}")));
    }
    Ok(a.map(libm::log))
}

pub fn ln_backward(a: &Tensor, grad: &Tensor) -> Result<Tensor> {
    a.same_shape(grad, "ln_backward")?;
    let data = a.data().iter().zip(grad.data()).map(|(x, g)| g / x).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn clip(a: &Tensor, lo: f64, hi: f64) -> Tensor {
    a.map(|v| v.clamp(lo, hi))
}

/// Gradient passes where `lo <= a <= hi` and is zero where clipping bit.
pub fn clip_backward(a: &Tensor, lo: f64, hi: f64, grad: &Tensor) -> Result<Tensor> {
    a.same_shape(grad, "clip_backward")?;
    let data = a.data().iter().zip(grad.data()).map(|(&x, &g)| if (lo..=hi).contains(&x) { g } else { 0.0 }).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Concatenates along the last axis; leading axes must agree.
pub fn concat_last(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ash, bsh) = (a.shape(), b.shape());
    if ash.is_empty() || ash.len() != bsh.len() || ash[..ash.len() - 1] != bsh[..bsh.len() - 1] {
        return Err(shape_err("concat_last", format!("{:?} vs {:?}", ash, bsh)));
    }
    let (na, nb) = (a.last_dim(), b.last_dim());
    let mut data = Vec::with_capacity(a.len() + b.len());
    for (ra, rb) in a.data().chunks(na.max(1)).zip(b.data().chunks(nb.max(1))) {
        data.extend_from_slice(ra);
        data.extend_from_slice(rb);
    }
    let mut shape = ash.to_vec();
    *shape.last_mut().unwrap() = na + nb;
    Tensor::new(shape, data)
}

/// Splits the upstream gradient back into the two concatenated parts.
pub fn concat_last_backward(a_last: usize, grad: &Tensor) -> Result<(Tensor, Tensor)> {
    let n = grad.last_dim();
    if a_last > n {
        return Err(shape_err("concat_last_backward", format!("split {a_last} of {n}")));
    }
    let ga = slice_last(grad, 0, a_last)?;
    let gb = slice_last(grad, a_last, n)?;
    Ok((ga, gb))
}

pub fn reshape(a: &Tensor, shape: &[usize]) -> Result<Tensor> {
    Tensor::new(shape.to_vec(), a.data().to_vec())
}

pub fn reshape_backward(a_shape: &[usize], grad: &Tensor) -> Result<Tensor> {
    reshape(grad, a_shape)
}

/// Repeats the size-1 axis `axis` `n` times.
pub fn expand(a: &Tensor, axis: usize, n: usize) -> Result<Tensor> {
    let sh = a.shape();
    if axis >= sh.len() || sh[axis] != 1 {
        return Err(shape_err("expand", format!("axis {axis} of {:?} is not size 1", sh)));
    }
    let outer: usize = sh[..axis].iter().product();
    let inner: usize = sh[axis + 1..].iter().product();
    let mut data = Vec::with_capacity(a.len() * n);
    for o in 0..outer {
        let block = &a.data()[o * inner..(o + 1) * inner];
        for _ in 0..n {
            data.extend_from_slice(block);
        }
    }
    let mut shape = sh.to_vec();
    shape[axis] = n;
    Tensor::new(shape, data)
}

/// Sums the upstream gradient over the expanded axis.
pub fn expand_backward(a_shape: &[usize], axis: usize, grad: &Tensor) -> Result<Tensor> {
    let gsh = grad.shape();
    if axis >= gsh.len() || a_shape.len() != gsh.len() {
        return Err(shape_err("expand_backward", format!("{:?} vs {:?}", a_shape, gsh)));
    }
    let n = gsh[axis];
    let outer: usize = gsh[..axis].iter().product();
    let inner: usize = gsh[axis + 1..].iter().product();
    let mut out = vec![0.0; outer * inner];
    for o in 0..outer {
        for r in 0..n {
            let src = &grad.data()[(o * n + r) * inner..(o * n + r + 1) * inner];
            for (acc, g) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                *acc += g;
            }
        }
    }
    Tensor::new(a_shape.to_vec(), out)
}

/// Half-open range `[start, end)` of the last axis.
pub fn slice_last(a: &Tensor, start: usize, end: usize) -> Result<Tensor> {
    let n = a.last_dim();
    if start > end || end > n {
        return Err(shape_err("slice_last", format!("range {start}..{end} of {n}")));
    }
    let mut data = Vec::with_capacity(a.len() / n.max(1) * (end - start));
    for row in a.data().chunks(n.max(1)) {
        data.extend_from_slice(&row[start..end]);
    }
    let mut shape = a.shape().to_vec();
    *shape.last_mut().unwrap() = end - start;
    Tensor::new(shape, data)
}

/// Scatters the gradient of a slice back into a zero tensor of `a_shape`.
pub fn slice_last_backward(a_shape: &[usize], start: usize, grad: &Tensor) -> Result<Tensor> {
    let n = *a_shape.last().unwrap_or(&1);
    let w = grad.last_dim();
    if start + w > n {
        return Err(shape_err("slice_last_backward", format!("{start}+{w} > {n}")));
    }
    let mut out = Tensor::zeros(a_shape);
    for (orow, grow) in out.data_mut().chunks_mut(n).zip(grad.data().chunks(w.max(1))) {
        orow[start..start + w].copy_from_slice(grow);
    }
    Ok(out)
}

/// Gathers last-axis entries by index (used for feature masks).
pub fn select_last(a: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let n = a.last_dim();
    if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
        return Err(shape_err("select_last", format!("index {bad} out of {n}")));
    }
    let mut data = Vec::with_capacity(a.len() / n.max(1) * idx.len());
    for row in a.data().chunks(n.max(1)) {
        data.extend(idx.iter().map(|&i| row[i]));
    }
    let mut shape = a.shape().to_vec();
    *shape.last_mut().unwrap() = idx.len();
    Tensor::new(shape, data)
}

pub fn select_last_backward(a_shape: &[usize], idx: &[usize], grad: &Tensor) -> Result<Tensor> {
    let n = *a_shape.last().unwrap_or(&1);
    let mut out = Tensor::zeros(a_shape);
    for (orow, grow) in out.data_mut().chunks_mut(n).zip(grad.data().chunks(idx.len().max(1))) {
        for (&i, g) in idx.iter().zip(grow) {
            orow[i] += g;
        }
    }
    Ok(out)
}

pub fn sum(a: &Tensor) -> f64 {
    a.data().iter().sum()
}

pub fn sum_backward(a_shape: &[usize], grad: f64) -> Tensor {
    Tensor::full(a_shape, grad)
}

pub fn mean(a: &Tensor) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyInput("mean of empty tensor"));
    }
    Ok(sum(a) / a.len() as f64)
}

pub fn mean_backward(a_shape: &[usize], grad: f64) -> Tensor {
    let n: usize = a_shape.iter().product();
    Tensor::full(a_shape, grad / n.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_at_zero() {
        let s = sigmoid(&Tensor::scalar(0.0));
        assert_eq!(s.data(), &[0.5]);
        let g = sigmoid_backward(&s, &Tensor::scalar(1.0)).unwrap();
        assert_eq!(g.data(), &[0.25]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let s = softmax_rows(&Tensor::new(vec![1, 2], vec![0.0, 0.0]).unwrap());
        assert_eq!(s.data(), &[0.5, 0.5]);
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        let s = sigmoid(&Tensor::new(vec![2], vec![-800.0, 800.0]).unwrap());
        assert!(s.is_finite());
        assert_eq!(s.data(), &[0.0, 1.0]);
    }

    #[test]
    fn matmul_rejects_mismatched_inner_dims() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 1]);
        assert!(matches!(matmul(&a, &b), Err(Error::Shape { op: "matmul", .. })));
    }

    #[test]
    fn matmul_small() {
        let a = Tensor::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let b = Tensor::from_rows(&[[1.0], [0.0], [-1.0]]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap().data(), &[-2.0, -2.0]);
    }

    #[test]
    fn ln_rejects_non_positive() {
        assert!(matches!(ln(&Tensor::scalar(0.0)), Err(Error::Numeric(_))));
    }

    #[test]
    fn expand_then_backward_sums() {
        let a = Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let e = expand(&a, 1, 3).unwrap();
        assert_eq!(e.data(), &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        let g = expand_backward(a.shape(), 1, &Tensor::full(&[2, 3], 1.0)).unwrap();
        assert_eq!(g.data(), &[3.0, 3.0]);
    }

    #[test]
    fn concat_and_split_round_trip() {
        let a = Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = concat_last(&a, &b).unwrap();
        assert_eq!(c.data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let (ga, gb) = concat_last_backward(1, &c).unwrap();
        assert_eq!((ga, gb), (a, b));
    }

    #[test]
    fn add_broadcasts_bias_over_rows() {
        let a = Tensor::zeros(&[3, 2]);
        let b = Tensor::new(vec![2], vec![1.0, -1.0]).unwrap();
        let c = add(&a, &b).unwrap();
        assert_eq!(c.data(), &[1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
        let (_, gb) = add_backward(b.shape(), &Tensor::full(&[3, 2], 1.0)).unwrap();
        assert_eq!(gb.data(), &[3.0, 3.0]);
        assert!(add(&a, &Tensor::zeros(&[3])).is_err());
    }
}
