//! Pure forward kernels. The tape records these and supplies the adjoints.

use super::Tensor;
use crate::error::{Error, Result};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

/// `c[m×n] = a[m×k] · b[k×n]`
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let out = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let s = a[i * k + p];
            if s == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in out.iter_mut().zip(brow) {
                *o += s * bv;
            }
        }
    }
    c
}

/// `c[m×n] = a[m×k] · b[n×k]ᵀ`
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            c[i * n + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    c
}

/// `c[m×n] += a[k×m]ᵀ · b[k×n]`
pub(crate) fn matmul_tn_acc(c: &mut [f64], a: &[f64], b: &[f64], k: usize, m: usize, n: usize) {
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &s) in arow.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let out = &mut c[i * n..(i + 1) * n];
            for (o, bv) in out.iter_mut().zip(brow) {
                *o += s * bv;
            }
        }
    }
}

/// In-place softmax over one row; `keep[j] == false` entries get probability 0.
pub(crate) fn softmax_row(row: &mut [f64], keep: Option<&[bool]>) -> Result<()> {
    let kept = |j: usize| keep.is_none_or(|k| k[j]);
    let max = row
        .iter()
        .enumerate()
        .filter(|(j, _)| kept(*j))
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::dim("softmax over an empty or fully masked row"));
    }
    let mut sum = 0.0;
    for (j, v) in row.iter_mut().enumerate() {
        if kept(j) {
            *v = (*v - max).exp();
            sum += *v;
        } else {
            *v = 0.0;
        }
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
    Ok(())
}

pub(crate) fn gelu_scalar(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_K * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

pub(crate) fn gelu_grad_scalar(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_K * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

/// Per-row normalization statistics: returns (normalized rows, 1/sqrt(var+eps) per row).
pub(crate) fn layer_norm_stats(x: &[f64], rows: usize, d: usize, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let mut xhat = vec![0.0; rows * d];
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + eps).sqrt();
        inv_std[r] = inv;
        for (o, v) in xhat[r * d..(r + 1) * d].iter_mut().zip(row) {
            *o = (v - mean) * inv;
        }
    }
    (xhat, inv_std)
}

/// Numerically stable `log(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn check_finite(t: &Tensor, op: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(op.to_string()))
    }
}

pub(crate) fn affine_dims(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<(usize, usize, usize)> {
    if w.rank() != 2 {
        return Err(Error::dim(format!("weight must be a matrix, got {:?}", w.shape())));
    }
    let (d_in, d_out) = (w.shape()[0], w.shape()[1]);
    if x.rank() > 2 || x.cols() != d_in {
        return Err(Error::dim(format!(
            "input {:?} does not match weight {:?}",
            x.shape(),
            w.shape()
        )));
    }
    if b.shape() != [d_out] {
        return Err(Error::dim(format!(
            "bias {:?} does not match output width {d_out}",
            b.shape()
        )));
    }
    Ok((x.rows(), d_in, d_out))
}

pub(crate) fn affine_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, d_in, d_out) = affine_dims(x, w, b)?;
    let mut y = matmul(x.data(), w.data(), n, d_in, d_out);
    for row in y.chunks_mut(d_out) {
        for (o, bv) in row.iter_mut().zip(b.data()) {
            *o += bv;
        }
    }
    let shape = if x.rank() == 2 { vec![n, d_out] } else { vec![d_out] };
    Tensor::new(shape, y)
}

/// `y = xW + b`. A rank-1 `x` is treated as one row and yields a rank-1 result.
pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let y = affine_forward(x, w, b)?;
    check_finite(&y, "affine")?;
    Ok(y)
}

/// Softmax over the last axis, computed with max subtraction.
pub fn softmax(v: &Tensor) -> Result<Tensor> {
    if v.is_empty() {
        return Err(Error::dim("softmax of an empty tensor"));
    }
    if !v.is_finite() {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let mut out = v.clone();
    let c = out.cols();
    for row in out.data_mut().chunks_mut(c) {
        softmax_row(row, None)?;
    }
    Ok(out)
}

/// Row-wise `(x − mean)/sqrt(var + eps) · gamma + beta`.
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
    let d = x.cols();
    if d < 2 {
        return Err(Error::dim(format!("layer_norm needs width >= 2, got {d}")));
    }
    if gamma.shape() != [d] || beta.shape() != [d] {
        return Err(Error::dim("layer_norm scale/shift must match row width"));
    }
    let rows = x.rows();
    let (xhat, _) = layer_norm_stats(x.data(), rows, d, eps);
    let mut out = xhat;
    for row in out.chunks_mut(d) {
        for ((o, g), b) in row.iter_mut().zip(gamma.data()).zip(beta.data()) {
            *o = *o * g + b;
        }
    }
    let y = Tensor::new(x.shape().to_vec(), out)?;
    check_finite(&y, "layer_norm")?;
    Ok(y)
}

/// Elementwise GELU, tanh approximation.
pub fn gelu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| gelu_scalar(v)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}
