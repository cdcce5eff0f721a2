//! Forward kernels for the LNet operator set, plus their pure public API.
//!
//! Convolutions are cross-correlations (no kernel flip) over `[C,H,W]`
//! row-major buffers with zero padding. The same kernels back both this
//! module's pure functions and the recorded ops on [`tape::Tape`](super::tape::Tape).

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// `[C,H,W]` dims of a rank-3 shape.
pub(crate) fn dims3(shape: &[usize], op: &'static str, role: &str) -> Result<(usize, usize, usize)> {
    match shape {
        [c, h, w] => Ok((*c, *h, *w)),
        s => Err(Error::shape(op, format!("{role} must be rank 3 [C,H,W], got {s:?}"))),
    }
}

pub(crate) fn conv_out_dim(op: &'static str, input: usize, k: usize, padding: usize) -> Result<usize> {
    let padded = input + 2 * padding;
    if padded < k {
        return Err(Error::shape(op, format!("kernel size {k} exceeds padded input extent {padded}")));
    }
    Ok(padded - k + 1)
}

fn check_kernel_size(op: &'static str, k: usize) -> Result<()> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::invalid(op, format!("kernel size must be odd and >= 1, got {k}")));
    }
    Ok(())
}

fn check_bias(op: &'static str, bias: Option<&[usize]>, channels: usize) -> Result<()> {
    if let Some(b) = bias {
        if b != [channels] {
            return Err(Error::shape(
                op,
                format!("bias shape {b:?} does not match output channel count {channels}"),
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// raw kernels (shared by the pure API and the tape)
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub(crate) fn depthwise_forward<F: Real>(
    input: &[F],
    (c, h, w): (usize, usize, usize),
    kernels: &[F],
    k: usize,
    bias: Option<&[F]>,
    padding: usize,
    out: &mut [F],
    (oh, ow): (usize, usize),
) {
    let pad = padding as isize;
    for ch in 0..c {
        let in_plane = &input[ch * h * w..(ch + 1) * h * w];
        let ker = &kernels[ch * k * k..(ch + 1) * k * k];
        let b = bias.map_or(F::zero(), |b| b[ch]);
        let out_plane = &mut out[ch * oh * ow..(ch + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b;
                for ky in 0..k {
                    let iy = oy as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = ox as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        acc += in_plane[iy as usize * w + ix as usize] * ker[ky * k + kx];
                    }
                }
                out_plane[oy * ow + ox] = acc;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn depthwise_backward<F: Real>(
    input: &[F],
    (c, h, w): (usize, usize, usize),
    kernels: &[F],
    k: usize,
    padding: usize,
    grad_out: &[F],
    (oh, ow): (usize, usize),
    grad_in: Option<&mut [F]>,
    grad_ker: Option<&mut [F]>,
    grad_bias: Option<&mut [F]>,
) {
    let pad = padding as isize;
    let mut grad_in = grad_in;
    let mut grad_ker = grad_ker;
    let mut grad_bias = grad_bias;
    for ch in 0..c {
        let in_plane = &input[ch * h * w..(ch + 1) * h * w];
        let ker = &kernels[ch * k * k..(ch + 1) * k * k];
        let go_plane = &grad_out[ch * oh * ow..(ch + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let go = go_plane[oy * ow + ox];
                if let Some(gb) = grad_bias.as_deref_mut() {
                    gb[ch] += go;
                }
                for ky in 0..k {
                    let iy = oy as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = ox as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let iidx = iy as usize * w + ix as usize;
                        if let Some(gi) = grad_in.as_deref_mut() {
                            gi[ch * h * w + iidx] += go * ker[ky * k + kx];
                        }
                        if let Some(gk) = grad_ker.as_deref_mut() {
                            gk[ch * k * k + ky * k + kx] += go * in_plane[iidx];
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn pointwise_forward<F: Real>(
    input: &[F],
    (ci, h, w): (usize, usize, usize),
    kernels: &[F],
    co: usize,
    bias: Option<&[F]>,
    out: &mut [F],
) {
    let plane = h * w;
    for j in 0..co {
        let b = bias.map_or(F::zero(), |b| b[j]);
        let out_plane = &mut out[j * plane..(j + 1) * plane];
        out_plane.iter_mut().for_each(|v| *v = b);
        for i in 0..ci {
            let kj = kernels[j * ci + i];
            let in_plane = &input[i * plane..(i + 1) * plane];
            for (o, x) in out_plane.iter_mut().zip(in_plane) {
                *o += kj * *x;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn pointwise_backward<F: Real>(
    input: &[F],
    (ci, h, w): (usize, usize, usize),
    kernels: &[F],
    co: usize,
    grad_out: &[F],
    grad_in: Option<&mut [F]>,
    grad_ker: Option<&mut [F]>,
    grad_bias: Option<&mut [F]>,
) {
    let plane = h * w;
    let mut grad_in = grad_in;
    let mut grad_ker = grad_ker;
    let mut grad_bias = grad_bias;
    for j in 0..co {
        let go_plane = &grad_out[j * plane..(j + 1) * plane];
        if let Some(gb) = grad_bias.as_deref_mut() {
            gb[j] += go_plane.iter().copied().sum();
        }
        for i in 0..ci {
            let in_plane = &input[i * plane..(i + 1) * plane];
            if let Some(gi) = grad_in.as_deref_mut() {
                let kj = kernels[j * ci + i];
                for (g, go) in gi[i * plane..(i + 1) * plane].iter_mut().zip(go_plane) {
                    *g += kj * *go;
                }
            }
            if let Some(gk) = grad_ker.as_deref_mut() {
                let mut acc = F::zero();
                for (x, go) in in_plane.iter().zip(go_plane) {
                    acc += *x * *go;
                }
                gk[j * ci + i] += acc;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn standard_forward<F: Real>(
    input: &[F],
    (ci, h, w): (usize, usize, usize),
    kernels: &[F],
    co: usize,
    k: usize,
    bias: Option<&[F]>,
    padding: usize,
    out: &mut [F],
    (oh, ow): (usize, usize),
) {
    let pad = padding as isize;
    for j in 0..co {
        let b = bias.map_or(F::zero(), |b| b[j]);
        let out_plane = &mut out[j * oh * ow..(j + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b;
                for i in 0..ci {
                    let in_plane = &input[i * h * w..(i + 1) * h * w];
                    let ker = &kernels[(j * ci + i) * k * k..(j * ci + i + 1) * k * k];
                    for ky in 0..k {
                        let iy = oy as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = ox as isize + kx as isize - pad;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc += in_plane[iy as usize * w + ix as usize] * ker[ky * k + kx];
                        }
                    }
                }
                out_plane[oy * ow + ox] = acc;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn standard_backward<F: Real>(
    input: &[F],
    (ci, h, w): (usize, usize, usize),
    kernels: &[F],
    co: usize,
    k: usize,
    padding: usize,
    grad_out: &[F],
    (oh, ow): (usize, usize),
    grad_in: Option<&mut [F]>,
    grad_ker: Option<&mut [F]>,
    grad_bias: Option<&mut [F]>,
) {
    let pad = padding as isize;
    let mut grad_in = grad_in;
    let mut grad_ker = grad_ker;
    let mut grad_bias = grad_bias;
    for j in 0..co {
        let go_plane = &grad_out[j * oh * ow..(j + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let go = go_plane[oy * ow + ox];
                if let Some(gb) = grad_bias.as_deref_mut() {
                    gb[j] += go;
                }
                for i in 0..ci {
                    let in_plane = &input[i * h * w..(i + 1) * h * w];
                    let kbase = (j * ci + i) * k * k;
                    for ky in 0..k {
                        let iy = oy as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = ox as isize + kx as isize - pad;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let iidx = iy as usize * w + ix as usize;
                            if let Some(gi) = grad_in.as_deref_mut() {
                                gi[i * h * w + iidx] += go * kernels[kbase + ky * k + kx];
                            }
                            if let Some(gk) = grad_ker.as_deref_mut() {
                                gk[kbase + ky * k + kx] += go * in_plane[iidx];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Pairs channel `i` with channel `i + C/2`; ties go to the lower index.
pub(crate) fn mfm_forward<F: Real>(input: &[F], (c, h, w): (usize, usize, usize), out: &mut [F]) {
    let half = c / 2;
    let plane = h * w;
    for i in 0..half {
        let a = &input[i * plane..(i + 1) * plane];
        let b = &input[(i + half) * plane..(i + half + 1) * plane];
        let o = &mut out[i * plane..(i + 1) * plane];
        for ((o, a), b) in o.iter_mut().zip(a).zip(b) {
            *o = if *a >= *b { *a } else { *b };
        }
    }
}

pub(crate) fn mfm_backward<F: Real>(
    input: &[F],
    (c, h, w): (usize, usize, usize),
    grad_out: &[F],
    grad_in: &mut [F],
) {
    let half = c / 2;
    let plane = h * w;
    for i in 0..half {
        for p in 0..plane {
            let a = input[i * plane + p];
            let b = input[(i + half) * plane + p];
            let go = grad_out[i * plane + p];
            if a >= b {
                grad_in[i * plane + p] += go;
            } else {
                grad_in[(i + half) * plane + p] += go;
            }
        }
    }
}

/// 2×2 window max; the argmax is the first maximum in row-major window order.
pub(crate) fn maxpool_forward<F: Real>(input: &[F], (c, h, w): (usize, usize, usize), out: &mut [F]) {
    let (oh, ow) = (h / 2, w / 2);
    for ch in 0..c {
        let in_plane = &input[ch * h * w..(ch + 1) * h * w];
        let out_plane = &mut out[ch * oh * ow..(ch + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = in_plane[2 * oy * w + 2 * ox];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let v = in_plane[(2 * oy + dy) * w + 2 * ox + dx];
                    if v > best {
                        best = v;
                    }
                }
                out_plane[oy * ow + ox] = best;
            }
        }
    }
}

pub(crate) fn maxpool_backward<F: Real>(
    input: &[F],
    (c, h, w): (usize, usize, usize),
    grad_out: &[F],
    grad_in: &mut [F],
) {
    let (oh, ow) = (h / 2, w / 2);
    for ch in 0..c {
        let in_plane = &input[ch * h * w..(ch + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_idx = 2 * oy * w + 2 * ox;
                let mut best = in_plane[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = (2 * oy + dy) * w + 2 * ox + dx;
                    if in_plane[idx] > best {
                        best = in_plane[idx];
                        best_idx = idx;
                    }
                }
                grad_in[ch * h * w + best_idx] += grad_out[ch * oh * ow + oy * ow + ox];
            }
        }
    }
}

pub(crate) fn crop_forward<F: Real>(
    input: &[F],
    (c, h, w): (usize, usize, usize),
    (oh, ow): (usize, usize),
    out: &mut [F],
) {
    for ch in 0..c {
        for y in 0..oh {
            let src = ch * h * w + y * w;
            let dst = ch * oh * ow + y * ow;
            out[dst..dst + ow].copy_from_slice(&input[src..src + ow]);
        }
    }
}

pub(crate) fn crop_backward<F: Real>(
    (c, h, w): (usize, usize, usize),
    (oh, ow): (usize, usize),
    grad_out: &[F],
    grad_in: &mut [F],
) {
    for ch in 0..c {
        for y in 0..oh {
            let src = ch * oh * ow + y * ow;
            let dst = ch * h * w + y * w;
            for x in 0..ow {
                grad_in[dst + x] += grad_out[src + x];
            }
        }
    }
}

pub(crate) fn linear_forward<F: Real>(input: &[F], weight: &[F], bias: &[F], d: usize, m: usize, out: &mut [F]) {
    for j in 0..m {
        let row = &weight[j * d..(j + 1) * d];
        let mut acc = bias[j];
        for (wv, xv) in row.iter().zip(input) {
            acc += *wv * *xv;
        }
        out[j] = acc;
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward<F: Real>(
    input: &[F],
    weight: &[F],
    d: usize,
    m: usize,
    grad_out: &[F],
    grad_in: Option<&mut [F]>,
    grad_weight: Option<&mut [F]>,
    grad_bias: Option<&mut [F]>,
) {
    let mut grad_in = grad_in;
    let mut grad_weight = grad_weight;
    let mut grad_bias = grad_bias;
    for j in 0..m {
        let go = grad_out[j];
        if let Some(gb) = grad_bias.as_deref_mut() {
            gb[j] += go;
        }
        if let Some(gw) = grad_weight.as_deref_mut() {
            for (g, x) in gw[j * d..(j + 1) * d].iter_mut().zip(input) {
                *g += go * *x;
            }
        }
        if let Some(gi) = grad_in.as_deref_mut() {
            for (g, wv) in gi.iter_mut().zip(&weight[j * d..(j + 1) * d]) {
                *g += go * *wv;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// shape validation shared with the tape
// ---------------------------------------------------------------------------

pub(crate) fn depthwise_out_shape(
    input: &[usize],
    kernels: &[usize],
    bias: Option<&[usize]>,
    padding: usize,
) -> Result<(usize, usize, usize)> {
    const OP: &str = "conv2d_depthwise";
    let (c, h, w) = dims3(input, OP, "input")?;
    let (kc, k, k2) = dims3(kernels, OP, "kernels")?;
    check_kernel_size(OP, k)?;
    if k != k2 {
        return Err(Error::shape(OP, format!("kernels must be square, got {k}x{k2}")));
    }
    if kc != c {
        return Err(Error::shape(OP, format!("kernel channel count {kc} does not match input channels {c}")));
    }
    check_bias(OP, bias, c)?;
    let oh = conv_out_dim(OP, h, k, padding)?;
    let ow = conv_out_dim(OP, w, k, padding)?;
    Ok((c, oh, ow))
}

pub(crate) fn pointwise_out_shape(
    input: &[usize],
    kernels: &[usize],
    bias: Option<&[usize]>,
) -> Result<(usize, usize, usize)> {
    const OP: &str = "conv2d_pointwise";
    let (ci, h, w) = dims3(input, OP, "input")?;
    let (co, kci) = match kernels {
        [co, kci] => (*co, *kci),
        s => return Err(Error::shape(OP, format!("kernels must be rank 2 [C_out,C_in], got {s:?}"))),
    };
    if kci != ci {
        return Err(Error::shape(OP, format!("kernel input-channel dim {kci} does not match input channels {ci}")));
    }
    check_bias(OP, bias, co)?;
    Ok((co, h, w))
}

pub(crate) fn standard_out_shape(
    input: &[usize],
    kernels: &[usize],
    bias: Option<&[usize]>,
    padding: usize,
) -> Result<(usize, usize, usize, usize)> {
    const OP: &str = "conv2d_standard";
    let (ci, h, w) = dims3(input, OP, "input")?;
    let (co, kci, k, k2) = match kernels {
        [co, kci, k, k2] => (*co, *kci, *k, *k2),
        s => return Err(Error::shape(OP, format!("kernels must be rank 4 [C_out,C_in,K,K], got {s:?}"))),
    };
    check_kernel_size(OP, k)?;
    if k != k2 {
        return Err(Error::shape(OP, format!("kernels must be square, got {k}x{k2}")));
    }
    if kci != ci {
        return Err(Error::shape(OP, format!("kernel input-channel dim {kci} does not match input channels {ci}")));
    }
    check_bias(OP, bias, co)?;
    let oh = conv_out_dim(OP, h, k, padding)?;
    let ow = conv_out_dim(OP, w, k, padding)?;
    Ok((co, oh, ow, k))
}

pub(crate) fn mfm_out_shape(input: &[usize]) -> Result<(usize, usize, usize)> {
    const OP: &str = "mfm_max";
    let (c, h, w) = dims3(input, OP, "input")?;
    if c % 2 != 0 {
        return Err(Error::invalid(OP, format!("channel count must be even, got {c}")));
    }
    Ok((c / 2, h, w))
}

pub(crate) fn maxpool_out_shape(input: &[usize]) -> Result<(usize, usize, usize)> {
    const OP: &str = "maxpool2x2";
    let (c, h, w) = dims3(input, OP, "input")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(OP, format!("spatial dims must be even, got {h}x{w}")));
    }
    Ok((c, h / 2, w / 2))
}

pub(crate) fn crop_out_shape(input: &[usize], oh: usize, ow: usize) -> Result<(usize, usize, usize)> {
    const OP: &str = "crop2d";
    let (c, h, w) = dims3(input, OP, "input")?;
    if oh == 0 || ow == 0 || oh > h || ow > w {
        return Err(Error::shape(OP, format!("crop {oh}x{ow} not contained in input {h}x{w}")));
    }
    Ok((c, h, w))
}

pub(crate) fn linear_out_shape(input: &[usize], weight: &[usize], bias: &[usize]) -> Result<(usize, usize)> {
    const OP: &str = "linear";
    let d = match input {
        [d] => *d,
        s => return Err(Error::shape(OP, format!("input must be rank 1 [D], got {s:?}"))),
    };
    let (m, wd) = match weight {
        [m, wd] => (*m, *wd),
        s => return Err(Error::shape(OP, format!("weight must be rank 2 [M,D], got {s:?}"))),
    };
    if wd != d {
        return Err(Error::shape(OP, format!("weight inner dim {wd} does not match input dim {d}")));
    }
    if bias != [m] {
        return Err(Error::shape(OP, format!("bias shape {bias:?} does not match output dim {m}")));
    }
    Ok((d, m))
}

// ---------------------------------------------------------------------------
// pure (untracked) operations
// ---------------------------------------------------------------------------

/// Per-channel cross-correlation: channel `c` of the output is input channel
/// `c` filtered with kernel `c` (plus `bias[c]` if given).
pub fn conv2d_depthwise<F: Real>(
    input: &Tensor<F>,
    kernels: &Tensor<F>,
    bias: Option<&Tensor<F>>,
    padding: usize,
) -> Result<Tensor<F>> {
    let (c, oh, ow) = depthwise_out_shape(input.shape(), kernels.shape(), bias.map(Tensor::shape), padding)?;
    let (h, w) = (input.shape()[1], input.shape()[2]);
    let k = kernels.shape()[1];
    let mut out = vec![F::zero(); c * oh * ow];
    depthwise_forward(input.data(), (c, h, w), kernels.data(), k, bias.map(Tensor::data), padding, &mut out, (oh, ow));
    Tensor::new(vec![c, oh, ow], out)
}

/// 1×1 channel mixing: `out[j] = Σ_i kernels[j,i]·input[i]` at every pixel.
pub fn conv2d_pointwise<F: Real>(
    input: &Tensor<F>,
    kernels: &Tensor<F>,
    bias: Option<&Tensor<F>>,
) -> Result<Tensor<F>> {
    let (co, h, w) = pointwise_out_shape(input.shape(), kernels.shape(), bias.map(Tensor::shape))?;
    let ci = input.shape()[0];
    let mut out = vec![F::zero(); co * h * w];
    pointwise_forward(input.data(), (ci, h, w), kernels.data(), co, bias.map(Tensor::data), &mut out);
    Tensor::new(vec![co, h, w], out)
}

/// Full cross-correlation over all input channels.
pub fn conv2d_standard<F: Real>(
    input: &Tensor<F>,
    kernels: &Tensor<F>,
    bias: Option<&Tensor<F>>,
    padding: usize,
) -> Result<Tensor<F>> {
    let (co, oh, ow, k) = standard_out_shape(input.shape(), kernels.shape(), bias.map(Tensor::shape), padding)?;
    let (ci, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let mut out = vec![F::zero(); co * oh * ow];
    standard_forward(input.data(), (ci, h, w), kernels.data(), co, k, bias.map(Tensor::data), padding, &mut out, (oh, ow));
    Tensor::new(vec![co, oh, ow], out)
}

/// Max-Feature-Map: `out[i] = max(in[i], in[i+C/2])` element-wise, halving
/// the channel count.
pub fn mfm_max<F: Real>(input: &Tensor<F>) -> Result<Tensor<F>> {
    let (half, h, w) = mfm_out_shape(input.shape())?;
    let c = input.shape()[0];
    let mut out = vec![F::zero(); half * h * w];
    mfm_forward(input.data(), (c, h, w), &mut out);
    Tensor::new(vec![half, h, w], out)
}

/// 2×2 max pooling with stride 2. Spatial dims must be even.
pub fn maxpool2x2<F: Real>(input: &Tensor<F>) -> Result<Tensor<F>> {
    let (c, oh, ow) = maxpool_out_shape(input.shape())?;
    let (h, w) = (input.shape()[1], input.shape()[2]);
    let mut out = vec![F::zero(); c * oh * ow];
    maxpool_forward(input.data(), (c, h, w), &mut out);
    Tensor::new(vec![c, oh, ow], out)
}

/// Keeps the top-left `oh×ow` corner of every channel. Used by the model to
/// drop a trailing row/column ahead of pooling on odd spatial dims.
pub fn crop2d<F: Real>(input: &Tensor<F>, oh: usize, ow: usize) -> Result<Tensor<F>> {
    let (c, h, w) = crop_out_shape(input.shape(), oh, ow)?;
    let mut out = vec![F::zero(); c * oh * ow];
    crop_forward(input.data(), (c, h, w), (oh, ow), &mut out);
    Tensor::new(vec![c, oh, ow], out)
}

/// `out = weight·input + bias`.
pub fn linear<F: Real>(input: &Tensor<F>, weight: &Tensor<F>, bias: &Tensor<F>) -> Result<Tensor<F>> {
    let (d, m) = linear_out_shape(input.shape(), weight.shape(), bias.shape())?;
    let mut out = vec![F::zero(); m];
    linear_forward(input.data(), weight.data(), bias.data(), d, m, &mut out);
    Tensor::new(vec![m], out)
}

/// Flattens `[C,H,W]` to `[C·H·W]` (same buffer order).
pub fn flatten<F: Real>(input: &Tensor<F>) -> Result<Tensor<F>> {
    Tensor::new(vec![input.len()], input.data().to_vec())
}
