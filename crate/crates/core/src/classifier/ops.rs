//! Forward and backward kernels. The slice functions work on raw CHW
//! buffers and are what the model uses; the `Tensor` wrappers validate
//! shapes for callers outside the hot path.

use super::{ClassifierError, Tensor};

/// Valid output column range for kernel column `dx` with padding 1.
#[inline]
fn col_span(dx: usize, w: usize) -> (usize, usize) {
    let lo = usize::from(dx == 0);
    let hi = if dx == 2 { w - 1 } else { w };
    (lo, hi)
}

/// 3x3 convolution, stride 1, zero padding 1. `out` is overwritten.
pub fn conv3x3_forward(
    input: &[f64],
    (c, h, w): (usize, usize, usize),
    kernels: &[f64],
    bias: &[f64],
    out: &mut [f64],
) {
    let f = bias.len();
    let plane = h * w;
    debug_assert_eq!(input.len(), c * plane);
    debug_assert_eq!(kernels.len(), f * c * 9);
    debug_assert_eq!(out.len(), f * plane);

    for fo in 0..f {
        let out_plane = &mut out[fo * plane..(fo + 1) * plane];
        out_plane.fill(bias[fo]);
        for ci in 0..c {
            let in_plane = &input[ci * plane..(ci + 1) * plane];
            let k = &kernels[(fo * c + ci) * 9..(fo * c + ci + 1) * 9];
            for dy in 0..3 {
                for dx in 0..3 {
                    let wv = k[dy * 3 + dx];
                    let (x0, x1) = col_span(dx, w);
                    if x0 >= x1 {
                        continue;
                    }
                    for y in 0..h {
                        let Some(iy) = (y + dy).checked_sub(1).filter(|&iy| iy < h) else {
                            continue;
                        };
                        let src = &in_plane[iy * w + x0 + dx - 1..iy * w + x1 + dx - 1];
                        let dst = &mut out_plane[y * w + x0..y * w + x1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
}

/// Gradients of a 3x3 convolution. Kernel and bias gradients are added into
/// `dkernels` / `dbias`; when `dinput` is given it is overwritten with the
/// gradient wrt the input.
pub fn conv3x3_backward(
    input: &[f64],
    (c, h, w): (usize, usize, usize),
    kernels: &[f64],
    dout: &[f64],
    dkernels: &mut [f64],
    dbias: &mut [f64],
    mut dinput: Option<&mut [f64]>,
) {
    let f = dbias.len();
    let plane = h * w;
    if let Some(di) = dinput.as_deref_mut() {
        di.fill(0.0);
    }
    for fo in 0..f {
        let g_plane = &dout[fo * plane..(fo + 1) * plane];
        dbias[fo] += g_plane.iter().sum::<f64>();
        for ci in 0..c {
            let in_plane = &input[ci * plane..(ci + 1) * plane];
            let base = (fo * c + ci) * 9;
            for dy in 0..3 {
                for dx in 0..3 {
                    let (x0, x1) = col_span(dx, w);
                    if x0 >= x1 {
                        continue;
                    }
                    let wv = kernels[base + dy * 3 + dx];
                    let mut acc = 0.0;
                    for y in 0..h {
                        let Some(iy) = (y + dy).checked_sub(1).filter(|&iy| iy < h) else {
                            continue;
                        };
                        let src = &in_plane[iy * w + x0 + dx - 1..iy * w + x1 + dx - 1];
                        let g = &g_plane[y * w + x0..y * w + x1];
                        acc += g.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                        if let Some(di) = dinput.as_deref_mut() {
                            let dst = &mut di[ci * plane + iy * w + x0 + dx - 1
                                ..ci * plane + iy * w + x1 + dx - 1];
                            for (d, gv) in dst.iter_mut().zip(g) {
                                *d += wv * gv;
                            }
                        }
                    }
                    dkernels[base + dy * 3 + dx] += acc;
                }
            }
        }
    }
}

/// 2x2 max-pool over each channel. Writes pooled values and, for each
/// output, the flat index of the winning input (first maximum in row-major
/// window order).
pub fn maxpool2_forward(
    input: &[f64],
    (c, h, w): (usize, usize, usize),
    out: &mut [f64],
    argmax: &mut [usize],
) {
    let (oh, ow) = (h / 2, w / 2);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let top = ch * h * w + 2 * oy * w + 2 * ox;
                let mut best = top;
                for idx in [top + 1, top + w, top + w + 1] {
                    if input[idx] > input[best] {
                        best = idx;
                    }
                }
                let o = ch * oh * ow + oy * ow + ox;
                out[o] = input[best];
                argmax[o] = best;
            }
        }
    }
}

pub fn relu_in_place(xs: &mut [f64]) {
    for x in xs {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Numerically stable softmax and cross-entropy for one sample.
pub fn softmax_xent_slice(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs = exps.iter().map(|e| e / sum).collect();
    let loss = (sum.ln() - (logits[label] - max)).max(0.0);
    (loss, probs)
}

fn chw(t: &Tensor, what: &str) -> Result<(usize, usize, usize), ClassifierError> {
    t.expect_rank(3, what)?;
    let s = t.shape();
    Ok((s[0], s[1], s[2]))
}

/// `out[f,y,x] = bias[f] + Σ input[c,y+dy-1,x+dx-1]·kernels[f,c,dy,dx]`
/// with out-of-bounds input read as 0.
pub fn conv2d(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor, ClassifierError> {
    let (c, h, w) = chw(input, "conv2d input")?;
    kernels.expect_rank(4, "conv2d kernels")?;
    bias.expect_rank(1, "conv2d bias")?;
    let ks = kernels.shape();
    let f = bias.shape()[0];
    if ks[0] != f || ks[1] != c || ks[2] != 3 || ks[3] != 3 {
        return Err(ClassifierError::ShapeMismatch(format!(
            "kernels {ks:?} do not fit input channels {c} and bias length {f} (expected [{f},{c},3,3])"
        )));
    }
    let mut out = vec![0.0; f * h * w];
    conv3x3_forward(input.data(), (c, h, w), kernels.data(), bias.data(), &mut out);
    Tensor::new(vec![f, h, w], out)
}

pub fn relu(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    relu_in_place(out.data_mut());
    out
}

/// Output of [`maxpool2`] together with the routing needed by backprop.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub output: Tensor,
    /// Flat input index chosen for each output element.
    pub argmax: Vec<usize>,
}

pub fn maxpool2(t: &Tensor) -> Result<Pooled, ClassifierError> {
    let (c, h, w) = chw(t, "maxpool2 input")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(ClassifierError::ShapeMismatch(format!(
            "maxpool2 needs even height and width, got {h}x{w}"
        )));
    }
    let n = c * (h / 2) * (w / 2);
    let mut out = vec![0.0; n];
    let mut argmax = vec![0; n];
    maxpool2_forward(t.data(), (c, h, w), &mut out, &mut argmax);
    Ok(Pooled {
        output: Tensor::new(vec![c, h / 2, w / 2], out)?,
        argmax,
    })
}

/// Returns `(loss, probs)` where `probs = softmax(logits)` and
/// `loss = -ln probs[label]`.
pub fn softmax_xent(logits: &Tensor, label: usize) -> Result<(f64, Tensor), ClassifierError> {
    logits.expect_rank(1, "logits")?;
    let k = logits.len();
    if k < 2 {
        return Err(ClassifierError::ShapeMismatch(format!(
            "softmax needs at least 2 classes, got {k}"
        )));
    }
    if label >= k {
        return Err(ClassifierError::LabelOutOfRange {
            label,
            num_classes: k,
        });
    }
    let (loss, probs) = softmax_xent_slice(logits.data(), label);
    Ok((loss, Tensor::new(vec![k], probs)?))
}
