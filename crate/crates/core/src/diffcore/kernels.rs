//! Forward and backward kernels for each op kind.
//!
//! All kernels are single-threaded with a fixed accumulation order, so a
//! given set of inputs always produces bit-identical outputs and gradients.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-node data saved during the forward pass for use in backward.
#[derive(Debug, Clone, Default)]
pub(crate) enum Cache {
    #[default]
    None,
    /// im2col matrix, `rows x (C*KH*KW)` with rows ordered `(n, oh, ow)`.
    Cols(Vec<f64>),
    /// Flat input index that won each pooling window.
    Argmax(Vec<usize>),
    /// Row-wise softmax probabilities.
    Probs(Vec<f64>),
    Pearson {
        centered_a: Vec<f64>,
        centered_b: Vec<f64>,
        norms_a: Vec<f64>,
        norms_b: Vec<f64>,
    },
}

fn expect_rank(op: &'static str, t: &Tensor, rank: usize, what: &str) -> Result<()> {
    if t.rank() != rank {
        return Err(Error::shape(
            op,
            format!("{what} must be rank {rank}, got shape {:?}", t.shape()),
        ));
    }
    Ok(())
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("operands {:?} and {:?} differ", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

fn tensor(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
    Tensor::new(shape, data).expect("kernel produced consistent shape")
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

// ---------------------------------------------------------------- dense

pub(crate) fn dense(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    const OP: &str = "dense";
    expect_rank(OP, x, 2, "input")?;
    expect_rank(OP, w, 2, "weight")?;
    let (n, i_dim) = (x.shape()[0], x.shape()[1]);
    let (o_dim, wi) = (w.shape()[0], w.shape()[1]);
    if wi != i_dim {
        return Err(Error::shape(
            OP,
            format!("input has {i_dim} features but weight is {o_dim}x{wi}"),
        ));
    }
    if let Some(b) = b {
        if b.shape() != [o_dim] {
            return Err(Error::shape(
                OP,
                format!("bias must be [{o_dim}], got {:?}", b.shape()),
            ));
        }
    }
    let wt = transpose(w.data(), o_dim, i_dim);
    let mut out = vec![0.0; n * o_dim];
    for r in 0..n {
        let row = &mut out[r * o_dim..(r + 1) * o_dim];
        if let Some(b) = b {
            row.copy_from_slice(b.data());
        }
        for (k, &a) in x.row(r).iter().enumerate() {
            if a != 0.0 {
                axpy(row, a, &wt[k * o_dim..(k + 1) * o_dim]);
            }
        }
    }
    Ok(tensor(vec![n, o_dim], out))
}

pub(crate) fn dense_backward(
    x: &Tensor,
    w: &Tensor,
    has_bias: bool,
    g: &Tensor,
) -> (Tensor, Tensor, Option<Tensor>) {
    let (n, i_dim) = (x.shape()[0], x.shape()[1]);
    let o_dim = w.shape()[0];
    let gd = g.data();
    let mut gx = vec![0.0; n * i_dim];
    let mut gwt = vec![0.0; i_dim * o_dim];
    for r in 0..n {
        let grow = &gd[r * o_dim..(r + 1) * o_dim];
        let xrow = x.row(r);
        for (k, &a) in xrow.iter().enumerate() {
            if a != 0.0 {
                axpy(&mut gwt[k * o_dim..(k + 1) * o_dim], a, grow);
            }
        }
        let gxrow = &mut gx[r * i_dim..(r + 1) * i_dim];
        for (o, &a) in grow.iter().enumerate() {
            if a != 0.0 {
                axpy(gxrow, a, &w.data()[o * i_dim..(o + 1) * i_dim]);
            }
        }
    }
    let gb = has_bias.then(|| {
        let mut gb = vec![0.0; o_dim];
        for r in 0..n {
            axpy(&mut gb, 1.0, &gd[r * o_dim..(r + 1) * o_dim]);
        }
        tensor(vec![o_dim], gb)
    });
    (
        tensor(vec![n, i_dim], gx),
        tensor(vec![o_dim, i_dim], transpose(&gwt, i_dim, o_dim)),
        gb,
    )
}

fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; m.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = m[r * cols + c];
        }
    }
    t
}

// ---------------------------------------------------------------- conv2d

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl ConvGeom {
    fn ck(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }
}

fn conv_geom(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Result<ConvGeom> {
    const OP: &str = "conv2d";
    expect_rank(OP, x, 4, "input")?;
    expect_rank(OP, w, 4, "kernel")?;
    if stride == 0 {
        return Err(Error::shape(OP, "stride must be positive"));
    }
    let [n, c, h, wd] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let [o, wc, kh, kw] = [w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]];
    if wc != c {
        return Err(Error::shape(
            OP,
            format!("input has {c} channels but kernel expects {wc}"),
        ));
    }
    if h + 2 * pad < kh || wd + 2 * pad < kw {
        return Err(Error::shape(
            OP,
            format!("kernel {kh}x{kw} larger than padded input {h}x{wd} (pad {pad})"),
        ));
    }
    Ok(ConvGeom {
        n,
        c,
        h,
        w: wd,
        o,
        kh,
        kw,
        oh: (h + 2 * pad - kh) / stride + 1,
        ow: (wd + 2 * pad - kw) / stride + 1,
        stride,
        pad,
    })
}

fn im2col(x: &[f64], g: &ConvGeom) -> Vec<f64> {
    let ck = g.ck();
    let p = g.positions();
    let mut cols = vec![0.0; g.n * p * ck];
    for n in 0..g.n {
        for oh in 0..g.oh {
            for ow in 0..g.ow {
                let r = n * p + oh * g.ow + ow;
                let dst = &mut cols[r * ck..(r + 1) * ck];
                for c in 0..g.c {
                    let plane = &x[(n * g.c + c) * g.h * g.w..(n * g.c + c + 1) * g.h * g.w];
                    for ki in 0..g.kh {
                        let ih = (oh * g.stride + ki) as isize - g.pad as isize;
                        if ih < 0 || ih >= g.h as isize {
                            continue;
                        }
                        for kj in 0..g.kw {
                            let iw = (ow * g.stride + kj) as isize - g.pad as isize;
                            if iw < 0 || iw >= g.w as isize {
                                continue;
                            }
                            dst[(c * g.kh + ki) * g.kw + kj] =
                                plane[ih as usize * g.w + iw as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

pub(crate) fn conv2d(
    x: &Tensor,
    w: &Tensor,
    b: Option<&Tensor>,
    stride: usize,
    pad: usize,
) -> Result<(Tensor, Vec<f64>)> {
    let g = conv_geom(x, w, stride, pad)?;
    if let Some(b) = b {
        if b.shape() != [g.o] {
            return Err(Error::shape(
                "conv2d",
                format!("bias must be [{}], got {:?}", g.o, b.shape()),
            ));
        }
    }
    let ck = g.ck();
    let p = g.positions();
    let cols = im2col(x.data(), &g);
    let wt = transpose(w.data(), g.o, ck);
    let mut rows = vec![0.0; g.n * p * g.o];
    for r in 0..g.n * p {
        let out = &mut rows[r * g.o..(r + 1) * g.o];
        if let Some(b) = b {
            out.copy_from_slice(b.data());
        }
        for (k, &a) in cols[r * ck..(r + 1) * ck].iter().enumerate() {
            if a != 0.0 {
                axpy(out, a, &wt[k * g.o..(k + 1) * g.o]);
            }
        }
    }
    let mut y = vec![0.0; g.n * g.o * p];
    for n in 0..g.n {
        for q in 0..p {
            let src = &rows[(n * p + q) * g.o..(n * p + q + 1) * g.o];
            for (o, &v) in src.iter().enumerate() {
                y[(n * g.o + o) * p + q] = v;
            }
        }
    }
    Ok((tensor(vec![g.n, g.o, g.oh, g.ow], y), cols))
}

pub(crate) fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    has_bias: bool,
    stride: usize,
    pad: usize,
    cols: &[f64],
    gy: &Tensor,
) -> (Tensor, Tensor, Option<Tensor>) {
    let g = conv_geom(x, w, stride, pad).expect("validated in forward");
    let ck = g.ck();
    let p = g.positions();
    let nrows = g.n * p;
    let mut grows = vec![0.0; nrows * g.o];
    for n in 0..g.n {
        for o in 0..g.o {
            for q in 0..p {
                grows[(n * p + q) * g.o + o] = gy.data()[(n * g.o + o) * p + q];
            }
        }
    }

    let mut gwt = vec![0.0; ck * g.o];
    let mut gcols = vec![0.0; nrows * ck];
    for r in 0..nrows {
        let grow = &grows[r * g.o..(r + 1) * g.o];
        for (k, &a) in cols[r * ck..(r + 1) * ck].iter().enumerate() {
            if a != 0.0 {
                axpy(&mut gwt[k * g.o..(k + 1) * g.o], a, grow);
            }
        }
        let gc = &mut gcols[r * ck..(r + 1) * ck];
        for (o, &a) in grow.iter().enumerate() {
            if a != 0.0 {
                axpy(gc, a, &w.data()[o * ck..(o + 1) * ck]);
            }
        }
    }

    // col2im
    let mut gx = vec![0.0; x.numel()];
    for n in 0..g.n {
        for oh in 0..g.oh {
            for ow in 0..g.ow {
                let r = n * p + oh * g.ow + ow;
                let src = &gcols[r * ck..(r + 1) * ck];
                for c in 0..g.c {
                    let base = (n * g.c + c) * g.h * g.w;
                    for ki in 0..g.kh {
                        let ih = (oh * g.stride + ki) as isize - g.pad as isize;
                        if ih < 0 || ih >= g.h as isize {
                            continue;
                        }
                        for kj in 0..g.kw {
                            let iw = (ow * g.stride + kj) as isize - g.pad as isize;
                            if iw < 0 || iw >= g.w as isize {
                                continue;
                            }
                            gx[base + ih as usize * g.w + iw as usize] +=
                                src[(c * g.kh + ki) * g.kw + kj];
                        }
                    }
                }
            }
        }
    }

    let gb = has_bias.then(|| {
        let mut gb = vec![0.0; g.o];
        for r in 0..nrows {
            axpy(&mut gb, 1.0, &grows[r * g.o..(r + 1) * g.o]);
        }
        tensor(vec![g.o], gb)
    });
    (
        tensor(x.shape().to_vec(), gx),
        tensor(w.shape().to_vec(), transpose(&gwt, ck, g.o)),
        gb,
    )
}

// ---------------------------------------------------------------- pooling

pub(crate) fn maxpool2d(
    x: &Tensor,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Result<(Tensor, Vec<usize>)> {
    const OP: &str = "maxpool2d";
    expect_rank(OP, x, 4, "input")?;
    if kernel == 0 || stride == 0 {
        return Err(Error::shape(OP, "kernel and stride must be positive"));
    }
    if pad >= kernel {
        return Err(Error::shape(
            OP,
            format!("padding {pad} must be smaller than kernel {kernel}"),
        ));
    }
    let [n, c, h, w] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    if h + 2 * pad < kernel || w + 2 * pad < kernel {
        return Err(Error::shape(
            OP,
            format!("window {kernel} larger than padded input {h}x{w}"),
        ));
    }
    let oh = (h + 2 * pad - kernel) / stride + 1;
    let ow = (w + 2 * pad - kernel) / stride + 1;
    let mut out = vec![0.0; n * c * oh * ow];
    let mut arg = vec![0usize; out.len()];
    let xd = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = usize::MAX;
                for ki in 0..kernel {
                    let ih = (i * stride + ki) as isize - pad as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    for kj in 0..kernel {
                        let iw = (j * stride + kj) as isize - pad as isize;
                        if iw < 0 || iw >= w as isize {
                            continue;
                        }
                        let idx = base + ih as usize * w + iw as usize;
                        // strict comparison keeps the first maximum on ties
                        if xd[idx] > best || best_idx == usize::MAX {
                            best = xd[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (plane * oh + i) * ow + j;
                out[o] = best;
                arg[o] = best_idx;
            }
        }
    }
    Ok((tensor(vec![n, c, oh, ow], out), arg))
}

pub(crate) fn maxpool2d_backward(x: &Tensor, argmax: &[usize], g: &Tensor) -> Tensor {
    let mut gx = vec![0.0; x.numel()];
    for (o, &src) in argmax.iter().enumerate() {
        gx[src] += g.data()[o];
    }
    tensor(x.shape().to_vec(), gx)
}

pub(crate) fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    expect_rank("global_avg_pool", x, 4, "input")?;
    let [n, c, h, w] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let hw = h * w;
    let out = x
        .data()
        .chunks(hw)
        .map(|plane| plane.iter().sum::<f64>() / hw as f64)
        .collect();
    Ok(tensor(vec![n, c], out))
}

pub(crate) fn global_avg_pool_backward(x: &Tensor, g: &Tensor) -> Tensor {
    let hw = x.shape()[2] * x.shape()[3];
    let scale = 1.0 / hw as f64;
    let mut gx = Vec::with_capacity(x.numel());
    for &gv in g.data() {
        gx.extend(std::iter::repeat_n(gv * scale, hw));
    }
    tensor(x.shape().to_vec(), gx)
}

// ---------------------------------------------------------------- structural

pub(crate) fn concat(inputs: &[&Tensor], axis: usize) -> Result<Tensor> {
    const OP: &str = "concat";
    let first = inputs
        .first()
        .ok_or_else(|| Error::shape(OP, "needs at least one input"))?;
    let rank = first.rank();
    if axis >= rank {
        return Err(Error::shape(
            OP,
            format!("axis {axis} out of range for rank {rank}"),
        ));
    }
    for (idx, t) in inputs.iter().enumerate() {
        let mismatch = t.rank() != rank
            || t.shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .any(|(d, (a, b))| d != axis && a != b);
        if mismatch {
            return Err(Error::shape(
                OP,
                format!(
                    "input {idx} has shape {:?}, incompatible with {:?} along axis {axis}",
                    t.shape(),
                    first.shape()
                ),
            ));
        }
    }
    let outer: usize = first.shape()[..axis].iter().product();
    let inner: usize = first.shape()[axis + 1..].iter().product();
    let total_axis: usize = inputs.iter().map(|t| t.shape()[axis]).sum();
    let mut data = Vec::with_capacity(outer * total_axis * inner);
    for o in 0..outer {
        for t in inputs {
            let block = t.shape()[axis] * inner;
            data.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
        }
    }
    let mut shape = first.shape().to_vec();
    shape[axis] = total_axis;
    Ok(tensor(shape, data))
}

pub(crate) fn concat_backward(inputs: &[&Tensor], axis: usize, g: &Tensor) -> Vec<Tensor> {
    let outer: usize = inputs[0].shape()[..axis].iter().product();
    let inner: usize = inputs[0].shape()[axis + 1..].iter().product();
    let mut grads: Vec<Vec<f64>> = inputs
        .iter()
        .map(|t| Vec::with_capacity(t.numel()))
        .collect();
    let mut cursor = 0;
    for _ in 0..outer {
        for (t, gi) in inputs.iter().zip(grads.iter_mut()) {
            let block = t.shape()[axis] * inner;
            gi.extend_from_slice(&g.data()[cursor..cursor + block]);
            cursor += block;
        }
    }
    inputs
        .iter()
        .zip(grads)
        .map(|(t, gi)| tensor(t.shape().to_vec(), gi))
        .collect()
}

// ---------------------------------------------------------------- elementwise

pub(crate) fn zip_with(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor> {
    same_shape(op, a, b)?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Ok(tensor(a.shape().to_vec(), data))
}

pub(crate) fn relu_backward(x: &Tensor, g: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(g.data())
        .map(|(&xv, &gv)| if xv > 0.0 { gv } else { 0.0 })
        .collect();
    tensor(x.shape().to_vec(), data)
}

// ---------------------------------------------------------------- losses

pub(crate) fn softmax_cross_entropy(
    logits: &Tensor,
    labels: &[usize],
) -> Result<(Tensor, Vec<f64>)> {
    const OP: &str = "softmax_cross_entropy";
    expect_rank(OP, logits, 2, "logits")?;
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != n {
        return Err(Error::shape(
            OP,
            format!("{n} logit rows but {} labels", labels.len()),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {k} classes"
        )));
    }
    let mut probs = vec![0.0; n * k];
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (j, &v) in row.iter().enumerate() {
            let e = (v - max).exp();
            probs[r * k + j] = e;
            z += e;
        }
        for p in &mut probs[r * k..(r + 1) * k] {
            *p /= z;
        }
        total += z.ln() + max - row[label];
    }
    Ok((Tensor::scalar(total / n as f64), probs))
}

pub(crate) fn softmax_cross_entropy_backward(
    logits: &Tensor,
    labels: &[usize],
    probs: &[f64],
    g: f64,
) -> Tensor {
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    let scale = g / n as f64;
    let mut gl: Vec<f64> = probs.iter().map(|p| p * scale).collect();
    for (r, &label) in labels.iter().enumerate() {
        gl[r * k + label] -= scale;
    }
    tensor(vec![n, k], gl)
}

pub(crate) fn mse(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("mse", a, b)?;
    let sq: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(Tensor::scalar(sq / a.numel() as f64))
}

pub(crate) fn mse_backward(a: &Tensor, b: &Tensor, g: f64) -> (Tensor, Tensor) {
    let scale = 2.0 * g / a.numel() as f64;
    let ga: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| scale * (x - y))
        .collect();
    let gb = ga.iter().map(|v| -v).collect();
    (
        tensor(a.shape().to_vec(), ga),
        tensor(b.shape().to_vec(), gb),
    )
}

fn center_rows(t: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let d = t.shape()[1];
    let mut centered = t.data().to_vec();
    let mut norms = Vec::with_capacity(t.shape()[0]);
    for row in centered.chunks_mut(d) {
        let mean = row.iter().sum::<f64>() / d as f64;
        let mut ss = 0.0;
        for v in row.iter_mut() {
            *v -= mean;
            ss += *v * *v;
        }
        norms.push(ss.sqrt());
    }
    (centered, norms)
}

/// Pairwise Pearson correlations between the rows of `a` (N x D) and the
/// rows of `b` (M x D), with `eps` added to each centered norm.
pub(crate) fn pearson_matrix(a: &Tensor, b: &Tensor, eps: f64) -> Result<(Tensor, Cache)> {
    const OP: &str = "pearson_matrix";
    expect_rank(OP, a, 2, "first operand")?;
    expect_rank(OP, b, 2, "second operand")?;
    let d = a.shape()[1];
    if b.shape()[1] != d {
        return Err(Error::shape(
            OP,
            format!("vector lengths differ: {} vs {}", d, b.shape()[1]),
        ));
    }
    if d < 2 {
        return Err(Error::shape(OP, "vectors need at least 2 entries"));
    }
    let (n, m) = (a.shape()[0], b.shape()[0]);
    let (ca, na) = center_rows(a);
    let (cb, nb) = center_rows(b);
    let mut r = vec![0.0; n * m];
    for i in 0..n {
        let ui = &ca[i * d..(i + 1) * d];
        for j in 0..m {
            let vj = &cb[j * d..(j + 1) * d];
            let dot: f64 = ui.iter().zip(vj).map(|(x, y)| x * y).sum();
            r[i * m + j] = dot / ((na[i] + eps) * (nb[j] + eps));
        }
    }
    Ok((
        tensor(vec![n, m], r),
        Cache::Pearson {
            centered_a: ca,
            centered_b: cb,
            norms_a: na,
            norms_b: nb,
        },
    ))
}

#[allow(clippy::too_many_arguments)]
fn pearson_side_grad(
    own: &[f64],
    own_norms: &[f64],
    other: &[f64],
    other_norms: &[f64],
    r: &[f64],
    g: &[f64],
    d: usize,
    transpose: bool,
    eps: f64,
) -> Vec<f64> {
    let rows = own_norms.len();
    let cols = other_norms.len();
    let at = |i: usize, j: usize| {
        if transpose {
            j * rows + i
        } else {
            i * cols + j
        }
    };
    let mut out = vec![0.0; rows * d];
    for i in 0..rows {
        let ni = own_norms[i] + eps;
        let grad = &mut out[i * d..(i + 1) * d];
        let mut gr = 0.0;
        for j in 0..cols {
            let gij = g[at(i, j)];
            if gij == 0.0 {
                continue;
            }
            gr += gij * r[at(i, j)];
            axpy(
                grad,
                gij / (ni * (other_norms[j] + eps)),
                &other[j * d..(j + 1) * d],
            );
        }
        if own_norms[i] > 0.0 {
            axpy(grad, -gr / (own_norms[i] * ni), &own[i * d..(i + 1) * d]);
        }
        let mean = grad.iter().sum::<f64>() / d as f64;
        for v in grad.iter_mut() {
            *v -= mean;
        }
    }
    out
}

pub(crate) fn pearson_matrix_backward(
    a: &Tensor,
    b: &Tensor,
    r: &Tensor,
    cache: &Cache,
    g: &Tensor,
    eps: f64,
) -> (Tensor, Tensor) {
    let Cache::Pearson {
        centered_a,
        centered_b,
        norms_a,
        norms_b,
    } = cache
    else {
        unreachable!("pearson cache missing");
    };
    let d = a.shape()[1];
    let ga = pearson_side_grad(
        centered_a,
        norms_a,
        centered_b,
        norms_b,
        r.data(),
        g.data(),
        d,
        false,
        eps,
    );
    let gb = pearson_side_grad(
        centered_b,
        norms_b,
        centered_a,
        norms_a,
        r.data(),
        g.data(),
        d,
        true,
        eps,
    );
    (
        tensor(a.shape().to_vec(), ga),
        tensor(b.shape().to_vec(), gb),
    )
}
