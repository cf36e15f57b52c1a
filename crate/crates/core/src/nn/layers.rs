//! Layer kernels and their tensor-level wrappers.
//!
//! Kernels work on flat slices: batch-major inputs (`B × L × F`), row-major
//! weights (`out × in`). Recurrent states are kept time-major (`L × B × H`)
//! so each step reads and writes contiguous blocks.

use super::gemm::{gemm, View};
use super::{NnError, Result, Tensor};

// ---------------------------------------------------------------- dense

/// `y = x·Wᵀ + b` for `x: batch × inp`, `w: outp × inp`.
pub(crate) fn dense_fwd(x: &[f64], batch: usize, inp: usize, w: &[f64], b: &[f64], outp: usize) -> Vec<f64> {
    let mut y: Vec<f64> = b.iter().copied().cycle().take(batch * outp).collect();
    gemm(1.0, x, View::rm(batch, inp), w, View::rm_t(inp, outp), 1.0, &mut y, View::rm(batch, outp));
    y
}

/// Accumulates `dW += dyᵀ·x`, `db += Σ dy`; returns `dx = dy·W` when asked.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_bwd(
    x: &[f64],
    batch: usize,
    inp: usize,
    w: &[f64],
    outp: usize,
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    want_dx: bool,
) -> Option<Vec<f64>> {
    gemm(1.0, dy, View::rm_t(outp, batch), x, View::rm(batch, inp), 1.0, dw, View::rm(outp, inp));
    for row in dy.chunks_exact(outp) {
        db.iter_mut().zip(row).for_each(|(d, g)| *d += g);
    }
    want_dx.then(|| {
        let mut dx = vec![0.0; batch * inp];
        gemm(1.0, dy, View::rm(batch, outp), w, View::rm(outp, inp), 0.0, &mut dx, View::rm(batch, inp));
        dx
    })
}

// ---------------------------------------------------------------- relu

pub(crate) fn relu_inplace(x: &mut [f64]) {
    x.iter_mut().for_each(|v| {
        if *v <= 0.0 {
            *v = 0.0
        }
    });
}

/// Zero `dy` wherever the ReLU output was not positive (subgradient 0 at 0).
pub(crate) fn relu_mask(out: &[f64], dy: &mut [f64]) {
    dy.iter_mut().zip(out).for_each(|(d, &y)| {
        if y <= 0.0 {
            *d = 0.0
        }
    });
}

// ---------------------------------------------------------------- conv1d

/// `[C, F, 3]` kernel → `C × 3F` rows matching a contiguous 3-step input window.
pub(crate) fn kernel_to_rows(k: &[f64], c: usize, f: usize) -> Vec<f64> {
    let mut out = vec![0.0; k.len()];
    for o in 0..c {
        for i in 0..f {
            for j in 0..3 {
                out[o * 3 * f + j * f + i] = k[(o * f + i) * 3 + j];
            }
        }
    }
    out
}

/// Inverse of [`kernel_to_rows`], accumulating into `k`.
pub(crate) fn rows_to_kernel_add(rows: &[f64], c: usize, f: usize, k: &mut [f64]) {
    for o in 0..c {
        for i in 0..f {
            for j in 0..3 {
                k[(o * f + i) * 3 + j] += rows[o * 3 * f + j * f + i];
            }
        }
    }
}

/// Valid cross-correlation along time. The window starting at step `t` is the
/// contiguous slice `x[t·F .. (t+3)·F]`, so each batch element is one GEMM over
/// an overlapping row view.
pub(crate) fn conv_fwd(x: &[f64], batch: usize, l: usize, f: usize, kp: &[f64], bias: &[f64], c: usize) -> Vec<f64> {
    let t = l - 2;
    let mut y: Vec<f64> = bias.iter().copied().cycle().take(batch * t * c).collect();
    for b in 0..batch {
        gemm(
            1.0,
            &x[b * l * f..(b + 1) * l * f],
            View::strided(t, 3 * f, f, 1),
            kp,
            View::rm_t(3 * f, c),
            1.0,
            &mut y[b * t * c..(b + 1) * t * c],
            View::rm(t, c),
        );
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_bwd(
    x: &[f64],
    batch: usize,
    l: usize,
    f: usize,
    kp: &[f64],
    c: usize,
    dy: &[f64],
    dkp: &mut [f64],
    db: &mut [f64],
    want_dx: bool,
) -> Option<Vec<f64>> {
    let t = l - 2;
    for b in 0..batch {
        let dyb = &dy[b * t * c..(b + 1) * t * c];
        gemm(
            1.0,
            dyb,
            View::rm_t(c, t),
            &x[b * l * f..(b + 1) * l * f],
            View::strided(t, 3 * f, f, 1),
            1.0,
            dkp,
            View::rm(c, 3 * f),
        );
        for row in dyb.chunks_exact(c) {
            db.iter_mut().zip(row).for_each(|(d, g)| *d += g);
        }
    }
    want_dx.then(|| {
        let mut dx = vec![0.0; batch * l * f];
        for b in 0..batch {
            let dyb = &dy[b * t * c..(b + 1) * t * c];
            let dxb = &mut dx[b * l * f..(b + 1) * l * f];
            for j in 0..3 {
                gemm(
                    1.0,
                    dyb,
                    View::rm(t, c),
                    &kp[j * f..],
                    View::strided(c, f, 3 * f, 1),
                    1.0,
                    &mut dxb[j * f..],
                    View::strided(t, f, f, 1),
                );
            }
        }
        dx
    })
}

// ---------------------------------------------------------------- maxpool1d

/// Non-overlapping windows of 3 along time; the remainder is dropped and ties
/// go to the earliest step. Returns the pooled values and, per output, the
/// flat input index it came from.
pub(crate) fn pool_fwd(x: &[f64], batch: usize, t: usize, c: usize) -> (Vec<f64>, Vec<usize>) {
    let p = t / 3;
    let mut y = vec![0.0; batch * p * c];
    let mut arg = vec![0; batch * p * c];
    for b in 0..batch {
        for w in 0..p {
            for ch in 0..c {
                let mut best = (b * t + 3 * w) * c + ch;
                for s in 1..3 {
                    let idx = (b * t + 3 * w + s) * c + ch;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                let o = (b * p + w) * c + ch;
                y[o] = x[best];
                arg[o] = best;
            }
        }
    }
    (y, arg)
}

pub(crate) fn pool_bwd(dy: &[f64], arg: &[usize], input_len: usize) -> Vec<f64> {
    let mut dx = vec![0.0; input_len];
    for (&g, &i) in dy.iter().zip(arg) {
        dx[i] += g;
    }
    dx
}

// ---------------------------------------------------------------- rnn

/// Time-major hidden states `h_1 … h_L`, each `B × H`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnCache {
    batch: usize,
    hidden: usize,
    hs: Vec<f64>,
}

impl RnnCache {
    /// `h_t` for `t` in `1..=L`.
    pub fn hidden(&self, t: usize) -> &[f64] {
        let n = self.batch * self.hidden;
        &self.hs[(t - 1) * n..t * n]
    }

    pub(crate) fn last(&self) -> &[f64] {
        &self.hs[self.hs.len() - self.batch * self.hidden..]
    }

    pub(crate) fn all_states(&self) -> &[f64] {
        &self.hs
    }
}

/// Input of step `t` as a strided `B × F` view into batch-major `x`.
fn step_view(batch: usize, l: usize, f: usize) -> View {
    View::strided(batch, f, l * f, 1)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn rnn_fwd(
    x: &[f64],
    batch: usize,
    l: usize,
    f: usize,
    w_ih: &[f64],
    w_hh: &[f64],
    bias: &[f64],
    h: usize,
) -> RnnCache {
    let n = batch * h;
    let mut hs = vec![0.0; l * n];
    for t in 0..l {
        let (prev, rest) = hs.split_at_mut(t * n);
        let cur = &mut rest[..n];
        for row in cur.chunks_exact_mut(h) {
            row.copy_from_slice(bias);
        }
        gemm(1.0, &x[t * f..], step_view(batch, l, f), w_ih, View::rm_t(f, h), 1.0, cur, View::rm(batch, h));
        if t > 0 {
            gemm(1.0, &prev[(t - 1) * n..], View::rm(batch, h), w_hh, View::rm_t(h, h), 1.0, cur, View::rm(batch, h));
        }
        relu_inplace(cur);
    }
    RnnCache { batch, hidden: h, hs }
}

pub(crate) struct RecurrentGradsRaw {
    pub dx: Option<Vec<f64>>,
}

/// Backpropagation through time from `dh_L`; accumulates weight gradients.
#[allow(clippy::too_many_arguments)]
pub(crate) fn rnn_bwd(
    x: &[f64],
    batch: usize,
    l: usize,
    f: usize,
    w_ih: &[f64],
    w_hh: &[f64],
    h: usize,
    cache: &RnnCache,
    dh_last: &[f64],
    dw_ih: &mut [f64],
    dw_hh: &mut [f64],
    db: &mut [f64],
    want_dx: bool,
) -> RecurrentGradsRaw {
    let n = batch * h;
    let mut dpre = vec![0.0; l * n];
    let mut dh = dh_last.to_vec();
    for t in (0..l).rev() {
        let d = &mut dpre[t * n..(t + 1) * n];
        d.copy_from_slice(&dh);
        relu_mask(&cache.hs[t * n..(t + 1) * n], d);
        if t > 0 {
            gemm(1.0, d, View::rm(batch, h), w_hh, View::rm(h, h), 0.0, &mut dh, View::rm(batch, h));
        }
    }
    recurrent_param_grads(x, batch, l, f, h, h, &cache.hs, &dpre, dw_ih, dw_hh, db);
    RecurrentGradsRaw {
        dx: want_dx.then(|| input_grad(batch, l, f, h, w_ih, &dpre)),
    }
}

/// Shared tail of RNN and LSTM backward: given pre-activation gradients
/// `dz` (time-major `L × B × G`), accumulate `dW_ih`, `dW_hh` and `db`.
#[allow(clippy::too_many_arguments)]
fn recurrent_param_grads(
    x: &[f64],
    batch: usize,
    l: usize,
    f: usize,
    h: usize,
    g: usize,
    hs: &[f64],
    dz: &[f64],
    dw_ih: &mut [f64],
    dw_hh: &mut [f64],
    db: &mut [f64],
) {
    let n = batch * g;
    for t in 0..l {
        let dzt = &dz[t * n..(t + 1) * n];
        gemm(1.0, dzt, View::rm_t(g, batch), &x[t * f..], step_view(batch, l, f), 1.0, dw_ih, View::rm(g, f));
        if t > 0 {
            let hp = &hs[(t - 1) * batch * h..t * batch * h];
            gemm(1.0, dzt, View::rm_t(g, batch), hp, View::rm(batch, h), 1.0, dw_hh, View::rm(g, h));
        }
        for row in dzt.chunks_exact(g) {
            db.iter_mut().zip(row).for_each(|(d, v)| *d += v);
        }
    }
}

fn input_grad(batch: usize, l: usize, f: usize, g: usize, w_ih: &[f64], dz: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; batch * l * f];
    let n = batch * g;
    for t in 0..l {
        gemm(
            1.0,
            &dz[t * n..(t + 1) * n],
            View::rm(batch, g),
            w_ih,
            View::rm(g, f),
            0.0,
            &mut dx[t * f..],
            step_view(batch, l, f),
        );
    }
    dx
}

// ---------------------------------------------------------------- lstm

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-step LSTM activations, time-major. `gates` holds the activated
/// `i, f, g, o` blocks (each `H` wide) for every batch row.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    batch: usize,
    hidden: usize,
    c0: Vec<f64>,
    gates: Vec<f64>,
    cs: Vec<f64>,
    tcs: Vec<f64>,
    hs: Vec<f64>,
}

impl LstmCache {
    /// `h_t` for `t` in `1..=L`.
    pub fn hidden(&self, t: usize) -> &[f64] {
        let n = self.batch * self.hidden;
        &self.hs[(t - 1) * n..t * n]
    }

    /// `c_t` for `t` in `0..=L`.
    pub fn cell(&self, t: usize) -> &[f64] {
        let n = self.batch * self.hidden;
        if t == 0 {
            &self.c0
        } else {
            &self.cs[(t - 1) * n..t * n]
        }
    }

    pub(crate) fn last(&self) -> &[f64] {
        &self.hs[self.hs.len() - self.batch * self.hidden..]
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_fwd(
    x: &[f64],
    batch: usize,
    l: usize,
    f: usize,
    w_ih: &[f64],
    w_hh: &[f64],
    bias: &[f64],
    h: usize,
    c0: Option<&[f64]>,
) -> LstmCache {
    let n = batch * h;
    let g4 = 4 * h;
    let c0 = c0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut gates = vec![0.0; l * batch * g4];
    let mut cs = vec![0.0; l * n];
    let mut tcs = vec![0.0; l * n];
    let mut hs = vec![0.0; l * n];
    for t in 0..l {
        let z = &mut gates[t * batch * g4..(t + 1) * batch * g4];
        for row in z.chunks_exact_mut(g4) {
            row.copy_from_slice(bias);
        }
        gemm(1.0, &x[t * f..], step_view(batch, l, f), w_ih, View::rm_t(f, g4), 1.0, z, View::rm(batch, g4));
        if t > 0 {
            gemm(1.0, &hs[(t - 1) * n..t * n], View::rm(batch, h), w_hh, View::rm_t(h, g4), 1.0, z, View::rm(batch, g4));
        }
        for b in 0..batch {
            let zb = &mut z[b * g4..(b + 1) * g4];
            for k in 0..h {
                zb[k] = sigmoid(zb[k]);
                zb[h + k] = sigmoid(zb[h + k]);
                zb[2 * h + k] = zb[2 * h + k].tanh();
                zb[3 * h + k] = sigmoid(zb[3 * h + k]);
            }
            for k in 0..h {
                let c_prev = if t == 0 { c0[b * h + k] } else { cs[(t - 1) * n + b * h + k] };
                let c = zb[h + k] * c_prev + zb[k] * zb[2 * h + k];
                let tc = c.tanh();
                cs[t * n + b * h + k] = c;
                tcs[t * n + b * h + k] = tc;
                hs[t * n + b * h + k] = zb[3 * h + k] * tc;
            }
        }
    }
    LstmCache {
        batch,
        hidden: h,
        c0,
        gates,
        cs,
        tcs,
        hs,
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_bwd(
    x: &[f64],
    batch: usize,
    l: usize,
    f: usize,
    w_ih: &[f64],
    w_hh: &[f64],
    h: usize,
    cache: &LstmCache,
    dh_last: &[f64],
    dw_ih: &mut [f64],
    dw_hh: &mut [f64],
    db: &mut [f64],
    want_dx: bool,
) -> RecurrentGradsRaw {
    let n = batch * h;
    let g4 = 4 * h;
    let mut dz = vec![0.0; l * batch * g4];
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; n];
    for t in (0..l).rev() {
        let gt = &cache.gates[t * batch * g4..(t + 1) * batch * g4];
        let dzt = &mut dz[t * batch * g4..(t + 1) * batch * g4];
        for b in 0..batch {
            let gb = &gt[b * g4..(b + 1) * g4];
            let db_ = &mut dzt[b * g4..(b + 1) * g4];
            for k in 0..h {
                let j = b * h + k;
                let (i, fg, g, o) = (gb[k], gb[h + k], gb[2 * h + k], gb[3 * h + k]);
                let tc = cache.tcs[t * n + j];
                let c_prev = if t == 0 { cache.c0[j] } else { cache.cs[(t - 1) * n + j] };
                let d_o = dh[j] * tc;
                let d_c = dc[j] + dh[j] * o * (1.0 - tc * tc);
                db_[k] = d_c * g * i * (1.0 - i);
                db_[h + k] = d_c * c_prev * fg * (1.0 - fg);
                db_[2 * h + k] = d_c * i * (1.0 - g * g);
                db_[3 * h + k] = d_o * o * (1.0 - o);
                dc[j] = d_c * fg;
            }
        }
        if t > 0 {
            gemm(1.0, dzt, View::rm(batch, g4), w_hh, View::rm(g4, h), 0.0, &mut dh, View::rm(batch, h));
        }
    }
    recurrent_param_grads(x, batch, l, f, h, g4, &cache.hs, &dz, dw_ih, dw_hh, db);
    RecurrentGradsRaw {
        dx: want_dx.then(|| input_grad(batch, l, f, g4, w_ih, &dz)),
    }
}

// ---------------------------------------------------------------- tensor API

fn shape_err(what: &str, detail: String) -> NnError {
    NnError::Shape(format!("{what}: {detail}"))
}

fn check_bias(b: &Tensor, n: usize, what: &str) -> Result<()> {
    if b.shape() != [n] {
        return Err(shape_err(what, format!("bias shape {:?}, expected [{n}]", b.shape())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

fn linear_dims(x: &Tensor, w: &Tensor) -> Result<(usize, usize, usize)> {
    x.expect_rank(2, "linear input")?;
    w.expect_rank(2, "linear weight")?;
    let (batch, inp) = (x.dim(0), x.dim(1));
    let (outp, w_in) = (w.dim(0), w.dim(1));
    if w_in != inp {
        return Err(shape_err("linear", format!("input has {inp} columns, weight expects {w_in}")));
    }
    Ok((batch, inp, outp))
}

/// `y = x·Wᵀ + b` for `x: batch × in`, `W: out × in`, `b: out`.
pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (batch, inp, outp) = linear_dims(x, w)?;
    check_bias(b, outp, "linear")?;
    Tensor::new(vec![batch, outp], dense_fwd(x.data(), batch, inp, w.data(), b.data(), outp))
}

pub fn linear_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> Result<LinearGrads> {
    let (batch, inp, outp) = linear_dims(x, w)?;
    if dy.shape() != [batch, outp] {
        return Err(shape_err("linear backward", format!("dy shape {:?}, expected [{batch}, {outp}]", dy.shape())));
    }
    let mut dw = Tensor::zeros(vec![outp, inp]);
    let mut db = Tensor::zeros(vec![outp]);
    let dx = dense_bwd(x.data(), batch, inp, w.data(), outp, dy.data(), dw.data_mut(), db.data_mut(), true)
        .expect("dx requested");
    Ok(LinearGrads {
        dx: Tensor::new(vec![batch, inp], dx)?,
        dw,
        db,
    })
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    relu_inplace(y.data_mut());
    y
}

/// Gradient of ReLU at input `x`: passes `dy` where `x > 0`.
pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Result<Tensor> {
    if x.shape() != dy.shape() {
        return Err(shape_err("relu backward", format!("{:?} vs {:?}", x.shape(), dy.shape())));
    }
    let mut dx = dy.clone();
    relu_mask(x.data(), dx.data_mut());
    Ok(dx)
}

fn seq_dims(x: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    x.expect_rank(3, what)?;
    Ok((x.dim(0), x.dim(1), x.dim(2)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dGrads {
    pub dx: Tensor,
    pub dk: Tensor,
    pub db: Tensor,
}

fn conv_dims(x: &Tensor, k: &Tensor) -> Result<(usize, usize, usize, usize)> {
    let (batch, l, f) = seq_dims(x, "conv1d input")?;
    k.expect_rank(3, "conv1d kernel")?;
    if k.dim(1) != f || k.dim(2) != 3 {
        return Err(shape_err("conv1d", format!("kernel shape {:?} does not fit {f} input channels, width 3", k.shape())));
    }
    if l < 3 {
        return Err(shape_err("conv1d", format!("sequence length {l} shorter than kernel 3")));
    }
    Ok((batch, l, f, k.dim(0)))
}

/// Cross-correlation over time with valid padding: `B × L × F_in` → `B × (L−2) × F_out`.
pub fn conv1d(x: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (batch, l, f, c) = conv_dims(x, kernels)?;
    check_bias(bias, c, "conv1d")?;
    let kp = kernel_to_rows(kernels.data(), c, f);
    Tensor::new(vec![batch, l - 2, c], conv_fwd(x.data(), batch, l, f, &kp, bias.data(), c))
}

pub fn conv1d_backward(x: &Tensor, kernels: &Tensor, dy: &Tensor) -> Result<Conv1dGrads> {
    let (batch, l, f, c) = conv_dims(x, kernels)?;
    if dy.shape() != [batch, l - 2, c] {
        return Err(shape_err("conv1d backward", format!("dy shape {:?}", dy.shape())));
    }
    let kp = kernel_to_rows(kernels.data(), c, f);
    let mut dkp = vec![0.0; kp.len()];
    let mut db = Tensor::zeros(vec![c]);
    let dx = conv_bwd(x.data(), batch, l, f, &kp, c, dy.data(), &mut dkp, db.data_mut(), true).expect("dx requested");
    let mut dk = Tensor::zeros(vec![c, f, 3]);
    rows_to_kernel_add(&dkp, c, f, dk.data_mut());
    Ok(Conv1dGrads {
        dx: Tensor::new(vec![batch, l, f], dx)?,
        dk,
        db,
    })
}

/// Source positions of a max-pooling pass, needed for its backward.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolIndex {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl PoolIndex {
    /// Flat input index selected for each output element.
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// Max over non-overlapping windows of 3 steps: `B × L × C` → `B × ⌊L/3⌋ × C`.
pub fn maxpool1d(x: &Tensor) -> Result<(Tensor, PoolIndex)> {
    let (batch, l, c) = seq_dims(x, "maxpool1d input")?;
    if l < 3 {
        return Err(shape_err("maxpool1d", format!("sequence length {l} shorter than window 3")));
    }
    let (y, argmax) = pool_fwd(x.data(), batch, l, c);
    Ok((
        Tensor::new(vec![batch, l / 3, c], y)?,
        PoolIndex {
            input_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool1d_backward(index: &PoolIndex, dy: &Tensor) -> Result<Tensor> {
    if dy.len() != index.argmax.len() {
        return Err(shape_err("maxpool1d backward", format!("dy has {} values, expected {}", dy.len(), index.argmax.len())));
    }
    let n = index.input_shape.iter().product();
    Tensor::new(index.input_shape.clone(), pool_bwd(dy.data(), &index.argmax, n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentGrads {
    pub dx: Tensor,
    pub dw_ih: Tensor,
    pub dw_hh: Tensor,
    pub db: Tensor,
}

fn recurrent_dims(x: &Tensor, w_ih: &Tensor, w_hh: &Tensor, gates: usize, what: &str) -> Result<(usize, usize, usize, usize)> {
    let (batch, l, f) = seq_dims(x, what)?;
    w_ih.expect_rank(2, what)?;
    w_hh.expect_rank(2, what)?;
    let h = w_hh.dim(1);
    if w_ih.shape() != [gates * h, f] || w_hh.shape() != [gates * h, h] {
        return Err(shape_err(
            what,
            format!("weights {:?} / {:?} inconsistent with {f} inputs", w_ih.shape(), w_hh.shape()),
        ));
    }
    if l == 0 {
        return Err(shape_err(what, "empty sequence".into()));
    }
    Ok((batch, l, f, h))
}

/// Elman recurrence `h_t = ReLU(W_ih·x_t + W_hh·h_{t−1} + b)` from `h_0 = 0`;
/// returns `h_L` (`B × H`) and the per-step states.
pub fn rnn(x: &Tensor, w_ih: &Tensor, w_hh: &Tensor, b: &Tensor) -> Result<(Tensor, RnnCache)> {
    let (batch, l, f, h) = recurrent_dims(x, w_ih, w_hh, 1, "rnn")?;
    check_bias(b, h, "rnn")?;
    let cache = rnn_fwd(x.data(), batch, l, f, w_ih.data(), w_hh.data(), b.data(), h);
    Ok((Tensor::new(vec![batch, h], cache.last().to_vec())?, cache))
}

pub fn rnn_backward(x: &Tensor, w_ih: &Tensor, w_hh: &Tensor, cache: &RnnCache, dh: &Tensor) -> Result<RecurrentGrads> {
    let (batch, l, f, h) = recurrent_dims(x, w_ih, w_hh, 1, "rnn backward")?;
    if dh.shape() != [batch, h] || cache.hs.len() != l * batch * h {
        return Err(shape_err("rnn backward", "gradient or cache does not match the input".into()));
    }
    let mut g = RecurrentGrads {
        dx: Tensor::zeros(vec![batch, l, f]),
        dw_ih: Tensor::zeros(vec![h, f]),
        dw_hh: Tensor::zeros(vec![h, h]),
        db: Tensor::zeros(vec![h]),
    };
    let raw = rnn_bwd(
        x.data(),
        batch,
        l,
        f,
        w_ih.data(),
        w_hh.data(),
        h,
        cache,
        dh.data(),
        g.dw_ih.data_mut(),
        g.dw_hh.data_mut(),
        g.db.data_mut(),
        true,
    );
    g.dx = Tensor::new(vec![batch, l, f], raw.dx.expect("dx requested"))?;
    Ok(g)
}

/// Standard LSTM (gate order `i, f, g, o`) from `h_0 = 0` and `c_0` (zero
/// unless given); returns `h_L` and the per-step states.
pub fn lstm(x: &Tensor, w_ih: &Tensor, w_hh: &Tensor, b: &Tensor, c0: Option<&Tensor>) -> Result<(Tensor, LstmCache)> {
    let (batch, l, f, h) = recurrent_dims(x, w_ih, w_hh, 4, "lstm")?;
    check_bias(b, 4 * h, "lstm")?;
    if let Some(c) = c0 {
        if c.shape() != [batch, h] {
            return Err(shape_err("lstm", format!("c0 shape {:?}, expected [{batch}, {h}]", c.shape())));
        }
    }
    let cache = lstm_fwd(x.data(), batch, l, f, w_ih.data(), w_hh.data(), b.data(), h, c0.map(Tensor::data));
    Ok((Tensor::new(vec![batch, h], cache.last().to_vec())?, cache))
}

pub fn lstm_backward(x: &Tensor, w_ih: &Tensor, w_hh: &Tensor, cache: &LstmCache, dh: &Tensor) -> Result<RecurrentGrads> {
    let (batch, l, f, h) = recurrent_dims(x, w_ih, w_hh, 4, "lstm backward")?;
    if dh.shape() != [batch, h] || cache.hs.len() != l * batch * h {
        return Err(shape_err("lstm backward", "gradient or cache does not match the input".into()));
    }
    let mut g = RecurrentGrads {
        dx: Tensor::zeros(vec![batch, l, f]),
        dw_ih: Tensor::zeros(vec![4 * h, f]),
        dw_hh: Tensor::zeros(vec![4 * h, h]),
        db: Tensor::zeros(vec![4 * h]),
    };
    let raw = lstm_bwd(
        x.data(),
        batch,
        l,
        f,
        w_ih.data(),
        w_hh.data(),
        h,
        cache,
        dh.data(),
        g.dw_ih.data_mut(),
        g.dw_hh.data_mut(),
        g.db.data_mut(),
        true,
    );
    g.dx = Tensor::new(vec![batch, l, f], raw.dx.expect("dx requested"))?;
    Ok(g)
}
