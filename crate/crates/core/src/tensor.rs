//! Dense f64 tensors with explicit forward and vector-Jacobian-product rules
//! for every differentiable primitive, plus the AdamW step and the
//! warmup/cosine learning-rate schedule.
//!
//! Layout is always row-major. Convolution is cross-correlation with zero
//! padding (no kernel flip). Every op is a pure function of its inputs so
//! callers are free to fan out over independent calls.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// A dense row-major array of 64-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Self {
        debug_assert!(dims.iter().all(|&d| d > 0));
        let n = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(dims: &[usize], value: f64) -> Self {
        let mut t = Self::zeros(dims);
        t.data.fill(value);
        t
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::shape("tensor", "zero extent"));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("dims {:?} need {} values, got {}", dims, n, data.len()),
            ));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// self += alpha * other (dims must agree).
    pub fn add_scaled(&mut self, other: &Tensor, alpha: f64) {
        debug_assert_eq!(self.dims, other.dims);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }
}

fn dims_n<const N: usize>(t: &Tensor, op: &'static str, what: &str) -> Result<[usize; N]> {
    if t.dims.len() != N {
        return Err(Error::shape(
            op,
            format!("{what} must be {N}-d, got {:?}", t.dims),
        ));
    }
    let mut out = [0usize; N];
    out.copy_from_slice(&t.dims);
    Ok(out)
}

// ---------------------------------------------------------------------------
// conv3d
// ---------------------------------------------------------------------------

fn conv_out_extent(e: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let span = e + 2 * pad;
    if span < k {
        return Err(Error::shape(
            "conv3d",
            format!("kernel {k} exceeds padded extent {span}"),
        ));
    }
    Ok((span - k) / stride + 1)
}

/// Output indices o for which `o*stride + k_off - pad` lands inside `[0, e)`.
fn valid_out_range(
    e: usize,
    o_extent: usize,
    k_off: usize,
    stride: usize,
    pad: usize,
) -> Option<(usize, usize)> {
    let lo = if pad > k_off {
        (pad - k_off).div_ceil(stride)
    } else {
        0
    };
    let hi_num = e - 1 + pad;
    if hi_num < k_off {
        return None;
    }
    let hi = ((hi_num - k_off) / stride).min(o_extent - 1);
    if lo > hi {
        None
    } else {
        Some((lo, hi))
    }
}

struct ConvGeom {
    c_out: usize,
    c_in: usize,
    kernel: [usize; 3],
    input: [usize; 3],
    output: [usize; 3],
    stride: usize,
    pad: usize,
}

fn conv_geom(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Result<ConvGeom> {
    let [ci_x, d, h, wd] = dims_n::<4>(x, "conv3d", "input")?;
    let [c_out, c_in, kd, kh, kw] = dims_n::<5>(w, "conv3d", "kernel")?;
    if c_in != ci_x {
        return Err(Error::shape(
            "conv3d",
            format!("input has {ci_x} channels, kernel expects {c_in}"),
        ));
    }
    if stride == 0 {
        return Err(Error::config("conv3d stride must be >= 1"));
    }
    let output = [
        conv_out_extent(d, kd, stride, pad)?,
        conv_out_extent(h, kh, stride, pad)?,
        conv_out_extent(wd, kw, stride, pad)?,
    ];
    Ok(ConvGeom {
        c_out,
        c_in,
        kernel: [kd, kh, kw],
        input: [d, h, wd],
        output,
        stride,
        pad,
    })
}

/// 3D cross-correlation with zero padding.
///
/// `x`: C_in×D×H×W, `w`: C_out×C_in×kd×kh×kw, `b`: C_out.
pub fn conv3d(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let g = conv_geom(x, w, stride, pad)?;
    let [bn] = dims_n::<1>(b, "conv3d", "bias")?;
    if bn != g.c_out {
        return Err(Error::shape(
            "conv3d",
            format!("bias has {bn} entries, kernel has {} outputs", g.c_out),
        ));
    }
    let [d, h, wd] = g.input;
    let [od, oh, ow] = g.output;
    let in_sp = d * h * wd;
    let out_sp = od * oh * ow;
    let mut out = Tensor::zeros(&[g.c_out, od, oh, ow]);
    let s = g.stride;
    let p = g.pad;
    let [kd, kh, kw] = g.kernel;

    for co in 0..g.c_out {
        let out_ch = &mut out.data[co * out_sp..(co + 1) * out_sp];
        out_ch.fill(b.data[co]);
        for ci in 0..g.c_in {
            let x_ch = &x.data[ci * in_sp..(ci + 1) * in_sp];
            for zd in 0..kd {
                let Some((dlo, dhi)) = valid_out_range(d, od, zd, s, p) else {
                    continue;
                };
                for zh in 0..kh {
                    let Some((hlo, hhi)) = valid_out_range(h, oh, zh, s, p) else {
                        continue;
                    };
                    for zw in 0..kw {
                        let Some((wlo, whi)) = valid_out_range(wd, ow, zw, s, p) else {
                            continue;
                        };
                        let wv = w.data[(((co * g.c_in + ci) * kd + zd) * kh + zh) * kw + zw];
                        for o_d in dlo..=dhi {
                            let i_d = o_d * s + zd - p;
                            for o_h in hlo..=hhi {
                                let i_h = o_h * s + zh - p;
                                let x_row = &x_ch[(i_d * h + i_h) * wd..][..wd];
                                let out_row = &mut out_ch[(o_d * oh + o_h) * ow..][..ow];
                                if s == 1 {
                                    let xi0 = wlo + zw - p;
                                    let n = whi - wlo + 1;
                                    for (o, xv) in
                                        out_row[wlo..wlo + n].iter_mut().zip(&x_row[xi0..xi0 + n])
                                    {
                                        *o += wv * xv;
                                    }
                                } else {
                                    for o_w in wlo..=whi {
                                        out_row[o_w] += wv * x_row[o_w * s + zw - p];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of `sum(upstream ⊙ conv3d(x, w, b))` w.r.t. x, w, and b.
pub fn conv3d_vjp(
    x: &Tensor,
    w: &Tensor,
    stride: usize,
    pad: usize,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let g = conv_geom(x, w, stride, pad)?;
    let [od, oh, ow] = g.output;
    let expect = [g.c_out, od, oh, ow];
    if upstream.dims() != expect {
        return Err(Error::shape(
            "conv3d_vjp",
            format!("upstream {:?} vs output {:?}", upstream.dims(), expect),
        ));
    }
    let [d, h, wd] = g.input;
    let in_sp = d * h * wd;
    let out_sp = od * oh * ow;
    let s = g.stride;
    let p = g.pad;
    let [kd, kh, kw] = g.kernel;

    let mut gx = Tensor::zeros(x.dims());
    let mut gw = Tensor::zeros(w.dims());
    let mut gb = Tensor::zeros(&[g.c_out]);

    for co in 0..g.c_out {
        let u_ch = &upstream.data[co * out_sp..(co + 1) * out_sp];
        gb.data[co] = u_ch.iter().sum();
        for ci in 0..g.c_in {
            let x_ch = &x.data[ci * in_sp..(ci + 1) * in_sp];
            let gx_ch = &mut gx.data[ci * in_sp..(ci + 1) * in_sp];
            for zd in 0..kd {
                let Some((dlo, dhi)) = valid_out_range(d, od, zd, s, p) else {
                    continue;
                };
                for zh in 0..kh {
                    let Some((hlo, hhi)) = valid_out_range(h, oh, zh, s, p) else {
                        continue;
                    };
                    for zw in 0..kw {
                        let Some((wlo, whi)) = valid_out_range(wd, ow, zw, s, p) else {
                            continue;
                        };
                        let wv = w.data[(((co * g.c_in + ci) * kd + zd) * kh + zh) * kw + zw];
                        let mut acc = 0.0;
                        for o_d in dlo..=dhi {
                            let i_d = o_d * s + zd - p;
                            for o_h in hlo..=hhi {
                                let i_h = o_h * s + zh - p;
                                let base = (i_d * h + i_h) * wd;
                                let x_row = &x_ch[base..base + wd];
                                let gx_row = &mut gx_ch[base..base + wd];
                                let u_row = &u_ch[(o_d * oh + o_h) * ow..][..ow];
                                if s == 1 {
                                    let xi0 = wlo + zw - p;
                                    let n = whi - wlo + 1;
                                    let us = &u_row[wlo..wlo + n];
                                    let xs = &x_row[xi0..xi0 + n];
                                    let gs = &mut gx_row[xi0..xi0 + n];
                                    for i in 0..n {
                                        acc += us[i] * xs[i];
                                        gs[i] += wv * us[i];
                                    }
                                } else {
                                    for o_w in wlo..=whi {
                                        let i_w = o_w * s + zw - p;
                                        let uv = u_row[o_w];
                                        acc += uv * x_row[i_w];
                                        gx_row[i_w] += wv * uv;
                                    }
                                }
                            }
                        }
                        gw.data[(((co * g.c_in + ci) * kd + zd) * kh + zh) * kw + zw] = acc;
                    }
                }
            }
        }
    }
    Ok((gx, gw, gb))
}

// ---------------------------------------------------------------------------
// activation
// ---------------------------------------------------------------------------

/// Backward gating rule for [`relu_vjp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReluMode {
    /// Pass upstream where the forward input was positive.
    Standard,
    /// Additionally require the upstream gradient itself to be positive.
    Guided,
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in &mut out.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

pub fn relu_vjp(x: &Tensor, upstream: &Tensor, mode: ReluMode) -> Result<Tensor> {
    if x.dims() != upstream.dims() {
        return Err(Error::shape(
            "relu_vjp",
            format!("{:?} vs {:?}", x.dims(), upstream.dims()),
        ));
    }
    let mut out = Tensor::zeros(x.dims());
    for ((g, &xv), &uv) in out.data.iter_mut().zip(&x.data).zip(&upstream.data) {
        let open = match mode {
            ReluMode::Standard => xv > 0.0,
            ReluMode::Guided => xv > 0.0 && uv > 0.0,
        };
        if open {
            *g = uv;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// dense
// ---------------------------------------------------------------------------

/// y = w·x + b with `x`: N, `w`: M×N, `b`: M.
pub fn dense(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let [n] = dims_n::<1>(x, "dense", "input")?;
    let [m, wn] = dims_n::<2>(w, "dense", "weight")?;
    let [bm] = dims_n::<1>(b, "dense", "bias")?;
    if wn != n || bm != m {
        return Err(Error::shape(
            "dense",
            format!("x: {n}, w: {m}x{wn}, b: {bm}"),
        ));
    }
    let mut out = Tensor::zeros(&[m]);
    for i in 0..m {
        let row = &w.data[i * n..(i + 1) * n];
        let mut acc = b.data[i];
        for (wv, xv) in row.iter().zip(&x.data) {
            acc += wv * xv;
        }
        out.data[i] = acc;
    }
    Ok(out)
}

pub fn dense_vjp(x: &Tensor, w: &Tensor, upstream: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let [n] = dims_n::<1>(x, "dense_vjp", "input")?;
    let [m, wn] = dims_n::<2>(w, "dense_vjp", "weight")?;
    let [um] = dims_n::<1>(upstream, "dense_vjp", "upstream")?;
    if wn != n || um != m {
        return Err(Error::shape(
            "dense_vjp",
            format!("x: {n}, w: {m}x{wn}, upstream: {um}"),
        ));
    }
    let mut gx = Tensor::zeros(&[n]);
    let mut gw = Tensor::zeros(&[m, n]);
    let gb = Tensor::from_vec(&[m], upstream.data.clone())?;
    for i in 0..m {
        let uv = upstream.data[i];
        let w_row = &w.data[i * n..(i + 1) * n];
        let gw_row = &mut gw.data[i * n..(i + 1) * n];
        for j in 0..n {
            gx.data[j] += uv * w_row[j];
            gw_row[j] = uv * x.data[j];
        }
    }
    Ok((gx, gw, gb))
}

// ---------------------------------------------------------------------------
// global pooling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Avg,
    Max,
}

/// Per-channel global reduction of a C×D×H×W tensor to length C.
pub fn pool_global(x: &Tensor, kind: PoolKind) -> Result<Tensor> {
    let [c, d, h, w] = dims_n::<4>(x, "pool_global", "input")?;
    let sp = d * h * w;
    let mut out = Tensor::zeros(&[c]);
    for ch in 0..c {
        let xs = &x.data[ch * sp..(ch + 1) * sp];
        out.data[ch] = match kind {
            PoolKind::Avg => xs.iter().sum::<f64>() / sp as f64,
            PoolKind::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        };
    }
    Ok(out)
}

/// Avg spreads upstream uniformly; max routes it to the first maximal element
/// in row-major order.
pub fn pool_global_vjp(x: &Tensor, kind: PoolKind, upstream: &Tensor) -> Result<Tensor> {
    let [c, d, h, w] = dims_n::<4>(x, "pool_global_vjp", "input")?;
    let [uc] = dims_n::<1>(upstream, "pool_global_vjp", "upstream")?;
    if uc != c {
        return Err(Error::shape(
            "pool_global_vjp",
            format!("upstream {uc} vs {c} channels"),
        ));
    }
    let sp = d * h * w;
    let mut gx = Tensor::zeros(x.dims());
    for ch in 0..c {
        let xs = &x.data[ch * sp..(ch + 1) * sp];
        let gs = &mut gx.data[ch * sp..(ch + 1) * sp];
        match kind {
            PoolKind::Avg => {
                let v = upstream.data[ch] / sp as f64;
                gs.fill(v);
            }
            PoolKind::Max => {
                let mut best = 0;
                for (i, v) in xs.iter().enumerate() {
                    if *v > xs[best] {
                        best = i;
                    }
                }
                gs[best] = upstream.data[ch];
            }
        }
    }
    Ok(gx)
}

// ---------------------------------------------------------------------------
// softmax + cross entropy
// ---------------------------------------------------------------------------

/// Loss, row-wise probabilities, and the logits gradient in one pass.
pub struct SoftmaxXent {
    pub loss: f64,
    pub probs: Tensor,
    pub grad_logits: Tensor,
}

/// Row-wise softmax (max-subtracted) with mean cross-entropy over rows.
///
/// grad_logits = (probs − onehot(labels)) / rows.
pub fn softmax_xent(logits: &Tensor, labels: &[usize]) -> Result<SoftmaxXent> {
    let [rows, k] = dims_n::<2>(logits, "softmax_xent", "logits")?;
    if labels.len() != rows {
        return Err(Error::shape(
            "softmax_xent",
            format!("{} labels for {} rows", labels.len(), rows),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            num_classes: k,
        });
    }
    let mut probs = Tensor::zeros(&[rows, k]);
    let mut grad = Tensor::zeros(&[rows, k]);
    let inv_rows = 1.0 / rows as f64;
    let mut loss = 0.0;
    for r in 0..rows {
        let row = &logits.data[r * k..(r + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p_row = &mut probs.data[r * k..(r + 1) * k];
        let mut denom = 0.0;
        for (p, &v) in p_row.iter_mut().zip(row) {
            *p = math::exp(v - max);
            denom += *p;
        }
        for p in p_row.iter_mut() {
            *p /= denom;
        }
        loss -= math::ln(p_row[labels[r]]) * inv_rows;
        let g_row = &mut grad.data[r * k..(r + 1) * k];
        for (g, &p) in g_row.iter_mut().zip(p_row.iter()) {
            *g = p * inv_rows;
        }
        g_row[labels[r]] -= inv_rows;
    }
    Ok(SoftmaxXent {
        loss,
        probs,
        grad_logits: grad,
    })
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

/// First/second moment estimates and the step counter for one parameter.
#[derive(Debug, Clone)]
pub struct OptState {
    pub m: Tensor,
    pub v: Tensor,
    pub step: u64,
}

impl OptState {
    pub fn new(dims: &[usize]) -> Self {
        OptState {
            m: Tensor::zeros(dims),
            v: Tensor::zeros(dims),
            step: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.05,
        }
    }
}

/// One decoupled-weight-decay Adam step. A non-finite gradient rejects the
/// step without touching the parameter or the state.
pub fn adamw_step(
    param: &mut Tensor,
    grad: &Tensor,
    state: &mut OptState,
    lr: f64,
    hyper: &AdamHyper,
) -> Result<()> {
    if param.dims() != grad.dims() || param.dims() != state.m.dims() {
        return Err(Error::shape(
            "adamw_step",
            format!(
                "param {:?}, grad {:?}, state {:?}",
                param.dims(),
                grad.dims(),
                state.m.dims()
            ),
        ));
    }
    if !grad.all_finite() {
        return Err(Error::NonFinite { op: "adamw_step" });
    }
    state.step += 1;
    let tau = state.step as f64;
    let bc1 = 1.0 - math::pow(hyper.beta1, tau);
    let bc2 = 1.0 - math::pow(hyper.beta2, tau);
    for i in 0..param.data.len() {
        let g = grad.data[i];
        let m = hyper.beta1 * state.m.data[i] + (1.0 - hyper.beta1) * g;
        let v = hyper.beta2 * state.v.data[i] + (1.0 - hyper.beta2) * g * g;
        state.m.data[i] = m;
        state.v.data[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        let p = param.data[i];
        param.data[i] = p - lr * m_hat / (math::sqrt(v_hat) + hyper.eps) - lr * hyper.weight_decay * p;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// learning-rate schedule
// ---------------------------------------------------------------------------

/// Linear warmup followed by cosine decay, all in per-step units.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleConfig {
    pub lr_start: f64,
    pub lr_peak: f64,
    pub lr_end: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup_steps == 0 || self.warmup_steps >= self.total_steps {
            return Err(Error::config(format!(
                "need 0 < warmup ({}) < total ({})",
                self.warmup_steps, self.total_steps
            )));
        }
        if self.lr_start > self.lr_peak {
            return Err(Error::config("lr_start exceeds lr_peak"));
        }
        Ok(())
    }
}

pub fn lr_at(step: u64, cfg: &ScheduleConfig) -> Result<f64> {
    cfg.validate()?;
    if step > cfg.total_steps {
        return Err(Error::StepOutOfRange {
            step,
            total: cfg.total_steps,
        });
    }
    if step < cfg.warmup_steps {
        let t = step as f64 / cfg.warmup_steps as f64;
        Ok(cfg.lr_start + (cfg.lr_peak - cfg.lr_start) * t)
    } else {
        let t = (step - cfg.warmup_steps) as f64 / (cfg.total_steps - cfg.warmup_steps) as f64;
        Ok(cfg.lr_end + (cfg.lr_peak - cfg.lr_end) * 0.5 * (1.0 + math::cos(core::f64::consts::PI * t)))
    }
}
