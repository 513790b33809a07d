//! The volume-wise decoder: time embedding, residual stages with channel
//! attention, global pooling, and a frame-decoupling classification head.
//!
//! Topology: the t window frames enter as channels and are embedded by a
//! 1×1×1 conv, a 3×3×3 stem conv follows, then each stage runs its residual
//! blocks at a constant width; consecutive stages are joined by a stride-2
//! 3×3×3 transition whose skip is a strided 1×1×1 projection when the widths
//! differ (plain strided subsampling otherwise). Global average pooling
//! yields one feature vector whose t contiguous groups are decoded by a
//! shared dense head into per-frame logits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::{
    conv3d, conv3d_vjp, dense, dense_vjp, pool_global, pool_global_vjp, relu, relu_vjp,
    softmax_xent, PoolKind, ReluMode, Tensor,
};

/// Architecture hyperparameters; every weight shape derives from this alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Window length in frames (t).
    pub window: usize,
    /// Channels produced by the time embedding (c).
    pub embed_channels: usize,
    /// Channel count of each residual stage.
    pub stage_widths: Vec<usize>,
    pub blocks_per_stage: usize,
    /// Number of task states including rest (K).
    pub num_classes: usize,
    /// Attention bottleneck reduction ratio (r).
    pub reduction: usize,
    /// Input extents D×H×W.
    pub grid: [usize; 3],
}

impl ModelConfig {
    /// Desk-scale default: quarter-scale grid, two stages, one block each.
    pub fn with_defaults(num_classes: usize) -> Self {
        ModelConfig {
            window: 16,
            embed_channels: 16,
            stage_widths: vec![16, 32],
            blocks_per_stage: 1,
            num_classes,
            reduction: 4,
            grid: [20, 24, 20],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.embed_channels == 0 || self.blocks_per_stage == 0 {
            return Err(Error::config("window, channels, blocks must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("need at least 2 classes"));
        }
        if self.grid.iter().any(|&e| e == 0) {
            return Err(Error::config("grid extents must be positive"));
        }
        let Some(&last) = self.stage_widths.last() else {
            return Err(Error::config("need at least one stage"));
        };
        if last % self.window != 0 {
            return Err(Error::config(format!(
                "final stage width {last} not divisible by window {}",
                self.window
            )));
        }
        if self.reduction == 0 || self.stage_widths.iter().any(|&w| w % self.reduction != 0) {
            return Err(Error::config(format!(
                "reduction {} must divide every stage width {:?}",
                self.reduction, self.stage_widths
            )));
        }
        Ok(())
    }

    /// Width of the pooled feature vector.
    pub fn final_width(&self) -> usize {
        *self.stage_widths.last().expect("validated config")
    }

    /// Features available to the head per frame.
    pub fn head_group_dim(&self) -> usize {
        self.final_width() / self.window
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParam {
    pub w: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParam {
    pub w: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub fc1: DenseParam,
    pub fc2: DenseParam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    pub conv1: ConvParam,
    pub conv2: ConvParam,
    pub attn: AttentionWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionWeights {
    pub conv: ConvParam,
    /// Strided 1×1×1 skip projection; absent when the widths match.
    pub proj: Option<ConvParam>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageWeights {
    pub blocks: Vec<BlockWeights>,
    /// Present for every stage except the last.
    pub transition: Option<TransitionWeights>,
}

/// All learnable arrays. Also used as the gradient accumulator, since the
/// two share every shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub time_embed: ConvParam,
    pub stem: ConvParam,
    pub stages: Vec<StageWeights>,
    pub head: DenseParam,
}

fn conv_zeros(c_out: usize, c_in: usize, k: usize) -> ConvParam {
    ConvParam {
        w: Tensor::zeros(&[c_out, c_in, k, k, k]),
        b: Tensor::zeros(&[c_out]),
    }
}

fn dense_zeros(m: usize, n: usize) -> DenseParam {
    DenseParam {
        w: Tensor::zeros(&[m, n]),
        b: Tensor::zeros(&[m]),
    }
}

impl ModelWeights {
    /// Zero-valued weights with every shape derived from the config.
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut stages = Vec::with_capacity(cfg.stage_widths.len());
        for (i, &width) in cfg.stage_widths.iter().enumerate() {
            let blocks = (0..cfg.blocks_per_stage)
                .map(|_| BlockWeights {
                    conv1: conv_zeros(width, width, 3),
                    conv2: conv_zeros(width, width, 3),
                    attn: AttentionWeights {
                        fc1: dense_zeros(width / cfg.reduction, 2 * width),
                        fc2: dense_zeros(width, width / cfg.reduction),
                    },
                })
                .collect();
            let transition = cfg.stage_widths.get(i + 1).map(|&next| TransitionWeights {
                conv: conv_zeros(next, width, 3),
                proj: (next != width).then(|| conv_zeros(next, width, 1)),
            });
            stages.push(StageWeights { blocks, transition });
        }
        Ok(ModelWeights {
            time_embed: ConvParam {
                w: Tensor::zeros(&[cfg.embed_channels, cfg.window, 1, 1, 1]),
                b: Tensor::zeros(&[cfg.embed_channels]),
            },
            stem: conv_zeros(cfg.stage_widths[0], cfg.embed_channels, 3),
            stages,
            head: dense_zeros(cfg.num_classes, cfg.head_group_dim()),
        })
    }

    /// Every parameter tensor in a fixed order (kernels and biases
    /// interleaved, stages in depth order, head last).
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        out.push(&self.time_embed.w);
        out.push(&self.time_embed.b);
        out.push(&self.stem.w);
        out.push(&self.stem.b);
        for stage in &self.stages {
            for block in &stage.blocks {
                out.extend([
                    &block.conv1.w,
                    &block.conv1.b,
                    &block.conv2.w,
                    &block.conv2.b,
                    &block.attn.fc1.w,
                    &block.attn.fc1.b,
                    &block.attn.fc2.w,
                    &block.attn.fc2.b,
                ]);
            }
            if let Some(t) = &stage.transition {
                out.push(&t.conv.w);
                out.push(&t.conv.b);
                if let Some(p) = &t.proj {
                    out.push(&p.w);
                    out.push(&p.b);
                }
            }
        }
        out.push(&self.head.w);
        out.push(&self.head.b);
        out
    }

    /// Mutable view in the same order as [`ModelWeights::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        out.push(&mut self.time_embed.w);
        out.push(&mut self.time_embed.b);
        out.push(&mut self.stem.w);
        out.push(&mut self.stem.b);
        for stage in &mut self.stages {
            for block in &mut stage.blocks {
                out.extend([
                    &mut block.conv1.w,
                    &mut block.conv1.b,
                    &mut block.conv2.w,
                    &mut block.conv2.b,
                    &mut block.attn.fc1.w,
                    &mut block.attn.fc1.b,
                    &mut block.attn.fc2.w,
                    &mut block.attn.fc2.b,
                ]);
            }
            if let Some(t) = &mut stage.transition {
                out.push(&mut t.conv.w);
                out.push(&mut t.conv.b);
                if let Some(p) = &mut t.proj {
                    out.push(&mut p.w);
                    out.push(&mut p.b);
                }
            }
        }
        out.push(&mut self.head.w);
        out.push(&mut self.head.b);
        out
    }

    /// self += alpha * other, parameter by parameter.
    pub fn add_scaled(&mut self, other: &ModelWeights, alpha: f64) {
        for (a, b) in self.params_mut().into_iter().zip(other.params()) {
            a.add_scaled(b, alpha);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for p in self.params_mut() {
            p.scale(alpha);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.all_finite())
    }
}

/// He-style initialization: kernels ~ N(0, 2/fan_in), biases zero, fully
/// determined by the seed.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ModelWeights> {
    let mut weights = ModelWeights::zeros(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for param in weights.params_mut() {
        let dims = param.dims().to_vec();
        if dims.len() == 1 {
            continue; // biases stay zero
        }
        // fan_in: input channels × kernel volume for convs, input length for
        // dense kernels.
        let fan_in: usize = dims[1..].iter().product();
        let sd = math::sqrt(2.0 / fan_in as f64);
        for v in param.data_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = z * sd;
        }
    }
    Ok(weights)
}

/// Forward nonlinearity; `Identity` exists so tests can disable every gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

fn act_forward(x: &Tensor, act: Activation) -> Tensor {
    match act {
        Activation::Relu => relu(x),
        Activation::Identity => x.clone(),
    }
}

fn act_vjp(pre: &Tensor, upstream: &Tensor, act: Activation, mode: ReluMode) -> Result<Tensor> {
    match act {
        Activation::Relu => relu_vjp(pre, upstream, mode),
        Activation::Identity => Ok(upstream.clone()),
    }
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

struct AttnCache {
    descriptors: Tensor,
    fc1_pre: Tensor,
    fc1_act: Tensor,
    scores: Tensor,
}

struct BlockCache {
    input: Tensor,
    pre1: Tensor,
    act1: Tensor,
    sum_pre: Tensor,
    act2: Tensor,
    attn: AttnCache,
    out: Tensor,
}

struct TransCache {
    input: Tensor,
    sum: Tensor,
}

struct StageCache {
    blocks: Vec<BlockCache>,
    trans: Option<TransCache>,
}

/// Everything the backward pass needs, retained by [`forward`].
pub struct ForwardCache {
    activation: Activation,
    input: Tensor,
    embed_out: Tensor,
    stem_pre: Tensor,
    stages: Vec<StageCache>,
    pooled: Tensor,
    logits: Tensor,
}

impl ForwardCache {
    pub fn logits(&self) -> &Tensor {
        &self.logits
    }
}

/// 1×1×1 embedding conv treating the t window frames as input channels.
pub fn time_embed(window: &Tensor, weights: &ConvParam) -> Result<Tensor> {
    conv3d(window, &weights.w, &weights.b, 1, 0)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + math::exp(-x))
}

fn attention_forward(
    x: &Tensor,
    params: &AttentionWeights,
    act: Activation,
) -> Result<(Tensor, AttnCache)> {
    let avg = pool_global(x, PoolKind::Avg)?;
    let max = pool_global(x, PoolKind::Max)?;
    let c = avg.numel();
    // Row-major C×2 descriptor matrix, flattened: [avg_0, max_0, avg_1, ...].
    let mut desc = Tensor::zeros(&[2 * c]);
    for ch in 0..c {
        desc.data_mut()[2 * ch] = avg.data()[ch];
        desc.data_mut()[2 * ch + 1] = max.data()[ch];
    }
    let fc1_pre = dense(&desc, &params.fc1.w, &params.fc1.b)?;
    let fc1_act = act_forward(&fc1_pre, act);
    let fc2_pre = dense(&fc1_act, &params.fc2.w, &params.fc2.b)?;
    let mut scores = fc2_pre;
    for v in scores.data_mut() {
        *v = sigmoid(*v);
    }
    let dims = x.dims().to_vec();
    let sp: usize = dims[1..].iter().product();
    let mut y = x.clone();
    for ch in 0..c {
        let s = scores.data()[ch];
        for v in &mut y.data_mut()[ch * sp..(ch + 1) * sp] {
            *v *= s;
        }
    }
    Ok((
        y,
        AttnCache {
            descriptors: desc,
            fc1_pre,
            fc1_act,
            scores,
        },
    ))
}

/// Channel attention as a standalone op: returns the rescaled tensor and the
/// per-channel scores in (0, 1).
pub fn channel_attention(x: &Tensor, params: &AttentionWeights) -> Result<(Tensor, Tensor)> {
    let (y, cache) = attention_forward(x, params, Activation::Relu)?;
    Ok((y, cache.scores))
}

/// Downsample every spatial axis by taking stride-2 samples.
fn subsample2(x: &Tensor) -> Tensor {
    let dims = x.dims();
    let (c, d, h, w) = (dims[0], dims[1], dims[2], dims[3]);
    let (od, oh, ow) = ((d - 1) / 2 + 1, (h - 1) / 2 + 1, (w - 1) / 2 + 1);
    let mut out = Tensor::zeros(&[c, od, oh, ow]);
    for ch in 0..c {
        for zd in 0..od {
            for zh in 0..oh {
                for zw in 0..ow {
                    out.data_mut()[((ch * od + zd) * oh + zh) * ow + zw] =
                        x.data()[((ch * d + 2 * zd) * h + 2 * zh) * w + 2 * zw];
                }
            }
        }
    }
    out
}

fn subsample2_vjp(input_dims: &[usize], upstream: &Tensor) -> Tensor {
    let (c, d, h, w) = (input_dims[0], input_dims[1], input_dims[2], input_dims[3]);
    let ud = upstream.dims().to_vec();
    let (od, oh, ow) = (ud[1], ud[2], ud[3]);
    let mut gx = Tensor::zeros(input_dims);
    for ch in 0..c {
        for zd in 0..od {
            for zh in 0..oh {
                for zw in 0..ow {
                    gx.data_mut()[((ch * d + 2 * zd) * h + 2 * zh) * w + 2 * zw] =
                        upstream.data()[((ch * od + zd) * oh + zh) * ow + zw];
                }
            }
        }
    }
    gx
}

fn block_forward(x: Tensor, w: &BlockWeights, act: Activation) -> Result<BlockCache> {
    let pre1 = conv3d(&x, &w.conv1.w, &w.conv1.b, 1, 1)?;
    let act1 = act_forward(&pre1, act);
    let pre2 = conv3d(&act1, &w.conv2.w, &w.conv2.b, 1, 1)?;
    let mut sum_pre = pre2;
    sum_pre.add_scaled(&x, 1.0);
    let act2 = act_forward(&sum_pre, act);
    let (out, attn) = attention_forward(&act2, &w.attn, act)?;
    Ok(BlockCache {
        input: x,
        pre1,
        act1,
        sum_pre,
        act2,
        attn,
        out,
    })
}

fn transition_forward(x: Tensor, w: &TransitionWeights) -> Result<TransCache> {
    let conv_out = conv3d(&x, &w.conv.w, &w.conv.b, 2, 1)?;
    let skip = match &w.proj {
        Some(p) => conv3d(&x, &p.w, &p.b, 2, 0)?,
        None => subsample2(&x),
    };
    let mut sum = conv_out;
    sum.add_scaled(&skip, 1.0);
    Ok(TransCache { input: x, sum })
}

/// Partition the pooled feature vector into t groups and decode each with the
/// shared dense head.
pub fn decode_frames(pooled: &Tensor, head: &DenseParam, window: usize) -> Result<Tensor> {
    let c_final = pooled.numel();
    if pooled.dims().len() != 1 || c_final % window != 0 {
        return Err(Error::shape(
            "decode_frames",
            format!(
                "pooled {:?} not divisible into {window} groups",
                pooled.dims()
            ),
        ));
    }
    let gd = c_final / window;
    let k = head.b.numel();
    let mut logits = Tensor::zeros(&[window, k]);
    for j in 0..window {
        let group = Tensor::from_vec(&[gd], pooled.data()[j * gd..(j + 1) * gd].to_vec())?;
        let row = dense(&group, &head.w, &head.b)?;
        logits.data_mut()[j * k..(j + 1) * k].copy_from_slice(row.data());
    }
    Ok(logits)
}

fn row_softmax(logits: &Tensor) -> Tensor {
    let rows = logits.dims()[0];
    let k = logits.dims()[1];
    let mut probs = logits.clone();
    for r in 0..rows {
        let row = &mut probs.data_mut()[r * k..(r + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for v in row.iter_mut() {
            *v = math::exp(*v - max);
            denom += *v;
        }
        for v in row.iter_mut() {
            *v /= denom;
        }
    }
    probs
}

/// Full forward pass: per-frame probabilities plus the cache for backward.
pub fn forward(
    window: &Tensor,
    weights: &ModelWeights,
    cfg: &ModelConfig,
) -> Result<(Tensor, ForwardCache)> {
    forward_with_activation(window, weights, cfg, Activation::Relu)
}

/// Forward with a selectable nonlinearity (tests use `Identity` to disable
/// every gate).
pub fn forward_with_activation(
    window: &Tensor,
    weights: &ModelWeights,
    cfg: &ModelConfig,
    act: Activation,
) -> Result<(Tensor, ForwardCache)> {
    cfg.validate()?;
    let expect = [cfg.window, cfg.grid[0], cfg.grid[1], cfg.grid[2]];
    if window.dims() != expect {
        return Err(Error::shape(
            "forward",
            format!("window {:?}, config wants {:?}", window.dims(), expect),
        ));
    }
    let embed_out = time_embed(window, &weights.time_embed)?;
    let stem_pre = conv3d(&embed_out, &weights.stem.w, &weights.stem.b, 1, 1)?;
    let stem_act = act_forward(&stem_pre, act);

    let mut cur = stem_act;
    let mut stages = Vec::with_capacity(weights.stages.len());
    for stage in &weights.stages {
        let mut blocks = Vec::with_capacity(stage.blocks.len());
        for block in &stage.blocks {
            let cache = block_forward(cur, block, act)?;
            cur = cache.out.clone();
            blocks.push(cache);
        }
        let trans = match &stage.transition {
            Some(t) => {
                let cache = transition_forward(cur, t)?;
                cur = cache.sum.clone();
                Some(cache)
            }
            None => None,
        };
        stages.push(StageCache { blocks, trans });
    }

    let pooled = pool_global(&cur, PoolKind::Avg)?;
    let logits = decode_frames(&pooled, &weights.head, cfg.window)?;
    let probs = row_softmax(&logits);
    Ok((
        probs,
        ForwardCache {
            activation: act,
            input: window.clone(),
            embed_out,
            stem_pre,
            stages,
            pooled,
            logits,
        },
    ))
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

/// Output of the standard backward pass.
pub struct Gradients {
    pub loss: f64,
    pub params: ModelWeights,
    pub input: Tensor,
}

fn attention_backward(
    cache: &AttnCache,
    x: &Tensor,
    params: &AttentionWeights,
    upstream: &Tensor,
    act: Activation,
    mode: ReluMode,
) -> Result<(Tensor, DenseParam, DenseParam)> {
    let dims = x.dims();
    let c = dims[0];
    let sp: usize = dims[1..].iter().product();

    let mut g_scores = Tensor::zeros(&[c]);
    let mut gx = upstream.clone();
    for ch in 0..c {
        let s = cache.scores.data()[ch];
        let xs = &x.data()[ch * sp..(ch + 1) * sp];
        let us = &upstream.data()[ch * sp..(ch + 1) * sp];
        g_scores.data_mut()[ch] = us.iter().zip(xs).map(|(u, v)| u * v).sum();
        for v in &mut gx.data_mut()[ch * sp..(ch + 1) * sp] {
            *v *= s;
        }
    }
    // Sigmoid vjp.
    let mut g_fc2_pre = g_scores;
    for (g, &s) in g_fc2_pre.data_mut().iter_mut().zip(cache.scores.data()) {
        *g *= s * (1.0 - s);
    }
    let (g_fc1_act, g_fc2_w, g_fc2_b) = dense_vjp(&cache.fc1_act, &params.fc2.w, &g_fc2_pre)?;
    let g_fc1_pre = act_vjp(&cache.fc1_pre, &g_fc1_act, act, mode)?;
    let (g_desc, g_fc1_w, g_fc1_b) = dense_vjp(&cache.descriptors, &params.fc1.w, &g_fc1_pre)?;

    let mut g_avg = Tensor::zeros(&[c]);
    let mut g_max = Tensor::zeros(&[c]);
    for ch in 0..c {
        g_avg.data_mut()[ch] = g_desc.data()[2 * ch];
        g_max.data_mut()[ch] = g_desc.data()[2 * ch + 1];
    }
    gx.add_scaled(&pool_global_vjp(x, PoolKind::Avg, &g_avg)?, 1.0);
    gx.add_scaled(&pool_global_vjp(x, PoolKind::Max, &g_max)?, 1.0);
    Ok((
        gx,
        DenseParam {
            w: g_fc1_w,
            b: g_fc1_b,
        },
        DenseParam {
            w: g_fc2_w,
            b: g_fc2_b,
        },
    ))
}

fn chain_backward(
    cache: &ForwardCache,
    weights: &ModelWeights,
    cfg: &ModelConfig,
    grad_logits: &Tensor,
    mode: ReluMode,
) -> Result<(ModelWeights, Tensor)> {
    let act = cache.activation;
    let mut grads = ModelWeights::zeros(cfg)?;
    let k = cfg.num_classes;
    let gd = cfg.head_group_dim();

    // Head: shared dense map over the t pooled groups.
    let mut g_pooled = Tensor::zeros(&[cfg.final_width()]);
    for j in 0..cfg.window {
        let group = Tensor::from_vec(&[gd], cache.pooled.data()[j * gd..(j + 1) * gd].to_vec())?;
        let urow = Tensor::from_vec(&[k], grad_logits.data()[j * k..(j + 1) * k].to_vec())?;
        let (g_group, gw, gb) = dense_vjp(&group, &weights.head.w, &urow)?;
        grads.head.w.add_scaled(&gw, 1.0);
        grads.head.b.add_scaled(&gb, 1.0);
        g_pooled.data_mut()[j * gd..(j + 1) * gd].copy_from_slice(g_group.data());
    }

    let last_stage = cache.stages.last().expect("validated config");
    let final_map = match &last_stage.trans {
        Some(t) => &t.sum,
        None => &last_stage.blocks.last().expect("blocks_per_stage >= 1").out,
    };
    let mut g = pool_global_vjp(final_map, PoolKind::Avg, &g_pooled)?;

    for (si, stage_cache) in cache.stages.iter().enumerate().rev() {
        let stage_w = &weights.stages[si];
        let stage_g = &mut grads.stages[si];
        if let (Some(tc), Some(tw)) = (&stage_cache.trans, &stage_w.transition) {
            let tg = stage_g.transition.as_mut().expect("grads mirror weights");
            let (gx_conv, gw, gb) = conv3d_vjp(&tc.input, &tw.conv.w, 2, 1, &g)?;
            tg.conv.w.add_scaled(&gw, 1.0);
            tg.conv.b.add_scaled(&gb, 1.0);
            let gx_skip = match &tw.proj {
                Some(p) => {
                    let (gx_p, gpw, gpb) = conv3d_vjp(&tc.input, &p.w, 2, 0, &g)?;
                    let pg = tg.proj.as_mut().expect("grads mirror weights");
                    pg.w.add_scaled(&gpw, 1.0);
                    pg.b.add_scaled(&gpb, 1.0);
                    gx_p
                }
                None => subsample2_vjp(tc.input.dims(), &g),
            };
            let mut gx = gx_conv;
            gx.add_scaled(&gx_skip, 1.0);
            g = gx;
        }
        for (bi, bc) in stage_cache.blocks.iter().enumerate().rev() {
            let bw = &stage_w.blocks[bi];
            let bg = &mut stage_g.blocks[bi];
            let (g_act2, g_fc1, g_fc2) =
                attention_backward(&bc.attn, &bc.act2, &bw.attn, &g, act, mode)?;
            bg.attn.fc1.w.add_scaled(&g_fc1.w, 1.0);
            bg.attn.fc1.b.add_scaled(&g_fc1.b, 1.0);
            bg.attn.fc2.w.add_scaled(&g_fc2.w, 1.0);
            bg.attn.fc2.b.add_scaled(&g_fc2.b, 1.0);
            let g_sum = act_vjp(&bc.sum_pre, &g_act2, act, mode)?;
            let (g_act1, g_c2w, g_c2b) = conv3d_vjp(&bc.act1, &bw.conv2.w, 1, 1, &g_sum)?;
            bg.conv2.w.add_scaled(&g_c2w, 1.0);
            bg.conv2.b.add_scaled(&g_c2b, 1.0);
            let g_pre1 = act_vjp(&bc.pre1, &g_act1, act, mode)?;
            let (mut g_in, g_c1w, g_c1b) = conv3d_vjp(&bc.input, &bw.conv1.w, 1, 1, &g_pre1)?;
            bg.conv1.w.add_scaled(&g_c1w, 1.0);
            bg.conv1.b.add_scaled(&g_c1b, 1.0);
            g_in.add_scaled(&g_sum, 1.0); // residual skip
            g = g_in;
        }
    }

    let g_stem_pre = act_vjp(&cache.stem_pre, &g, act, mode)?;
    let (g_embed, g_stem_w, g_stem_b) =
        conv3d_vjp(&cache.embed_out, &weights.stem.w, 1, 1, &g_stem_pre)?;
    grads.stem.w.add_scaled(&g_stem_w, 1.0);
    grads.stem.b.add_scaled(&g_stem_b, 1.0);
    let (g_input, g_te_w, g_te_b) =
        conv3d_vjp(&cache.input, &weights.time_embed.w, 1, 0, &g_embed)?;
    grads.time_embed.w.add_scaled(&g_te_w, 1.0);
    grads.time_embed.b.add_scaled(&g_te_b, 1.0);
    Ok((grads, g_input))
}

/// Standard backward: gradients of the mean cross-entropy loss over the
/// window's frames with respect to every parameter (and the input).
pub fn backward(
    cache: &ForwardCache,
    weights: &ModelWeights,
    cfg: &ModelConfig,
    labels: &[usize],
) -> Result<Gradients> {
    let sx = softmax_xent(&cache.logits, labels)?;
    let (params, input) = chain_backward(cache, weights, cfg, &sx.grad_logits, ReluMode::Standard)?;
    Ok(Gradients {
        loss: sx.loss,
        params,
        input,
    })
}

/// Input gradient for a caller-supplied seed on the pre-softmax logits.
/// Guided mode applies the guided relu rule at every gate.
pub fn logits_gradient(
    cache: &ForwardCache,
    weights: &ModelWeights,
    cfg: &ModelConfig,
    seed: &Tensor,
    mode: ReluMode,
) -> Result<Tensor> {
    if seed.dims() != cache.logits.dims() {
        return Err(Error::shape(
            "logits_gradient",
            format!("seed {:?} vs logits {:?}", seed.dims(), cache.logits.dims()),
        ));
    }
    let (_, input) = chain_backward(cache, weights, cfg, seed, mode)?;
    Ok(input)
}
