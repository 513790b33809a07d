//! Guided-backprop saliency: per-window gradient harvesting, group
//! averaging, per-voxel GLM regression on convolved condition regressors,
//! Benjamini-Hochberg thresholding, and peak-voxel series extraction.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::metrics::pcc;
use crate::model::{forward, logits_gradient, ModelConfig, ModelWeights};
use crate::pipeline::{window_count, Prediction};
use crate::synth::{ideal_response, TaskDesign};
use crate::tensor::{ReluMode, Tensor};

/// Gradient volumes harvested from the center frame of each sliding window.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    /// N×D×H×W gradient frames, one per window start.
    pub frames: Tensor,
    /// Run-frame index of the first harvested frame (the in-window harvest
    /// position, t/2 − 1).
    pub frame_offset: usize,
}

impl SaliencyMap {
    pub fn len(&self) -> usize {
        self.frames.dims()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One voxel's harvested time series.
    pub fn voxel_series(&self, voxel: [usize; 3]) -> Vec<f64> {
        let dims = self.frames.dims();
        let (n, h, w) = (dims[0], dims[2], dims[3]);
        let sp = dims[1] * h * w;
        let idx = (voxel[0] * h + voxel[1]) * w + voxel[2];
        (0..n)
            .map(|j| self.frames.data()[j * sp + idx])
            .collect()
    }
}

/// In-window frame index harvested by [`saliency_run`].
pub fn harvest_frame(window: usize) -> usize {
    window / 2 - 1
}

/// Guided-backprop input gradient of one logit: a one-hot seed on
/// (frame_idx, class_idx) propagated with the guided relu rule.
pub fn guided_window(
    weights: &ModelWeights,
    cfg: &ModelConfig,
    window: &Tensor,
    frame_idx: usize,
    class_idx: usize,
) -> Result<Tensor> {
    if frame_idx >= cfg.window || class_idx >= cfg.num_classes {
        return Err(Error::shape(
            "guided_window",
            alloc::format!(
                "seed ({frame_idx}, {class_idx}) outside {}x{} logits",
                cfg.window,
                cfg.num_classes
            ),
        ));
    }
    let (_, cache) = forward(window, weights, cfg)?;
    let mut seed = Tensor::zeros(&[cfg.window, cfg.num_classes]);
    seed.data_mut()[frame_idx * cfg.num_classes + class_idx] = 1.0;
    logits_gradient(&cache, weights, cfg, &seed, ReluMode::Guided)
}

#[cfg(feature = "parallel")]
fn try_map_slices<F>(starts: &[usize], f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Send + Sync,
{
    use rayon::prelude::*;
    starts.par_iter().map(|&s| f(s)).collect()
}

#[cfg(not(feature = "parallel"))]
fn try_map_slices<F>(starts: &[usize], f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize) -> Result<Vec<f64>>,
{
    starts.iter().map(|&s| f(s)).collect()
}

/// Slide stride-1 windows over a standardized run and keep, for each start,
/// the harvest-frame slice of the guided gradient seeded at the predicted
/// class of that run frame.
pub fn saliency_run(
    weights: &ModelWeights,
    cfg: &ModelConfig,
    volume: &Tensor,
    prediction: &Prediction,
) -> Result<SaliencyMap> {
    let dims = volume.dims().to_vec();
    let t = dims[0];
    let n = window_count(t, cfg.window, 1)?;
    if prediction.labels.len() != t {
        return Err(Error::shape(
            "saliency_run",
            alloc::format!("{} predictions for {} frames", prediction.labels.len(), t),
        ));
    }
    let offset = harvest_frame(cfg.window);
    let sp: usize = dims[1..].iter().product();

    let starts: Vec<usize> = (0..n).collect();
    let slices = try_map_slices(&starts, |start| {
        let wdims = [cfg.window, dims[1], dims[2], dims[3]];
        let window = Tensor::from_vec(
            &wdims,
            volume.data()[start * sp..(start + cfg.window) * sp].to_vec(),
        )?;
        let class = prediction.labels[start + offset];
        let grad = guided_window(weights, cfg, &window, offset, class)?;
        Ok(grad.data()[offset * sp..(offset + 1) * sp].to_vec())
    })?;

    let mut frames = Tensor::zeros(&[n, dims[1], dims[2], dims[3]]);
    for (j, slice) in slices.iter().enumerate() {
        frames.data_mut()[j * sp..(j + 1) * sp].copy_from_slice(slice);
    }
    Ok(SaliencyMap {
        frames,
        frame_offset: offset,
    })
}

/// Elementwise signed mean of per-run maps with identical geometry.
pub fn group_average(maps: &[SaliencyMap]) -> Result<SaliencyMap> {
    let Some(first) = maps.first() else {
        return Err(Error::EmptyInput {
            op: "group_average",
        });
    };
    for m in maps {
        if m.frames.dims() != first.frames.dims() || m.frame_offset != first.frame_offset {
            return Err(Error::shape(
                "group_average",
                alloc::format!("{:?} vs {:?}", m.frames.dims(), first.frames.dims()),
            ));
        }
    }
    let mut frames = Tensor::zeros(first.frames.dims());
    for m in maps {
        frames.add_scaled(&m.frames, 1.0);
    }
    frames.scale(1.0 / maps.len() as f64);
    Ok(SaliencyMap {
        frames,
        frame_offset: first.frame_offset,
    })
}

/// Per-condition regression outputs over the harvested frames.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmResult {
    /// Condition index per entry of the map vectors (non-rest conditions).
    pub conditions: Vec<usize>,
    pub beta: Vec<Tensor>,
    pub tstat: Vec<Tensor>,
    pub pval: Vec<Tensor>,
    /// Residual degrees of freedom (frames − regressors).
    pub df: usize,
}

/// Ordinary least squares of one response vector on precomputed design rows.
/// Returns (beta, rss); `xtx_inv` and `x` come from [`glm_design`].
fn ols_voxel(x: &[f64], n: usize, p: usize, xtx_inv: &[f64], y: &[f64]) -> (Vec<f64>, f64) {
    let mut xty = vec![0.0; p];
    for (j, &yv) in y.iter().enumerate() {
        let row = &x[j * p..(j + 1) * p];
        for (acc, &xv) in xty.iter_mut().zip(row) {
            *acc += xv * yv;
        }
    }
    let mut beta = vec![0.0; p];
    for i in 0..p {
        beta[i] = xtx_inv[i * p..(i + 1) * p]
            .iter()
            .zip(&xty)
            .map(|(a, b)| a * b)
            .sum();
    }
    let mut rss = 0.0;
    for j in 0..n {
        let row = &x[j * p..(j + 1) * p];
        let fit: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let r = y[j] - fit;
        rss += r * r;
    }
    (beta, rss)
}

/// Gauss-Jordan inverse with partial pivoting; a vanishing pivot means the
/// design matrix is rank deficient.
fn invert(m: &[f64], p: usize) -> Result<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; p * p];
    for i in 0..p {
        inv[i * p + i] = 1.0;
    }
    let scale = m
        .iter()
        .fold(0.0f64, |acc, v| if math::abs(*v) > acc { math::abs(*v) } else { acc });
    for col in 0..p {
        let mut pivot = col;
        for r in col + 1..p {
            if math::abs(a[r * p + col]) > math::abs(a[pivot * p + col]) {
                pivot = r;
            }
        }
        if math::abs(a[pivot * p + col]) <= scale * 1e-12 {
            return Err(Error::RankDeficient);
        }
        if pivot != col {
            for j in 0..p {
                a.swap(col * p + j, pivot * p + j);
                inv.swap(col * p + j, pivot * p + j);
            }
        }
        let d = a[col * p + col];
        for j in 0..p {
            a[col * p + j] /= d;
            inv[col * p + j] /= d;
        }
        for r in 0..p {
            if r == col {
                continue;
            }
            let f = a[r * p + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..p {
                a[r * p + j] -= f * a[col * p + j];
                inv[r * p + j] -= f * inv[col * p + j];
            }
        }
    }
    Ok(inv)
}

/// Design rows for the harvested frames: intercept plus one convolved (and
/// label-shift-aligned) indicator per non-rest condition.
fn glm_design(
    design: &TaskDesign,
    kernel: &[f64],
    label_shift: usize,
    offset: usize,
    n: usize,
) -> Result<(Vec<f64>, usize)> {
    let n_cond = design.conditions.len() - 1;
    let p = 1 + n_cond;
    let mut regressors = Vec::with_capacity(n_cond);
    for cond in 1..=n_cond {
        let resp = ideal_response(design, cond, kernel)?;
        // Shift by l, matching the training-label convention.
        let shifted: Vec<f64> = (0..design.frames)
            .map(|i| if i < label_shift { 0.0 } else { resp[i - label_shift] })
            .collect();
        regressors.push(shifted);
    }
    let mut x = vec![0.0; n * p];
    for j in 0..n {
        let frame = offset + j;
        x[j * p] = 1.0;
        for (ci, reg) in regressors.iter().enumerate() {
            x[j * p + 1 + ci] = reg[frame];
        }
    }
    Ok((x, p))
}

/// Per-voxel OLS of the harvested series on the condition regressors,
/// with t statistics and two-sided p-values.
pub fn glm_map(
    map: &SaliencyMap,
    design: &TaskDesign,
    kernel: &[f64],
    label_shift: usize,
) -> Result<GlmResult> {
    let dims = map.frames.dims().to_vec();
    let n = dims[0];
    if design.frames < n + map.frame_offset {
        return Err(Error::shape(
            "glm_map",
            alloc::format!(
                "{} harvested frames at offset {} exceed design of {}",
                n,
                map.frame_offset,
                design.frames
            ),
        ));
    }
    let (x, p) = glm_design(design, kernel, label_shift, map.frame_offset, n)?;
    if n <= p {
        return Err(Error::config(alloc::format!(
            "{n} frames cannot fit {p} regressors"
        )));
    }
    let mut xtx = vec![0.0; p * p];
    for j in 0..n {
        let row = &x[j * p..(j + 1) * p];
        for a in 0..p {
            for b in 0..p {
                xtx[a * p + b] += row[a] * row[b];
            }
        }
    }
    let xtx_inv = invert(&xtx, p)?;
    let df = n - p;

    let sp: usize = dims[1..].iter().product();
    let n_cond = p - 1;
    let mut beta = vec![Tensor::zeros(&dims[1..]); n_cond];
    let mut tstat = vec![Tensor::zeros(&dims[1..]); n_cond];
    let mut pval = vec![Tensor::zeros(&dims[1..]); n_cond];

    let mut y = vec![0.0; n];
    for v in 0..sp {
        for j in 0..n {
            y[j] = map.frames.data()[j * sp + v];
        }
        let (b, rss) = ols_voxel(&x, n, p, &xtx_inv, &y);
        let sigma2 = rss / df as f64;
        for ci in 0..n_cond {
            let bi = b[1 + ci];
            let se = math::sqrt(sigma2 * xtx_inv[(1 + ci) * p + (1 + ci)]);
            let t = if se > 0.0 {
                bi / se
            } else if bi == 0.0 {
                0.0
            } else if bi > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
            beta[ci].data_mut()[v] = bi;
            tstat[ci].data_mut()[v] = t;
            pval[ci].data_mut()[v] = if t == 0.0 {
                1.0
            } else {
                math::student_t_two_sided_p(t, df as f64)
            };
        }
    }
    Ok(GlmResult {
        conditions: (1..=n_cond).collect(),
        beta,
        tstat,
        pval,
        df,
    })
}

/// Benjamini-Hochberg rejection mask: reject every p at or below the largest
/// sorted p(i) with p(i) ≤ i·q/m.
pub fn fdr_threshold(pvals: &[f64], q: f64) -> Result<Vec<bool>> {
    if pvals.is_empty() {
        return Err(Error::EmptyInput {
            op: "fdr_threshold",
        });
    }
    if !(0.0..1.0).contains(&q) || q == 0.0 {
        return Err(Error::config("fdr q must be in (0, 1)"));
    }
    let m = pvals.len();
    let mut sorted = pvals.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite p-values"));
    let mut cutoff = None;
    for (i, &pv) in sorted.iter().enumerate() {
        if pv <= (i + 1) as f64 * q / m as f64 {
            cutoff = Some(pv);
        }
    }
    Ok(match cutoff {
        Some(c) => pvals.iter().map(|&pv| pv <= c).collect(),
        None => vec![false; m],
    })
}

/// The argmax-β voxel for one condition: its coordinates, harvested series,
/// and correlation against the aligned ideal response.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSeries {
    pub voxel: [usize; 3],
    pub series: Vec<f64>,
    pub pcc_vs_ideal: f64,
}

pub fn peak_series(
    map: &SaliencyMap,
    glm: &GlmResult,
    condition: usize,
    design: &TaskDesign,
    kernel: &[f64],
) -> Result<PeakSeries> {
    let ci = glm
        .conditions
        .iter()
        .position(|&c| c == condition)
        .ok_or(Error::UnknownCondition { index: condition })?;
    let betas = &glm.beta[ci];
    let data = betas.data();
    let mut lo = data[0];
    let mut hi = data[0];
    let mut best = 0usize;
    for (i, &v) in data.iter().enumerate() {
        if v > hi {
            hi = v;
            best = i;
        }
        if v < lo {
            lo = v;
        }
    }
    if lo == hi {
        return Err(Error::FlatBetaMap);
    }
    let dims = betas.dims();
    let (h, w) = (dims[1], dims[2]);
    let voxel = [best / (h * w), (best / w) % h, best % w];
    let series = map.voxel_series(voxel);
    let resp = ideal_response(design, condition, kernel)?;
    let ideal = &resp[map.frame_offset..map.frame_offset + series.len()];
    let pcc_vs_ideal = pcc(&series, ideal)?;
    Ok(PeakSeries {
        voxel,
        series,
        pcc_vs_ideal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;
    use crate::pipeline::predict_run;
    use crate::synth::{build_design, canonical_hrf, DesignKind, TaskEvent};
    use crate::tensor::{dense, dense_vjp, relu, relu_vjp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg(classes: usize) -> ModelConfig {
        ModelConfig {
            window: 16,
            embed_channels: 4,
            stage_widths: vec![16],
            blocks_per_stage: 1,
            num_classes: classes,
            reduction: 4,
            grid: [4, 4, 4],
        }
    }

    #[test]
    fn guided_window_bounds() {
        let cfg = tiny_cfg(3);
        let weights = init_params(&cfg, 1).unwrap();
        let window = Tensor::filled(&[16, 4, 4, 4], 0.3);
        assert!(guided_window(&weights, &cfg, &window, 16, 0).is_err());
        assert!(guided_window(&weights, &cfg, &window, 0, 3).is_err());
        assert!(guided_window(&weights, &cfg, &window, 7, 2).is_ok());
    }

    #[test]
    fn dead_input_frame_gets_zero_gradient() {
        // Zeroing the time-embed column of frame 5 severs every path from
        // that frame, so its guided gradient slice must vanish.
        let cfg = tiny_cfg(3);
        let mut weights = init_params(&cfg, 2).unwrap();
        let te = &mut weights.time_embed.w;
        let t = cfg.window;
        let c = cfg.embed_channels;
        for ch in 0..c {
            te.data_mut()[ch * t + 5] = 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut window = Tensor::zeros(&[16, 4, 4, 4]);
        for v in window.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let grad = guided_window(&weights, &cfg, &window, 7, 1).unwrap();
        let sp = 64;
        assert!(grad.data()[5 * sp..6 * sp].iter().all(|&g| g == 0.0));
        assert!(grad.data().iter().any(|&g| g != 0.0));
    }

    #[test]
    fn guided_rule_matches_hand_traced_two_layer_oracle() {
        // Two dense layers with relu gates; the oracle applies the guided
        // gating rule literally, element by element.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 6;
        let m = 5;
        let x = Tensor::from_vec(&[n], (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let w1 = Tensor::from_vec(
            &[m, n],
            (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let b1 = Tensor::zeros(&[m]);
        let w2 = Tensor::from_vec(
            &[3, m],
            (0..3 * m).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let b2 = Tensor::zeros(&[3]);

        let h_pre = dense(&x, &w1, &b1).unwrap();
        let h = relu(&h_pre);
        let _o = dense(&h, &w2, &b2).unwrap();
        let seed = Tensor::from_vec(&[3], vec![0.0, 1.0, 0.0]).unwrap();

        // Implementation path.
        let (g_h, _, _) = dense_vjp(&h, &w2, &seed).unwrap();
        let g_h_gated = relu_vjp(&h_pre, &g_h, ReluMode::Guided).unwrap();
        let (g_x, _, _) = dense_vjp(&x, &w1, &g_h_gated).unwrap();

        // Hand-traced oracle.
        let mut g_h_oracle = vec![0.0; m];
        for i in 0..m {
            // upstream of h_i is w2[1][i] (seed row 1)
            let up = w2.data()[m + i];
            if h_pre.data()[i] > 0.0 && up > 0.0 {
                g_h_oracle[i] = up;
            }
        }
        let mut g_x_oracle = vec![0.0; n];
        for j in 0..n {
            for i in 0..m {
                g_x_oracle[j] += g_h_oracle[i] * w1.data()[i * n + j];
            }
        }
        for j in 0..n {
            assert!((g_x.data()[j] - g_x_oracle[j]).abs() < 1e-12);
        }
    }

    fn prediction_for(volume: &Tensor, cfg: &ModelConfig, weights: &ModelWeights) -> Prediction {
        predict_run(weights, cfg, volume, 1).unwrap()
    }

    #[test]
    fn saliency_counts_match_protocol() {
        let cfg = tiny_cfg(3);
        let weights = init_params(&cfg, 5).unwrap();
        for (t, expect) in [(284usize, 269usize), (253, 238), (16, 1)] {
            let volume = Tensor::filled(&[t, 4, 4, 4], 0.1);
            let pred = prediction_for(&volume, &cfg, &weights);
            let map = saliency_run(&weights, &cfg, &volume, &pred).unwrap();
            assert_eq!(map.len(), expect, "run of {t} frames");
            assert_eq!(map.frame_offset, 7);
        }
    }

    #[test]
    fn group_average_rules() {
        let mk = |fill: f64| SaliencyMap {
            frames: Tensor::filled(&[3, 2, 2, 2], fill),
            frame_offset: 7,
        };
        let single = group_average(&[mk(2.5)]).unwrap();
        assert_eq!(single, mk(2.5));
        let mut neg = mk(2.5);
        neg.frames.scale(-1.0);
        let zero = group_average(&[mk(2.5), neg]).unwrap();
        assert!(zero.frames.data().iter().all(|&v| v == 0.0));
        let triple = group_average(&[mk(1.5), mk(1.5), mk(1.5)]).unwrap();
        assert_eq!(triple, mk(1.5));
        // Mismatched offsets are rejected.
        let mut off = mk(1.0);
        off.frame_offset = 3;
        assert!(group_average(&[mk(1.0), off]).is_err());
    }

    fn demo_design() -> TaskDesign {
        TaskDesign {
            tr_s: 0.72,
            frames: 120,
            conditions: vec!["rest".into(), "a".into(), "b".into()],
            events: vec![
                TaskEvent { condition: 1, onset: 10, duration: 12 },
                TaskEvent { condition: 2, onset: 40, duration: 12 },
                TaskEvent { condition: 1, onset: 70, duration: 12 },
                TaskEvent { condition: 2, onset: 95, duration: 12 },
            ],
        }
    }

    #[test]
    fn glm_recovers_exact_regressor() {
        let design = demo_design();
        let kernel = canonical_hrf(design.tr_s, 32.0);
        let shift = 4;
        let offset = 7;
        let n = 100;
        let resp = ideal_response(&design, 1, &kernel).unwrap();
        let shifted: Vec<f64> = (0..design.frames)
            .map(|i| if i < shift { 0.0 } else { resp[i - shift] })
            .collect();
        // Voxel 0 carries regressor 1 exactly; the rest stay silent.
        let mut frames = Tensor::zeros(&[n, 2, 2, 2]);
        for j in 0..n {
            frames.data_mut()[j * 8] = shifted[offset + j];
        }
        let map = SaliencyMap { frames, frame_offset: offset };
        let glm = glm_map(&map, &design, &kernel, shift).unwrap();
        assert_eq!(glm.df, n - 3);
        let b = glm.beta[0].data()[0];
        assert!((b - 1.0).abs() < 1e-9, "beta {b}");
        assert!(glm.pval[0].data()[0] < 1e-10);
        // Silent voxel: no effect, p at 1.
        assert!(glm.beta[0].data()[3].abs() < 1e-12);
        assert!((glm.pval[0].data()[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn glm_is_scale_equivariant() {
        let design = demo_design();
        let kernel = canonical_hrf(design.tr_s, 32.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 90;
        let mut frames = Tensor::zeros(&[n, 2, 2, 2]);
        for v in frames.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let map = SaliencyMap { frames, frame_offset: 7 };
        let mut scaled = map.clone();
        scaled.frames.scale(3.5);
        let a = glm_map(&map, &design, &kernel, 4).unwrap();
        let b = glm_map(&scaled, &design, &kernel, 4).unwrap();
        for v in 0..8 {
            assert!((b.beta[0].data()[v] - 3.5 * a.beta[0].data()[v]).abs() < 1e-9);
            assert!((b.tstat[0].data()[v] - a.tstat[0].data()[v]).abs() < 1e-9);
            assert!((b.pval[0].data()[v] - a.pval[0].data()[v]).abs() < 1e-9);
        }
    }

    #[test]
    fn ols_matches_cramer_oracle() {
        // Independent route: solve the 3-regressor normal equations by
        // Cramer's rule and compare.
        let design = demo_design();
        let kernel = canonical_hrf(design.tr_s, 32.0);
        let n = 80;
        let (x, p) = glm_design(&design, &kernel, 4, 7, n).unwrap();
        assert_eq!(p, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();

        let mut xtx = vec![0.0; 9];
        let mut xty = vec![0.0; 3];
        for j in 0..n {
            let row = &x[j * 3..(j + 1) * 3];
            for a in 0..3 {
                xty[a] += row[a] * y[j];
                for b in 0..3 {
                    xtx[a * 3 + b] += row[a] * row[b];
                }
            }
        }
        let det3 = |m: &[f64]| -> f64 {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        };
        let d = det3(&xtx);
        let mut beta_oracle = [0.0; 3];
        for col in 0..3 {
            let mut m = xtx.clone();
            for r in 0..3 {
                m[r * 3 + col] = xty[r];
            }
            beta_oracle[col] = det3(&m) / d;
        }

        let xtx_inv = invert(&xtx, 3).unwrap();
        let (beta, _) = ols_voxel(&x, n, 3, &xtx_inv, &y);
        for i in 0..3 {
            assert!(
                (beta[i] - beta_oracle[i]).abs() < 1e-8,
                "beta[{i}]: {} vs {}",
                beta[i],
                beta_oracle[i]
            );
        }
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let m = vec![1.0, 2.0, 2.0, 4.0];
        assert!(matches!(invert(&m, 2), Err(Error::RankDeficient)));
    }

    #[test]
    fn fdr_literal_enumeration_cases() {
        let mask = fdr_threshold(&[0.01, 0.04, 0.9], 0.05).unwrap();
        assert_eq!(mask, vec![true, false, false]);
        let mask = fdr_threshold(&[1.0, 1.0, 1.0], 0.05).unwrap();
        assert_eq!(mask, vec![false; 3]);
        let mask = fdr_threshold(&[0.01, 0.02, 0.04], 0.05).unwrap();
        assert_eq!(mask, vec![true; 3]);
        assert!(fdr_threshold(&[], 0.05).is_err());
        assert!(fdr_threshold(&[0.5], 0.0).is_err());
    }

    #[test]
    fn fdr_rejections_grow_with_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let m = rng.random_range(1..40usize);
            let pvals: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
            let q1: f64 = rng.random_range(0.01..0.5);
            let q2: f64 = rng.random_range(0.01..0.5);
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            let small = fdr_threshold(&pvals, lo).unwrap();
            let large = fdr_threshold(&pvals, hi).unwrap();
            for (s, l) in small.iter().zip(&large) {
                assert!(!s || *l, "rejections must be monotone in q");
            }
        }
    }

    #[test]
    fn peak_series_finds_planted_voxel() {
        let design = demo_design();
        let kernel = canonical_hrf(design.tr_s, 32.0);
        let offset = 7;
        let n = 100;
        let resp = ideal_response(&design, 2, &kernel).unwrap();
        let mut frames = Tensor::zeros(&[n, 2, 3, 2]);
        let sp = 12;
        let target = (1 * 3 + 2) * 2 + 1; // voxel [1, 2, 1]
        for j in 0..n {
            frames.data_mut()[j * sp + target] = resp[offset + j];
        }
        let map = SaliencyMap { frames, frame_offset: offset };
        // No label shift here so the planted series aligns exactly.
        let glm = glm_map(&map, &design, &kernel, 0).unwrap();
        let peak = peak_series(&map, &glm, 2, &design, &kernel).unwrap();
        assert_eq!(peak.voxel, [1, 2, 1]);
        assert!((peak.pcc_vs_ideal - 1.0).abs() < 1e-9, "{}", peak.pcc_vs_ideal);
    }

    #[test]
    fn peak_series_rejects_flat_beta() {
        let design = demo_design();
        let kernel = canonical_hrf(design.tr_s, 32.0);
        let map = SaliencyMap {
            frames: Tensor::filled(&[100, 2, 2, 2], 0.5),
            frame_offset: 7,
        };
        let glm = glm_map(&map, &design, &kernel, 4).unwrap();
        assert!(matches!(
            peak_series(&map, &glm, 1, &design, &kernel),
            Err(Error::FlatBetaMap)
        ));
    }

    #[test]
    fn saliency_offsets_align_with_run_frames() {
        // Harvested frame j corresponds to run frame j + t/2 - 1.
        let design = build_design(DesignKind::Block, 1);
        assert_eq!(harvest_frame(16), 7);
        assert_eq!(
            window_count(design.frames, 16, 1).unwrap(),
            design.frames - 16 + 1
        );
    }
}
