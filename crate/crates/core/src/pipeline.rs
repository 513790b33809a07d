//! Training and inference protocol: per-voxel standardization, the
//! hemodynamic label shift, sliding-window sampling, the AdamW training loop,
//! and stride-s voting inference.
//!
//! Batch gradients and prediction windows fan out over rayon when the
//! `parallel` feature is on; merges always run in a fixed order so results
//! are bit-identical across thread counts.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{backward, forward, init_params, ModelConfig, ModelWeights};
use crate::synth::{RunData, REST};
use crate::tensor::{adamw_step, lr_at, AdamHyper, OptState, ScheduleConfig, Tensor};

/// Training protocol knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub weight_decay: f64,
    pub epochs: usize,
    pub warmup_epochs: usize,
    /// Window length t; must match the model config.
    pub window: usize,
    /// Hemodynamic label shift l.
    pub label_shift: usize,
    /// Inference stride s.
    pub stride: usize,
    /// Windows sampled per run per epoch.
    pub windows_per_run: usize,
    pub lr_start: f64,
    pub lr_peak: f64,
    pub lr_end: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            weight_decay: 0.05,
            epochs: 20,
            warmup_epochs: 2,
            window: 16,
            label_shift: 4,
            stride: 1,
            windows_per_run: 8,
            lr_start: 2e-5,
            lr_peak: 2e-4,
            lr_end: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.label_shift >= self.window {
            return Err(Error::config(alloc::format!(
                "label shift {} must be below window {}",
                self.label_shift,
                self.window
            )));
        }
        if self.stride == 0 {
            return Err(Error::config("stride must be >= 1"));
        }
        if self.warmup_epochs == 0 || self.warmup_epochs >= self.epochs {
            return Err(Error::config("need 0 < warmup_epochs < epochs"));
        }
        if self.batch_size == 0 || self.windows_per_run == 0 {
            return Err(Error::config("batch size and windows per run must be >= 1"));
        }
        Ok(())
    }
}

/// Mean-center and unit-scale every voxel series; zero-variance voxels become
/// all-zero.
pub fn standardize_run(run: &RunData) -> Result<RunData> {
    let dims = run.volume.dims().to_vec();
    let t = dims[0];
    if t < 2 {
        return Err(Error::config("standardization needs at least 2 frames"));
    }
    let sp: usize = dims[1..].iter().product();
    let mut sum = vec![0.0f64; sp];
    let mut sumsq = vec![0.0f64; sp];
    for frame in 0..t {
        let xs = &run.volume.data()[frame * sp..(frame + 1) * sp];
        for (i, &v) in xs.iter().enumerate() {
            sum[i] += v;
            sumsq[i] += v * v;
        }
    }
    let n = t as f64;
    let mut mean = sum;
    let mut inv_sd = sumsq;
    for i in 0..sp {
        mean[i] /= n;
        let var = inv_sd[i] / n - mean[i] * mean[i];
        inv_sd[i] = if var > 0.0 {
            1.0 / crate::math::sqrt(var)
        } else {
            0.0
        };
    }
    let mut volume = run.volume.clone();
    for frame in 0..t {
        let xs = &mut volume.data_mut()[frame * sp..(frame + 1) * sp];
        for (i, v) in xs.iter_mut().enumerate() {
            *v = (*v - mean[i]) * inv_sd[i];
        }
    }
    if !volume.all_finite() {
        return Err(Error::NonFinite {
            op: "standardize_run",
        });
    }
    Ok(RunData {
        volume,
        labels: run.labels.clone(),
        design: run.design.clone(),
    })
}

/// Delay labels by `shift` frames; the exposed early frames become rest.
pub fn shift_labels(labels: &[usize], shift: usize) -> Result<Vec<usize>> {
    if shift >= labels.len() {
        return Err(Error::ShiftOutOfRange {
            shift,
            len: labels.len(),
        });
    }
    let mut out = vec![REST; labels.len()];
    out[shift..].copy_from_slice(&labels[..labels.len() - shift]);
    Ok(out)
}

/// Uniformly random contiguous window of `window` frames and its labels.
pub fn sample_window(
    volume: &Tensor,
    labels: &[usize],
    window: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor, Vec<usize>)> {
    let dims = volume.dims().to_vec();
    let t = dims[0];
    if t < window {
        return Err(Error::RunShorterThanWindow {
            frames: t,
            window,
        });
    }
    let start = rng.random_range(0..=t - window);
    Ok(window_at(volume, labels, window, start))
}

fn window_at(
    volume: &Tensor,
    labels: &[usize],
    window: usize,
    start: usize,
) -> (Tensor, Vec<usize>) {
    let dims = volume.dims().to_vec();
    let sp: usize = dims[1..].iter().product();
    let mut wdims = dims.clone();
    wdims[0] = window;
    let data = volume.data()[start * sp..(start + window) * sp].to_vec();
    let tensor = Tensor::from_vec(&wdims, data).expect("slice matches dims");
    (tensor, labels[start..start + window].to_vec())
}

/// Number of stride-`s` windows of length `t` in a run of `frames` frames.
pub fn window_count(frames: usize, window: usize, stride: usize) -> Result<usize> {
    if frames < window {
        return Err(Error::RunShorterThanWindow { frames, window });
    }
    Ok((frames - window) / stride + 1)
}

#[cfg(feature = "parallel")]
fn try_map_windows<T, F>(items: Vec<T>, f: F) -> Result<Vec<(f64, ModelWeights)>>
where
    T: Send + Sync,
    F: Fn(&T) -> Result<(f64, ModelWeights)> + Send + Sync,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn try_map_windows<T, F>(items: Vec<T>, f: F) -> Result<Vec<(f64, ModelWeights)>>
where
    F: Fn(&T) -> Result<(f64, ModelWeights)>,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
fn try_map_probs<T, F>(items: Vec<T>, f: F) -> Result<Vec<Tensor>>
where
    T: Send + Sync,
    F: Fn(&T) -> Result<Tensor> + Send + Sync,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn try_map_probs<T, F>(items: Vec<T>, f: F) -> Result<Vec<Tensor>>
where
    F: Fn(&T) -> Result<Tensor>,
{
    items.iter().map(f).collect()
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub val_accuracy: f64,
}

pub struct TrainOutput {
    pub weights: ModelWeights,
    pub history: Vec<EpochStats>,
}

fn check_runs(runs: &[RunData], model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<()> {
    for run in runs {
        let dims = run.volume.dims();
        let expect = [dims[0], model_cfg.grid[0], model_cfg.grid[1], model_cfg.grid[2]];
        if dims != expect {
            return Err(Error::shape(
                "train",
                alloc::format!("run {:?} vs model grid {:?}", dims, model_cfg.grid),
            ));
        }
        if dims[0] < cfg.window {
            return Err(Error::RunShorterThanWindow {
                frames: dims[0],
                window: cfg.window,
            });
        }
        if let Some(&bad) = run.labels.iter().find(|&&l| l >= model_cfg.num_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                num_classes: model_cfg.num_classes,
            });
        }
    }
    Ok(())
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Frame accuracy of single-window argmax predictions over sampled windows.
fn sampled_accuracy(
    runs: &[(&Tensor, Vec<usize>)],
    weights: &ModelWeights,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut samples = Vec::new();
    for (volume, labels) in runs {
        for _ in 0..cfg.windows_per_run {
            samples.push(sample_window(volume, labels, cfg.window, rng)?);
        }
    }
    let probs = try_map_probs(samples.iter().map(|(w, _)| w.clone()).collect(), |w| {
        Ok(forward(w, weights, model_cfg)?.0)
    })?;
    let k = model_cfg.num_classes;
    let mut correct = 0usize;
    let mut total = 0usize;
    for ((_, labels), p) in samples.iter().zip(&probs) {
        for (j, &label) in labels.iter().enumerate() {
            let row = &p.data()[j * k..(j + 1) * k];
            let am = argmax(row);
            correct += usize::from(am == label);
            total += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Train on standardized runs. Labels are shifted by `cfg.label_shift`
/// internally; `val_runs` (also standardized) drive the per-epoch accuracy
/// column, falling back to the training runs when empty.
pub fn train(
    runs: &[RunData],
    val_runs: &[RunData],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    model_cfg.validate()?;
    if runs.is_empty() {
        return Err(Error::EmptyInput { op: "train" });
    }
    if cfg.window != model_cfg.window {
        return Err(Error::config(alloc::format!(
            "train window {} vs model window {}",
            cfg.window,
            model_cfg.window
        )));
    }
    check_runs(runs, model_cfg, cfg)?;
    check_runs(val_runs, model_cfg, cfg)?;

    let shifted: Vec<(&Tensor, Vec<usize>)> = runs
        .iter()
        .map(|r| Ok((&r.volume, shift_labels(&r.labels, cfg.label_shift)?)))
        .collect::<Result<_>>()?;
    let val_shifted: Vec<(&Tensor, Vec<usize>)> = val_runs
        .iter()
        .map(|r| Ok((&r.volume, shift_labels(&r.labels, cfg.label_shift)?)))
        .collect::<Result<_>>()?;

    let windows_per_epoch = runs.len() * cfg.windows_per_run;
    let steps_per_epoch = windows_per_epoch.div_ceil(cfg.batch_size);
    let schedule = ScheduleConfig {
        lr_start: cfg.lr_start,
        lr_peak: cfg.lr_peak,
        lr_end: cfg.lr_end,
        warmup_steps: (cfg.warmup_epochs * steps_per_epoch) as u64,
        total_steps: (cfg.epochs * steps_per_epoch) as u64,
    };
    schedule.validate()?;

    let mut weights = init_params(model_cfg, cfg.seed)?;
    let mut opt: Vec<OptState> = weights
        .params()
        .iter()
        .map(|p| OptState::new(p.dims()))
        .collect();
    let hyper = AdamHyper {
        weight_decay: cfg.weight_decay,
        ..AdamHyper::default()
    };
    // The loop stream is independent of the init stream.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..runs.len())
            .flat_map(|i| core::iter::repeat(i).take(cfg.windows_per_run))
            .collect();
        shuffle(&mut order, &mut rng);

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let samples: Vec<(Tensor, Vec<usize>)> = chunk
                .iter()
                .map(|&ri| {
                    let (volume, labels) = &shifted[ri];
                    sample_window(volume, labels, cfg.window, &mut rng)
                })
                .collect::<Result<_>>()?;

            let results = try_map_windows(samples, |(window, labels)| {
                let (_, cache) = forward(window, &weights, model_cfg)?;
                let grads = backward(&cache, &weights, model_cfg, labels)?;
                Ok((grads.loss, grads.params))
            })?;

            let n = results.len() as f64;
            let batch_loss: f64 = results.iter().map(|(l, _)| l).sum::<f64>() / n;
            if !batch_loss.is_finite() {
                return Err(Error::TrainDiverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            let mut grad_acc = ModelWeights::zeros(model_cfg)?;
            for (_, g) in &results {
                grad_acc.add_scaled(g, 1.0);
            }
            grad_acc.scale(1.0 / n);

            let lr = lr_at(step, &schedule)?;
            for ((param, grad), state) in weights
                .params_mut()
                .into_iter()
                .zip(grad_acc.params())
                .zip(opt.iter_mut())
            {
                adamw_step(param, grad, state, lr, &hyper)?;
            }
            step += 1;
            loss_sum += batch_loss;
            batches += 1;
        }

        let eval_set = if val_shifted.is_empty() {
            &shifted
        } else {
            &val_shifted
        };
        let val_accuracy = sampled_accuracy(eval_set, &weights, model_cfg, cfg, &mut rng)?;
        history.push(EpochStats {
            mean_loss: loss_sum / batches as f64,
            val_accuracy,
        });
    }

    Ok(TrainOutput { weights, history })
}

/// Per-frame outcome of voting inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Majority-vote label per frame.
    pub labels: Vec<usize>,
    /// T×K mean of the probability rows contributed by covering windows.
    pub mean_probs: Tensor,
    /// T×K vote counts (row-major).
    pub tallies: Vec<u32>,
    /// Windows covering each frame.
    pub coverage: Vec<u32>,
}

/// Slide windows at the given stride, give every covered frame one argmax
/// vote and one probability row per window, then resolve by majority.
pub fn predict_run(
    weights: &ModelWeights,
    model_cfg: &ModelConfig,
    volume: &Tensor,
    stride: usize,
) -> Result<Prediction> {
    model_cfg.validate()?;
    if stride == 0 {
        return Err(Error::config("stride must be >= 1"));
    }
    let t = volume.dims()[0];
    let window = model_cfg.window;
    let n_windows = window_count(t, window, stride)?;
    let k = model_cfg.num_classes;

    let starts: Vec<usize> = (0..n_windows).map(|i| i * stride).collect();
    let dummy_labels = vec![0usize; t];
    let windows: Vec<Tensor> = starts
        .iter()
        .map(|&s| window_at(volume, &dummy_labels, window, s).0)
        .collect();
    let probs = try_map_probs(windows, |w| Ok(forward(w, weights, model_cfg)?.0))?;

    let mut tallies = vec![0u32; t * k];
    let mut prob_sums = vec![0.0f64; t * k];
    let mut coverage = vec![0u32; t];
    for (&start, p) in starts.iter().zip(&probs) {
        for j in 0..window {
            let frame = start + j;
            let row = &p.data()[j * k..(j + 1) * k];
            tallies[frame * k + argmax(row)] += 1;
            for (dst, &v) in prob_sums[frame * k..(frame + 1) * k].iter_mut().zip(row) {
                *dst += v;
            }
            coverage[frame] += 1;
        }
    }
    let mut mean = prob_sums;
    for frame in 0..t {
        let c = coverage[frame] as f64;
        for v in &mut mean[frame * k..(frame + 1) * k] {
            *v /= c;
        }
    }
    let mean_probs = Tensor::from_vec(&[t, k], mean)?;
    let mut labels = Vec::with_capacity(t);
    for frame in 0..t {
        labels.push(majority_vote(
            &tallies[frame * k..(frame + 1) * k],
            &mean_probs.data()[frame * k..(frame + 1) * k],
        )?);
    }
    Ok(Prediction {
        labels,
        mean_probs,
        tallies,
        coverage,
    })
}

/// Argmax of the tallies; ties break toward the larger mean probability, then
/// the smaller class index.
pub fn majority_vote(tallies: &[u32], mean_probs: &[f64]) -> Result<usize> {
    if tallies.iter().all(|&t| t == 0) {
        return Err(Error::NoVotes);
    }
    let mut best = 0usize;
    for k in 1..tallies.len() {
        let better = tallies[k] > tallies[best]
            || (tallies[k] == tallies[best] && mean_probs[k] > mean_probs[best]);
        if better {
            best = k;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{build_design, render_run, DesignKind, Phantom, TaskDesign};

    fn small_run(noise: f64, seed: u64) -> RunData {
        let design = build_design(DesignKind::Block, 1);
        let phantom = Phantom::default_for([16, 20, 16], 7, noise).unwrap();
        render_run(&design, &phantom, seed).unwrap()
    }

    #[test]
    fn standardize_constant_voxel_is_zero() {
        let design = TaskDesign {
            tr_s: 0.72,
            frames: 4,
            conditions: vec!["rest".into()],
            events: vec![],
        };
        let volume = Tensor::filled(&[4, 2, 2, 2], 7.0);
        let run = RunData {
            volume,
            labels: vec![0; 4],
            design,
        };
        let out = standardize_run(&run).unwrap();
        assert!(out.volume.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardize_yields_zero_mean_unit_sd_and_is_idempotent() {
        let run = small_run(1.0, 3);
        let out = standardize_run(&run).unwrap();
        let dims = out.volume.dims().to_vec();
        let t = dims[0];
        let sp: usize = dims[1..].iter().product();
        for vox in [0usize, sp / 3, sp - 1] {
            let series: Vec<f64> = (0..t).map(|f| out.volume.data()[f * sp + vox]).collect();
            let mean = series.iter().sum::<f64>() / t as f64;
            let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t as f64;
            assert!(mean.abs() < 1e-10);
            assert!((var.sqrt() - 1.0).abs() < 1e-10);
        }
        let again = standardize_run(&out).unwrap();
        for (a, b) in again.volume.data().iter().zip(out.volume.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn shift_labels_rules() {
        assert_eq!(
            shift_labels(&[0, 1, 1, 0], 0).unwrap(),
            vec![0, 1, 1, 0]
        );
        assert_eq!(
            shift_labels(&[0, 1, 1, 0], 1).unwrap(),
            vec![0, 0, 1, 1]
        );
        let labels = build_design(DesignKind::Block, 0).labels();
        let shifted = shift_labels(&labels, 4).unwrap();
        assert_eq!(&shifted[..4], &[REST; 4]);
        assert_eq!(shifted[4..], labels[..280]);
        assert!(matches!(
            shift_labels(&[0, 1], 2),
            Err(Error::ShiftOutOfRange { .. })
        ));
    }

    #[test]
    fn sample_window_degenerate_and_slice_semantics() {
        let volume = Tensor::from_vec(&[3, 1, 1, 2], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let labels = vec![5usize, 6, 7];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // T == t forces start 0.
        let (w, l) = sample_window(&volume, &labels, 3, &mut rng).unwrap();
        assert_eq!(w.data(), volume.data());
        assert_eq!(l, labels);
        assert!(matches!(
            sample_window(&volume, &labels, 4, &mut rng),
            Err(Error::RunShorterThanWindow { .. })
        ));
    }

    #[test]
    fn sample_window_starts_are_uniform() {
        // Chi-square style check with a fixed seed: all starts observed and
        // every bin within 4 sigma of the binomial expectation.
        let t_frames = 284;
        let window = 16;
        let volume = Tensor::zeros(&[t_frames, 1, 1, 1]);
        let bins = t_frames - window + 1;
        let draws = 10_000usize;
        let mut counts = vec![0usize; bins];
        // Labels identify the start directly.
        let labels: Vec<usize> = (0..t_frames).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..draws {
            let (_, l) = sample_window(&volume, &labels, window, &mut rng).unwrap();
            counts[l[0]] += 1;
        }
        let p = 1.0 / bins as f64;
        let expect = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (start, &c) in counts.iter().enumerate() {
            assert!(c > 0, "start {start} never drawn");
            assert!(
                (c as f64 - expect).abs() <= 4.0 * sigma,
                "start {start}: {c} vs {expect}"
            );
        }
    }

    #[test]
    fn window_count_formula() {
        assert_eq!(window_count(284, 16, 1).unwrap(), 269);
        assert_eq!(window_count(253, 16, 1).unwrap(), 238);
        assert_eq!(window_count(16, 16, 1).unwrap(), 1);
        assert_eq!(window_count(20, 16, 3).unwrap(), 2);
        assert!(window_count(10, 16, 1).is_err());
    }

    #[test]
    fn majority_vote_rules_and_brute_force_oracle() {
        assert_eq!(majority_vote(&[5, 0, 0], &[0.9, 0.05, 0.05]).unwrap(), 0);
        assert_eq!(majority_vote(&[3, 3, 0], &[0.2, 0.5, 0.3]).unwrap(), 1);
        assert!(matches!(
            majority_vote(&[0, 0], &[0.5, 0.5]),
            Err(Error::NoVotes)
        ));

        // Randomized agreement with a literal restatement of the rule.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let k = rng.random_range(2..6usize);
            let tallies: Vec<u32> = (0..k).map(|_| rng.random_range(0..5u32)).collect();
            if tallies.iter().all(|&t| t == 0) {
                continue;
            }
            let probs: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
            let got = majority_vote(&tallies, &probs).unwrap();
            let oracle = (0..k)
                .max_by(|&a, &b| {
                    (tallies[a], probs[a])
                        .partial_cmp(&(tallies[b], probs[b]))
                        .unwrap()
                        // Prefer the smaller index on full ties.
                        .then(b.cmp(&a))
                })
                .unwrap();
            assert_eq!(got, oracle, "tallies {tallies:?} probs {probs:?}");
        }
    }

    #[test]
    fn coverage_matches_closed_form() {
        let cfg = ModelConfig {
            window: 4,
            embed_channels: 2,
            stage_widths: vec![4],
            blocks_per_stage: 1,
            num_classes: 2,
            reduction: 2,
            grid: [3, 3, 3],
        };
        let weights = init_params(&cfg, 1).unwrap();
        let t = 11usize;
        let volume = Tensor::filled(&[t, 3, 3, 3], 0.1);
        let pred = predict_run(&weights, &cfg, &volume, 1).unwrap();
        let mut total = 0u32;
        for (i, &c) in pred.coverage.iter().enumerate() {
            let expect = (i + 1).min(4).min(t - 4 + 1).min(t - i) as u32;
            assert_eq!(c, expect, "frame {i}");
            let votes: u32 = pred.tallies[i * 2..(i + 1) * 2].iter().sum();
            assert_eq!(votes, c);
            total += c;
        }
        assert_eq!(total as usize, 4 * (t - 4 + 1));
    }

    #[test]
    fn prediction_with_constant_model_is_bias_argmax() {
        // Zero weights with a bias nudge on class 1: every window emits the
        // same row, so voting must degenerate to plain argmax.
        let cfg = ModelConfig {
            window: 4,
            embed_channels: 2,
            stage_widths: vec![4],
            blocks_per_stage: 1,
            num_classes: 3,
            reduction: 2,
            grid: [3, 3, 3],
        };
        let mut weights = ModelWeights::zeros(&cfg).unwrap();
        weights.head.b.data_mut()[1] = 1.0;
        let volume = Tensor::filled(&[9, 3, 3, 3], 0.5);
        let pred = predict_run(&weights, &cfg, &volume, 1).unwrap();
        assert!(pred.labels.iter().all(|&l| l == 1));
        // T == t: single window, one vote per frame.
        let volume = Tensor::filled(&[4, 3, 3, 3], 0.5);
        let pred = predict_run(&weights, &cfg, &volume, 1).unwrap();
        assert!(pred.coverage.iter().all(|&c| c == 1));
    }

    #[test]
    fn train_history_is_deterministic_and_sized() {
        let run = standardize_run(&small_run(0.5, 5)).unwrap();
        let model_cfg = ModelConfig {
            window: 8,
            embed_channels: 4,
            stage_widths: vec![4, 8],
            blocks_per_stage: 1,
            num_classes: 7,
            reduction: 4,
            grid: [16, 20, 16],
        };
        let cfg = TrainConfig {
            epochs: 3,
            warmup_epochs: 1,
            window: 8,
            windows_per_run: 4,
            batch_size: 4,
            seed: 11,
            ..TrainConfig::default()
        };
        let a = train(core::slice::from_ref(&run), &[], &model_cfg, &cfg).unwrap();
        let b = train(core::slice::from_ref(&run), &[], &model_cfg, &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.history.len(), 3);
    }
}
