//! Synthetic ground truth: task timing, the canonical double-gamma response
//! kernel, and phantom runs with planted condition-specific activation
//! regions.

use alloc::string::String;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Tensor;

pub const REST: usize = 0;

/// One stimulus interval: `condition` is active on frames
/// `[onset, onset + duration)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskEvent {
    pub condition: usize,
    pub onset: usize,
    pub duration: usize,
}

/// The ground-truth stimulus sequence of one run. Condition index 0 is rest;
/// rest frames carry no event.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDesign {
    /// Seconds per frame.
    pub tr_s: f64,
    /// Frames in the run (T).
    pub frames: usize,
    pub conditions: Vec<String>,
    pub events: Vec<TaskEvent>,
}

impl TaskDesign {
    /// Check every structural invariant: known non-rest conditions, events in
    /// range, and no overlap.
    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(Error::config("design needs at least the rest condition"));
        }
        if self.tr_s <= 0.0 {
            return Err(Error::config("tr_s must be positive"));
        }
        for ev in &self.events {
            if ev.condition == REST || ev.condition >= self.conditions.len() {
                return Err(Error::UnknownCondition {
                    index: ev.condition,
                });
            }
            if ev.duration == 0 || ev.onset + ev.duration > self.frames {
                return Err(Error::config(alloc::format!(
                    "event at {} len {} exceeds run of {} frames",
                    ev.onset,
                    ev.duration,
                    self.frames
                )));
            }
        }
        let mut sorted: Vec<&TaskEvent> = self.events.iter().collect();
        sorted.sort_by_key(|e| e.onset);
        for pair in sorted.windows(2) {
            if pair[0].onset + pair[0].duration > pair[1].onset {
                return Err(Error::config(alloc::format!(
                    "events at {} and {} overlap",
                    pair[0].onset,
                    pair[1].onset
                )));
            }
        }
        Ok(())
    }

    /// Per-frame condition labels; uncovered frames are rest.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = vec![REST; self.frames];
        for ev in &self.events {
            for f in ev.onset..ev.onset + ev.duration {
                out[f] = ev.condition;
            }
        }
        out
    }
}

/// Peak-normalized double-gamma response kernel sampled every `tr_s` seconds
/// over `duration_s`: h(τ) = τ⁵e^(−τ)/Γ(6) − τ¹⁵e^(−τ)/(6·Γ(16)).
pub fn canonical_hrf(tr_s: f64, duration_s: f64) -> Vec<f64> {
    debug_assert!(tr_s > 0.0);
    let n = (duration_s / tr_s).ceil() as usize;
    let mut kernel: Vec<f64> = (0..n.max(1))
        .map(|k| double_gamma(k as f64 * tr_s))
        .collect();
    let peak = kernel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak > 0.0 {
        for v in &mut kernel {
            *v /= peak;
        }
    }
    kernel
}

/// Unnormalized double-gamma with delays 6/16, unit dispersions, undershoot
/// ratio 1/6.
pub fn double_gamma(tau: f64) -> f64 {
    const GAMMA_6: f64 = 120.0;
    const GAMMA_16: f64 = 1_307_674_368_000.0;
    if tau < 0.0 {
        return 0.0;
    }
    let e = math::exp(-tau);
    let t5 = tau * tau * tau * tau * tau;
    let t15 = t5 * t5 * t5;
    t5 * e / GAMMA_6 - t15 * e / (6.0 * GAMMA_16)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Block,
    Event,
}

const MOTOR_CONDITIONS: [&str; 7] = [
    "rest",
    "cue",
    "left_hand",
    "right_hand",
    "left_foot",
    "right_foot",
    "tongue",
];
const GAMBLING_CONDITIONS: [&str; 4] = ["rest", "win", "loss", "neutral"];

const BLOCK_TASK_FRAMES: usize = 17;
const BLOCK_CUE_FRAMES: usize = 4;
const BLOCK_REST_FRAMES: usize = 21;
const BLOCK_LEAD_IN: usize = 11;
const EVENT_TRIAL_FRAMES: usize = 5;
const EVENT_REST_FRAMES: usize = 21;
const EVENT_LEAD_IN: usize = 9;

/// Build a motor-like block design (284 frames) or a gambling-like
/// event-related design (253 frames), with the block/trial ordering shuffled
/// by `seed`.
pub fn build_design(kind: DesignKind, seed: u64) -> TaskDesign {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        DesignKind::Block => build_block_design(&mut rng),
        DesignKind::Event => build_event_design(&mut rng),
    }
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

fn build_block_design(rng: &mut ChaCha8Rng) -> TaskDesign {
    // 13 blocks of 21 frames: 10 task blocks (cue 4 + task 17, two per motor
    // condition) and 3 rest blocks, after an 11-frame rest lead-in.
    const REST_BLOCK: usize = usize::MAX;
    let mut blocks: Vec<usize> = (2..7).flat_map(|c| [c, c]).collect();
    blocks.extend([REST_BLOCK; 3]);
    loop {
        shuffle(&mut blocks, rng);
        let ok = blocks.windows(2).all(|p| p[0] == REST_BLOCK || p[0] != p[1]);
        if ok {
            break;
        }
    }
    let mut events = Vec::new();
    let mut at = BLOCK_LEAD_IN;
    for &b in &blocks {
        if b == REST_BLOCK {
            at += BLOCK_REST_FRAMES;
            continue;
        }
        events.push(TaskEvent {
            condition: 1, // cue
            onset: at,
            duration: BLOCK_CUE_FRAMES,
        });
        events.push(TaskEvent {
            condition: b,
            onset: at + BLOCK_CUE_FRAMES,
            duration: BLOCK_TASK_FRAMES,
        });
        at += BLOCK_CUE_FRAMES + BLOCK_TASK_FRAMES;
    }
    let design = TaskDesign {
        tr_s: 0.72,
        frames: at,
        conditions: MOTOR_CONDITIONS.iter().map(|s| s.to_string()).collect(),
        events,
    };
    debug_assert_eq!(design.frames, 284);
    design
}

fn build_event_design(rng: &mut ChaCha8Rng) -> TaskDesign {
    // 4 temporal blocks of 8 five-frame trials (6 primary outcomes plus one
    // of each other outcome), each followed by a 21-frame rest gap, after a
    // 9-frame rest lead-in. Two blocks are reward-primary, two are
    // loss-primary.
    let (win, loss, neutral) = (1usize, 2usize, 3usize);
    let mut primaries = [win, win, loss, loss];
    shuffle(&mut primaries, rng);
    let mut events = Vec::new();
    let mut at = EVENT_LEAD_IN;
    for &primary in &primaries {
        let other = if primary == win { loss } else { win };
        let mut trials = vec![primary; 6];
        trials.push(other);
        trials.push(neutral);
        shuffle(&mut trials, rng);
        for &cond in &trials {
            events.push(TaskEvent {
                condition: cond,
                onset: at,
                duration: EVENT_TRIAL_FRAMES,
            });
            at += EVENT_TRIAL_FRAMES;
        }
        at += EVENT_REST_FRAMES;
    }
    let design = TaskDesign {
        tr_s: 0.72,
        frames: at,
        conditions: GAMBLING_CONDITIONS.iter().map(|s| s.to_string()).collect(),
        events,
    };
    debug_assert_eq!(design.frames, 253);
    design
}

/// Boxcar indicator of `condition` convolved with `kernel`, truncated to the
/// run length.
pub fn ideal_response(design: &TaskDesign, condition: usize, kernel: &[f64]) -> Result<Vec<f64>> {
    if condition >= design.conditions.len() {
        return Err(Error::UnknownCondition { index: condition });
    }
    let labels = design.labels();
    let indicator: Vec<f64> = labels
        .iter()
        .map(|&l| if l == condition { 1.0 } else { 0.0 })
        .collect();
    Ok(convolve_truncated(&indicator, kernel))
}

/// Linear convolution of `series` with `kernel`, truncated to the length of
/// `series`.
pub fn convolve_truncated(series: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mut out = vec![0.0; n];
    for (i, &s) in series.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        for (k, &kv) in kernel.iter().enumerate() {
            if i + k >= n {
                break;
            }
            out[i + k] += s * kv;
        }
    }
    out
}

/// One planted activation region: an ellipsoid tied to a condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Roi {
    pub condition: usize,
    pub center: [f64; 3],
    pub radii: [f64; 3],
    pub amplitude: f64,
}

impl Roi {
    pub fn contains(&self, voxel: [usize; 3]) -> bool {
        let mut acc = 0.0;
        for a in 0..3 {
            let d = (voxel[a] as f64 - self.center[a]) / self.radii[a];
            acc += d * d;
        }
        acc <= 1.0
    }

    /// Same ellipsoid with every radius grown by `by` voxels.
    pub fn dilated(&self, by: f64) -> Roi {
        let mut r = self.clone();
        for a in 0..3 {
            r.radii[a] += by;
        }
        r
    }
}

/// Synthetic anatomy: grid extents, baseline intensity, noise level, and the
/// per-condition regions.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub grid: [usize; 3],
    pub baseline: f64,
    pub noise_sd: f64,
    pub rois: Vec<Roi>,
}

impl Phantom {
    pub fn validate(&self) -> Result<()> {
        if self.grid.iter().any(|&e| e == 0) {
            return Err(Error::config("phantom grid extents must be positive"));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::config("noise_sd must be >= 0"));
        }
        for roi in &self.rois {
            if roi.amplitude <= 0.0 {
                return Err(Error::config("ROI amplitudes must be positive"));
            }
            for a in 0..3 {
                if roi.radii[a] <= 0.0
                    || roi.center[a] - roi.radii[a] < 0.0
                    || roi.center[a] + roi.radii[a] > (self.grid[a] - 1) as f64
                {
                    return Err(Error::config(alloc::format!(
                        "ROI for condition {} leaves the grid",
                        roi.condition
                    )));
                }
            }
        }
        Ok(())
    }

    /// Default phantom: one ellipsoid per non-rest condition at fixed
    /// fractional positions, baseline 100, amplitude 3. Radii step from 2 to
    /// 3 voxels across conditions so each region also has a distinct extent;
    /// a convolutional encoder that pools globally is close to translation
    /// invariant, so region size (not just position) must carry condition
    /// identity.
    pub fn default_for(grid: [usize; 3], n_conditions: usize, noise_sd: f64) -> Result<Phantom> {
        // Fractional centers; enough slots for the motor task's six states.
        const SLOTS: [[f64; 3]; 8] = [
            [0.25, 0.25, 0.30],
            [0.75, 0.25, 0.30],
            [0.25, 0.75, 0.30],
            [0.75, 0.75, 0.30],
            [0.30, 0.50, 0.72],
            [0.70, 0.50, 0.72],
            [0.50, 0.25, 0.72],
            [0.50, 0.75, 0.72],
        ];
        let wanted = n_conditions.saturating_sub(1);
        if wanted > SLOTS.len() {
            return Err(Error::config("default phantom supports at most 8 regions"));
        }
        let rois = (0..wanted)
            .map(|i| {
                let r = if wanted > 1 {
                    2.0 + i as f64 / (wanted - 1) as f64
                } else {
                    2.5
                };
                Roi {
                    condition: i + 1,
                    center: [
                        SLOTS[i][0] * (grid[0] - 1) as f64,
                        SLOTS[i][1] * (grid[1] - 1) as f64,
                        SLOTS[i][2] * (grid[2] - 1) as f64,
                    ],
                    radii: [r; 3],
                    amplitude: 3.0,
                }
            })
            .collect();
        let phantom = Phantom {
            grid,
            baseline: 100.0,
            noise_sd,
            rois,
        };
        phantom.validate()?;
        Ok(phantom)
    }

    /// Voxels inside the region planted for `condition`, in row-major order.
    pub fn roi_voxels(&self, condition: usize) -> Vec<[usize; 3]> {
        self.rois
            .iter()
            .filter(|r| r.condition == condition)
            .flat_map(|r| roi_voxel_list(r, self.grid))
            .collect()
    }
}

fn roi_voxel_list(roi: &Roi, grid: [usize; 3]) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for d in 0..grid[0] {
        for h in 0..grid[1] {
            for w in 0..grid[2] {
                if roi.contains([d, h, w]) {
                    out.push([d, h, w]);
                }
            }
        }
    }
    out
}

/// One rendered run: the 4D volume, its per-frame labels, and the design that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunData {
    pub volume: Tensor,
    pub labels: Vec<usize>,
    pub design: TaskDesign,
}

/// Render a phantom run: baseline + planted responses + Gaussian noise, fully
/// determined by the seed.
pub fn render_run(design: &TaskDesign, phantom: &Phantom, seed: u64) -> Result<RunData> {
    design.validate()?;
    phantom.validate()?;
    let kernel = canonical_hrf(design.tr_s, 32.0);
    let t = design.frames;
    let [gd, gh, gw] = phantom.grid;
    let sp = gd * gh * gw;
    let mut volume = Tensor::filled(&[t, gd, gh, gw], phantom.baseline);

    if phantom.noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, phantom.noise_sd).expect("validated noise_sd");
        for v in volume.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    for roi in &phantom.rois {
        let response = ideal_response(design, roi.condition, &kernel)?;
        let voxels = roi_voxel_list(roi, phantom.grid);
        for frame in 0..t {
            let add = roi.amplitude * response[frame];
            if add == 0.0 {
                continue;
            }
            let base = frame * sp;
            for &[d, h, w] in &voxels {
                volume.data_mut()[base + (d * gh + h) * gw + w] += add;
            }
        }
    }

    Ok(RunData {
        volume,
        labels: design.labels(),
        design: design.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hrf_starts_at_zero_and_decays() {
        let kernel = canonical_hrf(0.72, 32.0);
        assert_eq!(kernel[0], 0.0);
        let peak = kernel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((peak - 1.0).abs() < 1e-15);
        assert!(kernel.last().unwrap().abs() < 0.01);
    }

    #[test]
    fn hrf_peak_matches_dense_oracle() {
        // Dense 1 ms sweep of the double gamma locates the true peak.
        let mut best_tau = 0.0;
        let mut best = f64::NEG_INFINITY;
        let mut tau = 0.0;
        while tau < 32.0 {
            let v = double_gamma(tau);
            if v > best {
                best = v;
                best_tau = tau;
            }
            tau += 0.001;
        }
        assert!((best_tau - 5.0).abs() < 0.05, "peak at {best_tau}");

        let kernel = canonical_hrf(0.72, 32.0);
        let argmax = kernel
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 7); // 7 * 0.72 s = 5.04 s
    }

    #[test]
    fn block_design_matches_table_constants() {
        let design = build_design(DesignKind::Block, 7);
        assert_eq!(design.frames, 284);
        design.validate().unwrap();
        let labels = design.labels();
        // Two 17-frame blocks per motor-like condition.
        for cond in 2..7 {
            let count = labels.iter().filter(|&&l| l == cond).count();
            assert_eq!(count, 34, "condition {cond}");
        }
        // Ten 4-frame cue events.
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 40);
        // Rest covers the lead-in plus three rest blocks.
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 11 + 3 * 21);
    }

    #[test]
    fn event_design_matches_table_constants() {
        let design = build_design(DesignKind::Event, 7);
        assert_eq!(design.frames, 253);
        design.validate().unwrap();
        assert_eq!(design.events.len(), 32);
        assert!(design.events.iter().all(|e| e.duration == 5));
        let labels = design.labels();
        assert_eq!(labels.iter().filter(|&&l| l == 3).count(), 4 * 5); // neutral
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 9 + 4 * 21);
    }

    #[test]
    fn designs_are_seeded() {
        let a = build_design(DesignKind::Block, 1);
        let b = build_design(DesignKind::Block, 1);
        assert_eq!(a, b);
        let c = build_design(DesignKind::Block, 2);
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn block_design_never_repeats_condition_back_to_back() {
        for seed in 0..20 {
            let design = build_design(DesignKind::Block, seed);
            let mut task_events: Vec<&TaskEvent> =
                design.events.iter().filter(|e| e.condition != 1).collect();
            task_events.sort_by_key(|e| e.onset);
            for pair in task_events.windows(2) {
                // Adjacent without an intervening rest block (21-frame gap
                // means cue + task only).
                let gap = pair[1].onset - (pair[0].onset + pair[0].duration);
                if gap == BLOCK_CUE_FRAMES {
                    assert_ne!(pair[0].condition, pair[1].condition, "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn ideal_response_impulse_is_shifted_kernel() {
        let design = TaskDesign {
            tr_s: 0.72,
            frames: 60,
            conditions: vec!["rest".into(), "a".into()],
            events: vec![TaskEvent {
                condition: 1,
                onset: 10,
                duration: 1,
            }],
        };
        let kernel = canonical_hrf(0.72, 32.0);
        let resp = ideal_response(&design, 1, &kernel).unwrap();
        assert_eq!(resp[10], kernel[0]);
        assert_eq!(resp[10], 0.0); // h(0) = 0
        for k in 0..kernel.len().min(50) {
            assert_eq!(resp[10 + k], kernel[k]);
        }
        for v in &resp[..10] {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn ideal_response_all_rest_is_zero() {
        let design = TaskDesign {
            tr_s: 0.72,
            frames: 30,
            conditions: vec!["rest".into(), "a".into()],
            events: vec![],
        };
        let kernel = canonical_hrf(0.72, 32.0);
        let resp = ideal_response(&design, 1, &kernel).unwrap();
        assert!(resp.iter().all(|&v| v == 0.0));
        assert!(matches!(
            ideal_response(&design, 5, &kernel),
            Err(Error::UnknownCondition { .. })
        ));
    }

    #[test]
    fn ideal_response_is_linear_over_disjoint_events() {
        let kernel = canonical_hrf(0.72, 32.0);
        let base = TaskDesign {
            tr_s: 0.72,
            frames: 80,
            conditions: vec!["rest".into(), "a".into()],
            events: vec![],
        };
        let ev1 = TaskEvent {
            condition: 1,
            onset: 5,
            duration: 4,
        };
        let ev2 = TaskEvent {
            condition: 1,
            onset: 40,
            duration: 6,
        };
        let mut d1 = base.clone();
        d1.events = vec![ev1.clone()];
        let mut d2 = base.clone();
        d2.events = vec![ev2.clone()];
        let mut d12 = base;
        d12.events = vec![ev1, ev2];
        let r1 = ideal_response(&d1, 1, &kernel).unwrap();
        let r2 = ideal_response(&d2, 1, &kernel).unwrap();
        let r12 = ideal_response(&d12, 1, &kernel).unwrap();
        for i in 0..80 {
            assert!((r12[i] - (r1[i] + r2[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn condition_indicators_partition_non_rest_frames() {
        let design = build_design(DesignKind::Block, 3);
        let labels = design.labels();
        for (i, &l) in labels.iter().enumerate() {
            let covered: usize = (1..design.conditions.len())
                .map(|c| usize::from(labels[i] == c))
                .sum();
            assert_eq!(covered, usize::from(l != REST));
        }
    }

    #[test]
    fn default_phantom_is_valid_and_disjoint() {
        let phantom = Phantom::default_for([20, 24, 20], 7, 1.0).unwrap();
        assert_eq!(phantom.rois.len(), 6);
        let mut seen = alloc::collections::BTreeSet::new();
        for roi in &phantom.rois {
            for v in phantom.roi_voxels(roi.condition) {
                assert!(seen.insert(v), "voxel {v:?} in two regions");
            }
        }
        assert!(!seen.is_empty());
    }

    #[test]
    fn render_noise_free_run_is_exact() {
        let design = build_design(DesignKind::Block, 5);
        let phantom = Phantom::default_for([16, 20, 16], 7, 0.0).unwrap();
        let run = render_run(&design, &phantom, 11).unwrap();
        let kernel = canonical_hrf(design.tr_s, 32.0);
        let sp = 16 * 20 * 16;

        // A voxel inside the tongue region follows baseline + 3 * response.
        let roi = phantom.rois.iter().find(|r| r.condition == 6).unwrap();
        let resp = ideal_response(&design, 6, &kernel).unwrap();
        let v = phantom.roi_voxels(6)[0];
        let idx = (v[0] * 20 + v[1]) * 16 + v[2];
        for frame in 0..design.frames {
            let got = run.volume.data()[frame * sp + idx];
            let want = 100.0 + roi.amplitude * resp[frame];
            assert!((got - want).abs() < 1e-12);
        }

        // A voxel outside every region stays at baseline.
        let outside = (0..sp)
            .find(|i| {
                let vox = [i / (20 * 16), (i / 16) % 20, i % 16];
                phantom.rois.iter().all(|r| !r.contains(vox))
            })
            .unwrap();
        for frame in 0..design.frames {
            assert_eq!(run.volume.data()[frame * sp + outside], 100.0);
        }

        assert_eq!(run.labels, design.labels());
    }

    #[test]
    fn render_is_seed_deterministic() {
        let design = build_design(DesignKind::Event, 2);
        let phantom = Phantom::default_for([16, 20, 16], 4, 1.0).unwrap();
        let a = render_run(&design, &phantom, 33).unwrap();
        let b = render_run(&design, &phantom, 33).unwrap();
        assert_eq!(a, b);
        let c = render_run(&design, &phantom, 34).unwrap();
        assert_ne!(a.volume, c.volume);
    }
}
