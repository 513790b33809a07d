//! Scratch sweep driver: block-design analog with configurable architecture
//! and sampling density. Args: c widths.. -- wpr subjects test_subjects [amp]
use std::time::Instant;
use vwt_core::model::ModelConfig;
use vwt_core::pipeline::{predict_run, shift_labels, standardize_run, train, TrainConfig};
use vwt_core::synth::{build_design, canonical_hrf, render_run, DesignKind, Phantom};
use vwt_core::metrics::{confusion, class_scores, hrf_similarity};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut it = args.split(|a| a == "--");
    let arch: Vec<usize> = it.next().unwrap().iter().map(|a| a.parse().unwrap()).collect();
    let rest: Vec<usize> = it.next().unwrap().iter().map(|a| a.parse().unwrap()).collect();
    let (c, widths) = (arch[0], arch[1..].to_vec());
    let (wpr, n_train, n_test) = (rest[0], rest[1], rest[2]);
    let amp = rest.get(3).copied().unwrap_or(3) as f64;

    let t0 = Instant::now();
    let seed = 7u64;
    let design = build_design(DesignKind::Block, seed);
    let mut phantom = Phantom::default_for([20, 24, 20], design.conditions.len(), 1.0).unwrap();
    for r in &mut phantom.rois { r.amplitude = amp; }
    let runs: Vec<_> = (0..n_train + n_test)
        .map(|i| standardize_run(&render_run(&design, &phantom, seed.wrapping_add(1 + i as u64)).unwrap()).unwrap())
        .collect();
    let (train_runs, test_runs) = runs.split_at(n_train);
    let model_cfg = ModelConfig {
        embed_channels: c,
        stage_widths: widths.clone(),
        ..ModelConfig::with_defaults(design.conditions.len())
    };
    let train_cfg = TrainConfig { seed, windows_per_run: wpr, ..TrainConfig::default() };
    println!("arch c={c} widths={widths:?} wpr={wpr} train={n_train} amp={amp}");
    let out = train(train_runs, test_runs, &model_cfg, &train_cfg).unwrap();
    for (e, st) in out.history.iter().enumerate() {
        if e % 2 == 1 || e + 1 == out.history.len() {
            println!("  epoch {e:2}: loss {:.4} val_acc {:.4} [{:.0}s]", st.mean_loss, st.val_accuracy, t0.elapsed().as_secs_f64());
        }
    }
    let kernel = canonical_hrf(design.tr_s, 32.0);
    let mut accs = vec![];
    let mut min_sim = f64::INFINITY;
    for run in test_runs {
        let pred = predict_run(&out.weights, &model_cfg, &run.volume, 1).unwrap();
        let truth = shift_labels(&run.labels, train_cfg.label_shift).unwrap();
        let sc = class_scores(&confusion(&pred.labels, &truth, model_cfg.num_classes).unwrap());
        let sims = hrf_similarity(&pred.labels, &truth, &run.design, &kernel).unwrap();
        for s in &sims { min_sim = min_sim.min(s.unwrap_or(f64::NAN)); }
        accs.push(sc.accuracy);
    }
    println!("RESULT acc {:.4} min_sim {min_sim:.3} elapsed {:.0}s", accs.iter().sum::<f64>()/accs.len() as f64, t0.elapsed().as_secs_f64());
}
