//! Rough throughput probe for the conv kernels (not part of the test suite).
use std::time::Instant;
use vwt_core::tensor::{conv3d, conv3d_vjp, Tensor};

fn bench(c_in: usize, c_out: usize, d: usize, h: usize, w: usize, k: usize, reps: usize) {
    let x = Tensor::filled(&[c_in, d, h, w], 0.5);
    let wt = Tensor::filled(&[c_out, c_in, k, k, k], 0.01);
    let b = Tensor::zeros(&[c_out]);
    let t0 = Instant::now();
    let mut y = None;
    for _ in 0..reps {
        y = Some(conv3d(&x, &wt, &b, 1, 1).unwrap());
    }
    let fwd = t0.elapsed().as_secs_f64() / reps as f64;
    let up = y.unwrap();
    let t1 = Instant::now();
    for _ in 0..reps {
        conv3d_vjp(&x, &wt, 1, 1, &up).unwrap();
    }
    let bwd = t1.elapsed().as_secs_f64() / reps as f64;
    let macs = (c_out * c_in * k * k * k * up.numel() / c_out) as f64;
    println!(
        "{c_in}->{c_out} {d}x{h}x{w} k{k}: fwd {:.1} ms ({:.2} GMAC/s), vjp {:.1} ms ({:.2} GMAC/s)",
        fwd * 1e3, macs / fwd / 1e9, bwd * 1e3, 2.0 * macs / bwd / 1e9
    );
}

fn main() {
    bench(16, 16, 20, 24, 20, 3, 10);
    bench(8, 8, 20, 24, 20, 3, 10);
    bench(4, 4, 20, 24, 20, 3, 20);
    bench(8, 4, 20, 24, 20, 3, 20);
    bench(16, 16, 10, 12, 10, 3, 40);
    bench(32, 32, 5, 6, 5, 3, 80);
    bench(16, 8, 20, 24, 20, 1, 40);
}
