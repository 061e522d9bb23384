//! Mel-cepstral distortion under dynamic time warping.
//!
//! cargo run --example dtw_mcd

use aai_core::eval::{dtw, dtw_mcd, euclidean, format_mcd_summary, mcd};
use aai_core::Matrix;

fn main() {
    // 25 coefficients per frame; c0 is ignored by the distortion
    let frames = 60;
    let reference = Matrix::from_fn(frames, 25, |t, k| ((t as f64 * 0.15 + k as f64).sin()) / (k + 1) as f64);

    // same trajectory played 30% slower
    let slow_len = 78;
    let slow = Matrix::from_fn(slow_len, 25, |t, k| {
        let src = t as f64 * (frames - 1) as f64 / (slow_len - 1) as f64;
        ((src * 0.15 + k as f64).sin()) / (k + 1) as f64
    });

    let path = dtw(&reference, &slow, euclidean).expect("dtw");
    println!("warping path: {} steps, total cost {:.4}", path.path.len(), path.cost);
    println!("frame 0 MCD against itself: {:.4} dB", mcd(reference.row(0), reference.row(0)).unwrap());

    let per_utt: Vec<f64> = (0..5)
        .map(|i| {
            let noisy = slow.map(|v| v + 0.002 * (i + 1) as f64);
            dtw_mcd(&reference, &noisy).unwrap()
        })
        .collect();
    for (i, v) in per_utt.iter().enumerate() {
        println!("utterance {i}: {v:.4} dB");
    }
    println!("average {}", format_mcd_summary(&per_utt));
}
