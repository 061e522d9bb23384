//! Fits a palate trace to the tongue points of one synthetic speaker and
//! compares it with the speaker's true dome.
//!
//! cargo run --example palate_fit

use aai_core::datagen::gen_speaker;
use aai_core::geometry::{fit_palate, point_to_polyline, Point};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let spk = gen_speaker(11);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let utts: Vec<_> = (0..20).map(|_| aai_core::datagen::gen_utterance(&spk, 300, &mut rng)).collect();

    let fitted = fit_palate(utts.iter().flat_map(|u| u.ema.tongue_points())).expect("tongue points");
    let truth = spk.palate();
    println!("fitted palate: {} vertices over x in {:?}", fitted.vertices().len(), fitted.x_range());

    // the hull sits at or below the dome wherever both are defined
    let (lo, hi) = fitted.x_range();
    let mut worst = 0.0f64;
    for i in 0..=20 {
        let x = lo + (hi - lo) * i as f64 / 20.0;
        if let (Some(f), Some(t)) = (fitted.height_at(x), truth.height_at(x)) {
            worst = worst.max(t - f);
            println!("x {x:7.2}  fitted {f:7.3}  dome {t:7.3}");
        }
    }
    println!("largest gap below the dome: {worst:.3} mm");

    let probe = Point { x: (lo + hi) / 2.0, y: fitted.height_at((lo + hi) / 2.0).unwrap() - 5.0 };
    let (d, x) = point_to_polyline(probe, &fitted);
    println!("point {probe:?} is {d:.3} mm from the trace, nearest at x = {x:.3}");
}
