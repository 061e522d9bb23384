//! EMA to normalized tract variables for one speaker, through the same
//! files the `aai` binary reads.
//!
//! cargo run --example derive_tvs

use aai_core::datagen::{gen_corpus, write_corpus, SynthConfig};
use aai_core::geometry::{compute_speaker_stats, derive_tvs, normalize_tvs, TvChannel};
use aai_core::pipeline::{fit_speaker_palate, read_speaker_ema};

fn main() {
    let dir = tempfile::tempdir().expect("tempdir");
    write_corpus(dir.path(), &gen_corpus(1, 8, 200, 3, &SynthConfig::default())).expect("write corpus");

    let tracks = read_speaker_ema(&dir.path().join("spk01")).expect("read EMA");
    let palate = fit_speaker_palate(&tracks).expect("palate");
    let raw: Vec<_> = tracks.iter().map(|(_, ema)| derive_tvs(ema, &palate)).collect();
    let stats = compute_speaker_stats(raw.iter()).expect("stats");

    println!("{:<5} {:>9} {:>9} {:>9} {:>9}", "tv", "raw min", "raw max", "norm min", "norm max");
    let normalized: Vec<_> = raw.iter().map(|t| normalize_tvs(t, &stats).unwrap()).collect();
    for c in TvChannel::ALL {
        let range = |ts: &[aai_core::geometry::TvTrack]| {
            ts.iter().flat_map(|t| t.channel(c)).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
        };
        let (rl, rh) = range(&raw);
        let (nl, nh) = range(&normalized);
        println!("{:<5} {rl:9.3} {rh:9.3} {nl:9.3} {nh:9.3}", c.name());
    }
}
