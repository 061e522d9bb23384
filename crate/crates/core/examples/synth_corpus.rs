//! Writes a small synthetic corpus and shows its layout.
//!
//! cargo run --example synth_corpus [-- OUT_DIR]

use std::path::PathBuf;

use aai_core::datagen::{gen_corpus, write_corpus, SynthConfig};
use aai_core::featio::read_afm;

fn main() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());

    let cfg = SynthConfig { noise_sigma: 0.02, ..SynthConfig::default() };
    let corpus = gen_corpus(3, 4, 250, 42, &cfg);
    write_corpus(&out, &corpus).expect("write corpus");

    for (spk, utts) in &corpus.speakers {
        println!(
            "speaker seed {:>20}  scale {:.3}  palate apex ({:.1}, {:.1})  {} utterances",
            spk.seed,
            spk.scale,
            spk.apex.x,
            spk.apex.y,
            utts.len()
        );
    }
    let mut files: Vec<_> = walk(&out);
    files.sort();
    for f in files.iter().take(6) {
        println!("{}", f.strip_prefix(&out).unwrap().display());
    }
    let feat = read_afm(out.join("spk01/utt001.feat.afm")).expect("features");
    println!("features: {} frames x {} dims at {} Hz", feat.n_frames(), feat.n_dims(), feat.frame_rate());
}

fn walk(dir: &std::path::Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() { out.extend(walk(&p)) } else { out.push(p) }
    }
    out
}
