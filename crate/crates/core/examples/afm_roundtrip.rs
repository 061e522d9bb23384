//! Writes and reads the binary feature format and an alignment table.
//!
//! cargo run --example afm_roundtrip

use aai_core::featio::{
    encode_afm, frame_labels, phoneme_label, read_afm, read_alignment_tsv, write_afm, write_alignment_tsv, FeatureMatrix,
    Interval, PhonemeAlignment,
};
use aai_core::Matrix;

fn main() {
    let dir = tempfile::tempdir().expect("tempdir");
    let m = FeatureMatrix::new(50.0, Matrix::from_fn(4, 3, |i, j| i as f64 + 0.25 * j as f64)).unwrap();
    let bytes = encode_afm(&m).unwrap();
    println!("{} bytes, header {:?}", bytes.len(), &bytes[..4]);
    write_afm(dir.path().join("x.afm"), &m).unwrap();
    let back = read_afm(dir.path().join("x.afm")).unwrap();
    println!("round trip equal: {}", back == m);

    let align = PhonemeAlignment::new(vec![
        Interval { start: 0.0, end: 0.03, label: "sil".into() },
        Interval { start: 0.03, end: 0.08, label: "AE".into() },
    ])
    .unwrap();
    write_alignment_tsv(dir.path().join("x.align.tsv"), &align).unwrap();
    let back = read_alignment_tsv(dir.path().join("x.align.tsv")).unwrap();
    let labels: Vec<_> = frame_labels(&back, 100.0, 8).into_iter().map(|c| phoneme_label(c).unwrap()).collect();
    println!("frame labels at 100 Hz: {labels:?}");
}
