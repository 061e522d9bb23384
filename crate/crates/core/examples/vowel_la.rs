//! Per-vowel lip aperture by speaker: AE opens the lips, UW rounds them.
//!
//! cargo run --example vowel_la

use aai_core::datagen::{gen_corpus, SynthConfig};
use aai_core::eval::vowel_la_summary;

fn main() {
    let corpus = gen_corpus(4, 6, 300, 5, &SynthConfig::default());
    let names: Vec<String> = (0..corpus.speakers.len()).map(aai_core::datagen::SynthCorpus::speaker_name).collect();
    let items: Vec<_> = corpus
        .speakers
        .iter()
        .zip(&names)
        .flat_map(|((_, utts), name)| utts.iter().map(move |u| (name.as_str(), &u.tvs, &u.alignment)))
        .collect();

    let summary = vowel_la_summary(&items, Some(&["AE", "UW"])).expect("summary");
    print!("{}", summary.to_tsv());
    let (ae, uw) = (summary.row("AE").unwrap(), summary.row("UW").unwrap());
    let ordered = names.iter().all(|n| ae.per_speaker[n].0 > uw.per_speaker[n].0);
    println!("AE wider than UW for every speaker: {ordered}");
}
