//! Trains the multi-task baseline on a synthetic corpus and scores a held-out
//! speaker.
//!
//! cargo run --release --example train_baseline

use aai_core::datagen::{gen_corpus, write_corpus, SynthConfig};
use aai_core::models::{KvConfig, TRAIN_LOG_HEADER};
use aai_core::pipeline::train_run;

fn main() {
    let dir = tempfile::tempdir().expect("tempdir");
    write_corpus(dir.path(), &gen_corpus(4, 20, 200, 7, &SynthConfig::default())).expect("write corpus");

    let kv = KvConfig::parse(&format!(
        "data = {}
model = baseline
heldout_speakers = spk04
gru_hidden = 32
gru_layers = 1
mlp_hidden = 64
dropout = 0
lr = 0.001
epochs = 10
",
        dir.path().display()
    ))
    .expect("config");

    println!("{TRAIN_LOG_HEADER}");
    let outcome = train_run(&kv, |e| println!("{}", e.tsv_row())).expect("training");
    let pcc = outcome.heldout_pcc.expect("held-out speaker");
    println!("best epoch {}, held-out mean PCC {:.4}", outcome.report.best_epoch, pcc.mean);
}
