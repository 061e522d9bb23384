//! Trains the chunked autoregressive model with its discriminator, then saves
//! and reloads the checkpoint.
//!
//! cargo run --release --example train_proposed

use aai_core::datagen::{gen_corpus, write_corpus, SynthConfig};
use aai_core::models::{Inverter, KvConfig, TRAIN_LOG_HEADER};
use aai_core::pipeline::train_run;

fn main() {
    let dir = tempfile::tempdir().expect("tempdir");
    write_corpus(dir.path(), &gen_corpus(4, 20, 200, 7, &SynthConfig::default())).expect("write corpus");

    let kv = KvConfig::parse(&format!(
        "data = {}
model = proposed
heldout_speakers = spk04
gru_hidden = 32
gru_layers = 1
mlp_hidden = 64
ar_hidden = 64
dropout = 0
lr = 0.001
epochs = 10
",
        dir.path().display()
    ))
    .expect("config");

    println!("{TRAIN_LOG_HEADER}");
    let outcome = train_run(&kv, |e| println!("{}", e.tsv_row())).expect("training");
    println!("held-out mean PCC {:.4}", outcome.heldout_pcc.expect("held-out speaker").mean);

    let path = dir.path().join("model.ckpt");
    outcome.inverter.save(&path).expect("save");
    let back = Inverter::load(&path).expect("load");
    let x = aai_core::Matrix::zeros(120, back.input_dim());
    let (a, _) = outcome.inverter.predict(&x).unwrap();
    let (b, _) = back.predict(&x).unwrap();
    println!("reloaded checkpoint reproduces predictions: {}", a == b);
}
