//! Trains the decoder that maps TVs plus a speaker embedding back to
//! acoustic features, then reports feature MAE on unseen utterances.
//!
//! cargo run --release --example resynthesis

use aai_core::datagen::{gen_corpus, SynthConfig};
use aai_core::geometry::{compute_speaker_stats, normalize_tvs};
use aai_core::models::{train_decoder, Decoder, DecoderConfig, DecoderSample, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let cfg = SynthConfig::default();
    let corpus = gen_corpus(3, 12, 150, 9, &cfg);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, (spk, utts)) in corpus.speakers.iter().enumerate() {
        let stats = compute_speaker_stats(utts.iter().map(|u| &u.tvs)).expect("stats");
        for (j, u) in utts.iter().enumerate() {
            let s = DecoderSample {
                id: format!("spk{i}/utt{j}"),
                tv: normalize_tvs(&u.tvs, &stats).unwrap().into_frames(),
                embedding: spk.embedding.clone(),
                target: u.features.data().clone(),
            };
            if j < 10 { train.push(s) } else { val.push(s) }
        }
    }

    let dc = DecoderConfig { gru_hidden: 24, gru_layers: 1, mlp_hidden: 32, dropout: 0.0, ..DecoderConfig::new(cfg.emb_dim, cfg.feat_dim) };
    let mut dec = Decoder::new(dc, &mut ChaCha8Rng::seed_from_u64(0)).expect("decoder");
    let tc = TrainConfig { lr: 3e-3, epochs: 10, ..TrainConfig::default() };
    let report = train_decoder(&mut dec, &train, &val, &tc, |e| {
        println!("epoch {:2}  train feature MAE {:.4}  val {:.4}", e.epoch, e.train_tv_mae, e.val_tv_mae.unwrap_or(f64::NAN))
    })
    .expect("training");

    let s = &val[0];
    let y = dec.predict(&s.tv, &s.embedding).unwrap();
    let mae = y.zip_map(&s.target, |a, b| (a - b).abs()).sum() / y.len() as f64;
    println!("best epoch {}; {} feature MAE {mae:.4}", report.best_epoch, s.id);
}
