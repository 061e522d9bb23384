use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{gen_speaker_with, gen_utterance, SynthConfig, SynthSpeaker, SynthUtterance};
use crate::featio::{write_afm, write_alignment_tsv, FeatureMatrix};
use crate::geometry::write_ema_csv;
use crate::pipeline::{PipelineError, ALIGN_SUFFIX, EMA_SUFFIX, EMB_FILE, FEAT_SUFFIX};

/// Speakers with their utterances, in generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub speakers: Vec<(SynthSpeaker, Vec<SynthUtterance>)>,
}

impl SynthCorpus {
    pub fn speaker_name(i: usize) -> String {
        format!("spk{:02}", i + 1)
    }

    pub fn utterance_name(j: usize) -> String {
        format!("utt{:03}", j + 1)
    }
}

/// Generates `n_speakers × n_utts` utterances of `n_frames` frames.
///
/// Speaker seeds are drawn from `seed`; utterance `j` of a speaker uses
/// stream `j + 1` of a ChaCha8 generator keyed by the speaker seed, so the
/// result does not depend on the rayon thread count.
pub fn gen_corpus(n_speakers: usize, n_utts: usize, n_frames: usize, seed: u64, cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..n_speakers).map(|_| rng.random()).collect();
    let speakers = seeds
        .iter()
        .map(|&s| {
            let spk = gen_speaker_with(s, cfg);
            let utts = (0..n_utts)
                .into_par_iter()
                .map(|j| {
                    let mut r = ChaCha8Rng::seed_from_u64(s);
                    r.set_stream(j as u64 + 1);
                    gen_utterance(&spk, n_frames, &mut r)
                })
                .collect();
            (spk, utts)
        })
        .collect();
    SynthCorpus { speakers }
}

/// Writes `spkXX/uttYYY.{ema.csv,feat.afm,align.tsv}` and
/// `spkXX/speaker.emb.afm` under `dir`.
pub fn write_corpus(dir: impl AsRef<Path>, corpus: &SynthCorpus) -> Result<(), PipelineError> {
    for (i, (spk, utts)) in corpus.speakers.iter().enumerate() {
        let sdir = dir.as_ref().join(SynthCorpus::speaker_name(i));
        fs::create_dir_all(&sdir)?;
        write_afm(sdir.join(EMB_FILE), &FeatureMatrix::embedding(&spk.embedding)?)?;
        utts.par_iter().enumerate().try_for_each(|(j, u)| -> Result<(), PipelineError> {
            let stem = SynthCorpus::utterance_name(j);
            write_ema_csv(sdir.join(format!("{stem}{EMA_SUFFIX}")), &u.ema)?;
            write_afm(sdir.join(format!("{stem}{FEAT_SUFFIX}")), &u.features)?;
            write_alignment_tsv(sdir.join(format!("{stem}{ALIGN_SUFFIX}")), &u.alignment)?;
            Ok(())
        })?;
    }
    Ok(())
}
