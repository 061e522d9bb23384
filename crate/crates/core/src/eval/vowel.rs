use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::EvalError;
use crate::featio::{frame_labels, phoneme_label, PhonemeAlignment, VOWELS};
use crate::geometry::{TvChannel, TvTrack};

pub const VOWEL_LA_HEADER: &str = "vowel\tspeaker\tmean_la\tn_frames\tcross_speaker_var";

#[derive(Debug, Clone, PartialEq)]
pub struct VowelLaRow {
    pub vowel: String,
    /// speaker → (mean LA, frame count)
    pub per_speaker: BTreeMap<String, (f64, usize)>,
    /// Mean over speakers of the per-speaker means.
    pub mean: f64,
    /// Population variance over speakers of the per-speaker means.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VowelLaSummary {
    pub rows: Vec<VowelLaRow>,
}

impl VowelLaSummary {
    pub fn row(&self, vowel: &str) -> Option<&VowelLaRow> {
        self.rows.iter().find(|r| r.vowel == vowel)
    }

    /// Long-format TSV: one row per (vowel, speaker) then an `ALL` row
    /// carrying the cross-speaker variance.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(VOWEL_LA_HEADER);
        out.push('\n');
        for r in &self.rows {
            for (spk, (m, n)) in &r.per_speaker {
                let _ = writeln!(out, "{}\t{spk}\t{m:.6}\t{n}\t", r.vowel);
            }
            let n: usize = r.per_speaker.values().map(|e| e.1).sum();
            let _ = writeln!(out, "{}\tALL\t{:.6}\t{n}\t{:.6}", r.vowel, r.mean, r.variance);
        }
        out
    }
}

/// Per-vowel lip-aperture means per speaker, then across speakers.
///
/// With `vowels = None` every vowel that occurs in the data is reported, in
/// inventory order; an explicitly requested vowel without frames is an error.
pub fn vowel_la_summary(
    items: &[(&str, &TvTrack, &PhonemeAlignment)],
    vowels: Option<&[&str]>,
) -> Result<VowelLaSummary, EvalError> {
    // vowel → speaker → (sum, count)
    let mut acc: BTreeMap<&str, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for &(speaker, track, align) in items {
        let la = track.channel(TvChannel::La);
        for (i, id) in frame_labels(align, track.frame_rate(), track.n_frames()).into_iter().enumerate() {
            let label = phoneme_label(id).expect("valid class id");
            if VOWELS.contains(&label) {
                let e = acc.entry(label).or_default().entry(speaker.to_string()).or_insert((0.0, 0));
                e.0 += la[i];
                e.1 += 1;
            }
        }
    }
    let wanted: Vec<&str> = match vowels {
        Some(v) => v.to_vec(),
        None => VOWELS.iter().copied().filter(|v| acc.contains_key(v)).collect(),
    };
    let mut rows = Vec::with_capacity(wanted.len());
    for v in wanted {
        let spk = acc.get(v).ok_or_else(|| EvalError::NoVowelFrames(v.to_string()))?;
        let per_speaker: BTreeMap<String, (f64, usize)> =
            spk.iter().map(|(s, &(sum, n))| (s.clone(), (sum / n as f64, n))).collect();
        let k = per_speaker.len() as f64;
        let mean = per_speaker.values().map(|e| e.0).sum::<f64>() / k;
        let variance = per_speaker.values().map(|e| (e.0 - mean).powi(2)).sum::<f64>() / k;
        rows.push(VowelLaRow { vowel: v.to_string(), per_speaker, mean, variance });
    }
    Ok(VowelLaSummary { rows })
}
