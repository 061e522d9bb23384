use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::inventory::{phoneme_class_id, SILENCE};
use super::FeatError;

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub label: String,
}

/// Sorted, non-overlapping labeled intervals for one utterance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhonemeAlignment {
    intervals: Vec<Interval>,
}

impl PhonemeAlignment {
    /// Validates ordering, positivity of durations and labels. Error line
    /// numbers are 1-based interval positions.
    pub fn new(intervals: Vec<Interval>) -> Result<Self, FeatError> {
        for (k, iv) in intervals.iter().enumerate() {
            let line = k + 1;
            if !(iv.start.is_finite() && iv.end.is_finite()) || iv.start >= iv.end {
                return Err(FeatError::Parse { line, msg: format!("bad interval [{}, {})", iv.start, iv.end) });
            }
            if phoneme_class_id(&iv.label).is_err() {
                return Err(FeatError::BadLabel { line, label: iv.label.clone() });
            }
            if k > 0 {
                let prev = &intervals[k - 1];
                if iv.start < prev.start {
                    return Err(FeatError::Unsorted { line });
                }
                if iv.start < prev.end {
                    return Err(FeatError::Overlap { line });
                }
            }
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Label covering time `t` (half-open intervals), if any.
    pub fn label_at(&self, t: f64) -> Option<&str> {
        let k = self.intervals.partition_point(|iv| iv.end <= t);
        self.intervals.get(k).filter(|iv| iv.start <= t).map(|iv| iv.label.as_str())
    }
}

/// Per-frame class ids: frame `i` takes the label covering its centre time
/// `(i + 0.5) / rate`, or silence when uncovered.
pub fn frame_labels(align: &PhonemeAlignment, rate: f64, n_frames: usize) -> Vec<usize> {
    let sil = phoneme_class_id(SILENCE).expect("silence is in the inventory");
    (0..n_frames)
        .map(|i| {
            let t = (i as f64 + 0.5) / rate;
            align.label_at(t).map_or(sil, |l| phoneme_class_id(l).expect("alignment labels are validated"))
        })
        .collect()
}

pub fn read_alignment_tsv(path: impl AsRef<Path>) -> Result<PhonemeAlignment, FeatError> {
    let text = fs::read_to_string(path)?;
    let mut intervals = Vec::new();
    let mut lines = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(FeatError::Parse { line: n + 1, msg: "expected start<TAB>end<TAB>label".into() });
        }
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| FeatError::Parse { line: n + 1, msg: format!("bad time {s:?}") })
        };
        intervals.push(Interval { start: parse(f[0])?, end: parse(f[1])?, label: f[2].trim().to_string() });
        lines.push(n + 1);
    }
    // report file line numbers rather than interval positions
    PhonemeAlignment::new(intervals).map_err(|e| match e {
        FeatError::Overlap { line } => FeatError::Overlap { line: lines[line - 1] },
        FeatError::Unsorted { line } => FeatError::Unsorted { line: lines[line - 1] },
        FeatError::BadLabel { line, label } => FeatError::BadLabel { line: lines[line - 1], label },
        FeatError::Parse { line, msg } => FeatError::Parse { line: lines[line - 1], msg },
        other => other,
    })
}

pub fn write_alignment_tsv(path: impl AsRef<Path>, align: &PhonemeAlignment) -> Result<(), FeatError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for iv in &align.intervals {
        writeln!(w, "{}\t{}\t{}", iv.start, iv.end, iv.label)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featio::N_PHONEME_CLASSES;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iv(start: f64, end: f64, label: &str) -> Interval {
        Interval { start, end, label: label.into() }
    }

    #[test]
    fn empty_file_gives_empty_alignment() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.tsv");
        fs::write(&p, "").unwrap();
        assert!(read_alignment_tsv(&p).unwrap().is_empty());
    }

    #[test]
    fn overlapping_and_unsorted_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.tsv");
        fs::write(&p, "0\t0.5\tAA\n0.4\t1.0\tB\n").unwrap();
        assert!(matches!(read_alignment_tsv(&p), Err(FeatError::Overlap { line: 2 })));
        fs::write(&p, "0.5\t1.0\tAA\n0.0\t0.2\tB\n").unwrap();
        assert!(matches!(read_alignment_tsv(&p), Err(FeatError::Unsorted { line: 2 })));
        fs::write(&p, "0\t0.5\tXYZ\n").unwrap();
        assert!(matches!(read_alignment_tsv(&p), Err(FeatError::BadLabel { line: 1, .. })));
        fs::write(&p, "0\t0.5\n").unwrap();
        assert!(matches!(read_alignment_tsv(&p), Err(FeatError::Parse { line: 1, .. })));
    }

    #[test]
    fn constant_and_empty_labelings() {
        let one = PhonemeAlignment::new(vec![iv(0.0, 10.0, "AE")]).unwrap();
        let ae = phoneme_class_id("AE").unwrap();
        assert_eq!(frame_labels(&one, 100.0, 50), vec![ae; 50]);
        let sil = phoneme_class_id(SILENCE).unwrap();
        assert_eq!(frame_labels(&PhonemeAlignment::default(), 100.0, 7), vec![sil; 7]);
        assert_eq!(frame_labels(&one, 100.0, 0), Vec::<usize>::new());
    }

    #[test]
    fn random_alignments_match_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let mut t = rng.random_range(0.0..0.1);
            let mut ivs = Vec::new();
            for _ in 0..rng.random_range(0..8) {
                let start = t + rng.random_range(0.0..0.05);
                let end = start + rng.random_range(0.001..0.2);
                ivs.push(iv(start, end, phoneme_label_for(rng.random_range(0..N_PHONEME_CLASSES))));
                t = end;
            }
            let align = PhonemeAlignment::new(ivs.clone()).unwrap();
            let rate = rng.random_range(20.0..250.0);
            let n = rng.random_range(0..200);
            let got = frame_labels(&align, rate, n);
            assert_eq!(got.len(), n);
            for (i, &id) in got.iter().enumerate() {
                let tc = (i as f64 + 0.5) / rate;
                let expect = ivs.iter().find(|v| v.start <= tc && tc < v.end).map_or(SILENCE, |v| v.label.as_str());
                assert_eq!(id, phoneme_class_id(expect).unwrap());
            }
        }
    }

    fn phoneme_label_for(id: usize) -> &'static str {
        crate::featio::phoneme_label(id).unwrap()
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.tsv");
        let align =
            PhonemeAlignment::new(vec![iv(0.0, 0.125, "sil"), iv(0.125, 0.3333333333333333, "UW"), iv(0.5, 0.75, "NG")])
                .unwrap();
        write_alignment_tsv(&p, &align).unwrap();
        assert_eq!(read_alignment_tsv(&p).unwrap(), align);
    }
}
