use std::collections::BTreeMap;

use super::EvalError;
use crate::featio::{frame_labels, phoneme_label, PhonemeAlignment, PhonemeInventory, N_PHONEME_CLASSES, PM_DIMS};
use crate::geometry::TvTrack;
use crate::matrix::Matrix;

/// Accumulated absolute errors per phoneme label, over frames × channels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhonemeL1 {
    /// label → (sum of |pred − true| over the label's frames and all channels, frame count)
    pub entries: BTreeMap<String, (f64, usize)>,
    pub channels: usize,
}

impl PhonemeL1 {
    pub fn mean(&self, label: &str) -> Option<f64> {
        self.entries.get(label).map(|&(s, n)| s / (n * self.channels) as f64)
    }

    pub fn frames(&self, label: &str) -> usize {
        self.entries.get(label).map_or(0, |e| e.1)
    }

    pub fn total_frames(&self) -> usize {
        self.entries.values().map(|e| e.1).sum()
    }

    /// Frame-count-weighted mean of the per-label means.
    pub fn weighted_mean(&self) -> f64 {
        let n = self.total_frames();
        if n == 0 {
            return 0.0;
        }
        self.entries.keys().map(|l| self.mean(l).unwrap() * self.frames(l) as f64).sum::<f64>() / n as f64
    }

    pub fn merge(&mut self, other: &PhonemeL1) {
        if self.entries.is_empty() {
            self.channels = other.channels;
        }
        for (label, &(s, n)) in &other.entries {
            let e = self.entries.entry(label.clone()).or_insert((0.0, 0));
            e.0 += s;
            e.1 += n;
        }
    }
}

/// Per-phoneme mean L1 between two TV tracks; uncovered frames count as silence.
pub fn per_phoneme_l1(pred: &TvTrack, truth: &TvTrack, align: &PhonemeAlignment) -> Result<PhonemeL1, EvalError> {
    if pred.n_frames() != truth.n_frames() {
        return Err(EvalError::LengthMismatch(pred.n_frames(), truth.n_frames()));
    }
    if pred.frame_rate() != truth.frame_rate() {
        return Err(EvalError::RateMismatch(pred.frame_rate(), truth.frame_rate()));
    }
    let labels = frame_labels(align, truth.frame_rate(), truth.n_frames());
    let (p, t) = (pred.frames(), truth.frames());
    let mut out = PhonemeL1 { entries: BTreeMap::new(), channels: t.cols() };
    for (i, &id) in labels.iter().enumerate() {
        let err: f64 = p.row(i).iter().zip(t.row(i)).map(|(a, b)| (a - b).abs()).sum();
        let e = out.entries.entry(phoneme_label(id).expect("valid class id").to_string()).or_insert((0.0, 0));
        e.0 += err;
        e.1 += 1;
    }
    Ok(out)
}

/// Frame-level argmax accuracy of a `T × 41` logit matrix.
pub fn phoneme_accuracy_logits(logits: &Matrix, labels: &[usize]) -> Result<f64, EvalError> {
    if logits.rows() != labels.len() {
        return Err(EvalError::LengthMismatch(logits.rows(), labels.len()));
    }
    if logits.cols() != N_PHONEME_CLASSES {
        return Err(EvalError::DimMismatch(logits.cols(), N_PHONEME_CLASSES));
    }
    if labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let correct = logits.row_iter().zip(labels).filter(|(row, &l)| argmax(row) == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = k;
        }
    }
    best
}

/// Accuracy of a `T × 18` place/manner prediction: a frame is correct when
/// its nearest inventory vector equals the label's vector.
pub fn phoneme_accuracy_pm(pm: &Matrix, labels: &[usize], inventory: &PhonemeInventory) -> Result<f64, EvalError> {
    if pm.rows() != labels.len() {
        return Err(EvalError::LengthMismatch(pm.rows(), labels.len()));
    }
    if pm.cols() != PM_DIMS {
        return Err(EvalError::DimMismatch(pm.cols(), PM_DIMS));
    }
    if labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let table: Vec<[f64; PM_DIMS]> = (0..N_PHONEME_CLASSES).map(|c| inventory.pm_vector(c)).collect();
    let mut correct = 0;
    for (row, &l) in pm.row_iter().zip(labels) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, v) in table.iter().enumerate() {
            let d: f64 = row.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        if table[best] == table[l] {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featio::{encode_phoneme_pm_seq, phoneme_class_id, Interval};
    use rand::{Rng, SeedableRng};

    fn track(m: Matrix) -> TvTrack {
        TvTrack::new(100.0, m, false).unwrap()
    }

    fn align(spec: &[(f64, f64, &str)]) -> PhonemeAlignment {
        PhonemeAlignment::new(spec.iter().map(|&(s, e, l)| Interval { start: s, end: e, label: l.into() }).collect()).unwrap()
    }

    #[test]
    fn perfect_and_offset() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let t = Matrix::from_vec(20, 9, (0..180).map(|_| rng.random_range(-1.0..1.0)).collect());
        let a = align(&[(0.0, 0.05, "AA"), (0.05, 0.12, "M"), (0.15, 0.2, "sil")]);
        let zero = per_phoneme_l1(&track(t.clone()), &track(t.clone()), &a).unwrap();
        assert!(zero.entries.values().all(|e| e.0 == 0.0));
        let shifted = per_phoneme_l1(&track(t.map(|v| v + 0.1)), &track(t), &a).unwrap();
        for label in ["AA", "M", "sil"] {
            assert!((shifted.mean(label).unwrap() - 0.1).abs() < 1e-12);
        }
        // frames 12..15 are uncovered and join "sil"
        assert_eq!(shifted.frames("sil"), 8);
        assert_eq!(shifted.frames("AA"), 5);
    }

    #[test]
    fn length_mismatch() {
        let a = align(&[(0.0, 0.1, "AA")]);
        let r = per_phoneme_l1(&track(Matrix::zeros(3, 9)), &track(Matrix::zeros(4, 9)), &a);
        assert_eq!(r, Err(EvalError::LengthMismatch(3, 4)));
    }

    #[test]
    fn logits_accuracy() {
        let labels = [0usize, 5, 40, 12];
        let mut logits = Matrix::zeros(4, 41);
        for (i, &l) in labels.iter().enumerate() {
            logits[(i, l)] = 2.0;
        }
        assert_eq!(phoneme_accuracy_logits(&logits, &labels).unwrap(), 1.0);
        let shifted = logits.map(|v| v + 7.5);
        assert_eq!(phoneme_accuracy_logits(&shifted, &labels).unwrap(), 1.0);
        assert_eq!(phoneme_accuracy_logits(&logits, &labels[..3]), Err(EvalError::LengthMismatch(4, 3)));
    }

    #[test]
    fn uniform_random_logits_near_chance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let logits = Matrix::from_vec(n, 41, (0..n * 41).map(|_| rng.random::<f64>()).collect());
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..41)).collect();
        let acc = phoneme_accuracy_logits(&logits, &labels).unwrap();
        assert!((acc - 1.0 / 41.0).abs() < 0.005, "{acc}");
    }

    #[test]
    fn pm_accuracy() {
        let inv = PhonemeInventory::builtin();
        let sil = phoneme_class_id("sil").unwrap();
        let labels = vec![sil; 6];
        let pm = encode_phoneme_pm_seq(&labels);
        assert_eq!(phoneme_accuracy_pm(&pm, &labels, inv).unwrap(), 1.0);

        let ids: Vec<usize> = ["AA", "M", "S", "IY"].iter().map(|l| phoneme_class_id(l).unwrap()).collect();
        let noisy = encode_phoneme_pm_seq(&ids).map(|v| v * 0.8 + 0.05);
        assert_eq!(phoneme_accuracy_pm(&noisy, &ids, inv).unwrap(), 1.0);
        let wrong = encode_phoneme_pm_seq(&[sil, sil, sil, sil]);
        assert_eq!(phoneme_accuracy_pm(&wrong, &ids, inv).unwrap(), 0.0);
    }
}
