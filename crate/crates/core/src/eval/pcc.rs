use super::EvalError;
use crate::matrix::Matrix;

/// Sample Pearson correlation, clamped to [−1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(EvalError::ZeroVariance);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Per-column correlation of two equally shaped matrices.
pub fn channel_pcc(pred: &Matrix, truth: &Matrix) -> Result<Vec<f64>, EvalError> {
    if pred.rows() != truth.rows() {
        return Err(EvalError::LengthMismatch(pred.rows(), truth.rows()));
    }
    if pred.cols() != truth.cols() {
        return Err(EvalError::DimMismatch(pred.cols(), truth.cols()));
    }
    (0..pred.cols()).map(|c| pearson(&pred.column(c), &truth.column(c))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PccMode {
    /// One correlation per channel over all frames of all utterances.
    #[default]
    Concatenated,
    /// Per-utterance correlations averaged over utterances.
    PerUtterance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PccReport {
    pub per_channel: Vec<f64>,
    /// Unweighted average over channels.
    pub mean: f64,
}

pub fn mean_pcc(pairs: &[(&Matrix, &Matrix)], mode: PccMode) -> Result<PccReport, EvalError> {
    let Some(&(first, _)) = pairs.first() else {
        return Err(EvalError::EmptyInput);
    };
    let dims = first.cols();
    let per_channel = match mode {
        PccMode::Concatenated => {
            let preds: Vec<&Matrix> = pairs.iter().map(|p| p.0).collect();
            let truths: Vec<&Matrix> = pairs.iter().map(|p| p.1).collect();
            for (p, t) in pairs {
                if p.rows() != t.rows() {
                    return Err(EvalError::LengthMismatch(p.rows(), t.rows()));
                }
                if p.cols() != dims || t.cols() != dims {
                    return Err(EvalError::DimMismatch(dims, p.cols().max(t.cols())));
                }
            }
            channel_pcc(&Matrix::vconcat(&preds), &Matrix::vconcat(&truths))?
        }
        PccMode::PerUtterance => {
            let mut sums = vec![0.0; dims];
            for (p, t) in pairs {
                if p.cols() != dims {
                    return Err(EvalError::DimMismatch(dims, p.cols()));
                }
                for (s, r) in sums.iter_mut().zip(channel_pcc(p, t)?) {
                    *s += r;
                }
            }
            sums.iter().map(|s| s / pairs.len() as f64).collect()
        }
    };
    let mean = per_channel.iter().sum::<f64>() / dims as f64;
    Ok(PccReport { per_channel, mean })
}
