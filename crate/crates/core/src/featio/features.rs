use super::FeatError;
use crate::matrix::Matrix;

/// An `n_frames × n_dims` feature matrix sampled at `frame_rate` Hz.
///
/// A rate of 0 marks rate-free data such as a speaker embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frame_rate: f64,
    data: Matrix,
}

impl FeatureMatrix {
    pub fn new(frame_rate: f64, data: Matrix) -> Result<Self, FeatError> {
        if !(frame_rate.is_finite() && frame_rate >= 0.0) {
            return Err(FeatError::BadRate(frame_rate));
        }
        if !data.is_finite() {
            return Err(FeatError::NonFinite);
        }
        Ok(Self { frame_rate, data })
    }

    /// A single-frame, rate-free vector (speaker embeddings).
    pub fn embedding(values: &[f64]) -> Result<Self, FeatError> {
        Self::new(0.0, Matrix::row_vector(values))
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn n_frames(&self) -> usize {
        self.data.rows()
    }

    pub fn n_dims(&self) -> usize {
        self.data.cols()
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn into_data(self) -> Matrix {
        self.data
    }
}

/// Output length of [`resample_linear`]: `round((n_in - 1) · dst / src) + 1`.
pub fn resampled_len(n_in: usize, src: f64, dst: f64) -> usize {
    ((n_in - 1) as f64 * dst / src).round() as usize + 1
}

/// Per-dimension linear interpolation onto a new frame rate.
///
/// Output frame `i` samples source position `i · (n_in − 1)/(n_out − 1)`, so
/// the first and last frames are preserved exactly.
pub fn resample_linear(m: &FeatureMatrix, dst_rate: f64) -> Result<FeatureMatrix, FeatError> {
    if !(dst_rate.is_finite() && dst_rate > 0.0) {
        return Err(FeatError::BadRate(dst_rate));
    }
    if !(m.frame_rate > 0.0) {
        return Err(FeatError::BadRate(m.frame_rate));
    }
    let n_in = m.n_frames();
    if n_in == 0 {
        return Err(FeatError::ShapeMismatch("cannot resample an empty matrix".into()));
    }
    if dst_rate == m.frame_rate {
        return Ok(m.clone());
    }
    let n_out = resampled_len(n_in, m.frame_rate, dst_rate);
    let dims = m.n_dims();
    let mut out = Matrix::zeros(n_out, dims);
    for i in 0..n_out {
        let pos = if n_out == 1 { 0.0 } else { i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64 };
        let lo = (pos.floor() as usize).min(n_in - 1);
        let hi = (lo + 1).min(n_in - 1);
        let frac = pos - lo as f64;
        let (a, b) = (m.data.row(lo), m.data.row(hi));
        for (d, o) in out.row_mut(i).iter_mut().enumerate() {
            *o = if frac == 0.0 { a[d] } else { a[d] + frac * (b[d] - a[d]) };
        }
    }
    FeatureMatrix::new(dst_rate, out)
}

/// Appends a single-frame embedding to every frame of `m`.
pub fn concat_speaker_embedding(m: &FeatureMatrix, emb: &FeatureMatrix) -> Result<FeatureMatrix, FeatError> {
    if emb.n_frames() != 1 {
        return Err(FeatError::ShapeMismatch(format!("embedding must have 1 frame, has {}", emb.n_frames())));
    }
    let tiled = Matrix::from_vec(
        m.n_frames(),
        emb.n_dims(),
        emb.data.row(0).iter().copied().cycle().take(m.n_frames() * emb.n_dims()).collect(),
    );
    FeatureMatrix::new(m.frame_rate, Matrix::hconcat(&[&m.data, &tiled]))
}
