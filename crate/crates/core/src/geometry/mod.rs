//! EMA sensor geometry: palate estimation and tract-variable derivation.
//!
//! Raw EMA gives six midsagittal sensor positions per frame. Tract variables
//! (TVs) describe constrictions instead of positions, which makes them far
//! less speaker dependent: lip aperture, lip protrusion, jaw aperture, and a
//! (location, degree) pair for each tongue sensor measured against an
//! estimated palate trace.

mod ema;
mod palate;
mod tv;

pub use ema::{read_ema_csv, write_ema_csv, EmaTrack, Sensor, EMA_CHANNELS, EMA_HEADER};
pub use palate::{fit_palate, point_to_polyline, read_palate_csv, write_palate_csv, PalateModel};
pub use tv::{
    compute_speaker_stats, denormalize_tvs, derive_tvs, derive_tvs_with, normalize_tvs,
    read_stats_tsv, write_stats_tsv, SpeakerStats, TvChannel, TvTrack, TV_CHANNELS,
};

use thiserror::Error;

/// Absolute tolerance used by geometric predicates.
pub const GEOMETRY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("point cloud is degenerate: need at least 2 points with distinct x")]
    DegenerateCloud,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("expected {expected} channels, got {got}")]
    BadChannelCount { expected: usize, got: usize },
    #[error("frame rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("palate needs at least 2 vertices with strictly increasing x")]
    BadPalate,
    #[error("no frames to compute statistics from")]
    EmptyInput,
    #[error("channel {0} is constant; cannot normalize")]
    ConstantChannel(&'static str),
    #[error("track normalization state is wrong for this operation (normalized = {0})")]
    NormalizationState(bool),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
