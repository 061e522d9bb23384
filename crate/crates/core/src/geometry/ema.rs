use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{GeometryError, Point};
use crate::matrix::Matrix;

pub const EMA_CHANNELS: usize = 12;
pub const EMA_HEADER: &str = "time,LIx,LIy,ULx,ULy,LLx,LLy,TTx,TTy,TBx,TBy,TDx,TDy";

/// Midsagittal EMA sensors in channel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sensor {
    LowerIncisor,
    UpperLip,
    LowerLip,
    TongueTip,
    TongueBody,
    TongueDorsum,
}

impl Sensor {
    pub const ALL: [Sensor; 6] = [
        Sensor::LowerIncisor,
        Sensor::UpperLip,
        Sensor::LowerLip,
        Sensor::TongueTip,
        Sensor::TongueBody,
        Sensor::TongueDorsum,
    ];
    pub const TONGUE: [Sensor; 3] = [Sensor::TongueTip, Sensor::TongueBody, Sensor::TongueDorsum];

    /// Column of the x coordinate; y follows at `x_column() + 1`.
    pub fn x_column(self) -> usize {
        2 * self as usize
    }
}

/// A 12-channel EMA trajectory in millimetres (x anterior, y superior).
#[derive(Debug, Clone, PartialEq)]
pub struct EmaTrack {
    frame_rate: f64,
    frames: Matrix,
}

impl EmaTrack {
    pub fn new(frame_rate: f64, frames: Matrix) -> Result<Self, GeometryError> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(GeometryError::BadRate(frame_rate));
        }
        if frames.cols() != EMA_CHANNELS {
            return Err(GeometryError::BadChannelCount { expected: EMA_CHANNELS, got: frames.cols() });
        }
        if !frames.is_finite() {
            return Err(GeometryError::NonFinite("EMA track"));
        }
        Ok(Self { frame_rate, frames })
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    pub fn point(&self, frame: usize, sensor: Sensor) -> Point {
        let c = sensor.x_column();
        Point::new(self.frames[(frame, c)], self.frames[(frame, c + 1)])
    }

    /// All tongue tip, body and dorsum positions of this track.
    pub fn tongue_points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.n_frames()).flat_map(move |i| Sensor::TONGUE.into_iter().map(move |s| self.point(i, s)))
    }

    /// Applies the same frame permutation to the underlying data.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let rows: Vec<&[f64]> = order.iter().map(|&i| self.frames.row(i)).collect();
        Self { frame_rate: self.frame_rate, frames: Matrix::from_rows(&rows) }
    }
}

pub fn write_ema_csv(path: impl AsRef<Path>, track: &EmaTrack) -> Result<(), GeometryError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{EMA_HEADER}")?;
    for (i, row) in track.frames.row_iter().enumerate() {
        write!(w, "{}", i as f64 / track.frame_rate)?;
        for v in row {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an EMA CSV. The frame rate is inferred from the time column, which
/// must advance by a constant step (within 1% of the step).
pub fn read_ema_csv(path: impl AsRef<Path>) -> Result<EmaTrack, GeometryError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let perr = |line: usize, msg: String| GeometryError::Parse { path: path.display().to_string(), line, msg };

    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == EMA_HEADER => {}
        Some((n, h)) => return Err(perr(n + 1, format!("unexpected header {h:?}"))),
        None => return Err(perr(1, "empty file".into())),
    }

    let mut times = Vec::new();
    let mut data = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != EMA_CHANNELS + 1 {
            return Err(perr(n + 1, format!("expected {} fields, got {}", EMA_CHANNELS + 1, fields.len())));
        }
        for (k, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| perr(n + 1, format!("bad number {f:?}")))?;
            if !v.is_finite() {
                return Err(perr(n + 1, "non-finite value".into()));
            }
            if k == 0 {
                times.push(v);
            } else {
                data.push(v);
            }
        }
    }
    if times.len() < 2 {
        return Err(perr(1, "need at least 2 frames to infer the frame rate".into()));
    }
    let span = times[times.len() - 1] - times[0];
    if span <= 0.0 {
        return Err(perr(2, "time must be strictly increasing".into()));
    }
    let raw_rate = (times.len() - 1) as f64 / span;
    let frame_rate = (raw_rate * 1e6).round() / 1e6;
    let step = 1.0 / frame_rate;
    for (i, t) in times.iter().enumerate() {
        let expected = times[0] + i as f64 * step;
        if (t - expected).abs() > 0.01 * step {
            return Err(perr(i + 2, format!("time {t} off the {frame_rate} Hz grid")));
        }
    }
    EmaTrack::new(frame_rate, Matrix::from_vec(times.len(), EMA_CHANNELS, data))
}
