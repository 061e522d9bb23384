use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{point_to_polyline, EmaTrack, GeometryError, PalateModel, Sensor};
use crate::matrix::Matrix;

pub const TV_CHANNELS: usize = 9;

/// Tract-variable channels in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TvChannel {
    /// Lip aperture: upper-lip to lower-lip distance.
    La,
    /// Lip protrusion: upper-lip x relative to a speaker reference.
    Lp,
    /// Jaw aperture: upper-lip to lower-incisor distance.
    Ja,
    Ttcl,
    Ttcd,
    Tbcl,
    Tbcd,
    Tdcl,
    Tdcd,
}

impl TvChannel {
    pub const ALL: [TvChannel; TV_CHANNELS] = [
        TvChannel::La,
        TvChannel::Lp,
        TvChannel::Ja,
        TvChannel::Ttcl,
        TvChannel::Ttcd,
        TvChannel::Tbcl,
        TvChannel::Tbcd,
        TvChannel::Tdcl,
        TvChannel::Tdcd,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            TvChannel::La => "LA",
            TvChannel::Lp => "LP",
            TvChannel::Ja => "JA",
            TvChannel::Ttcl => "TTCL",
            TvChannel::Ttcd => "TTCD",
            TvChannel::Tbcl => "TBCL",
            TvChannel::Tbcd => "TBCD",
            TvChannel::Tdcl => "TDCL",
            TvChannel::Tdcd => "TDCD",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Constriction degrees and apertures are distances, hence nonnegative.
    pub fn is_distance(self) -> bool {
        matches!(self, TvChannel::La | TvChannel::Ja | TvChannel::Ttcd | TvChannel::Tbcd | TvChannel::Tdcd)
    }
}

/// A 9-channel tract-variable trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TvTrack {
    frame_rate: f64,
    frames: Matrix,
    normalized: bool,
}

impl TvTrack {
    pub fn new(frame_rate: f64, frames: Matrix, normalized: bool) -> Result<Self, GeometryError> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(GeometryError::BadRate(frame_rate));
        }
        if frames.cols() != TV_CHANNELS {
            return Err(GeometryError::BadChannelCount { expected: TV_CHANNELS, got: frames.cols() });
        }
        if !frames.is_finite() {
            return Err(GeometryError::NonFinite("TV track"));
        }
        if normalized && frames.as_slice().iter().any(|v| v.abs() > 1.0) {
            return Err(GeometryError::NormalizationState(true));
        }
        Ok(Self { frame_rate, frames, normalized })
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

    pub fn into_frames(self) -> Matrix {
        self.frames
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn channel(&self, c: TvChannel) -> Vec<f64> {
        self.frames.column(c.index())
    }
}

/// Derives unnormalized TVs with lip protrusion measured from x = 0.
pub fn derive_tvs(ema: &EmaTrack, palate: &PalateModel) -> TvTrack {
    derive_tvs_with(ema, palate, 0.0)
}

/// Derives unnormalized TVs; LP is the upper-lip x minus `lp_reference`
/// (typically the speaker's mean upper-lip x).
///
/// Each output frame depends only on the matching input frame.
pub fn derive_tvs_with(ema: &EmaTrack, palate: &PalateModel, lp_reference: f64) -> TvTrack {
    let n = ema.n_frames();
    let mut frames = Matrix::zeros(n, TV_CHANNELS);
    for i in 0..n {
        let ul = ema.point(i, Sensor::UpperLip);
        let ll = ema.point(i, Sensor::LowerLip);
        let li = ema.point(i, Sensor::LowerIncisor);
        let row = frames.row_mut(i);
        row[TvChannel::La.index()] = ul.distance(ll);
        row[TvChannel::Lp.index()] = ul.x - lp_reference;
        row[TvChannel::Ja.index()] = ul.distance(li);
        for (k, sensor) in Sensor::TONGUE.into_iter().enumerate() {
            let (degree, location) = point_to_polyline(ema.point(i, sensor), palate);
            row[TvChannel::Ttcl.index() + 2 * k] = location;
            row[TvChannel::Ttcd.index() + 2 * k] = degree;
        }
    }
    TvTrack { frame_rate: ema.frame_rate(), frames, normalized: false }
}

/// Per-channel (min, max) over a speaker's unnormalized TVs.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerStats {
    pub min: [f64; TV_CHANNELS],
    pub max: [f64; TV_CHANNELS],
}

impl SpeakerStats {
    pub fn degenerate_channels(&self) -> Vec<TvChannel> {
        TvChannel::ALL.into_iter().filter(|c| self.max[c.index()] <= self.min[c.index()]).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_channels().is_empty()
    }
}

pub fn compute_speaker_stats<'a, I>(tracks: I) -> Result<SpeakerStats, GeometryError>
where
    I: IntoIterator<Item = &'a TvTrack>,
{
    let mut stats = SpeakerStats { min: [f64::INFINITY; TV_CHANNELS], max: [f64::NEG_INFINITY; TV_CHANNELS] };
    let mut seen = false;
    for t in tracks {
        if t.normalized {
            return Err(GeometryError::NormalizationState(true));
        }
        for row in t.frames.row_iter() {
            seen = true;
            for (c, &v) in row.iter().enumerate() {
                stats.min[c] = stats.min[c].min(v);
                stats.max[c] = stats.max[c].max(v);
            }
        }
    }
    if !seen {
        return Err(GeometryError::EmptyInput);
    }
    Ok(stats)
}

/// Maps each channel linearly so that `min → -1` and `max → +1`; values
/// outside the speaker range clamp to ±1.
pub fn normalize_tvs(track: &TvTrack, stats: &SpeakerStats) -> Result<TvTrack, GeometryError> {
    if track.normalized {
        return Err(GeometryError::NormalizationState(true));
    }
    if let Some(c) = stats.degenerate_channels().first() {
        return Err(GeometryError::ConstantChannel(c.name()));
    }
    let mut frames = track.frames.clone();
    for i in 0..frames.rows() {
        for (c, v) in frames.row_mut(i).iter_mut().enumerate() {
            let (lo, hi) = (stats.min[c], stats.max[c]);
            *v = (2.0 * (*v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
        }
    }
    Ok(TvTrack { frame_rate: track.frame_rate, frames, normalized: true })
}

pub fn denormalize_tvs(track: &TvTrack, stats: &SpeakerStats) -> Result<TvTrack, GeometryError> {
    if !track.normalized {
        return Err(GeometryError::NormalizationState(false));
    }
    let mut frames = track.frames.clone();
    for i in 0..frames.rows() {
        for (c, v) in frames.row_mut(i).iter_mut().enumerate() {
            let (lo, hi) = (stats.min[c], stats.max[c]);
            *v = (*v + 1.0) * 0.5 * (hi - lo) + lo;
        }
    }
    Ok(TvTrack { frame_rate: track.frame_rate, frames, normalized: false })
}

pub fn write_stats_tsv(path: impl AsRef<Path>, stats: &SpeakerStats) -> Result<(), GeometryError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "channel\tmin\tmax")?;
    for c in TvChannel::ALL {
        writeln!(w, "{}\t{}\t{}", c.name(), stats.min[c.index()], stats.max[c.index()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stats_tsv(path: impl AsRef<Path>) -> Result<SpeakerStats, GeometryError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let perr = |line: usize, msg: String| GeometryError::Parse { path: path.display().to_string(), line, msg };
    let mut stats = SpeakerStats { min: [f64::NAN; TV_CHANNELS], max: [f64::NAN; TV_CHANNELS] };
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(perr(n + 1, "expected channel<TAB>min<TAB>max".into()));
        }
        let c = TvChannel::from_name(f[0]).ok_or_else(|| perr(n + 1, format!("unknown channel {:?}", f[0])))?;
        let parse = |s: &str| s.parse::<f64>().map_err(|_| perr(n + 1, format!("bad number {s:?}")));
        stats.min[c.index()] = parse(f[1])?;
        stats.max[c.index()] = parse(f[2])?;
    }
    if stats.min.iter().chain(&stats.max).any(|v| !v.is_finite()) {
        return Err(perr(0, "missing or non-finite channel statistics".into()));
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, EMA_CHANNELS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_palate() -> PalateModel {
        PalateModel::new(vec![Point::new(-50.0, 10.0), Point::new(10.0, 10.0)]).unwrap()
    }

    fn ema_from(rows: &[[f64; EMA_CHANNELS]]) -> EmaTrack {
        EmaTrack::new(100.0, Matrix::from_rows(rows)).unwrap()
    }

    #[test]
    fn lip_aperture_is_vertical_distance() {
        let mut f = [0.0; EMA_CHANNELS];
        f[3] = 1.0; // ULy
        f[5] = -1.0; // LLy
        let tv = derive_tvs(&ema_from(&[f]), &flat_palate());
        assert_eq!(tv.frames()[(0, TvChannel::La.index())], 2.0);
    }

    #[test]
    fn tongue_on_palate_has_zero_degree() {
        let mut f = [0.0; EMA_CHANNELS];
        f[6] = -3.0; // TTx
        f[7] = 10.0; // TTy on the palate
        let tv = derive_tvs(&ema_from(&[f]), &flat_palate());
        assert_eq!(tv.frames()[(0, TvChannel::Ttcd.index())], 0.0);
        assert_eq!(tv.frames()[(0, TvChannel::Ttcl.index())], -3.0);
    }

    #[test]
    fn random_frame_matches_scalar_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let palate = PalateModel::new(vec![
            Point::new(-45.0, 3.0),
            Point::new(-25.0, 11.0),
            Point::new(-10.0, 10.0),
            Point::new(8.0, 2.0),
        ])
        .unwrap();
        let mut f = [0.0; EMA_CHANNELS];
        for v in &mut f {
            *v = rng.random_range(-30.0..10.0);
        }
        let tv = derive_tvs_with(&ema_from(&[f]), &palate, 1.5);
        let row = tv.frames().row(0);
        let dist = |ax: f64, ay: f64, bx: f64, by: f64| ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
        assert!((row[0] - dist(f[2], f[3], f[4], f[5])).abs() < 1e-12);
        assert_eq!(row[1], f[2] - 1.5);
        assert!((row[2] - dist(f[2], f[3], f[0], f[1])).abs() < 1e-12);
        // constriction oracle: dense sampling along the palate
        for k in 0..3 {
            let (px, py) = (f[6 + 2 * k], f[7 + 2 * k]);
            let (mut best, mut best_x) = (f64::INFINITY, 0.0);
            for s in 0..=200_000 {
                let x = -45.0 + 53.0 * s as f64 / 200_000.0;
                let d = dist(px, py, x, palate.height_at(x).unwrap());
                if d < best {
                    best = d;
                    best_x = x;
                }
            }
            assert!((row[4 + 2 * k] - best).abs() < 1e-6, "degree {k}");
            assert!((row[3 + 2 * k] - best_x).abs() < 1e-3, "location {k}");
        }
    }

    #[test]
    fn stats_of_single_frame_are_degenerate() {
        let t = TvTrack::new(100.0, Matrix::filled(1, TV_CHANNELS, 3.0), false).unwrap();
        let s = compute_speaker_stats([&t]).unwrap();
        assert_eq!(s.min, s.max);
        assert!(s.is_degenerate());
        assert!(matches!(normalize_tvs(&t, &s), Err(GeometryError::ConstantChannel("LA"))));
    }

    #[test]
    fn stats_scan_channels() {
        let rows: Vec<[f64; TV_CHANNELS]> = (0..3).map(|i| [i as f64; TV_CHANNELS]).collect();
        let t = TvTrack::new(100.0, Matrix::from_rows(&rows), false).unwrap();
        let s = compute_speaker_stats([&t]).unwrap();
        assert_eq!((s.min[0], s.max[0]), (0.0, 2.0));
        assert!(matches!(compute_speaker_stats(std::iter::empty()), Err(GeometryError::EmptyInput)));
    }

    #[test]
    fn stats_over_many_tracks_match_concatenated_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tracks: Vec<TvTrack> = (0..3)
            .map(|_| {
                let n = rng.random_range(1..20);
                let data = (0..n * TV_CHANNELS).map(|_| rng.random_range(-5.0..5.0)).collect();
                TvTrack::new(100.0, Matrix::from_vec(n, TV_CHANNELS, data), false).unwrap()
            })
            .collect();
        let s = compute_speaker_stats(&tracks).unwrap();
        let all: Vec<&[f64]> = tracks.iter().flat_map(|t| t.frames().row_iter()).collect();
        for c in 0..TV_CHANNELS {
            let col: Vec<f64> = all.iter().map(|r| r[c]).collect();
            assert_eq!(s.min[c], col.iter().cloned().fold(f64::INFINITY, f64::min));
            assert_eq!(s.max[c], col.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
    }

    #[test]
    fn normalization_endpoints_midpoint_and_clamp() {
        let stats = SpeakerStats { min: [2.0; TV_CHANNELS], max: [6.0; TV_CHANNELS] };
        let rows = [[2.0; TV_CHANNELS], [6.0; TV_CHANNELS], [4.0; TV_CHANNELS], [7.0; TV_CHANNELS]];
        let t = TvTrack::new(100.0, Matrix::from_rows(&rows), false).unwrap();
        let n = normalize_tvs(&t, &stats).unwrap();
        assert_eq!(n.channel(TvChannel::Tdcd), vec![-1.0, 1.0, 0.0, 1.0]);
        assert!(n.is_normalized());
        let back = denormalize_tvs(&n, &stats).unwrap();
        for i in 0..3 {
            for c in 0..TV_CHANNELS {
                assert!((back.frames()[(i, c)] - rows[i][c]).abs() < 1e-9);
            }
        }
        assert!(normalize_tvs(&n, &stats).is_err());
    }

    #[test]
    fn stats_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stats.tsv");
        let mut stats = SpeakerStats { min: [0.0; TV_CHANNELS], max: [1.0; TV_CHANNELS] };
        stats.min[4] = -0.123456789012345;
        stats.max[8] = 1e-300;
        write_stats_tsv(&p, &stats).unwrap();
        assert_eq!(read_stats_tsv(&p).unwrap(), stats);
    }
}
