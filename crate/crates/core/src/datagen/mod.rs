//! Synthetic multi-speaker articulatory corpora with a known forward map.
//!
//! Each speaker owns a quadratic palate dome, rest positions for the six EMA
//! sensors, a uniform scale and offset, and a mixing matrix `M` (`9 × D`).
//! An utterance is a phoneme sequence; every phoneme pulls the sensors toward
//! its articulatory target, the pull is perturbed by noise, smoothed, and
//! clipped below the palate. Acoustic features are
//! `z · M + b + σ·noise` with `z` the speaker-scaled TVs of the track.

mod corpus;

pub use corpus::{gen_corpus, write_corpus, SynthCorpus};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::featio::{FeatureMatrix, Interval, PhonemeAlignment, N_PHONEME_CLASSES};
use crate::geometry::{derive_tvs_with, EmaTrack, PalateModel, Point, Sensor, TvTrack, EMA_CHANNELS, TV_CHANNELS};
use crate::matrix::Matrix;

/// Rate of every generated track.
pub const SYNTH_RATE: f64 = 100.0;
pub const MIN_FRAMES: usize = 10;

const SHARED_MIX_SEED: u64 = 0x0005_eed0_fa11;
const TARGET_SEED: u64 = 0x007a_29e7;
const SMOOTH_WIDTH: usize = 5;
const PALATE_X: (f64, f64) = (-60.0, 20.0);
const PALATE_STEP: f64 = 2.0;

/// Canonical rest positions (mm) in sensor order.
const REST: [(f64, f64); 6] = [(6.0, -14.0), (12.0, 6.0), (12.0, -6.0), (0.0, -2.0), (-20.0, 0.0), (-40.0, -3.0)];

/// Per-channel scale turning raw TVs (mm) into the latent `z`.
const TV_SCALE: [f64; TV_CHANNELS] = [8.0, 3.0, 8.0, 15.0, 4.0, 15.0, 4.0, 15.0, 4.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub feat_dim: usize,
    pub emb_dim: usize,
    /// Feature noise standard deviation.
    pub noise_sigma: f64,
    /// Weight of the speaker-specific part of the mixing matrix.
    pub speaker_spread: f64,
    /// Standard deviation of the speaker feature bias.
    pub bias_sigma: f64,
    /// Squash features with `tanh`.
    pub nonlinear: bool,
    /// Standard deviation (mm) of the per-frame articulatory noise.
    pub walk_sigma: f64,
    /// Fraction of the distance to the target covered per frame.
    pub pull: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            feat_dim: 16,
            emb_dim: 8,
            noise_sigma: 0.01,
            speaker_spread: 0.1,
            bias_sigma: 0.5,
            nonlinear: false,
            walk_sigma: 0.3,
            pull: 0.25,
        }
    }
}

/// A synthetic speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpeaker {
    pub seed: u64,
    /// Dome `y = apex.y − curvature·(x − apex.x)²` in canonical coordinates.
    pub apex: Point,
    pub curvature: f64,
    /// Canonical rest positions in sensor order.
    pub rest: [Point; 6],
    pub scale: f64,
    pub offset: Point,
    /// `9 × feat_dim`, rank 9.
    pub mixing: Matrix,
    /// `1 × feat_dim`
    pub bias: Matrix,
    /// Latent centre: raw TVs of the rest pose.
    pub tv_center: [f64; TV_CHANNELS],
    pub embedding: Vec<f64>,
    pub config: SynthConfig,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn random_matrix<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize, scale: f64) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| scale * normal(rng)).collect())
}

/// Cholesky factor of a symmetric matrix, or `None` unless positive definite
/// with every pivot above `tol`.
fn cholesky(a: &Matrix, tol: f64) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                let d = a[(i, i)] - s;
                if d <= tol {
                    return None;
                }
                l[(i, i)] = d.sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Whether `m` (`r × c`, `r ≤ c`) has full row rank, judged by the Gram matrix.
pub fn has_full_row_rank(m: &Matrix) -> bool {
    m.rows() <= m.cols() && cholesky(&m.matmul(&m.transpose()), 1e-8).is_some()
}

fn gen_mixing<R: Rng + ?Sized>(rng: &mut R, cfg: &SynthConfig) -> Matrix {
    let scale = 1.0 / (TV_CHANNELS as f64).sqrt();
    let shared = random_matrix(&mut ChaCha8Rng::seed_from_u64(SHARED_MIX_SEED), TV_CHANNELS, cfg.feat_dim, scale);
    loop {
        let own = random_matrix(rng, TV_CHANNELS, cfg.feat_dim, scale * cfg.speaker_spread);
        let m = shared.zip_map(&own, |a, b| a + b);
        if has_full_row_rank(&m) {
            return m;
        }
    }
}

/// Builds speaker `seed` with the default configuration.
pub fn gen_speaker(seed: u64) -> SynthSpeaker {
    gen_speaker_with(seed, &SynthConfig::default())
}

/// Deterministic per `(seed, cfg)`.
///
/// # Panics
/// If `cfg.feat_dim < 9`.
pub fn gen_speaker_with(seed: u64, cfg: &SynthConfig) -> SynthSpeaker {
    assert!(cfg.feat_dim >= TV_CHANNELS, "feat_dim must be at least {TV_CHANNELS}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let apex = Point::new(-20.0 + rng.random_range(-3.0..3.0), 9.0 + rng.random_range(-1.0..1.0));
    let curvature = rng.random_range(0.004..0.007);
    let mut rest = [Point::new(0.0, 0.0); 6];
    for (r, &(x, y)) in rest.iter_mut().zip(&REST) {
        *r = Point::new(x + rng.random_range(-1.5..1.5), y + rng.random_range(-1.0..1.0));
    }
    let scale = rng.random_range(0.9..1.1);
    let offset = Point::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let mixing = gen_mixing(&mut rng, cfg);
    let bias = random_matrix(&mut rng, 1, cfg.feat_dim, cfg.bias_sigma);
    let embedding = (0..cfg.emb_dim).map(|_| normal(&mut rng)).collect();
    let mut spk = SynthSpeaker {
        seed,
        apex,
        curvature,
        rest,
        scale,
        offset,
        mixing,
        bias,
        tv_center: [0.0; TV_CHANNELS],
        embedding,
        config: cfg.clone(),
    };
    let rest_frame = Matrix::from_vec(1, EMA_CHANNELS, spk.rest.iter().flat_map(|p| spk.place(*p)).collect());
    let rest_track = EmaTrack::new(SYNTH_RATE, rest_frame).expect("finite rest pose");
    let tv = derive_tvs_with(&rest_track, &spk.palate(), spk.lp_reference());
    spk.tv_center.copy_from_slice(tv.frames().row(0));
    spk
}

impl SynthSpeaker {
    fn dome(&self, x: f64) -> f64 {
        self.apex.y - self.curvature * (x - self.apex.x).powi(2)
    }

    /// Canonical-to-world coordinates.
    fn place(&self, p: Point) -> [f64; 2] {
        [self.offset.x + self.scale * p.x, self.offset.y + self.scale * p.y]
    }

    /// Dome sampled every 2 mm, in canonical coordinates.
    fn canonical_palate(&self) -> PalateModel {
        let n = ((PALATE_X.1 - PALATE_X.0) / PALATE_STEP) as usize;
        let pts = (0..=n)
            .map(|i| {
                let x = PALATE_X.0 + i as f64 * PALATE_STEP;
                Point::new(x, self.dome(x))
            })
            .collect();
        PalateModel::new(pts).expect("dome is concave")
    }

    /// True palate trace in world coordinates.
    pub fn palate(&self) -> PalateModel {
        let pts = self
            .canonical_palate()
            .vertices()
            .iter()
            .map(|&p| {
                let [x, y] = self.place(p);
                Point::new(x, y)
            })
            .collect();
        PalateModel::new(pts).expect("uniform positive scale keeps concavity")
    }

    /// World x of the rest upper lip.
    pub fn lp_reference(&self) -> f64 {
        self.place(self.rest[Sensor::UpperLip as usize])[0]
    }

    /// Raw TVs (against the true palate) to latent `z`.
    pub fn tv_to_latent(&self, tv: &Matrix) -> Matrix {
        let mut z = tv.clone();
        for i in 0..z.rows() {
            for (j, v) in z.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.tv_center[j]) / (TV_SCALE[j] * self.scale);
            }
        }
        z
    }

    pub fn latent_to_tv(&self, z: &Matrix) -> Matrix {
        let mut tv = z.clone();
        for i in 0..tv.rows() {
            for (j, v) in tv.row_mut(i).iter_mut().enumerate() {
                *v = *v * TV_SCALE[j] * self.scale + self.tv_center[j];
            }
        }
        tv
    }

    /// Noiseless linear image `z · M + b`.
    pub fn mix(&self, z: &Matrix) -> Matrix {
        let mut f = z.matmul(&self.mixing);
        for i in 0..f.rows() {
            for (v, b) in f.row_mut(i).iter_mut().zip(self.bias.row(0)) {
                *v += b;
            }
        }
        f
    }

    /// Least-squares inverse of [`Self::mix`] through the normal equations.
    pub fn unmix(&self, features: &Matrix) -> Matrix {
        let gram = self.mixing.matmul(&self.mixing.transpose());
        let l = cholesky(&gram, 0.0).expect("full-rank mixing");
        let mut centred = features.clone();
        for i in 0..centred.rows() {
            for (v, b) in centred.row_mut(i).iter_mut().zip(self.bias.row(0)) {
                *v -= b;
            }
        }
        let rhs = centred.matmul(&self.mixing.transpose());
        let n = gram.rows();
        let mut z = Matrix::zeros(rhs.rows(), n);
        for t in 0..rhs.rows() {
            // solve L y = rhs, then Lᵀ z = y
            let mut y = vec![0.0; n];
            for i in 0..n {
                let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
                y[i] = (rhs[(t, i)] - s) / l[(i, i)];
            }
            for i in (0..n).rev() {
                let s: f64 = (i + 1..n).map(|k| l[(k, i)] * z[(t, k)]).sum();
                z[(t, i)] = (y[i] - s) / l[(i, i)];
            }
        }
        z
    }
}

/// One generated utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub ema: EmaTrack,
    pub features: FeatureMatrix,
    pub alignment: PhonemeAlignment,
    /// Raw TVs against the true palate; the features are a function of these.
    pub tvs: TvTrack,
}

/// Sensor offsets (canonical mm) a phoneme pulls toward.
fn phoneme_target(label: &str, class: usize) -> [(f64, f64); 6] {
    let li = Sensor::LowerIncisor as usize;
    let ul = Sensor::UpperLip as usize;
    let ll = Sensor::LowerLip as usize;
    match label {
        "sil" => [(0.0, 0.0); 6],
        // open jaw, spread lips
        "AE" => {
            let mut t = [(0.0, 0.0); 6];
            t[li] = (0.0, -5.0);
            t[ul] = (-1.0, 1.5);
            t[ll] = (-1.0, -7.0);
            t[3] = (0.0, -3.0);
            t[4] = (1.0, -2.0);
            t
        }
        // rounded, protruded, nearly closed lips
        "UW" => {
            let mut t = [(0.0, 0.0); 6];
            t[li] = (0.0, 1.0);
            t[ul] = (3.0, -1.5);
            t[ll] = (3.0, 3.5);
            t[4] = (-2.0, 2.0);
            t[5] = (-1.0, 2.5);
            t
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(TARGET_SEED + class as u64);
            let mut t = [(0.0, 0.0); 6];
            for o in &mut t[..3] {
                *o = (rng.random_range(-2.5..2.5), rng.random_range(-3.0..3.0));
            }
            // tongue targets may lie above the palate; clipping turns them into
            // contact. A raised tip moves forward and a raised dorsum moves back,
            // so the extreme tongue points are contact points.
            for (k, lean) in [(3, 0.4), (4, 0.0), (5, -0.4)] {
                let dy = rng.random_range(-4.0..14.0);
                t[k] = (lean * dy + rng.random_range(-1.5..1.5), dy);
            }
            t
        }
    }
}

fn gen_alignment<R: Rng + ?Sized>(n_frames: usize, rng: &mut R) -> PhonemeAlignment {
    let labels: Vec<&str> = (0..N_PHONEME_CLASSES - 1).map(|c| crate::featio::phoneme_label(c).expect("class")).collect();
    let mut bounds = vec![0usize];
    let first = rng.random_range(5..=15.min(n_frames - 5));
    bounds.push(first);
    let mut at = first;
    while at < n_frames {
        let mut len = rng.random_range(5..=15);
        if n_frames - at < len + 5 {
            len = n_frames - at;
        }
        at += len;
        bounds.push(at);
    }
    let n = bounds.len() - 1;
    let mut names: Vec<&str> = (0..n).map(|_| labels[rng.random_range(0..labels.len())]).collect();
    if !names.contains(&"AE") {
        let k = rng.random_range(0..n);
        names[k] = "AE";
    }
    if !names.contains(&"UW") {
        let free: Vec<usize> = (0..n).filter(|&k| names[k] != "AE").collect();
        names[free[rng.random_range(0..free.len())]] = "UW";
    }
    let intervals = bounds
        .windows(2)
        .zip(names)
        .map(|(w, l)| Interval { start: w[0] as f64 / SYNTH_RATE, end: w[1] as f64 / SYNTH_RATE, label: l.to_string() })
        .collect();
    PhonemeAlignment::new(intervals).expect("contiguous intervals")
}

/// Centred moving average, truncated at the edges.
fn smooth(x: &[f64]) -> Vec<f64> {
    let h = SMOOTH_WIDTH / 2;
    (0..x.len())
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(h), (i + h + 1).min(x.len()));
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Generates one utterance.
///
/// # Panics
/// If `n_frames < 10`.
pub fn gen_utterance<R: Rng + ?Sized>(spk: &SynthSpeaker, n_frames: usize, rng: &mut R) -> SynthUtterance {
    assert!(n_frames >= MIN_FRAMES, "an utterance needs at least {MIN_FRAMES} frames");
    let cfg = &spk.config;
    let alignment = gen_alignment(n_frames, rng);
    let frame_labels = crate::featio::frame_labels(&alignment, SYNTH_RATE, n_frames);

    // canonical coordinate walks, one column per EMA channel
    let mut cols = vec![vec![0.0; n_frames]; EMA_CHANNELS];
    let mut state: Vec<f64> = spk.rest.iter().flat_map(|p| [p.x, p.y]).collect();
    for (t, &class) in frame_labels.iter().enumerate() {
        let label = crate::featio::phoneme_label(class).expect("class");
        let target = phoneme_target(label, class);
        for (s, (dx, dy)) in target.iter().enumerate() {
            for (k, d) in [dx, dy].into_iter().enumerate() {
                let c = 2 * s + k;
                let goal = [spk.rest[s].x, spk.rest[s].y][k] + d;
                state[c] += cfg.pull * (goal - state[c]) + cfg.walk_sigma * normal(rng);
                cols[c][t] = state[c];
            }
        }
    }
    let cols: Vec<Vec<f64>> = cols.iter().map(|c| smooth(c)).collect();

    let palate = spk.canonical_palate();
    let (x_lo, x_hi) = palate.x_range();
    let mut frames = Matrix::zeros(n_frames, EMA_CHANNELS);
    for t in 0..n_frames {
        let mut p: Vec<Point> = (0..6).map(|s| Point::new(cols[2 * s][t], cols[2 * s + 1][t])).collect();
        for s in Sensor::TONGUE {
            let q = &mut p[s as usize];
            q.x = q.x.clamp(x_lo, x_hi);
            q.y = q.y.min(palate.height_at(q.x).expect("clamped into range"));
        }
        // lower lip stays under the upper lip
        let (ul, ll) = (Sensor::UpperLip as usize, Sensor::LowerLip as usize);
        p[ll].y = p[ll].y.min(p[ul].y - 1.0);
        let row = frames.row_mut(t);
        for (s, q) in p.iter().enumerate() {
            let [x, y] = spk.place(*q);
            row[2 * s] = x;
            row[2 * s + 1] = y;
        }
    }
    let ema = EmaTrack::new(SYNTH_RATE, frames).expect("finite walk");
    let tvs = derive_tvs_with(&ema, &spk.palate(), spk.lp_reference());

    let mut f = spk.mix(&spk.tv_to_latent(tvs.frames()));
    if cfg.nonlinear {
        f = f.map(f64::tanh);
    }
    if cfg.noise_sigma > 0.0 {
        for v in f.as_mut_slice() {
            *v += cfg.noise_sigma * normal(rng);
        }
    }
    let features = FeatureMatrix::new(SYNTH_RATE, f).expect("finite features");
    SynthUtterance { ema, features, alignment, tvs }
}
