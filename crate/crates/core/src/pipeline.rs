//! Corpus layout and the glue from files on disk to training samples.
//!
//! A corpus root holds one directory per speaker. Utterance files share a
//! stem and differ by suffix; each speaker directory may also hold a
//! `speaker.emb.afm` embedding.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::eval::EvalError;
use crate::featio::{
    concat_speaker_embedding, encode_phoneme_pm_seq, frame_labels, read_afm, read_alignment_tsv, resample_linear,
    FeatError, FeatureMatrix, PhonemeAlignment,
};
use crate::geometry::{
    compute_speaker_stats, derive_tvs, fit_palate, normalize_tvs, read_ema_csv, EmaTrack, GeometryError, PalateModel,
    SpeakerStats, TvTrack,
};
use crate::eval::{mean_pcc, PccMode, PccReport};
use crate::matrix::Matrix;
use crate::models::{
    BaselineConfig, DecoderConfig, EpochLog, Inverter, KvConfig, ModelError, ModelKind, ProposedConfig, Sample,
    TrainConfig, TrainReport,
};

pub const EMA_SUFFIX: &str = ".ema.csv";
pub const FEAT_SUFFIX: &str = ".feat.afm";
pub const ALIGN_SUFFIX: &str = ".align.tsv";
pub const TV_SUFFIX: &str = ".tv.afm";
pub const MCEP_SUFFIX: &str = ".mcep.afm";
pub const EMB_FILE: &str = "speaker.emb.afm";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Feat(#[from] FeatError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}: missing")]
    Missing(PathBuf),
    #[error("{0}: no files ending in {1}")]
    NoFiles(PathBuf, &'static str),
}

/// Files under `root` ending in `suffix`, as `(stem, path)` sorted by stem.
///
/// The stem is the path relative to `root` with the suffix removed, using
/// `/` separators. A file `root` yields one entry whose stem is its name.
pub fn collect_files(root: &Path, suffix: &str) -> Result<Vec<(String, PathBuf)>, PipelineError> {
    if !root.exists() {
        return Err(PipelineError::Missing(root.to_path_buf()));
    }
    if root.is_file() {
        let name = root.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let stem = name.strip_suffix(suffix).unwrap_or(name).to_string();
        return Ok(vec![(stem, root.to_path_buf())]);
    }
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if let Some(rel) = path.strip_prefix(root).ok().and_then(|r| r.to_str()) {
                if let Some(stem) = rel.strip_suffix(suffix) {
                    out.push((stem.replace('\\', "/"), path.clone()));
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Immediate subdirectories of `root` that contain EMA files, sorted.
pub fn speaker_dirs(root: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    if !root.is_dir() {
        return Err(PipelineError::Missing(root.to_path_buf()));
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root)? {
        let path = entry?.path();
        if path.is_dir() && !collect_files(&path, EMA_SUFFIX)?.is_empty() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Reads every EMA track of a speaker directory, sorted by stem.
pub fn read_speaker_ema(dir: &Path) -> Result<Vec<(String, EmaTrack)>, PipelineError> {
    let files = collect_files(dir, EMA_SUFFIX)?;
    if files.is_empty() {
        return Err(PipelineError::NoFiles(dir.to_path_buf(), EMA_SUFFIX));
    }
    files.into_iter().map(|(s, p)| Ok((s, read_ema_csv(p)?))).collect()
}

/// Palate over all tongue points of a speaker.
pub fn fit_speaker_palate(tracks: &[(String, EmaTrack)]) -> Result<PalateModel, PipelineError> {
    Ok(fit_palate(tracks.iter().flat_map(|(_, t)| t.tongue_points()))?)
}

/// Unnormalized TVs of every track, then per-speaker stats.
pub fn speaker_tvs(
    tracks: &[(String, EmaTrack)],
    palate: &PalateModel,
) -> Result<(Vec<TvTrack>, SpeakerStats), PipelineError> {
    let raw: Vec<TvTrack> = tracks.iter().map(|(_, t)| derive_tvs(t, palate)).collect();
    let stats = compute_speaker_stats(raw.iter())?;
    Ok((raw, stats))
}

/// Mean/variance normalization of acoustic features, per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureNorm {
    None,
    /// Statistics over all frames of a speaker.
    #[default]
    Speaker,
    /// Statistics over each utterance.
    Utterance,
}

impl std::str::FromStr for FeatureNorm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(FeatureNorm::None),
            "speaker" => Ok(FeatureNorm::Speaker),
            "utterance" => Ok(FeatureNorm::Utterance),
            _ => Err(format!("unknown feature normalization {s:?}")),
        }
    }
}

impl std::fmt::Display for FeatureNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureNorm::None => "none",
            FeatureNorm::Speaker => "speaker",
            FeatureNorm::Utterance => "utterance",
        })
    }
}

/// Standardizes every column over the stacked rows of `mats` in place.
/// Constant columns are only centred.
pub fn standardize(mats: &mut [Matrix]) {
    let Some(d) = mats.first().map(Matrix::cols) else { return };
    let n: usize = mats.iter().map(Matrix::rows).sum();
    if n == 0 {
        return;
    }
    let mut mean = vec![0.0; d];
    for m in mats.iter() {
        for row in m.row_iter() {
            for (a, v) in mean.iter_mut().zip(row) {
                *a += v;
            }
        }
    }
    mean.iter_mut().for_each(|a| *a /= n as f64);
    let mut var = vec![0.0; d];
    for m in mats.iter() {
        for row in m.row_iter() {
            for ((a, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                *a += (v - mu) * (v - mu);
            }
        }
    }
    let sd: Vec<f64> = var.iter().map(|v| (v / n as f64).sqrt()).map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
    for m in mats.iter_mut() {
        for i in 0..m.rows() {
            for ((v, mu), s) in m.row_mut(i).iter_mut().zip(&mean).zip(&sd) {
                *v = (*v - mu) / s;
            }
        }
    }
}

/// Applies `norm` to a speaker's feature matrices.
pub fn normalize_features(mats: &mut [Matrix], norm: FeatureNorm) {
    match norm {
        FeatureNorm::None => {}
        FeatureNorm::Speaker => standardize(mats),
        FeatureNorm::Utterance => mats.iter_mut().for_each(|m| standardize(std::slice::from_mut(m))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    /// Append the speaker embedding to every feature frame.
    pub speaker_embedding: bool,
    pub feature_norm: FeatureNorm,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { speaker_embedding: false, feature_norm: FeatureNorm::Speaker }
    }
}

/// One utterance aligned to the EMA frame grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    /// `speaker/stem`
    pub id: String,
    pub features: Matrix,
    /// Normalized TVs.
    pub tv: TvTrack,
    pub alignment: PhonemeAlignment,
    pub labels: Vec<usize>,
}

impl Utterance {
    pub fn to_sample(&self) -> Sample {
        Sample {
            id: self.id.clone(),
            features: self.features.clone(),
            tv: self.tv.frames().clone(),
            pm: encode_phoneme_pm_seq(&self.labels),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerData {
    pub name: String,
    pub palate: PalateModel,
    pub stats: SpeakerStats,
    pub utterances: Vec<Utterance>,
}

/// Features of one speaker resampled to `rate`, normalized, then with the
/// embedding appended when given.
pub fn prepare_features(
    features: &[FeatureMatrix],
    rate: f64,
    norm: FeatureNorm,
    embedding: Option<&FeatureMatrix>,
) -> Result<Vec<Matrix>, PipelineError> {
    let mut mats = features
        .iter()
        .map(|f| Ok(if f.frame_rate() == rate { f.data().clone() } else { resample_linear(f, rate)?.into_data() }))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    normalize_features(&mut mats, norm);
    match embedding {
        None => Ok(mats),
        Some(e) => mats
            .into_iter()
            .map(|m| Ok(concat_speaker_embedding(&FeatureMatrix::new(rate, m)?, e)?.into_data()))
            .collect(),
    }
}

/// Loads a speaker directory: fits the palate, derives and normalizes TVs,
/// resamples features to the rate of the first EMA track, normalizes them,
/// and truncates features and TVs to the shorter of the two.
pub fn load_speaker(dir: &Path, opts: &LoadOptions) -> Result<SpeakerData, PipelineError> {
    let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("speaker").to_string();
    let tracks = read_speaker_ema(dir)?;
    let palate = fit_speaker_palate(&tracks)?;
    let (raw, stats) = speaker_tvs(&tracks, &palate)?;
    let embedding = if opts.speaker_embedding {
        let p = dir.join(EMB_FILE);
        if !p.exists() {
            return Err(PipelineError::Missing(p));
        }
        Some(read_afm(p)?)
    } else {
        None
    };
    let mut feats = Vec::with_capacity(tracks.len());
    let mut aligns = Vec::with_capacity(tracks.len());
    for (stem, _) in &tracks {
        let feat_path = dir.join(format!("{stem}{FEAT_SUFFIX}"));
        let align_path = dir.join(format!("{stem}{ALIGN_SUFFIX}"));
        for p in [&feat_path, &align_path] {
            if !p.exists() {
                return Err(PipelineError::Missing(p.clone()));
            }
        }
        feats.push(read_afm(&feat_path)?);
        aligns.push(read_alignment_tsv(&align_path)?);
    }
    let rate = tracks[0].1.frame_rate();
    let feats = prepare_features(&feats, rate, opts.feature_norm, embedding.as_ref())?;
    let mut utterances = Vec::with_capacity(tracks.len());
    for ((((stem, ema), tv), features), alignment) in tracks.iter().zip(&raw).zip(feats).zip(aligns) {
        let n = features.rows().min(tv.n_frames());
        let tv = normalize_tvs(tv, &stats)?;
        let tv = TvTrack::new(tv.frame_rate(), tv.frames().slice_rows(0, n), true)?;
        let labels = frame_labels(&alignment, ema.frame_rate(), n);
        utterances.push(Utterance { id: format!("{name}/{stem}"), features: features.slice_rows(0, n), tv, alignment, labels });
    }
    Ok(SpeakerData { name, palate, stats, utterances })
}

/// Loads every speaker directory under `root`, sorted by name.
pub fn load_corpus(root: &Path, opts: &LoadOptions) -> Result<Vec<SpeakerData>, PipelineError> {
    let dirs = speaker_dirs(root)?;
    if dirs.is_empty() {
        return Err(PipelineError::NoFiles(root.to_path_buf(), EMA_SUFFIX));
    }
    dirs.iter().map(|d| load_speaker(d, opts)).collect()
}

/// Run-level settings of a training config; every other key belongs to the
/// model or the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Corpus root with one directory per speaker.
    pub data: PathBuf,
    /// Output directory; only the command line requires it.
    pub out: Option<PathBuf>,
    /// Speakers excluded from training and scored after it.
    pub heldout_speakers: Vec<String>,
    /// Trailing fraction of each training speaker's utterances used for
    /// validation and early stopping.
    pub val_fraction: f64,
    pub load: LoadOptions,
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] =
        &["data", "out", "heldout_speakers", "val_fraction", "speaker_embedding", "feature_norm", "tv_rate", "model"];

    pub fn from_kv(kv: &KvConfig) -> Result<Self, ModelError> {
        let data: String = kv.get("data", String::new())?;
        let out: String = kv.get("out", String::new())?;
        if data.is_empty() {
            return Err(ModelError::Config("data is required".into()));
        }
        let val_fraction = kv.get("val_fraction", 0.1)?;
        if !(0.0..1.0).contains(&val_fraction) {
            return Err(ModelError::Config(format!("val_fraction must be in [0, 1), got {val_fraction}")));
        }
        Ok(Self {
            data: data.into(),
            out: (!out.is_empty()).then(|| out.into()),
            heldout_speakers: kv.get_list("heldout_speakers", &[])?,
            val_fraction,
            load: load_options(kv)?,
        })
    }

    /// Rejects keys no component knows.
    pub fn check_keys(kv: &KvConfig) -> Result<(), ModelError> {
        let known: Vec<&str> = [RunConfig::KEYS, BaselineConfig::KEYS, ProposedConfig::KEYS, TrainConfig::KEYS]
            .concat()
            .into_iter()
            .chain(DecoderConfig::KEYS.iter().copied())
            .collect();
        kv.check_known(&known)
    }
}

/// Feature loading options stored in a config or checkpoint.
pub fn load_options(kv: &KvConfig) -> Result<LoadOptions, ModelError> {
    let d = LoadOptions::default();
    Ok(LoadOptions {
        speaker_embedding: kv.get("speaker_embedding", d.speaker_embedding)?,
        feature_norm: kv
            .raw("feature_norm")
            .map(|v| v.parse().map_err(ModelError::Config))
            .transpose()?
            .unwrap_or(d.feature_norm),
    })
}

/// Training, validation and held-out utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub heldout: Vec<Utterance>,
}

/// Splits speakers into training and held-out; the last
/// `ceil(val_fraction · n)` utterances of each training speaker validate.
pub fn split_corpus(speakers: &[SpeakerData], heldout: &[String], val_fraction: f64) -> Result<CorpusSplit, ModelError> {
    for h in heldout {
        if !speakers.iter().any(|s| &s.name == h) {
            return Err(ModelError::Config(format!("held-out speaker {h:?} not in corpus")));
        }
    }
    let mut split = CorpusSplit { train: Vec::new(), val: Vec::new(), heldout: Vec::new() };
    for s in speakers {
        if heldout.contains(&s.name) {
            split.heldout.extend(s.utterances.iter().cloned());
            continue;
        }
        let n = s.utterances.len();
        let n_val = ((val_fraction * n as f64).ceil() as usize).min(n.saturating_sub(1));
        for (i, u) in s.utterances.iter().enumerate() {
            if i < n - n_val { split.train.push(u.to_sample()) } else { split.val.push(u.to_sample()) }
        }
    }
    if split.train.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    Ok(split)
}

/// Result of [`train_run`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub inverter: Inverter,
    pub report: TrainReport,
    /// Resolved config: the input plus `input_dim` and `tv_rate`.
    pub config: KvConfig,
    pub heldout_pcc: Option<PccReport>,
}

/// Loads the corpus named by `kv`, trains the configured model with the seed
/// from `kv`, and scores held-out speakers (concatenated-frame PCC).
pub fn train_run(kv: &KvConfig, on_epoch: impl FnMut(&EpochLog)) -> Result<TrainOutcome, PipelineError> {
    use rand::SeedableRng;
    RunConfig::check_keys(kv)?;
    let run = RunConfig::from_kv(kv)?;
    let speakers = load_corpus(&run.data, &run.load)?;
    let split = split_corpus(&speakers, &run.heldout_speakers, run.val_fraction)?;
    let mut config = kv.clone();
    let input_dim = split.train[0].features.cols();
    match kv.raw("input_dim") {
        Some(_) if kv.get("input_dim", 0usize)? != input_dim => {
            return Err(ModelError::Config(format!("input_dim does not match the data ({input_dim})")).into());
        }
        _ => config.set("input_dim", input_dim),
    }
    let tv_rate = speakers[0].utterances[0].tv.frame_rate();
    config.set("tv_rate", tv_rate);
    config.set("model", config.get("model", ModelKind::Baseline)?);
    let tc = TrainConfig::from_kv(&config)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(tc.seed);
    let mut inverter = Inverter::from_kv(&config, &mut rng)?;
    let report = inverter.train(&split.train, &split.val, &tc, on_epoch)?;
    let heldout_pcc = if split.heldout.is_empty() {
        None
    } else {
        let preds: Vec<Matrix> =
            split.heldout.iter().map(|u| inverter.predict(&u.features).map(|p| p.0)).collect::<Result<_, _>>().map_err(ModelError::from)?;
        let pairs: Vec<(&Matrix, &Matrix)> = preds.iter().zip(&split.heldout).map(|(p, u)| (p, u.tv.frames())).collect();
        Some(mean_pcc(&pairs, PccMode::Concatenated)?)
    };
    Ok(TrainOutcome { inverter, report, config, heldout_pcc })
}

/// Model inputs for feature files grouped by speaker directory, following
/// the loading options and rate stored in a checkpoint config.
pub fn inversion_inputs(files: &[(String, PathBuf)], ck_config: &KvConfig) -> Result<Vec<Matrix>, PipelineError> {
    let opts = load_options(ck_config)?;
    let rate: f64 = ck_config.get("tv_rate", 0.0)?;
    let mut out: Vec<Option<Matrix>> = vec![None; files.len()];
    let mut groups: std::collections::BTreeMap<PathBuf, Vec<usize>> = Default::default();
    for (i, (_, p)) in files.iter().enumerate() {
        groups.entry(p.parent().map(Path::to_path_buf).unwrap_or_default()).or_default().push(i);
    }
    for (dir, idx) in groups {
        let feats: Vec<FeatureMatrix> = idx.iter().map(|&i| read_afm(&files[i].1)).collect::<Result<_, _>>()?;
        let rate = if rate > 0.0 { rate } else { feats[0].frame_rate() };
        let emb = if opts.speaker_embedding {
            let p = dir.join(EMB_FILE);
            if !p.exists() {
                return Err(PipelineError::Missing(p));
            }
            Some(read_afm(p)?)
        } else {
            None
        };
        for (m, &i) in prepare_features(&feats, rate, opts.feature_norm, emb.as_ref())?.into_iter().zip(&idx) {
            out[i] = Some(m);
        }
    }
    Ok(out.into_iter().map(|m| m.expect("every file grouped")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collect_files_walks_and_sorts() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("b")).unwrap();
        fs::create_dir_all(dir.path().join("a")).unwrap();
        for f in ["b/u2.tv.afm", "a/u1.tv.afm", "a/u1.ema.csv", "top.tv.afm"] {
            fs::write(dir.path().join(f), b"").unwrap();
        }
        let stems: Vec<String> = collect_files(dir.path(), TV_SUFFIX).unwrap().into_iter().map(|(s, _)| s).collect();
        assert_eq!(stems, ["a/u1", "b/u2", "top"]);
        let single = collect_files(&dir.path().join("top.tv.afm"), TV_SUFFIX).unwrap();
        assert_eq!(single[0].0, "top");
        assert!(matches!(collect_files(&dir.path().join("nope"), TV_SUFFIX), Err(PipelineError::Missing(_))));
    }

    #[test]
    fn standardize_pools_rows() {
        let mut ms = vec![Matrix::from_rows(&[[1.0, 5.0], [3.0, 5.0]]), Matrix::from_rows(&[[5.0, 5.0]])];
        standardize(&mut ms);
        let sd = (8.0f64 / 3.0).sqrt();
        assert!((ms[0][(0, 0)] + 2.0 / sd).abs() < 1e-12);
        assert!((ms[1][(0, 0)] - 2.0 / sd).abs() < 1e-12);
        assert_eq!(ms[0][(1, 1)], 0.0);

        let mut per = ms.clone();
        normalize_features(&mut per, FeatureNorm::Utterance);
        assert_eq!(per[1].as_slice(), &[0.0, 0.0]);
        let mut none = ms.clone();
        normalize_features(&mut none, FeatureNorm::None);
        assert_eq!(none, ms);
        assert_eq!("speaker".parse::<FeatureNorm>().unwrap().to_string(), "speaker");
        assert!("global".parse::<FeatureNorm>().is_err());
    }
}
