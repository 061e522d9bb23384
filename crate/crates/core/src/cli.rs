//! Command-line interface. Exit codes: 0 success, 1 internal or numeric
//! failure, 2 usage or validation error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::datagen::{gen_corpus, write_corpus, SynthConfig, MIN_FRAMES};
use crate::diffcore::{read_checkpoint, DiffError};
use crate::eval::{
    dtw_mcd, mean_pcc, per_phoneme_l1, phoneme_accuracy_logits, phoneme_accuracy_pm, vowel_la_summary, EvalError,
    EvalReport, PccMode, PhonemeL1, VOWEL_LA_HEADER,
};
use crate::featio::{
    frame_labels, read_afm, read_alignment_tsv, write_afm, FeatError, FeatureMatrix, PhonemeAlignment, PhonemeInventory,
    N_PHONEME_CLASSES, PM_DIMS,
};
use crate::geometry::{
    compute_speaker_stats, derive_tvs, normalize_tvs, read_ema_csv, read_palate_csv, read_stats_tsv, write_palate_csv,
    GeometryError, TvChannel, TvTrack, TV_CHANNELS,
};
use crate::matrix::Matrix;
use crate::models::{Inverter, KvConfig, ModelError, TRAIN_LOG_HEADER};
use crate::pipeline::{
    collect_files, fit_speaker_palate, inversion_inputs, read_speaker_ema, train_run, PipelineError, ALIGN_SUFFIX,
    EMA_SUFFIX, MCEP_SUFFIX, TV_SUFFIX,
};

/// Suffix of the auxiliary phoneme output written by `invert`.
pub const PHN_SUFFIX: &str = ".phn.afm";

#[derive(Debug, Parser)]
#[command(name = "aai", version, about = "Acoustic-to-articulatory inversion toolkit")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-utterance stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic multi-speaker corpus.
    GenSynth(GenSynthArgs),
    /// Fit a palate trace to all tongue points of one speaker.
    PalateFit(PalateFitArgs),
    /// Derive normalized tract variables from EMA.
    DeriveTv(DeriveTvArgs),
    /// Train an inverter from a key = value config.
    Train(TrainArgs),
    /// Predict TVs for feature files.
    Invert(InvertArgs),
    /// Score predicted TVs against reference TVs.
    Evaluate(EvaluateArgs),
    /// Emit plot-ready TSV.
    PlotData(PlotDataArgs),
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[arg(long)]
    pub speakers: usize,
    #[arg(long)]
    pub utts: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub frames: usize,
    /// Feature noise standard deviation.
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    #[arg(long, default_value_t = 16)]
    pub feat_dim: usize,
    /// Squash features with tanh.
    #[arg(long)]
    pub nonlinear: bool,
}

#[derive(Debug, Args)]
pub struct PalateFitArgs {
    #[arg(long)]
    pub ema_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DeriveTvArgs {
    /// EMA file or directory.
    #[arg(long)]
    pub ema: PathBuf,
    #[arg(long)]
    pub palate: PathBuf,
    /// Normalization statistics; computed over the speaker's files when absent.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `key=value` override, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Feature file or directory.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted TV file or directory.
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference TV file or directory.
    #[arg(long = "true")]
    pub truth: PathBuf,
    /// Alignment file or directory; enables per-phoneme L1 and accuracy.
    #[arg(long)]
    pub align: Option<PathBuf>,
    /// Output directory for the report tables.
    #[arg(long)]
    pub report: PathBuf,
    /// PCC aggregation: concatenated or per-utterance.
    #[arg(long, default_value = "concatenated")]
    pub pcc_mode: String,
    /// Mel-cepstra of resynthesized speech.
    #[arg(long, requires = "mcep_ref")]
    pub mcep_pred: Option<PathBuf>,
    /// Mel-cepstra of reference speech.
    #[arg(long, requires = "mcep_pred")]
    pub mcep_ref: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotDataArgs {
    /// vowel-la, training-curve or tv-traces.
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub out: PathBuf,
    /// TV file or directory.
    #[arg(long)]
    pub tv: Option<PathBuf>,
    /// Reference TV file for tv-traces.
    #[arg(long = "true")]
    pub truth: Option<PathBuf>,
    /// Alignment file or directory for vowel-la.
    #[arg(long)]
    pub align: Option<PathBuf>,
    /// Training log for training-curve.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("unknown plot kind {0:?}; expected vowel-la, training-curve or tv-traces")]
    UnknownKind(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Pipeline(e.into())
    }
}
impl From<FeatError> for CliError {
    fn from(e: FeatError) -> Self {
        CliError::Pipeline(e.into())
    }
}
impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Pipeline(e.into())
    }
}
impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Pipeline(e.into())
    }
}
impl From<DiffError> for CliError {
    fn from(e: DiffError) -> Self {
        CliError::Pipeline(ModelError::from(e).into())
    }
}
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Pipeline(e.into())
    }
}

fn io_code(e: &std::io::Error) -> i32 {
    if matches!(e.kind(), ErrorKind::NotFound | ErrorKind::InvalidData | ErrorKind::UnexpectedEof) { 2 } else { 1 }
}

impl CliError {
    /// 2 for bad input or usage, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use PipelineError as P;
        match self {
            CliError::Usage(_) | CliError::UnknownKind(_) => 2,
            CliError::Pipeline(p) => match p {
                P::Missing(_) | P::NoFiles(..) | P::Eval(_) => 2,
                P::Io(e) => io_code(e),
                P::Feat(FeatError::Io(e)) | P::Geometry(GeometryError::Io(e)) => io_code(e),
                P::Feat(FeatError::NonFinite) => 1,
                P::Feat(_) => 2,
                P::Geometry(GeometryError::NonFinite(_)) => 1,
                P::Geometry(_) => 2,
                P::Model(m) => match m {
                    ModelError::NonFinite(_) | ModelError::Diff(DiffError::NonFinite(_)) => 1,
                    ModelError::Diff(DiffError::Io(e)) => io_code(e),
                    ModelError::Eval(_) | ModelError::Config(_) | ModelError::EmptyDataset | ModelError::Diff(_) => 2,
                },
            },
        }
    }
}

/// Parses `args` (program name first), runs, reports errors on stderr and
/// returns the exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let jobs = cli.jobs.unwrap_or(0);
    if cli.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let seed = cli.seed;
    pool.install(|| match cli.command {
        Command::GenSynth(a) => gen_synth(a, seed.unwrap_or(0)),
        Command::PalateFit(a) => palate_fit(a),
        Command::DeriveTv(a) => derive_tv(a),
        Command::Train(a) => train(a, seed),
        Command::Invert(a) => invert(a),
        Command::Evaluate(a) => evaluate(a),
        Command::PlotData(a) => plot_data(a),
    })
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    Ok(())
}

/// Output path for `stem`: `out` itself for single-file input, else
/// `out/<stem><suffix>`.
fn output_path(out: &Path, single: bool, stem: &str, suffix: &str) -> PathBuf {
    if single { out.to_path_buf() } else { out.join(format!("{stem}{suffix}")) }
}

fn gen_synth(a: GenSynthArgs, seed: u64) -> Result<(), CliError> {
    if a.frames < MIN_FRAMES {
        return Err(CliError::Usage(format!("--frames must be at least {MIN_FRAMES}")));
    }
    if a.feat_dim < TV_CHANNELS {
        return Err(CliError::Usage(format!("--feat-dim must be at least {TV_CHANNELS}")));
    }
    if !(a.sigma.is_finite() && a.sigma >= 0.0) {
        return Err(CliError::Usage("--sigma must be a non-negative number".into()));
    }
    let cfg = SynthConfig { feat_dim: a.feat_dim, noise_sigma: a.sigma, nonlinear: a.nonlinear, ..SynthConfig::default() };
    let corpus = gen_corpus(a.speakers, a.utts, a.frames, seed, &cfg);
    write_corpus(&a.out, &corpus)?;
    Ok(())
}

fn palate_fit(a: PalateFitArgs) -> Result<(), CliError> {
    let tracks = read_speaker_ema(&a.ema_dir)?;
    let palate = fit_speaker_palate(&tracks)?;
    ensure_parent(&a.out)?;
    write_palate_csv(&a.out, &palate)?;
    Ok(())
}

fn derive_tv(a: DeriveTvArgs) -> Result<(), CliError> {
    let palate = read_palate_csv(&a.palate)?;
    let files = collect_files(&a.ema, EMA_SUFFIX)?;
    if files.is_empty() {
        return Err(PipelineError::NoFiles(a.ema.clone(), EMA_SUFFIX).into());
    }
    let single = a.ema.is_file();
    let raw: Vec<TvTrack> = files
        .par_iter()
        .map(|(_, p)| Ok(derive_tvs(&read_ema_csv(p)?, &palate)))
        .collect::<Result<_, GeometryError>>()?;
    let stats = match &a.stats {
        Some(p) => read_stats_tsv(p)?,
        None if single => {
            let dir = a.ema.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let sibling: Vec<TvTrack> = read_speaker_ema(dir)?.iter().map(|(_, t)| derive_tvs(t, &palate)).collect();
            compute_speaker_stats(sibling.iter())?
        }
        None => compute_speaker_stats(raw.iter())?,
    };
    files.par_iter().zip(&raw).try_for_each(|((stem, _), tv)| -> Result<(), CliError> {
        let tv = normalize_tvs(tv, &stats)?;
        let out = output_path(&a.out, single, stem, TV_SUFFIX);
        ensure_parent(&out)?;
        write_afm(&out, &FeatureMatrix::new(tv.frame_rate(), tv.into_frames())?)?;
        Ok(())
    })
}

fn train(a: TrainArgs, seed: Option<u64>) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.config).map_err(|e| match e.kind() {
        ErrorKind::NotFound => CliError::Usage(format!("{}: missing", a.config.display())),
        _ => e.into(),
    })?;
    let mut kv = KvConfig::parse(&text)?;
    for o in &a.overrides {
        kv.apply_override(o)?;
    }
    if let Some(s) = seed {
        kv.set("seed", s);
    }
    let out: String = kv.get("out", String::new())?;
    if out.is_empty() {
        return Err(CliError::Usage("config key out is required".into()));
    }
    let out = PathBuf::from(out);
    println!("{TRAIN_LOG_HEADER}");
    let outcome = train_run(&kv, |e| println!("{}", e.tsv_row()))?;
    fs::create_dir_all(&out)?;
    let mut ck = outcome.inverter.to_checkpoint();
    ck.config_text = outcome.config.render();
    crate::diffcore::write_checkpoint(out.join("model.ckpt"), &ck)?;
    fs::write(out.join("train_log.tsv"), outcome.report.to_tsv())?;
    fs::write(out.join("config.txt"), outcome.config.render())?;
    if let Some(p) = &outcome.heldout_pcc {
        let report = EvalReport { pcc: Some(p.clone()), ..EvalReport::default() };
        fs::write(out.join("heldout_pcc.tsv"), report.pcc_tsv())?;
        println!("held-out mean PCC {:.4}", p.mean);
    }
    Ok(())
}

fn invert(a: InvertArgs) -> Result<(), CliError> {
    let ck = read_checkpoint(&a.checkpoint)?;
    let ck_config = KvConfig::parse(&ck.config_text)?;
    let inv = Inverter::from_checkpoint(&ck)?;
    let files = collect_files(&a.features, crate::pipeline::FEAT_SUFFIX)?;
    if files.is_empty() {
        return Err(PipelineError::NoFiles(a.features.clone(), crate::pipeline::FEAT_SUFFIX).into());
    }
    let single = a.features.is_file();
    let inputs = inversion_inputs(&files, &ck_config)?;
    let rate: f64 = ck_config.get("tv_rate", 0.0)?;
    files.par_iter().zip(&inputs).try_for_each(|((stem, path), x)| -> Result<(), CliError> {
        let (tv, aux) = inv.predict(x)?;
        let rate = if rate > 0.0 { rate } else { read_afm(path)?.frame_rate() };
        let out = output_path(&a.out, single, stem, TV_SUFFIX);
        ensure_parent(&out)?;
        write_afm(&out, &FeatureMatrix::new(rate, tv)?)?;
        if !single {
            write_afm(a.out.join(format!("{stem}{PHN_SUFFIX}")), &FeatureMatrix::new(rate, aux)?)?;
        }
        Ok(())
    })
}

fn read_tv(path: &Path) -> Result<TvTrack, CliError> {
    let f = read_afm(path)?;
    if f.n_dims() != TV_CHANNELS {
        return Err(CliError::Usage(format!("{}: expected {TV_CHANNELS} TV channels, got {}", path.display(), f.n_dims())));
    }
    let rate = f.frame_rate();
    Ok(TvTrack::new(rate, f.into_data(), true)?)
}

/// `(stem, a, b)` triples for stems present under both roots.
fn paired(a: &Path, a_suffix: &'static str, b: &Path, b_suffix: &'static str) -> Result<Vec<(String, PathBuf, PathBuf)>, CliError> {
    let left = collect_files(a, a_suffix)?;
    let right = collect_files(b, b_suffix)?;
    if a.is_file() && b.is_file() {
        return Ok(vec![(left[0].0.clone(), left[0].1.clone(), right[0].1.clone())]);
    }
    let mut out = Vec::with_capacity(left.len());
    for (stem, p) in left {
        match right.iter().find(|(s, _)| *s == stem) {
            Some((_, q)) => out.push((stem, p, q.clone())),
            None => return Err(CliError::Usage(format!("{stem}: no counterpart under {}", b.display()))),
        }
    }
    if out.is_empty() {
        return Err(PipelineError::NoFiles(a.to_path_buf(), a_suffix).into());
    }
    Ok(out)
}

fn alignment_for(root: &Path, stem: &str) -> Result<PhonemeAlignment, CliError> {
    let p = if root.is_file() { root.to_path_buf() } else { root.join(format!("{stem}{ALIGN_SUFFIX}")) };
    if !p.exists() {
        return Err(PipelineError::Missing(p).into());
    }
    Ok(read_alignment_tsv(p)?)
}

fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let mode = match a.pcc_mode.as_str() {
        "concatenated" => PccMode::Concatenated,
        "per-utterance" => PccMode::PerUtterance,
        m => return Err(CliError::Usage(format!("unknown --pcc-mode {m:?}"))),
    };
    let pairs = paired(&a.pred, TV_SUFFIX, &a.truth, TV_SUFFIX)?;
    let tracks: Vec<(String, TvTrack, TvTrack)> = pairs
        .par_iter()
        .map(|(s, p, t)| Ok((s.clone(), read_tv(p)?, read_tv(t)?)))
        .collect::<Result<_, CliError>>()?;
    for (_, p, t) in &tracks {
        if p.n_frames() != t.n_frames() {
            return Err(EvalError::LengthMismatch(p.n_frames(), t.n_frames()).into());
        }
    }
    let mats: Vec<(&Matrix, &Matrix)> = tracks.iter().map(|(_, p, t)| (p.frames(), t.frames())).collect();
    let mut report = EvalReport { pcc: Some(mean_pcc(&mats, mode)?), ..EvalReport::default() };

    if let Some(align_root) = &a.align {
        let parts: Vec<(PhonemeL1, Option<(usize, f64)>)> = tracks
            .par_iter()
            .map(|(stem, p, t)| {
                let align = alignment_for(align_root, stem)?;
                let l1 = per_phoneme_l1(p, t, &align)?;
                let phn = if a.pred.is_dir() { a.pred.join(format!("{stem}{PHN_SUFFIX}")) } else { PathBuf::new() };
                let acc = if phn.is_file() {
                    let aux = read_afm(&phn)?.into_data();
                    let labels = frame_labels(&align, t.frame_rate(), aux.rows());
                    let acc = match aux.cols() {
                        N_PHONEME_CLASSES => phoneme_accuracy_logits(&aux, &labels)?,
                        PM_DIMS => phoneme_accuracy_pm(&aux, &labels, PhonemeInventory::builtin())?,
                        d => return Err(CliError::Usage(format!("{}: unexpected {d}-dim phoneme output", phn.display()))),
                    };
                    Some((aux.rows(), acc))
                } else {
                    None
                };
                Ok((l1, acc))
            })
            .collect::<Result<_, CliError>>()?;
        let (mut hits, mut frames) = (0.0, 0usize);
        for (l1, acc) in &parts {
            report.phoneme_l1.merge(l1);
            if let Some((n, acc)) = acc {
                hits += acc * *n as f64;
                frames += n;
            }
        }
        if frames > 0 {
            report.phoneme_accuracy = Some(hits / frames as f64);
        }
    }

    if let (Some(mp), Some(mr)) = (&a.mcep_pred, &a.mcep_ref) {
        let mp_pairs = paired(mp, MCEP_SUFFIX, mr, MCEP_SUFFIX)?;
        report.mcd = mp_pairs
            .par_iter()
            .map(|(s, p, r)| Ok((s.clone(), dtw_mcd(read_afm(p)?.data(), read_afm(r)?.data())?)))
            .collect::<Result<_, CliError>>()?;
    }

    fs::create_dir_all(&a.report)?;
    fs::write(a.report.join("pcc.tsv"), report.pcc_tsv())?;
    if a.align.is_some() {
        fs::write(a.report.join("l1.tsv"), report.l1_tsv())?;
        fs::write(a.report.join("accuracy.tsv"), report.accuracy_tsv())?;
    }
    if !report.mcd.is_empty() {
        fs::write(a.report.join("mcd.tsv"), report.mcd_tsv())?;
    }
    Ok(())
}

fn plot_data(a: PlotDataArgs) -> Result<(), CliError> {
    let need = |p: &Option<PathBuf>, flag: &str| {
        p.clone().ok_or_else(|| CliError::Usage(format!("--kind {} needs {flag}", a.kind)))
    };
    let text = match a.kind.as_str() {
        "vowel-la" => vowel_la_tsv(&need(&a.tv, "--tv")?, &need(&a.align, "--align")?)?,
        "training-curve" => training_curve_tsv(&need(&a.log, "--log")?)?,
        "tv-traces" => tv_traces_tsv(&need(&a.tv, "--tv")?, a.truth.as_deref())?,
        k => return Err(CliError::UnknownKind(k.to_string())),
    };
    ensure_parent(&a.out)?;
    fs::write(&a.out, text)?;
    Ok(())
}

/// Speaker of a file: the name of its directory.
fn speaker_of(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.canonicalize().ok())
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "-".to_string())
}

fn vowel_la_tsv(tv_root: &Path, align_root: &Path) -> Result<String, CliError> {
    let files = collect_files(tv_root, TV_SUFFIX)?;
    if files.is_empty() {
        return Ok(format!("{VOWEL_LA_HEADER}\n"));
    }
    let loaded: Vec<(String, TvTrack, PhonemeAlignment)> = files
        .par_iter()
        .map(|(stem, p)| Ok((speaker_of(p), read_tv(p)?, alignment_for(align_root, stem)?)))
        .collect::<Result<_, CliError>>()?;
    let items: Vec<(&str, &TvTrack, &PhonemeAlignment)> =
        loaded.iter().map(|(s, t, al)| (s.as_str(), t, al)).collect();
    Ok(vowel_la_summary(&items, None)?.to_tsv())
}

fn training_curve_tsv(log: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(log)?;
    let mut lines = text.lines();
    if lines.next() != Some(TRAIN_LOG_HEADER) {
        return Err(CliError::Usage(format!("{}: not a training log", log.display())));
    }
    let mut out = String::from("epoch\ttrain_tv_mae\tval_tv_mae\tval_pcc\td_loss\n");
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        let ok = f.len() == 6 && f.iter().all(|v| *v == "NA" || v.parse::<f64>().is_ok());
        if !ok {
            return Err(CliError::Usage(format!("{}:{}: malformed row", log.display(), i + 2)));
        }
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", f[0], f[2], f[4], f[5], f[3]);
    }
    Ok(out)
}

fn tv_traces_tsv(tv: &Path, truth: Option<&Path>) -> Result<String, CliError> {
    let pred = read_tv(tv)?;
    let truth = truth.map(read_tv).transpose()?;
    if let Some(t) = &truth {
        if t.n_frames() != pred.n_frames() {
            return Err(EvalError::LengthMismatch(pred.n_frames(), t.n_frames()).into());
        }
    }
    let mut out = String::from("time");
    for c in TvChannel::ALL {
        let _ = write!(out, "\t{}", c.name());
    }
    if truth.is_some() {
        for c in TvChannel::ALL {
            let _ = write!(out, "\ttrue_{}", c.name());
        }
    }
    out.push('\n');
    for i in 0..pred.n_frames() {
        let _ = write!(out, "{:.4}", i as f64 / pred.frame_rate());
        for v in pred.frames().row(i) {
            let _ = write!(out, "\t{v:.6}");
        }
        if let Some(t) = &truth {
            for v in t.frames().row(i) {
                let _ = write!(out, "\t{v:.6}");
            }
        }
        out.push('\n');
    }
    Ok(out)
}
