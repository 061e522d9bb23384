//! Flat `key = value` configuration.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated.
//! Rendering sorts keys, so equal configs render to identical text.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use super::ModelError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ModelError::Config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(ModelError::Config(format!("line {}: empty key", n + 1)));
            }
            if entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(ModelError::Config(format!("line {}: duplicate key {k}", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ModelError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| ModelError::Config(format!("override {kv:?}: expected key=value")))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, ModelError> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ModelError::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    pub fn get_list<T>(&self, key: &str, default: &[T]) -> Result<Vec<T>, ModelError>
    where
        T: FromStr + Clone,
    {
        match self.entries.get(key) {
            None => Ok(default.to_vec()),
            Some(v) if v.is_empty() => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| ModelError::Config(format!("{key}: cannot parse {s:?}"))))
                .collect(),
        }
    }

    /// Rejects keys outside `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<(), ModelError> {
        match self.entries.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(ModelError::Config(format!("unknown key {k}"))),
            None => Ok(()),
        }
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn positive(name: &str, v: usize) -> Result<(), ModelError> {
    if v == 0 {
        return Err(ModelError::Config(format!("{name} must be positive")));
    }
    Ok(())
}

fn probability(name: &str, p: f64) -> Result<(), ModelError> {
    if !(0.0..1.0).contains(&p) {
        return Err(ModelError::Config(format!("{name} must be in [0, 1), got {p}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Baseline,
    Proposed,
}

impl FromStr for ModelKind {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "baseline" => Ok(ModelKind::Baseline),
            "proposed" => Ok(ModelKind::Proposed),
            _ => Err(ModelError::Config(format!("model must be baseline or proposed, got {s:?}"))),
        }
    }
}

impl Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Proposed => "proposed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub input_dim: usize,
    pub gru_hidden: usize,
    pub gru_layers: usize,
    pub mlp_hidden: usize,
    pub dropout: f64,
    pub out_tv: usize,
    pub out_phoneme: usize,
    pub ce_weight: f64,
}

impl BaselineConfig {
    pub fn new(input_dim: usize) -> Self {
        Self { input_dim, gru_hidden: 256, gru_layers: 2, mlp_hidden: 128, dropout: 0.3, out_tv: 9, out_phoneme: 41, ce_weight: 0.5 }
    }

    pub fn out_dim(&self) -> usize {
        self.out_tv + self.out_phoneme
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (n, v) in [
            ("input_dim", self.input_dim),
            ("gru_hidden", self.gru_hidden),
            ("gru_layers", self.gru_layers),
            ("mlp_hidden", self.mlp_hidden),
            ("out_tv", self.out_tv),
            ("out_phoneme", self.out_phoneme),
        ] {
            positive(n, v)?;
        }
        probability("dropout", self.dropout)
    }

    pub const KEYS: &'static [&'static str] =
        &["input_dim", "gru_hidden", "gru_layers", "mlp_hidden", "dropout", "out_tv", "out_phoneme", "ce_weight"];

    pub fn from_kv(kv: &KvConfig) -> Result<Self, ModelError> {
        let d = Self::new(kv.get("input_dim", 0)?);
        let c = Self {
            input_dim: d.input_dim,
            gru_hidden: kv.get("gru_hidden", d.gru_hidden)?,
            gru_layers: kv.get("gru_layers", d.gru_layers)?,
            mlp_hidden: kv.get("mlp_hidden", d.mlp_hidden)?,
            dropout: kv.get("dropout", d.dropout)?,
            out_tv: kv.get("out_tv", d.out_tv)?,
            out_phoneme: kv.get("out_phoneme", d.out_phoneme)?,
            ce_weight: kv.get("ce_weight", d.ce_weight)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn write_kv(&self, kv: &mut KvConfig) {
        kv.set("input_dim", self.input_dim);
        kv.set("gru_hidden", self.gru_hidden);
        kv.set("gru_layers", self.gru_layers);
        kv.set("mlp_hidden", self.mlp_hidden);
        kv.set("dropout", self.dropout);
        kv.set("out_tv", self.out_tv);
        kv.set("out_phoneme", self.out_phoneme);
        kv.set("ce_weight", self.ce_weight);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscInput {
    /// The 9 TV channels.
    Tv,
    /// TVs followed by the 18 place/manner channels.
    TvPm,
}

impl FromStr for DiscInput {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "tv" => Ok(DiscInput::Tv),
            "tv+pm" => Ok(DiscInput::TvPm),
            _ => Err(ModelError::Config(format!("disc_input must be tv or tv+pm, got {s:?}"))),
        }
    }
}

impl Display for DiscInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DiscInput::Tv => "tv",
            DiscInput::TvPm => "tv+pm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorConfig {
    pub channels: Vec<usize>,
    pub kernels: Vec<usize>,
    pub strides: Vec<usize>,
    pub input: DiscInput,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self { channels: vec![16, 32, 64, 64], kernels: vec![5; 4], strides: vec![2; 4], input: DiscInput::Tv }
    }
}

impl DiscriminatorConfig {
    /// Frames of input seen by one output score.
    pub fn receptive_field(&self) -> usize {
        let mut rf = 1;
        let mut jump = 1;
        for (k, s) in self.kernels.iter().zip(&self.strides) {
            rf += (k - 1) * jump;
            jump *= s;
        }
        rf
    }

    /// Score count for an input of `len` frames, or `None` below the receptive field.
    pub fn output_len(&self, len: usize) -> Option<usize> {
        if len < self.receptive_field() {
            return None;
        }
        let mut l = len;
        for (k, s) in self.kernels.iter().zip(&self.strides) {
            l = (l - k) / s + 1;
        }
        Some(l)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.channels.is_empty() || self.channels.len() != self.kernels.len() || self.channels.len() != self.strides.len() {
            return Err(ModelError::Config("disc_channels, disc_kernels and disc_strides must have equal nonzero length".into()));
        }
        for &v in self.channels.iter().chain(&self.kernels).chain(&self.strides) {
            positive("discriminator sizes", v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposedConfig {
    pub input_dim: usize,
    pub gru_hidden: usize,
    pub gru_layers: usize,
    pub mlp_hidden: usize,
    pub dropout: f64,
    pub out_tv: usize,
    pub phoneme_pm_dim: usize,
    pub pm_weight: f64,
    pub chunk_len: usize,
    /// Hidden sizes of the AR encoder between its input and `ar_dim`.
    pub ar_hidden: Vec<usize>,
    pub ar_dim: usize,
    pub adv_weight: f64,
    pub feature_matching: bool,
    pub fm_weight: f64,
    /// Train on the model's own previous-chunk outputs instead of teacher TVs.
    pub free_running_train: bool,
    pub discriminator: DiscriminatorConfig,
}

impl ProposedConfig {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            gru_hidden: 256,
            gru_layers: 2,
            mlp_hidden: 128,
            dropout: 0.3,
            out_tv: 9,
            phoneme_pm_dim: 18,
            pm_weight: 0.5,
            chunk_len: 50,
            ar_hidden: vec![128],
            ar_dim: 32,
            adv_weight: 1.0,
            feature_matching: false,
            fm_weight: 2.0,
            free_running_train: false,
            discriminator: DiscriminatorConfig::default(),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.out_tv + self.phoneme_pm_dim
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (n, v) in [
            ("input_dim", self.input_dim),
            ("gru_hidden", self.gru_hidden),
            ("gru_layers", self.gru_layers),
            ("mlp_hidden", self.mlp_hidden),
            ("out_tv", self.out_tv),
            ("phoneme_pm_dim", self.phoneme_pm_dim),
            ("chunk_len", self.chunk_len),
            ("ar_dim", self.ar_dim),
        ] {
            positive(n, v)?;
        }
        for &h in &self.ar_hidden {
            positive("ar_hidden", h)?;
        }
        probability("dropout", self.dropout)?;
        self.discriminator.validate()
    }

    pub const KEYS: &'static [&'static str] = &[
        "input_dim",
        "gru_hidden",
        "gru_layers",
        "mlp_hidden",
        "dropout",
        "out_tv",
        "phoneme_pm_dim",
        "pm_weight",
        "chunk_len",
        "ar_hidden",
        "ar_dim",
        "adv_weight",
        "feature_matching",
        "fm_weight",
        "free_running_train",
        "disc_channels",
        "disc_kernels",
        "disc_strides",
        "disc_input",
    ];

    pub fn from_kv(kv: &KvConfig) -> Result<Self, ModelError> {
        let d = Self::new(kv.get("input_dim", 0)?);
        let dd = &d.discriminator;
        let c = Self {
            input_dim: d.input_dim,
            gru_hidden: kv.get("gru_hidden", d.gru_hidden)?,
            gru_layers: kv.get("gru_layers", d.gru_layers)?,
            mlp_hidden: kv.get("mlp_hidden", d.mlp_hidden)?,
            dropout: kv.get("dropout", d.dropout)?,
            out_tv: kv.get("out_tv", d.out_tv)?,
            phoneme_pm_dim: kv.get("phoneme_pm_dim", d.phoneme_pm_dim)?,
            pm_weight: kv.get("pm_weight", d.pm_weight)?,
            chunk_len: kv.get("chunk_len", d.chunk_len)?,
            ar_hidden: kv.get_list("ar_hidden", &d.ar_hidden)?,
            ar_dim: kv.get("ar_dim", d.ar_dim)?,
            adv_weight: kv.get("adv_weight", d.adv_weight)?,
            feature_matching: kv.get("feature_matching", d.feature_matching)?,
            fm_weight: kv.get("fm_weight", d.fm_weight)?,
            free_running_train: kv.get("free_running_train", d.free_running_train)?,
            discriminator: DiscriminatorConfig {
                channels: kv.get_list("disc_channels", &dd.channels)?,
                kernels: kv.get_list("disc_kernels", &dd.kernels)?,
                strides: kv.get_list("disc_strides", &dd.strides)?,
                input: kv.get("disc_input", dd.input)?,
            },
        };
        c.validate()?;
        Ok(c)
    }

    pub fn write_kv(&self, kv: &mut KvConfig) {
        kv.set("input_dim", self.input_dim);
        kv.set("gru_hidden", self.gru_hidden);
        kv.set("gru_layers", self.gru_layers);
        kv.set("mlp_hidden", self.mlp_hidden);
        kv.set("dropout", self.dropout);
        kv.set("out_tv", self.out_tv);
        kv.set("phoneme_pm_dim", self.phoneme_pm_dim);
        kv.set("pm_weight", self.pm_weight);
        kv.set("chunk_len", self.chunk_len);
        kv.set("ar_hidden", join(&self.ar_hidden));
        kv.set("ar_dim", self.ar_dim);
        kv.set("adv_weight", self.adv_weight);
        kv.set("feature_matching", self.feature_matching);
        kv.set("fm_weight", self.fm_weight);
        kv.set("free_running_train", self.free_running_train);
        kv.set("disc_channels", join(&self.discriminator.channels));
        kv.set("disc_kernels", join(&self.discriminator.kernels));
        kv.set("disc_strides", join(&self.discriminator.strides));
        kv.set("disc_input", self.discriminator.input);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderConfig {
    pub tv_dim: usize,
    pub emb_dim: usize,
    pub out_dim: usize,
    pub gru_hidden: usize,
    pub gru_layers: usize,
    pub mlp_hidden: usize,
    pub dropout: f64,
}

impl DecoderConfig {
    pub fn new(emb_dim: usize, out_dim: usize) -> Self {
        Self { tv_dim: 9, emb_dim, out_dim, gru_hidden: 256, gru_layers: 2, mlp_hidden: 128, dropout: 0.3 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (n, v) in [
            ("tv_dim", self.tv_dim),
            ("out_dim", self.out_dim),
            ("gru_hidden", self.gru_hidden),
            ("gru_layers", self.gru_layers),
            ("mlp_hidden", self.mlp_hidden),
        ] {
            positive(n, v)?;
        }
        probability("dropout", self.dropout)
    }

    pub const KEYS: &'static [&'static str] = &[
        "decoder.tv_dim",
        "decoder.emb_dim",
        "decoder.out_dim",
        "decoder.gru_hidden",
        "decoder.gru_layers",
        "decoder.mlp_hidden",
        "decoder.dropout",
    ];

    pub fn from_kv(kv: &KvConfig) -> Result<Self, ModelError> {
        let d = Self::new(kv.get("decoder.emb_dim", 0)?, kv.get("decoder.out_dim", 0)?);
        let c = Self {
            tv_dim: kv.get("decoder.tv_dim", d.tv_dim)?,
            emb_dim: d.emb_dim,
            out_dim: d.out_dim,
            gru_hidden: kv.get("decoder.gru_hidden", d.gru_hidden)?,
            gru_layers: kv.get("decoder.gru_layers", d.gru_layers)?,
            mlp_hidden: kv.get("decoder.mlp_hidden", d.mlp_hidden)?,
            dropout: kv.get("decoder.dropout", d.dropout)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn write_kv(&self, kv: &mut KvConfig) {
        kv.set("decoder.tv_dim", self.tv_dim);
        kv.set("decoder.emb_dim", self.emb_dim);
        kv.set("decoder.out_dim", self.out_dim);
        kv.set("decoder.gru_hidden", self.gru_hidden);
        kv.set("decoder.gru_layers", self.gru_layers);
        kv.set("decoder.mlp_hidden", self.mlp_hidden);
        kv.set("decoder.dropout", self.dropout);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub clip_norm: f64,
    /// Utterances whose gradients are summed before each optimizer step.
    pub batch_utts: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, epochs: 30, patience: 5, clip_norm: 1.0, batch_utts: 1, seed: 0 }
    }
}

impl TrainConfig {
    pub const KEYS: &'static [&'static str] =
        &["lr", "beta1", "beta2", "eps", "epochs", "patience", "clip_norm", "batch_utts", "seed"];

    pub fn from_kv(kv: &KvConfig) -> Result<Self, ModelError> {
        let d = Self::default();
        let c = Self {
            lr: kv.get("lr", d.lr)?,
            beta1: kv.get("beta1", d.beta1)?,
            beta2: kv.get("beta2", d.beta2)?,
            eps: kv.get("eps", d.eps)?,
            epochs: kv.get("epochs", d.epochs)?,
            patience: kv.get("patience", d.patience)?,
            clip_norm: kv.get("clip_norm", d.clip_norm)?,
            batch_utts: kv.get("batch_utts", d.batch_utts)?,
            seed: kv.get("seed", d.seed)?,
        };
        positive("batch_utts", c.batch_utts)?;
        if !(c.lr > 0.0 && c.clip_norm > 0.0) {
            return Err(ModelError::Config("lr and clip_norm must be positive".into()));
        }
        Ok(c)
    }

    pub fn write_kv(&self, kv: &mut KvConfig) {
        kv.set("lr", self.lr);
        kv.set("beta1", self.beta1);
        kv.set("beta2", self.beta2);
        kv.set("eps", self.eps);
        kv.set("epochs", self.epochs);
        kv.set("patience", self.patience);
        kv.set("clip_norm", self.clip_norm);
        kv.set("batch_utts", self.batch_utts);
        kv.set("seed", self.seed);
    }
}
