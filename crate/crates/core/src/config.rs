//! Experiment configuration: a line-oriented `key = value` format with
//! presets, validation and a lossless writer.
//!
//! Defaults depend on two keys. `channel` picks the channel kind and, with
//! it, the number of channel uses and training SNRs; `preset` picks batch
//! sizes, iteration budgets and Monte-Carlo sample counts. Every other key
//! overrides a single field.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baselines::SourceMoments;
use crate::channel::{Channel, ChannelKind};
use crate::comm::{CommConfig, ReceiverKind, TrainConfig};
use crate::feedback::{FeedbackConfig, FeedbackTrainConfig, LossReturn};
use crate::nn::{OptimizerKind, DEFAULT_LEARNING_RATE};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Small batches and budgets that run in minutes.
    Desk,
    /// Batch sizes of the published operating point.
    Paper,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(Error::config(format!("unknown preset `{s}` (expected desk or paper)"))),
        }
    }
}

/// How losses reach the transmitter during communication-system training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransportSpec {
    Perfect,
    Gaussian { variance: f64 },
    /// A feedback system trained first, on the same channel.
    Learned,
}

impl fmt::Display for TransportSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportSpec::Perfect => f.write_str("perfect"),
            TransportSpec::Gaussian { variance } => write!(f, "gaussian:{variance}"),
            TransportSpec::Learned => f.write_str("learned"),
        }
    }
}

impl FromStr for TransportSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(TransportSpec::Perfect),
            "learned" => Ok(TransportSpec::Learned),
            _ => {
                let v = s
                    .strip_prefix("gaussian:")
                    .ok_or_else(|| Error::config(format!("unknown transport `{s}` (expected perfect, gaussian:VAR or learned)")))?;
                let variance: f64 = v
                    .parse()
                    .map_err(|_| Error::config(format!("invalid loss noise variance `{v}`")))?;
                if !(variance >= 0.0 && variance.is_finite()) {
                    return Err(Error::config(format!("loss noise variance must be finite and >= 0, got {v}")));
                }
                Ok(TransportSpec::Gaussian { variance })
            }
        }
    }
}

/// Inclusive SNR grid `start:stop:step` in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SnrGrid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl fmt::Display for SnrGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

impl FromStr for SnrGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::config(format!("invalid SNR grid `{s}` (expected start:stop:step)"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        if v.iter().any(|x| !x.is_finite()) || !(v[2] > 0.0) || v[1] < v[0] {
            return Err(Error::config(format!("SNR grid `{s}` needs finite values, step > 0 and stop >= start")));
        }
        Ok(Self {
            start: v[0],
            stop: v[1],
            step: v[2],
        })
    }
}

/// Every run constant of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub channel: ChannelKind,
    pub preset: Preset,
    pub seed: u64,
    /// `M`.
    pub messages: usize,
    /// `N_c`.
    pub comm_channel_uses: usize,
    /// `N_f`.
    pub feedback_channel_uses: usize,
    /// `sigma_c^2`.
    pub sigma_c2: f64,
    /// `sigma_f^2`.
    pub sigma_f2: f64,
    /// `S_c`.
    pub comm_batch: usize,
    /// `S_f`.
    pub feedback_batch: usize,
    pub comm_snr_db: f64,
    pub feedback_snr_db: f64,
    pub eval_snr_grid: SnrGrid,
    pub comm_iterations: usize,
    pub comm_window: usize,
    pub comm_plateau_tol: f64,
    pub comm_learning_rate: f64,
    pub feedback_outer_iterations: usize,
    pub feedback_inner_steps: usize,
    pub feedback_window: usize,
    pub feedback_plateau_tol: f64,
    pub feedback_learning_rate: f64,
    /// Learning rate at the end of feedback training relative to the start.
    pub feedback_final_lr_factor: f64,
    pub clip_losses: bool,
    pub transport: TransportSpec,
    pub bler_samples: usize,
    pub mse_samples: usize,
    pub source_mean: f64,
    pub source_var: f64,
    pub variance_grid: Vec<f64>,
    pub variance_batch: usize,
    pub variance_replications: usize,
    /// Training iterations at which `V` is measured besides the end of
    /// training; `0` is the untrained system.
    pub variance_checkpoints: Vec<usize>,
    pub sweep_grid: Vec<f64>,
    pub out: PathBuf,
    pub codebook: Option<PathBuf>,
    pub agrell_fallback: bool,
    /// Add a wall-clock column to training logs (makes them irreproducible).
    pub log_wall_time: bool,
}

/// Every accepted key, in the order [`emit_config`] writes them.
pub const KEYS: &[&str] = &[
    "channel",
    "preset",
    "seed",
    "messages",
    "comm_channel_uses",
    "feedback_channel_uses",
    "sigma_c2",
    "sigma_f2",
    "comm_batch",
    "feedback_batch",
    "comm_snr_db",
    "feedback_snr_db",
    "eval_snr_grid",
    "comm_iterations",
    "comm_window",
    "comm_plateau_tol",
    "comm_learning_rate",
    "feedback_outer_iterations",
    "feedback_inner_steps",
    "feedback_window",
    "feedback_plateau_tol",
    "feedback_learning_rate",
    "feedback_final_lr_factor",
    "clip_losses",
    "transport",
    "bler_samples",
    "mse_samples",
    "source_mean",
    "source_var",
    "variance_grid",
    "variance_batch",
    "variance_replications",
    "variance_checkpoints",
    "sweep_grid",
    "out",
    "codebook",
    "agrell_fallback",
    "log_wall_time",
];

impl ExperimentConfig {
    /// Defaults for a channel kind and preset.
    pub fn defaults(channel: ChannelKind, preset: Preset) -> Self {
        let (uses, comm_snr, fb_snr, grid) = match channel {
            ChannelKind::Awgn => (
                4,
                10.0,
                10.0,
                SnrGrid {
                    start: -4.0,
                    stop: 16.0,
                    step: 2.0,
                },
            ),
            ChannelKind::Rbf => (
                5,
                20.0,
                20.0,
                SnrGrid {
                    start: 0.0,
                    stop: 30.0,
                    step: 2.0,
                },
            ),
        };
        let paper = preset == Preset::Paper;
        Self {
            channel,
            preset,
            seed: 1,
            messages: 256,
            comm_channel_uses: uses,
            feedback_channel_uses: uses,
            sigma_c2: 0.02,
            sigma_f2: 0.02,
            comm_batch: if paper { 100_000 } else { 4096 },
            feedback_batch: if paper { 100_000 } else { 4096 },
            comm_snr_db: comm_snr,
            feedback_snr_db: fb_snr,
            eval_snr_grid: grid,
            comm_iterations: match (paper, channel) {
                (true, _) => 20_000,
                // The channel-estimating receiver converges more slowly.
                (false, ChannelKind::Awgn) => 1000,
                (false, ChannelKind::Rbf) => 3000,
            },
            comm_window: 100,
            comm_plateau_tol: 1e-3,
            comm_learning_rate: DEFAULT_LEARNING_RATE,
            feedback_outer_iterations: if paper { 2000 } else { 150 },
            feedback_inner_steps: 50,
            feedback_window: 100,
            feedback_plateau_tol: 1e-3,
            // Small desk batches need a larger step to converge within budget,
            // decayed so the noisy policy gradient settles.
            feedback_learning_rate: if paper { DEFAULT_LEARNING_RATE } else { 2e-2 },
            feedback_final_lr_factor: if paper { 1.0 } else { 0.05 },
            clip_losses: false,
            transport: TransportSpec::Perfect,
            bler_samples: if paper { 1_000_000 } else { 200_000 },
            mse_samples: if paper { 1_000_000 } else { 100_000 },
            source_mean: SourceMoments::UNIFORM.mean,
            source_var: SourceMoments::UNIFORM.var,
            variance_grid: vec![0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0],
            variance_batch: if paper { 100_000 } else { 1000 },
            variance_replications: 200,
            variance_checkpoints: vec![0, 1000],
            sweep_grid: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            out: PathBuf::from("out"),
            codebook: None,
            agrell_fallback: false,
            log_wall_time: false,
        }
    }

    /// Checks every invariant, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, why: &str| Err(Error::config(format!("{key}: {why}")));
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.messages < 2 {
            return fail("messages", "must be at least 2");
        }
        let min_uses = if self.channel == ChannelKind::Rbf { 2 } else { 1 };
        if self.comm_channel_uses < min_uses {
            return fail("comm_channel_uses", &format!("must be at least {min_uses} on this channel"));
        }
        if self.feedback_channel_uses < min_uses {
            return fail("feedback_channel_uses", &format!("must be at least {min_uses} on this channel"));
        }
        if !positive(self.sigma_c2) {
            return fail("sigma_c2", "must be > 0");
        }
        if !(positive(self.sigma_f2) && self.sigma_f2 < 1.0) {
            return fail("sigma_f2", "must be in (0, 1)");
        }
        for (key, v) in [
            ("comm_batch", self.comm_batch),
            ("feedback_batch", self.feedback_batch),
            ("comm_window", self.comm_window),
            ("feedback_inner_steps", self.feedback_inner_steps),
            ("feedback_window", self.feedback_window),
            ("variance_batch", self.variance_batch),
        ] {
            if v == 0 {
                return fail(key, "must be at least 1");
            }
        }
        for (key, v) in [
            ("bler_samples", self.bler_samples),
            ("mse_samples", self.mse_samples),
            ("variance_replications", self.variance_replications),
        ] {
            if v < 2 {
                return fail(key, "must be at least 2");
            }
        }
        for (key, v) in [("comm_snr_db", self.comm_snr_db), ("feedback_snr_db", self.feedback_snr_db), ("source_mean", self.source_mean)] {
            if !v.is_finite() {
                return fail(key, "must be finite");
            }
        }
        for (key, v) in [
            ("comm_learning_rate", self.comm_learning_rate),
            ("feedback_learning_rate", self.feedback_learning_rate),
            ("source_var", self.source_var),
        ] {
            if !positive(v) {
                return fail(key, "must be > 0");
            }
        }
        if !(self.feedback_final_lr_factor > 0.0 && self.feedback_final_lr_factor <= 1.0) {
            return fail("feedback_final_lr_factor", "must lie in (0, 1]");
        }
        for (key, v) in [("comm_plateau_tol", self.comm_plateau_tol), ("feedback_plateau_tol", self.feedback_plateau_tol)] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(key, "must be >= 0");
            }
        }
        for (key, grid) in [("variance_grid", &self.variance_grid), ("sweep_grid", &self.sweep_grid)] {
            if grid.is_empty() {
                return fail(key, "must not be empty");
            }
            if grid.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return fail(key, "values must be finite and >= 0");
            }
        }
        if self.codebook.is_some() && self.agrell_fallback {
            return fail("agrell_fallback", "cannot be combined with an explicit codebook");
        }
        Ok(())
    }

    pub fn comm_config(&self) -> CommConfig {
        CommConfig {
            messages: self.messages,
            channel_uses: self.comm_channel_uses,
            exploration_var: self.sigma_c2,
            receiver: self.receiver_kind(),
            optimizer: OptimizerKind::Adam,
            learning_rate: self.comm_learning_rate,
        }
    }

    pub fn feedback_config(&self) -> FeedbackConfig {
        FeedbackConfig {
            channel_uses: self.feedback_channel_uses,
            exploration_var: self.sigma_f2,
            receiver: self.receiver_kind(),
            learning_rate: self.feedback_learning_rate,
            ..FeedbackConfig::awgn()
        }
    }

    fn receiver_kind(&self) -> ReceiverKind {
        match self.channel {
            ChannelKind::Awgn => ReceiverKind::Plain,
            ChannelKind::Rbf => ReceiverKind::Rtn,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.comm_iterations,
            batch_size: self.comm_batch,
            clip_losses: self.clip_losses,
            window: self.comm_window,
            plateau_rel_tol: self.comm_plateau_tol,
            ..TrainConfig::default()
        }
    }

    pub fn feedback_train_config(&self) -> FeedbackTrainConfig {
        FeedbackTrainConfig {
            outer_iterations: self.feedback_outer_iterations,
            inner_steps: self.feedback_inner_steps,
            batch_size: self.feedback_batch,
            loss_return: LossReturn::Learned,
            window: self.feedback_window,
            plateau_rel_tol: self.feedback_plateau_tol,
            final_lr_factor: self.feedback_final_lr_factor,
        }
    }

    pub fn source_moments(&self) -> Result<SourceMoments> {
        SourceMoments::new(self.source_mean, self.source_var)
    }

    pub fn comm_channel(&self) -> Result<Channel> {
        Channel::at_snr(self.channel, self.comm_snr_db)
    }

    pub fn feedback_channel(&self) -> Result<Channel> {
        Channel::at_snr(self.channel, self.feedback_snr_db)
    }

    fn get(&self, key: &str) -> String {
        fn list<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        match key {
            "channel" => self.channel.to_string(),
            "preset" => self.preset.to_string(),
            "seed" => self.seed.to_string(),
            "messages" => self.messages.to_string(),
            "comm_channel_uses" => self.comm_channel_uses.to_string(),
            "feedback_channel_uses" => self.feedback_channel_uses.to_string(),
            "sigma_c2" => self.sigma_c2.to_string(),
            "sigma_f2" => self.sigma_f2.to_string(),
            "comm_batch" => self.comm_batch.to_string(),
            "feedback_batch" => self.feedback_batch.to_string(),
            "comm_snr_db" => self.comm_snr_db.to_string(),
            "feedback_snr_db" => self.feedback_snr_db.to_string(),
            "eval_snr_grid" => self.eval_snr_grid.to_string(),
            "comm_iterations" => self.comm_iterations.to_string(),
            "comm_window" => self.comm_window.to_string(),
            "comm_plateau_tol" => self.comm_plateau_tol.to_string(),
            "comm_learning_rate" => self.comm_learning_rate.to_string(),
            "feedback_outer_iterations" => self.feedback_outer_iterations.to_string(),
            "feedback_inner_steps" => self.feedback_inner_steps.to_string(),
            "feedback_window" => self.feedback_window.to_string(),
            "feedback_plateau_tol" => self.feedback_plateau_tol.to_string(),
            "feedback_learning_rate" => self.feedback_learning_rate.to_string(),
            "feedback_final_lr_factor" => self.feedback_final_lr_factor.to_string(),
            "clip_losses" => self.clip_losses.to_string(),
            "transport" => self.transport.to_string(),
            "bler_samples" => self.bler_samples.to_string(),
            "mse_samples" => self.mse_samples.to_string(),
            "source_mean" => self.source_mean.to_string(),
            "source_var" => self.source_var.to_string(),
            "variance_grid" => list(&self.variance_grid),
            "variance_batch" => self.variance_batch.to_string(),
            "variance_replications" => self.variance_replications.to_string(),
            "variance_checkpoints" => list(&self.variance_checkpoints),
            "sweep_grid" => list(&self.sweep_grid),
            "out" => self.out.display().to_string(),
            "codebook" => self.codebook.as_ref().map_or("none".into(), |p| p.display().to_string()),
            "agrell_fallback" => self.agrell_fallback.to_string(),
            "log_wall_time" => self.log_wall_time.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Sets one field from its textual value. Error messages name the key.
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::config(format!("{key}: invalid value `{v}`")))
        }
        fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|x| num(key, x.trim())).collect()
        }
        fn boolean(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::config(format!("{key}: expected true or false, got `{v}`"))),
            }
        }
        let keyed = |e: Error| Error::config(format!("{key}: {e}"));
        match key {
            "channel" => self.channel = value.parse().map_err(keyed)?,
            "preset" => self.preset = value.parse().map_err(keyed)?,
            "seed" => self.seed = num(key, value)?,
            "messages" => self.messages = num(key, value)?,
            "comm_channel_uses" => self.comm_channel_uses = num(key, value)?,
            "feedback_channel_uses" => self.feedback_channel_uses = num(key, value)?,
            "sigma_c2" => self.sigma_c2 = num(key, value)?,
            "sigma_f2" => self.sigma_f2 = num(key, value)?,
            "comm_batch" => self.comm_batch = num(key, value)?,
            "feedback_batch" => self.feedback_batch = num(key, value)?,
            "comm_snr_db" => self.comm_snr_db = num(key, value)?,
            "feedback_snr_db" => self.feedback_snr_db = num(key, value)?,
            "eval_snr_grid" => self.eval_snr_grid = value.parse().map_err(keyed)?,
            "comm_iterations" => self.comm_iterations = num(key, value)?,
            "comm_window" => self.comm_window = num(key, value)?,
            "comm_plateau_tol" => self.comm_plateau_tol = num(key, value)?,
            "comm_learning_rate" => self.comm_learning_rate = num(key, value)?,
            "feedback_outer_iterations" => self.feedback_outer_iterations = num(key, value)?,
            "feedback_inner_steps" => self.feedback_inner_steps = num(key, value)?,
            "feedback_window" => self.feedback_window = num(key, value)?,
            "feedback_plateau_tol" => self.feedback_plateau_tol = num(key, value)?,
            "feedback_learning_rate" => self.feedback_learning_rate = num(key, value)?,
            "feedback_final_lr_factor" => self.feedback_final_lr_factor = num(key, value)?,
            "clip_losses" => self.clip_losses = boolean(key, value)?,
            "transport" => self.transport = value.parse().map_err(keyed)?,
            "bler_samples" => self.bler_samples = num(key, value)?,
            "mse_samples" => self.mse_samples = num(key, value)?,
            "source_mean" => self.source_mean = num(key, value)?,
            "source_var" => self.source_var = num(key, value)?,
            "variance_grid" => self.variance_grid = list(key, value)?,
            "variance_batch" => self.variance_batch = num(key, value)?,
            "variance_replications" => self.variance_replications = num(key, value)?,
            "variance_checkpoints" => self.variance_checkpoints = list(key, value)?,
            "sweep_grid" => self.sweep_grid = list(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "codebook" => {
                self.codebook = match value {
                    "none" | "" => None,
                    p => Some(PathBuf::from(p)),
                }
            }
            "agrell_fallback" => self.agrell_fallback = boolean(key, value)?,
            "log_wall_time" => self.log_wall_time = boolean(key, value)?,
            _ => return Err(Error::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::defaults(ChannelKind::Awgn, Preset::Paper)
    }
}

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, PartialEq)]
enum Origin {
    Line(usize),
    Override,
}

/// Builds a configuration from config-file text and command-line overrides
/// (`(key, value)` pairs that take precedence over the file).
///
/// `path` is only used in error messages.
pub fn parse_config(text: &str, path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut entries: Vec<(String, String, Origin)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(i + 1, format!("expected `key = value`, got `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(parse_err(i + 1, format!("unknown key `{k}`")));
        }
        if let Some((_, _, Origin::Line(prev))) = entries.iter().find(|e| e.0 == k) {
            return Err(parse_err(i + 1, format!("duplicate key `{k}` (first set on line {prev})")));
        }
        entries.push((k.to_string(), v.to_string(), Origin::Line(i + 1)));
    }
    for (k, v) in overrides {
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::config(format!("unknown key `{k}`")));
        }
        entries.retain(|e| &e.0 != k);
        entries.push((k.clone(), v.clone(), Origin::Override));
    }

    let locate = |origin: &Origin, e: Error| match origin {
        Origin::Line(l) => parse_err(*l, e.to_string()),
        Origin::Override => e,
    };
    let lookup = |key: &str| entries.iter().find(|e| e.0 == key);
    let mut seed = ExperimentConfig::default();
    for key in ["channel", "preset"] {
        if let Some((k, v, o)) = lookup(key) {
            seed.set(k, v).map_err(|e| locate(o, e))?;
        }
    }
    let mut cfg = ExperimentConfig::defaults(seed.channel, seed.preset);
    for (k, v, o) in &entries {
        cfg.set(k, v).map_err(|e| locate(o, e))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a config file; absent keys take their defaults.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path, &[])
}

/// Writes every key explicitly, so the result does not depend on defaults.
pub fn emit_config(config: &ExperimentConfig) -> String {
    let mut out = String::new();
    for key in KEYS {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&config.get(key));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config(text, Path::new("test.cfg"), &[])
    }

    #[test]
    fn empty_file_gives_paper_awgn_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!((c.messages, c.comm_channel_uses, c.feedback_channel_uses), (256, 4, 4));
        assert_eq!((c.sigma_c2, c.sigma_f2), (0.02, 0.02));
        assert_eq!((c.comm_batch, c.feedback_batch), (100_000, 100_000));
        assert_eq!((c.comm_snr_db, c.feedback_snr_db), (10.0, 10.0));
    }

    #[test]
    fn rbf_changes_channel_dependent_defaults() {
        let c = parse("channel = rbf\n").unwrap();
        assert_eq!((c.comm_channel_uses, c.feedback_channel_uses), (5, 5));
        assert_eq!((c.comm_snr_db, c.feedback_snr_db), (20.0, 20.0));
        // Explicit values still win, wherever they appear.
        let c = parse("comm_channel_uses = 7\nchannel = rbf\n").unwrap();
        assert_eq!(c.comm_channel_uses, 7);
    }

    #[test]
    fn rejects_invalid_values_with_key_or_line() {
        let e = parse("sigma_f2 = 1.5").unwrap_err().to_string();
        assert!(e.contains("sigma_f2"), "{e}");
        let e = parse("\n\nbogus = 1").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse("seed = 1\nseed 2").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse("comm_batch = many").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
        assert!(parse("seed = 1\nseed = 2").is_err());
    }

    #[test]
    fn overrides_beat_the_file() {
        let o = vec![("seed".to_string(), "9".to_string()), ("channel".into(), "rbf".into())];
        let c = parse_config("seed = 3\n", Path::new("x"), &o).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.channel, ChannelKind::Rbf);
        assert_eq!(c.comm_channel_uses, 5);
        assert!(parse_config("", Path::new("x"), &[("nope".into(), "1".into())]).is_err());
    }

    #[test]
    fn emit_then_parse_round_trips() {
        let mut c = ExperimentConfig::defaults(ChannelKind::Rbf, Preset::Desk);
        c.transport = TransportSpec::Gaussian { variance: 1e-3 };
        c.codebook = Some(PathBuf::from("books/agrell.csv"));
        c.sigma_c2 = 0.1 + 0.2;
        c.variance_checkpoints = vec![0, 10, 500];
        assert_eq!(parse(&emit_config(&c)).unwrap(), c);
        let d = ExperimentConfig::default();
        assert_eq!(parse(&emit_config(&d)).unwrap(), d);
    }

    #[test]
    fn grids_and_transports_parse() {
        let g: SnrGrid = "0:10:2.5".parse().unwrap();
        assert_eq!(g.points(), vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        let g: SnrGrid = "-4:16:2".parse().unwrap();
        assert_eq!(g.points().len(), 11);
        assert!("1:0:1".parse::<SnrGrid>().is_err());
        assert!("0:1:0".parse::<SnrGrid>().is_err());
        assert_eq!("gaussian:0.01".parse::<TransportSpec>().unwrap(), TransportSpec::Gaussian { variance: 0.01 });
        assert!("gaussian:-1".parse::<TransportSpec>().is_err());
        assert!("lossy".parse::<TransportSpec>().is_err());
    }
}
