use std::path::PathBuf;
use std::process::ExitCode;

use airgap_ae::comm::Phase;
use airgap_ae::config::{parse_config, ExperimentConfig, SnrGrid};
use airgap_ae::experiments::{self, Progress};
use clap::{Args, Parser, Subcommand};

#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Autoencoder communication with learned feedback.
///
/// Results are a function of the configuration and seed only. The worker
/// thread count can be capped with AIRGAP_AE_THREADS.
#[derive(Parser, Debug)]
#[command(name = "airgap-ae", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a message autoencoder and save it to <out>/comm_model.txt.
    TrainComm(Common),
    /// Train a feedback system, save it and write its MSE curve.
    TrainFeedback(Common),
    /// BLER of the baselines and of <out>/comm_model.txt if present.
    EvalBler(Common),
    /// MSE of the analog baseline and of <out>/feedback_model.txt if present.
    EvalMse(Common),
    /// Gradient variance against loss-noise variance, before and after training.
    VarianceSweep(Common),
    /// Final BLER against the loss-noise variance used in training.
    BlerVsMse(Common),
    /// Feedback system, then autoencoders trained through it and with perfect feedback.
    FullPipeline(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Channel model: awgn or rbf.
    #[arg(long)]
    channel: Option<String>,
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Config file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training SNR for train commands, or a single evaluation SNR for eval commands.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    /// Evaluation grid as start:stop:step in dB, inclusive.
    #[arg(long, allow_hyphen_values = true)]
    snr_grid: Option<String>,
    /// Loss transport while training: perfect, gaussian:<variance> or learned.
    #[arg(long)]
    transport: Option<String>,
    /// Budget preset: desk or paper.
    #[arg(long)]
    preset: Option<String>,
    /// Sphere-packing codebook: one codeword per line, 8 reals each.
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Use the E8 shell codebook when no codebook file is given.
    #[arg(long)]
    agrell_fallback: bool,
    /// Any config key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Suppress progress output.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SnrRole {
    Comm,
    Feedback,
    Both,
    Eval,
}

impl Common {
    fn overrides(&self, role: SnrRole) -> Result<Vec<(String, String)>, String> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        if let Some(v) = &self.channel {
            put("channel", v.clone());
        }
        if let Some(v) = &self.preset {
            put("preset", v.clone());
        }
        if let Some(v) = self.seed {
            put("seed", v.to_string());
        }
        if let Some(v) = &self.out {
            put("out", v.display().to_string());
        }
        if let Some(v) = &self.snr_grid {
            put("eval_snr_grid", v.clone());
        }
        if let Some(v) = &self.transport {
            put("transport", v.clone());
        }
        if let Some(v) = &self.codebook {
            put("codebook", v.display().to_string());
        }
        if self.agrell_fallback {
            put("agrell_fallback", "true".into());
        }
        if let Some(snr) = self.snr_db {
            match role {
                SnrRole::Comm => put("comm_snr_db", snr.to_string()),
                SnrRole::Feedback => put("feedback_snr_db", snr.to_string()),
                SnrRole::Both => {
                    put("comm_snr_db", snr.to_string());
                    put("feedback_snr_db", snr.to_string());
                }
                SnrRole::Eval => put("eval_snr_grid", format!("{snr}:{snr}:1")),
            }
        }
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
            put(k.trim(), v.trim().to_string());
        }
        Ok(out)
    }

    fn resolve(&self, role: SnrRole) -> Result<ExperimentConfig, String> {
        let overrides = self.overrides(role)?;
        let (text, path) = match &self.config {
            Some(p) => (
                std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?,
                p.clone(),
            ),
            None => (String::new(), PathBuf::from("<flags>")),
        };
        parse_config(&text, &path, &overrides).map_err(|e| e.to_string())
    }
}

fn grid(config: &ExperimentConfig) -> Vec<f64> {
    let g: &SnrGrid = &config.eval_snr_grid;
    g.points()
}

fn run(cli: Cli) -> Result<(), String> {
    let (common, role) = match &cli.command {
        Command::TrainComm(c) => (c, SnrRole::Comm),
        Command::TrainFeedback(c) => (c, SnrRole::Feedback),
        Command::EvalBler(c) | Command::EvalMse(c) => (c, SnrRole::Eval),
        Command::VarianceSweep(c) | Command::BlerVsMse(c) => (c, SnrRole::Comm),
        Command::FullPipeline(c) => (c, SnrRole::Both),
    };
    let config = common.resolve(role)?;
    let print = |m: &str| eprintln!("{m}");
    let progress: Progress = if common.quiet { &experiments::quiet } else { &print };
    let e = |e: airgap_ae::Error| e.to_string();
    match &cli.command {
        Command::TrainComm(_) => {
            let out = experiments::run_train_comm(&config, progress).map_err(e)?;
            if let Some(r) = out.log.records.iter().rev().find(|r| r.phase == Phase::Receiver) {
                progress(&format!("final receiver loss {:.4e}", r.loss));
            }
        }
        Command::TrainFeedback(_) => {
            experiments::run_train_feedback(&config, progress).map_err(e)?;
        }
        Command::EvalBler(_) => {
            experiments::run_eval_bler(&config, &grid(&config), progress).map_err(e)?;
        }
        Command::EvalMse(_) => {
            experiments::run_eval_mse(&config, &grid(&config), progress).map_err(e)?;
        }
        Command::VarianceSweep(_) => {
            for r in experiments::run_variance_sweep(&config, progress).map_err(e)? {
                progress(&format!(
                    "stage {}: clean variance {:.4e}, E|D|^2 {:.4e}",
                    r.stage, r.clean_variance, r.d_norm_sq
                ));
            }
        }
        Command::BlerVsMse(_) => {
            for r in experiments::run_bler_vs_mse(&config, progress).map_err(e)? {
                progress(&format!(
                    "sigma_l2 {:>8}  BLER {:.3e}  (perfect {:.3e})",
                    r.sigma_l2, r.bler_noisy, r.bler_perfect
                ));
            }
        }
        Command::FullPipeline(_) => {
            experiments::run_full_pipeline(&config, progress).map_err(e)?;
        }
    }
    progress(&format!("results written to {}", config.out.display()));
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
