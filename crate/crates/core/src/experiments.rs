//! The experiment families behind each CLI subcommand. Every function is a
//! pure function of the configuration (including its seed): outputs are
//! written under `config.out` and returned as structured results.

use std::path::{Path, PathBuf};

use crate::analysis::{bler_vs_feedback_mse_sweep, estimate_variance, SweepConfig, VarianceReport};
use crate::baselines::{agrell_generate_fallback, agrell_load, AnalogAwgn, AnalogRbf, Codebook, Piloted, Qpsk};
use crate::bler::{evaluate_bler, MessageScheme};
use crate::channel::{Channel, ChannelKind};
use crate::comm::{alternating_train, CommSystem, FeedbackTransport, TrainLog};
use crate::config::{emit_config, ExperimentConfig, TransportSpec};
use crate::csv::{emit_csv, render_table, write_text, BlerRow, MseRow, SweepRow, VarianceRow};
use crate::feedback::{evaluate_mse, main_loop, Direction, FeedbackLog, FeedbackSystem, LearnedTransport, RealLink};
use crate::persist::{load_comm, load_feedback, read_model, save_comm, save_feedback, write_model};
use crate::rng::SeedTree;
use crate::{Error, Result};

/// Receives one-line progress messages.
pub type Progress<'a> = &'a dyn Fn(&str);

/// A progress sink that drops everything.
pub fn quiet(_: &str) {}

pub const COMM_MODEL: &str = "comm_model.txt";
pub const FEEDBACK_MODEL: &str = "feedback_model.txt";

fn out_path(config: &ExperimentConfig, name: &str) -> PathBuf {
    config.out.join(name)
}

fn root_seeds(config: &ExperimentConfig) -> SeedTree {
    SeedTree::new(config.seed)
}

fn snr_label(snr_db: f64) -> String {
    format!("{snr_db}")
}

/// Writes the resolved configuration next to the results.
fn write_config(config: &ExperimentConfig) -> Result<()> {
    write_text(&out_path(config, "config.txt"), &emit_config(config))
}

fn training_log_csv(log: &TrainLog, wall_time: bool) -> String {
    let header = if wall_time { "iteration,phase,loss,elapsed_s" } else { "iteration,phase,loss" };
    render_table(
        header,
        log.records.iter().map(|r| {
            let mut f = vec![r.iteration.to_string(), r.phase.to_string(), r.loss.to_string()];
            if wall_time {
                f.push(r.elapsed_s.to_string());
            }
            f
        }),
    )
}

fn feedback_log_csv(log: &FeedbackLog) -> String {
    render_table(
        "outer,step,direction,mse,received_loss",
        log.records.iter().map(|r| {
            vec![
                r.outer.to_string(),
                r.step.to_string(),
                r.direction.to_string(),
                r.mse.to_string(),
                r.received_loss.to_string(),
            ]
        }),
    )
}

/// Trains a feedback system at the feedback training SNR.
pub fn train_feedback_system(config: &ExperimentConfig, progress: Progress) -> Result<(FeedbackSystem, FeedbackLog)> {
    let seeds = root_seeds(config).child("feedback");
    let mut sys = FeedbackSystem::new(config.feedback_config(), &mut seeds.stream("init"))?;
    progress(&format!(
        "training feedback system: {} outer x {} steps, batch {}, {} dB",
        config.feedback_outer_iterations, config.feedback_inner_steps, config.feedback_batch, config.feedback_snr_db
    ));
    let log = main_loop(&mut sys, &config.feedback_channel()?, &config.feedback_train_config(), &seeds.child("train"))?;
    progress(&format!(
        "feedback system done after {} outer iterations: final MSE a_to_b {:.3e}, b_to_a {:.3e}",
        log.outer_iterations,
        log.final_mse(Direction::AToB, 50),
        log.final_mse(Direction::BToA, 50)
    ));
    Ok((sys, log))
}

/// Loss transport carried by a trained feedback system over the
/// communication channel: losses travel from the receiving device B back to
/// the transmitting device A.
pub fn learned_transport(config: &ExperimentConfig, fb: &FeedbackSystem) -> Result<FeedbackTransport> {
    Ok(FeedbackTransport::Learned(Box::new(LearnedTransport::new(
        fb.link(Direction::BToA),
        config.comm_channel()?,
    ))))
}

/// Trains a message autoencoder. `label` separates random streams of runs
/// that must differ; runs with the same label start from the same weights
/// and see the same messages and noise.
pub fn train_comm_system(
    config: &ExperimentConfig,
    transport: &FeedbackTransport,
    clip_losses: bool,
    label: &str,
    progress: Progress,
) -> Result<(CommSystem, TrainLog)> {
    let seeds = root_seeds(config).child(label);
    let mut sys = CommSystem::new(config.comm_config(), &mut seeds.stream("init"))?;
    let mut tc = config.train_config();
    tc.clip_losses = clip_losses;
    progress(&format!(
        "training autoencoder ({}): {} iterations, batch {}, {} dB",
        transport.label(),
        tc.iterations,
        tc.batch_size,
        config.comm_snr_db
    ));
    let log = alternating_train(&mut sys, &config.comm_channel()?, transport, &tc, &seeds.child("train"))?;
    progress(&format!("autoencoder done after {} iterations ({:?})", log.iterations, log.stop));
    Ok((sys, log))
}

/// The codebook to use for the sphere-packing baseline, if any.
pub fn load_codebook(config: &ExperimentConfig) -> Result<Option<Codebook>> {
    match (&config.codebook, config.agrell_fallback) {
        (Some(p), _) => {
            if !p.exists() {
                return Err(Error::config(format!(
                    "codebook {} not found; pass --agrell-fallback to use the E8 fallback codebook instead",
                    p.display()
                )));
            }
            Ok(Some(agrell_load(p, config.messages)?))
        }
        (None, true) => Ok(Some(agrell_generate_fallback(config.messages)?)),
        (None, false) => Ok(None),
    }
}

/// Baseline message schemes for the configured channel. QPSK needs
/// `M = 4^N` data symbols; the codebook must match `M` and `N`. On block
/// fading both get one pilot symbol, which is counted in `N_c`.
pub fn baseline_schemes(config: &ExperimentConfig, progress: Progress) -> Result<Vec<(String, Box<dyn MessageScheme>)>> {
    let data_symbols = match config.channel {
        ChannelKind::Awgn => config.comm_channel_uses,
        ChannelKind::Rbf => config.comm_channel_uses - 1,
    };
    let wrap = |s: Box<dyn MessageScheme>| -> Box<dyn MessageScheme> {
        match config.channel {
            ChannelKind::Awgn => s,
            ChannelKind::Rbf => Box::new(Piloted::new(s)),
        }
    };
    let mut out: Vec<(String, Box<dyn MessageScheme>)> = Vec::new();
    match Qpsk::new(data_symbols) {
        Ok(q) if q.messages() == config.messages => out.push(("qpsk".into(), wrap(Box::new(q)))),
        _ => progress(&format!(
            "skipping QPSK: {} messages do not fit {data_symbols} QPSK symbols",
            config.messages
        )),
    }
    match load_codebook(config)? {
        Some(book) if book.codewords().symbols() == data_symbols => {
            let name = if config.agrell_fallback { "agrell_fallback" } else { "agrell" };
            out.push((name.into(), wrap(Box::new(book))));
        }
        Some(_) => progress("skipping codebook baseline: symbol count does not match the channel uses"),
        None => progress("no codebook given (--codebook or --agrell-fallback); skipping the sphere-packing baseline"),
    }
    Ok(out)
}

/// BLER of every scheme at every SNR. All schemes see the same messages and
/// noise at a given SNR.
pub fn bler_rows(
    config: &ExperimentConfig,
    schemes: &[(String, &dyn MessageScheme)],
    snrs: &[f64],
    progress: Progress,
) -> Result<Vec<BlerRow>> {
    let seeds = root_seeds(config).child("eval-bler");
    let mut rows = Vec::new();
    for &snr in snrs {
        let ch = Channel::at_snr(config.channel, snr)?;
        for (name, scheme) in schemes {
            let p = evaluate_bler(*scheme, ch, config.bler_samples, &seeds.child(&snr_label(snr)))?;
            progress(&format!("{snr:>6} dB  {name:<22} BLER {:.3e} +- {:.1e}", p.estimate, p.half_width()));
            rows.push(BlerRow {
                snr_db: snr,
                bler: p.estimate,
                ci_halfwidth: p.half_width(),
                scheme: name.clone(),
            });
        }
    }
    Ok(rows)
}

/// Analog repetition baseline for the configured channel.
pub fn analog_link(config: &ExperimentConfig) -> Result<Box<dyn RealLink>> {
    let m = config.source_moments()?;
    Ok(match config.channel {
        ChannelKind::Awgn => Box::new(AnalogAwgn::new(config.feedback_channel_uses, m)?),
        ChannelKind::Rbf => Box::new(AnalogRbf::new(config.feedback_channel_uses, m)?),
    })
}

/// MSE of every link at every SNR, with shared source samples and noise.
pub fn mse_rows(config: &ExperimentConfig, links: &[(String, &dyn RealLink)], snrs: &[f64], progress: Progress) -> Result<Vec<MseRow>> {
    let seeds = root_seeds(config).child("eval-mse");
    let mut rows = Vec::new();
    for &snr in snrs {
        let ch = Channel::at_snr(config.channel, snr)?;
        for (name, link) in links {
            let m = evaluate_mse(*link, ch, config.mse_samples, &seeds.child(&snr_label(snr)))?;
            progress(&format!("{snr:>6} dB  {name:<10} MSE {:.3e} +- {:.1e}", m.mean, m.half_width()));
            rows.push(MseRow {
                snr_db: snr,
                mse: m.mean,
                ci_halfwidth: m.half_width(),
                scheme: name.clone(),
            });
        }
    }
    Ok(rows)
}

/// Learned links of both directions plus the analog baseline.
pub fn feedback_mse_rows(config: &ExperimentConfig, fb: &FeedbackSystem, snrs: &[f64], progress: Progress) -> Result<Vec<MseRow>> {
    let ab = fb.link(Direction::AToB);
    let ba = fb.link(Direction::BToA);
    let analog = analog_link(config)?;
    let links: Vec<(String, &dyn RealLink)> = vec![
        ("learned_a_to_b".into(), &ab),
        ("learned_b_to_a".into(), &ba),
        ("analog".into(), analog.as_ref()),
    ];
    mse_rows(config, &links, snrs, progress)
}

/// Transport for a training run from the configuration. A learned transport
/// trains a feedback system first.
pub fn configured_transport(config: &ExperimentConfig, progress: Progress) -> Result<(FeedbackTransport, Option<FeedbackSystem>)> {
    Ok(match config.transport {
        TransportSpec::Perfect => (FeedbackTransport::Perfect, None),
        TransportSpec::Gaussian { variance } => (FeedbackTransport::AdditiveGaussian { variance }, None),
        TransportSpec::Learned => {
            let (fb, _) = train_feedback_system(config, progress)?;
            (learned_transport(config, &fb)?, Some(fb))
        }
    })
}

#[derive(Debug)]
pub struct TrainCommOutput {
    pub system: CommSystem,
    pub log: TrainLog,
}

/// `train-comm`: trains an autoencoder with the configured transport and
/// saves it with its training log.
pub fn run_train_comm(config: &ExperimentConfig, progress: Progress) -> Result<TrainCommOutput> {
    write_config(config)?;
    let (transport, fb) = configured_transport(config, progress)?;
    if let Some(fb) = &fb {
        write_model(&out_path(config, FEEDBACK_MODEL), &save_feedback(fb))?;
    }
    // A learned link only carries values in [0, 1].
    let clip = config.clip_losses || config.transport == TransportSpec::Learned;
    let (system, log) = train_comm_system(config, &transport, clip, "comm", progress)?;
    write_model(&out_path(config, COMM_MODEL), &save_comm(&system))?;
    write_text(&out_path(config, "train_log.csv"), &training_log_csv(&log, config.log_wall_time))?;
    Ok(TrainCommOutput { system, log })
}

/// `train-feedback`: trains a feedback system, saves it with its log and
/// evaluates its MSE over the SNR grid.
pub fn run_train_feedback(config: &ExperimentConfig, progress: Progress) -> Result<(FeedbackSystem, Vec<MseRow>)> {
    write_config(config)?;
    let (fb, log) = train_feedback_system(config, progress)?;
    write_model(&out_path(config, FEEDBACK_MODEL), &save_feedback(&fb))?;
    write_text(&out_path(config, "feedback_log.csv"), &feedback_log_csv(&log))?;
    let rows = feedback_mse_rows(config, &fb, &config.eval_snr_grid.points(), progress)?;
    emit_csv(&rows, &out_path(config, "mse.csv"))?;
    Ok((fb, rows))
}

fn load_if_present<T>(path: &Path, load: impl Fn(&str, &Path) -> Result<T>) -> Result<Option<T>> {
    if path.exists() {
        Ok(Some(load(&read_model(path)?, path)?))
    } else {
        Ok(None)
    }
}

/// `eval-bler`: BLER of the baselines and, if `comm_model.txt` exists in the
/// output directory, of the saved autoencoder.
pub fn run_eval_bler(config: &ExperimentConfig, snrs: &[f64], progress: Progress) -> Result<Vec<BlerRow>> {
    let model = load_if_present(&out_path(config, COMM_MODEL), load_comm)?;
    let baselines = baseline_schemes(config, progress)?;
    let mut schemes: Vec<(String, &dyn MessageScheme)> = Vec::new();
    if let Some(m) = &model {
        schemes.push(("autoencoder".into(), m));
    }
    for (n, s) in &baselines {
        schemes.push((n.clone(), s.as_ref()));
    }
    let rows = bler_rows(config, &schemes, snrs, progress)?;
    emit_csv(&rows, &out_path(config, "bler.csv"))?;
    Ok(rows)
}

/// `eval-mse`: MSE of the analog baseline and, if `feedback_model.txt`
/// exists in the output directory, of the saved feedback system.
pub fn run_eval_mse(config: &ExperimentConfig, snrs: &[f64], progress: Progress) -> Result<Vec<MseRow>> {
    let rows = match load_if_present(&out_path(config, FEEDBACK_MODEL), load_feedback)? {
        Some(fb) => feedback_mse_rows(config, &fb, snrs, progress)?,
        None => {
            let analog = analog_link(config)?;
            mse_rows(config, &[("analog".into(), analog.as_ref())], snrs, progress)?
        }
    };
    emit_csv(&rows, &out_path(config, "mse.csv"))?;
    Ok(rows)
}

/// `variance-sweep`: trains an autoencoder with perfect feedback and measures
/// the gradient variance over the loss-noise grid at each checkpoint and at
/// the end of training.
pub fn run_variance_sweep(config: &ExperimentConfig, progress: Progress) -> Result<Vec<VarianceReport>> {
    write_config(config)?;
    let seeds = root_seeds(config).child("variance");
    let channel = config.comm_channel()?;
    let mut sys = CommSystem::new(config.comm_config(), &mut seeds.stream("init"))?;
    let mut checkpoints: Vec<usize> = config
        .variance_checkpoints
        .iter()
        .copied()
        .filter(|&c| c < config.comm_iterations)
        .collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let mut stages: Vec<(usize, String)> = checkpoints
        .iter()
        .map(|&c| (c, if c == 0 { "untrained".to_string() } else { c.to_string() }))
        .collect();
    stages.push((config.comm_iterations, "final".into()));

    let mut reports = Vec::new();
    let mut done = 0;
    for (k, (at, stage)) in stages.iter().enumerate() {
        if *at > done {
            let mut tc = config.train_config();
            tc.iterations = at - done;
            if *stage != "final" {
                tc.plateau_rel_tol = 0.0;
            }
            progress(&format!("training {} iterations to reach stage {stage}", tc.iterations));
            alternating_train(&mut sys, &channel, &FeedbackTransport::Perfect, &tc, &seeds.child(&format!("segment/{k}")))?;
            done = *at;
        }
        progress(&format!(
            "measuring V at stage {stage}: {} replications of {} examples",
            config.variance_replications, config.variance_batch
        ));
        let r = estimate_variance(
            &sys,
            &channel,
            &config.variance_grid,
            config.variance_batch,
            config.variance_replications,
            stage,
            &seeds.child(&format!("measure/{stage}")),
        )?;
        reports.push(r);
    }
    let rows: Vec<VarianceRow> = reports
        .iter()
        .flat_map(|r| {
            r.points.iter().map(|p| VarianceRow {
                sigma_l2: p.sigma_l2,
                v: p.v,
                stage: r.stage.clone(),
            })
        })
        .collect();
    emit_csv(&rows, &out_path(config, "variance.csv"))?;
    let details = render_table(
        "stage,sigma_l2,v,std_err,predicted",
        reports.iter().flat_map(|r| {
            r.points.iter().map(|p| {
                vec![
                    r.stage.clone(),
                    p.sigma_l2.to_string(),
                    p.v.to_string(),
                    p.std_err.to_string(),
                    r.predicted(p.sigma_l2).to_string(),
                ]
            })
        }),
    );
    write_text(&out_path(config, "variance_detail.csv"), &details)?;
    Ok(reports)
}

/// `bler-vs-mse`: final BLER against the loss-noise variance used during
/// training.
pub fn run_bler_vs_mse(config: &ExperimentConfig, progress: Progress) -> Result<Vec<SweepRow>> {
    write_config(config)?;
    let sweep = SweepConfig {
        comm: config.comm_config(),
        train: config.train_config(),
        channel: config.comm_channel()?,
        grid: config.sweep_grid.clone(),
        eval_samples: config.bler_samples,
    };
    progress(&format!(
        "training {} autoencoders ({} iterations each)",
        sweep.grid.len() + 1,
        sweep.train.iterations
    ));
    let report = bler_vs_feedback_mse_sweep(&sweep, &root_seeds(config).child("sweep"))?;
    let rows: Vec<SweepRow> = report
        .points
        .iter()
        .map(|p| {
            let bler_noisy = match &p.outcome {
                Ok(b) => b.estimate,
                Err(e) => {
                    progress(&format!("sigma_l2 = {}: {e}", p.sigma_l2));
                    f64::NAN
                }
            };
            SweepRow {
                sigma_l2: p.sigma_l2,
                bler_noisy,
                bler_perfect: report.perfect.estimate,
            }
        })
        .collect();
    emit_csv(&rows, &out_path(config, "bler_vs_mse.csv"))?;
    Ok(rows)
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub feedback: FeedbackSystem,
    pub with_feedback: CommSystem,
    pub with_perfect: CommSystem,
    pub bler: Vec<BlerRow>,
    pub mse: Vec<MseRow>,
}

/// `full-pipeline`: trains a feedback system, then two autoencoders from the
/// same initial weights and streams, one through the learned feedback link
/// and one with perfect feedback (both with clipped losses), and evaluates
/// them with the baselines over the SNR grid.
pub fn run_full_pipeline(config: &ExperimentConfig, progress: Progress) -> Result<PipelineOutput> {
    write_config(config)?;
    let baselines = baseline_schemes(config, progress)?;
    let grid = config.eval_snr_grid.points();

    let (fb, fb_log) = train_feedback_system(config, progress)?;
    write_model(&out_path(config, FEEDBACK_MODEL), &save_feedback(&fb))?;
    write_text(&out_path(config, "feedback_log.csv"), &feedback_log_csv(&fb_log))?;
    let mse = feedback_mse_rows(config, &fb, &grid, progress)?;
    emit_csv(&mse, &out_path(config, "mse.csv"))?;

    let transport = learned_transport(config, &fb)?;
    let (with_feedback, log_fb) = train_comm_system(config, &transport, true, "comm", progress)?;
    let (with_perfect, log_pf) = train_comm_system(config, &FeedbackTransport::Perfect, true, "comm", progress)?;
    write_model(&out_path(config, "comm_model_feedback.txt"), &save_comm(&with_feedback))?;
    write_model(&out_path(config, "comm_model_perfect.txt"), &save_comm(&with_perfect))?;
    write_text(&out_path(config, "train_log_feedback.csv"), &training_log_csv(&log_fb, config.log_wall_time))?;
    write_text(&out_path(config, "train_log_perfect.csv"), &training_log_csv(&log_pf, config.log_wall_time))?;

    let mut schemes: Vec<(String, &dyn MessageScheme)> = vec![
        ("autoencoder_feedback".into(), &with_feedback),
        ("autoencoder_perfect".into(), &with_perfect),
    ];
    for (n, s) in &baselines {
        schemes.push((n.clone(), s.as_ref()));
    }
    let bler = bler_rows(config, &schemes, &grid, progress)?;
    emit_csv(&bler, &out_path(config, "bler.csv"))?;
    Ok(PipelineOutput {
        feedback: fb,
        with_feedback,
        with_perfect,
        bler,
        mse,
    })
}
