use crate::bler::evaluate_bler;
use crate::channel::Channel;
use crate::comm::{alternating_train, CommConfig, CommSystem, FeedbackTransport, TrainConfig};
use crate::montecarlo::par_map;
use crate::rng::SeedTree;
use crate::stats::Proportion;
use crate::{Error, Result};

/// Inputs of a BLER vs. loss-noise sweep. Every grid point trains from the
/// same initial weights with the same random streams; only the loss noise
/// differs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub comm: CommConfig,
    pub train: TrainConfig,
    /// Channel used for training and evaluation.
    pub channel: Channel,
    pub grid: Vec<f64>,
    pub eval_samples: usize,
}

/// One grid point: the trained system's BLER, or why training stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub sigma_l2: f64,
    pub outcome: std::result::Result<Proportion, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// Reference run with perfect feedback.
    pub perfect: Proportion,
    pub points: Vec<SweepPoint>,
}

fn train_and_evaluate(config: &SweepConfig, transport: &FeedbackTransport, seeds: &SeedTree) -> Result<Proportion> {
    let mut sys = CommSystem::new(config.comm, &mut seeds.stream("init"))?;
    alternating_train(&mut sys, &config.channel, transport, &config.train, &seeds.child("train"))?;
    evaluate_bler(&sys, config.channel, config.eval_samples, &seeds.child("eval"))
}

/// Trains one system per grid point with additive Gaussian loss noise of
/// that variance, plus a perfect-feedback reference, and evaluates all of
/// them on the same channel realizations.
///
/// A training abort at one grid point is recorded in that point; an abort of
/// the reference run is an error.
pub fn bler_vs_feedback_mse_sweep(config: &SweepConfig, seeds: &SeedTree) -> Result<SweepReport> {
    if let Some(v) = config.grid.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::config(format!("loss noise variance must be finite and >= 0, got {v}")));
    }
    let mut runs = par_map(config.grid.len() + 1, |i| {
        let transport = match i {
            0 => FeedbackTransport::Perfect,
            _ => FeedbackTransport::AdditiveGaussian {
                variance: config.grid[i - 1],
            },
        };
        train_and_evaluate(config, &transport, seeds)
    });
    let perfect = runs.remove(0)?;
    let points = config
        .grid
        .iter()
        .zip(runs)
        .map(|(&sigma_l2, r)| SweepPoint {
            sigma_l2,
            outcome: r.map_err(|e| e.to_string()),
        })
        .collect();
    Ok(SweepReport { perfect, points })
}
