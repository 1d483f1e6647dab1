use std::fmt;
use std::time::Instant;

use crate::channel::Channel;
use crate::rng::{SeedTree, StreamRng};
use crate::{Error, Result};

use super::{CommSystem, FeedbackTransport};

/// Budget and schedule of an alternating training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Outer iterations; each runs the receiver steps then the transmitter
    /// steps.
    pub iterations: usize,
    pub batch_size: usize,
    pub receiver_steps: usize,
    pub transmitter_steps: usize,
    /// Clip per-example losses to `[0, 1]` before they are fed back.
    pub clip_losses: bool,
    /// Moving-average window for plateau and divergence checks.
    pub window: usize,
    /// Stop once the relative improvement between two consecutive
    /// `window`-iteration averages of the receiver loss falls below this.
    /// Zero disables plateau stopping.
    pub plateau_rel_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            batch_size: 4096,
            receiver_steps: 1,
            transmitter_steps: 1,
            clip_losses: false,
            window: 100,
            plateau_rel_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Receiver,
    Transmitter,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Receiver => "receiver",
            Phase::Transmitter => "transmitter",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub iteration: usize,
    pub phase: Phase,
    /// Receiver: batch cross-entropy. Transmitter: mean fed-back loss.
    pub loss: f64,
    /// Seconds since the start of the run. Not reproducible.
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Budget,
    Plateau,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
    pub iterations: usize,
    pub stop: StopReason,
}

impl TrainLog {
    /// Records without wall-clock time, for reproducibility checks.
    pub fn losses(&self) -> Vec<(usize, Phase, f64)> {
        self.records.iter().map(|r| (r.iteration, r.phase, r.loss)).collect()
    }
}

/// Independent random streams used by a training run.
#[derive(Debug, Clone)]
pub struct CommStreams {
    pub messages: StreamRng,
    pub channel: StreamRng,
    pub perturbation: StreamRng,
    pub feedback: StreamRng,
}

impl CommStreams {
    pub fn new(seeds: &SeedTree) -> Self {
        Self {
            messages: seeds.stream("messages"),
            channel: seeds.stream("channel"),
            perturbation: seeds.stream("perturbation"),
            feedback: seeds.stream("feedback"),
        }
    }
}

/// Alternates supervised receiver steps and policy-gradient transmitter
/// steps until the iteration budget is spent or the receiver loss plateaus.
///
/// Aborts if the receiver loss stays above `10 ln M` for `window`
/// consecutive iterations.
pub fn alternating_train(
    sys: &mut CommSystem,
    channel: &Channel,
    transport: &FeedbackTransport,
    config: &TrainConfig,
    seeds: &SeedTree,
) -> Result<TrainLog> {
    if config.batch_size == 0 || config.window == 0 {
        return Err(Error::config("batch size and window must be at least 1"));
    }
    let mut st = CommStreams::new(seeds);
    let start = Instant::now();
    let diverged_above = 10.0 * (sys.config().messages as f64).ln();
    let mut records = Vec::new();
    let mut rx_history: Vec<f64> = Vec::with_capacity(config.iterations);
    let mut above = 0usize;
    let mut stop = StopReason::Budget;
    let mut done = 0;
    for it in 0..config.iterations {
        let mut rx_loss = 0.0;
        for _ in 0..config.receiver_steps {
            rx_loss = sys.train_receiver_step(channel, config.batch_size, &mut st.messages, &mut st.channel)?;
            records.push(LogRecord {
                iteration: it,
                phase: Phase::Receiver,
                loss: rx_loss,
                elapsed_s: start.elapsed().as_secs_f64(),
            });
        }
        for _ in 0..config.transmitter_steps {
            let l = sys.train_transmitter_step(
                channel,
                transport,
                config.batch_size,
                config.clip_losses,
                &mut st.messages,
                &mut st.perturbation,
                &mut st.channel,
                &mut st.feedback,
            )?;
            records.push(LogRecord {
                iteration: it,
                phase: Phase::Transmitter,
                loss: l,
                elapsed_s: start.elapsed().as_secs_f64(),
            });
        }
        done = it + 1;
        if config.receiver_steps == 0 {
            continue;
        }
        above = if rx_loss > diverged_above { above + 1 } else { 0 };
        if above >= config.window {
            return Err(Error::training(format!(
                "diverged: receiver loss above {diverged_above:.3} for {above} iterations (last {rx_loss:.3})"
            )));
        }
        rx_history.push(rx_loss);
        if config.plateau_rel_tol > 0.0 && plateaued(&rx_history, config.window, config.plateau_rel_tol) {
            stop = StopReason::Plateau;
            break;
        }
    }
    Ok(TrainLog {
        records,
        iterations: done,
        stop,
    })
}

/// Whether the last `window` values improved on the `window` before them by
/// less than `rel_tol` (relative).
pub(crate) fn plateaued(history: &[f64], window: usize, rel_tol: f64) -> bool {
    if history.len() < 2 * window || history.len() % window != 0 {
        return false;
    }
    let n = history.len();
    let recent = history[n - window..].iter().sum::<f64>() / window as f64;
    let before = history[n - 2 * window..n - window].iter().sum::<f64>() / window as f64;
    (before - recent) / before.abs().max(f64::MIN_POSITIVE) < rel_tol
}
