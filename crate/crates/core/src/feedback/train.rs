use rand::Rng;

use crate::channel::{sample_perturbation, Channel};
use crate::policy::reinforce_upstream;
use crate::receiver::Objective;
use crate::rng::{SeedTree, StreamRng};
use crate::{Error, Result};

use super::{Device, DeviceId, Direction, FeedbackConfig, LearnedLink};

/// Pseudo-random source of training numbers `r ~ U(0, 1)`.
///
/// Both ends of a direction build one from the same seed and label, so the
/// receiver regenerates exactly what the transmitter sent.
#[derive(Debug, Clone)]
pub struct TrainingSource {
    rng: StreamRng,
}

impl TrainingSource {
    pub fn new(seeds: &SeedTree, direction: Direction) -> Self {
        Self {
            rng: seeds.stream(&format!("source/{direction}")),
        }
    }

    pub fn draw(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen::<f64>()).collect()
    }
}

/// Random streams for training one direction.
#[derive(Debug, Clone)]
pub struct DirectionStreams {
    pub sender_source: TrainingSource,
    pub receiver_source: TrainingSource,
    pub perturbation: StreamRng,
    pub channel: StreamRng,
    /// Channel noise on the reverse link that returns losses.
    pub return_channel: StreamRng,
}

impl DirectionStreams {
    pub fn new(seeds: &SeedTree, direction: Direction) -> Self {
        Self {
            sender_source: TrainingSource::new(seeds, direction),
            receiver_source: TrainingSource::new(seeds, direction),
            perturbation: seeds.stream(&format!("perturbation/{direction}")),
            channel: seeds.stream(&format!("channel/{direction}")),
            return_channel: seeds.stream(&format!("return/{direction}")),
        }
    }
}

/// How the losses of a transmitter step get back to the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossReturn {
    /// Over the channel, through the reverse direction of the system.
    Learned,
    /// Unchanged (ablation).
    Perfect,
}

/// Outcome of one transmitter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmitterStep {
    /// Mean of the clipped squared errors computed at the receiver.
    pub mean_loss: f64,
    /// Mean of the losses as they arrived back at the transmitter.
    pub mean_received: f64,
}

/// Two devices, A and B, each with a real-number transmitter and receiver.
#[derive(Debug, Clone)]
pub struct FeedbackSystem {
    config: FeedbackConfig,
    a: Device,
    b: Device,
}

impl FeedbackSystem {
    pub fn new<R: Rng + ?Sized>(config: FeedbackConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let a = Device::new(&config, rng)?;
        let b = Device::new(&config, rng)?;
        Ok(Self { config, a, b })
    }

    pub fn from_devices(config: FeedbackConfig, a: Device, b: Device) -> Result<Self> {
        config.validate()?;
        for d in [&a, &b] {
            if d.tx.symbols() != config.channel_uses || d.rx.input_symbols() != config.channel_uses {
                return Err(Error::config("device sizes do not match the configuration"));
            }
        }
        Ok(Self { config, a, b })
    }

    pub fn config(&self) -> &FeedbackConfig {
        &self.config
    }

    pub fn device(&self, id: DeviceId) -> &Device {
        match id {
            DeviceId::A => &self.a,
            DeviceId::B => &self.b,
        }
    }

    pub fn device_mut(&mut self, id: DeviceId) -> &mut Device {
        match id {
            DeviceId::A => &mut self.a,
            DeviceId::B => &mut self.b,
        }
    }

    /// (sender, receiver) of a direction.
    fn ends_mut(&mut self, direction: Direction) -> (&mut Device, &mut Device) {
        match direction {
            Direction::AToB => (&mut self.a, &mut self.b),
            Direction::BToA => (&mut self.b, &mut self.a),
        }
    }

    /// Sets the step size of every network's optimizer.
    pub fn set_learning_rate(&mut self, lr: f64) {
        for d in [&mut self.a, &mut self.b] {
            d.tx.learner.opt.set_learning_rate(lr);
            d.rx.classifier_mut().opt.set_learning_rate(lr);
            if let Some(e) = d.rx.estimator_mut() {
                e.opt.set_learning_rate(lr);
            }
        }
    }

    /// Snapshot of one direction for inference.
    pub fn link(&self, direction: Direction) -> LearnedLink {
        LearnedLink {
            tx: self.device(direction.sender()).tx.clone(),
            rx: self.device(direction.receiver()).rx.clone(),
        }
    }

    /// Supervised step on the receiving device. Returns the batch MSE before
    /// the step.
    pub fn train_receiver(
        &mut self,
        direction: Direction,
        channel: &Channel,
        batch: usize,
        streams: &mut DirectionStreams,
    ) -> Result<f64> {
        if batch == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        let (sender, receiver) = self.ends_mut(direction);
        let r = streams.sender_source.draw(batch);
        let pass = sender.tx.forward_train(&r)?;
        let y = channel.transmit(&crate::channel::ComplexBlock::from_real_matrix(pass.x)?, &mut streams.channel);
        let trace = receiver.rx.forward_trace(&y)?;
        let r_rx = regenerate(&mut streams.receiver_source, &r)?;
        let mse = mean_sq_err(trace.output().as_slice(), &r_rx);
        if !mse.is_finite() {
            return Err(Error::training(format!("receiver MSE is not finite: {mse}")));
        }
        let grads = receiver.rx.gradients(&trace, Objective::MeanSquaredError { targets: &r_rx })?;
        receiver.rx.apply(&grads)?;
        Ok(mse)
    }

    /// Policy-gradient step on the sending device's transmitter. Squared
    /// errors are clipped to `[0, 1]` at the receiver and returned according
    /// to `loss_return`.
    pub fn train_transmitter(
        &mut self,
        direction: Direction,
        channel: &Channel,
        batch: usize,
        loss_return: LossReturn,
        streams: &mut DirectionStreams,
    ) -> Result<TransmitterStep> {
        if batch == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        let var = self.config.exploration_var;
        let n = self.config.channel_uses;
        let gain = (1.0 - var).sqrt();
        let (sender, receiver) = self.ends_mut(direction);

        let r = streams.sender_source.draw(batch);
        let pass = sender.tx.forward_train(&r)?;
        let w = sample_perturbation(batch, n, var, &mut streams.perturbation);
        let mut x_p = pass.x.map(|v| gain * v);
        for (a, b) in x_p.as_mut_slice().iter_mut().zip(w.as_real_matrix().as_slice()) {
            *a += b;
        }
        let y = channel.transmit(&crate::channel::ComplexBlock::from_real_matrix(x_p.clone())?, &mut streams.channel);
        let r_hat = receiver.rx.forward(&y)?;
        let r_rx = regenerate(&mut streams.receiver_source, &r)?;
        let losses: Vec<f64> = r_rx
            .iter()
            .zip(r_hat.as_slice())
            .map(|(a, b)| ((a - b) * (a - b)).clamp(0.0, 1.0))
            .collect();

        let received = match loss_return {
            LossReturn::Perfect => losses.clone(),
            LossReturn::Learned => {
                let back = receiver.tx.forward_inference(&losses)?;
                let y_back = channel.transmit(&back, &mut streams.return_channel);
                sender.rx.forward(&y_back)?.into_vec()
            }
        };

        let up = reinforce_upstream(&pass.x, &x_p, &received, var, gain)?;
        let grad = sender.tx.backward(&pass, &up)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::training("non-finite feedback transmitter gradient"));
        }
        sender.tx.learner.apply(&grad)?;
        Ok(TransmitterStep {
            mean_loss: mean(&losses),
            mean_received: mean(&received),
        })
    }
}

fn regenerate(source: &mut TrainingSource, sent: &[f64]) -> Result<Vec<f64>> {
    let r = source.draw(sent.len());
    if r != sent {
        return Err(Error::training("training sources of the two devices are out of sync"));
    }
    Ok(r)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_sq_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// Budget and stop rules of the main loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackTrainConfig {
    pub outer_iterations: usize,
    /// Transmitter/receiver step pairs per direction per outer iteration.
    pub inner_steps: usize,
    pub batch_size: usize,
    pub loss_return: LossReturn,
    /// Window (in steps) for divergence and plateau checks.
    pub window: usize,
    /// Stop when both directions' receiver MSE improves by less than this
    /// (relative) between consecutive windows. Zero disables.
    pub plateau_rel_tol: f64,
    /// Learning rate of the last outer iteration relative to the configured
    /// one; the rate decays geometrically in between. 1 keeps it constant.
    pub final_lr_factor: f64,
}

impl Default for FeedbackTrainConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 20,
            inner_steps: 50,
            batch_size: 4096,
            loss_return: LossReturn::Learned,
            window: 100,
            plateau_rel_tol: 1e-3,
            final_lr_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackLogRecord {
    pub outer: usize,
    pub step: usize,
    pub direction: Direction,
    /// Receiver batch MSE of the step.
    pub mse: f64,
    /// Mean loss received back by the transmitter in the same step.
    pub received_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackLog {
    pub records: Vec<FeedbackLogRecord>,
    pub outer_iterations: usize,
    pub plateaued: bool,
}

impl FeedbackLog {
    /// Mean receiver MSE over the last `k` steps of a direction.
    pub fn final_mse(&self, direction: Direction, k: usize) -> f64 {
        let v: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.direction == direction)
            .map(|r| r.mse)
            .collect();
        let tail = &v[v.len().saturating_sub(k)..];
        mean(tail)
    }
}

/// Divergence threshold on the receiver MSE.
pub const DIVERGENCE_MSE: f64 = 10.0;

/// Main loop: train transmitter A + receiver B for `inner_steps` step pairs,
/// then transmitter B + receiver A, and repeat. The sender's inference scale
/// is synced at the end of each block.
pub fn main_loop(
    system: &mut FeedbackSystem,
    channel: &Channel,
    config: &FeedbackTrainConfig,
    seeds: &SeedTree,
) -> Result<FeedbackLog> {
    if config.batch_size == 0 || config.inner_steps == 0 || config.window == 0 {
        return Err(Error::config("batch size, inner steps and window must be at least 1"));
    }
    if !(config.final_lr_factor > 0.0 && config.final_lr_factor <= 1.0) {
        return Err(Error::config("final learning-rate factor must lie in (0, 1]"));
    }
    let base_lr = system.config.learning_rate;
    let mut streams = [
        DirectionStreams::new(seeds, Direction::AToB),
        DirectionStreams::new(seeds, Direction::BToA),
    ];
    let mut records = Vec::new();
    let mut history: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut above = [0usize; 2];
    let mut plateaued = false;
    let mut done = 0;
    for outer in 0..config.outer_iterations {
        if config.final_lr_factor < 1.0 {
            let t = outer as f64 / (config.outer_iterations.max(2) - 1) as f64;
            system.set_learning_rate(base_lr * config.final_lr_factor.powf(t));
        }
        for (d, direction) in [Direction::AToB, Direction::BToA].into_iter().enumerate() {
            for step in 0..config.inner_steps {
                let tx = system.train_transmitter(direction, channel, config.batch_size, config.loss_return, &mut streams[d])?;
                let mse = system.train_receiver(direction, channel, config.batch_size, &mut streams[d])?;
                records.push(FeedbackLogRecord {
                    outer,
                    step,
                    direction,
                    mse,
                    received_loss: tx.mean_received,
                });
                above[d] = if mse > DIVERGENCE_MSE { above[d] + 1 } else { 0 };
                if above[d] >= config.window {
                    return Err(Error::training(format!(
                        "diverged: {direction} MSE above {DIVERGENCE_MSE} for {} steps",
                        above[d]
                    )));
                }
                history[d].push(mse);
            }
            system.device_mut(direction.sender()).tx.sync_inference_scale()?;
        }
        done = outer + 1;
        if config.plateau_rel_tol > 0.0
            && history
                .iter()
                .all(|h| window_improvement(h, config.window).is_some_and(|imp| imp < config.plateau_rel_tol))
        {
            plateaued = true;
            break;
        }
    }
    Ok(FeedbackLog {
        records,
        outer_iterations: done,
        plateaued,
    })
}

/// Relative improvement of the last `window` values over the `window` before.
fn window_improvement(h: &[f64], window: usize) -> Option<f64> {
    if h.len() < 2 * window {
        return None;
    }
    let n = h.len();
    let recent = mean(&h[n - window..]);
    let before = mean(&h[n - 2 * window..n - window]);
    Some((before - recent) / before.abs().max(f64::MIN_POSITIVE))
}

