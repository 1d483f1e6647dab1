use std::fmt;

use rand::Rng;

use crate::channel::ComplexBlock;
use crate::comm::ReceiverKind;
use crate::energy::{batch_scale, normalize_batch_vjp, SCALE_FLOOR};
use crate::matrix::Matrix;
use crate::nn::{Activation, Learner, MlpNetwork, OptimizerKind, Trace, DEFAULT_LEARNING_RATE};
use crate::receiver::Receiver;
use crate::{Error, Result};

/// Decay of the running transmit scale used at inference.
pub const DEFAULT_SCALE_DECAY: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackConfig {
    /// Complex channel uses `N_f` per real number.
    pub channel_uses: usize,
    /// Exploration variance; the transmitter output is scaled by
    /// `sqrt(1 - var)` before the perturbation is added.
    pub exploration_var: f64,
    pub receiver: ReceiverKind,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub scale_decay: f64,
}

impl FeedbackConfig {
    pub fn awgn() -> Self {
        Self {
            channel_uses: 4,
            exploration_var: 0.02,
            receiver: ReceiverKind::Plain,
            optimizer: OptimizerKind::Adam,
            learning_rate: DEFAULT_LEARNING_RATE,
            scale_decay: DEFAULT_SCALE_DECAY,
        }
    }

    pub fn rbf() -> Self {
        Self {
            channel_uses: 5,
            receiver: ReceiverKind::Rtn,
            ..Self::awgn()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_uses == 0 {
            return Err(Error::config("at least one channel use is required"));
        }
        if !(self.exploration_var > 0.0 && self.exploration_var < 1.0) {
            return Err(Error::config(format!(
                "exploration variance must lie in (0, 1), got {}",
                self.exploration_var
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(self.scale_decay > 0.0 && self.scale_decay < 1.0) {
            return Err(Error::config("scale decay must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Checks that every value lies in `[0, 1]`.
pub fn check_unit_interval(r: &[f64]) -> Result<()> {
    match r.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::input(format!("value {} at index {i} is outside [0, 1]", r[i]))),
        None => Ok(()),
    }
}

/// Scalar-to-symbols transmitter: `1 -> 10 N_f (ELU) -> 2 N_f (linear)`
/// followed by average-energy normalization.
///
/// In training mode the output is divided by the batch RMS symbol amplitude,
/// so the batch has unit average symbol energy while individual rows may
/// carry more or less energy. Each training-mode batch also updates an
/// exponential moving average of that scale, which is what inference uses.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTransmitter {
    pub learner: Learner,
    symbols: usize,
    running_scale: Option<f64>,
    decay: f64,
    floored: u64,
}

/// A training-mode transmitter pass.
#[derive(Debug, Clone)]
pub struct TxPass {
    pub trace: Trace,
    /// Normalized symbols, `[re | im]` layout.
    pub x: Matrix,
    pub scale: f64,
}

impl RealTransmitter {
    pub fn new<R: Rng + ?Sized>(config: &FeedbackConfig, rng: &mut R) -> Result<Self> {
        let n = config.channel_uses;
        let net = MlpNetwork::glorot(&[1, 10 * n, 2 * n], &[Activation::Elu, Activation::Linear], rng)?;
        let mut tx = Self::from_network(config, net, None)?;
        tx.running_scale = Some(tx.calibration_scale()?);
        Ok(tx)
    }

    /// Batch scale over an even grid of `[0, 1]`; seeds the running scale so
    /// an untrained transmitter can already be used for inference.
    pub fn calibration_scale(&self) -> Result<f64> {
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let u = self.learner.net.forward(&Matrix::column(&grid))?;
        Ok(batch_scale(&u, self.symbols).max(SCALE_FLOOR))
    }

    pub fn from_network(config: &FeedbackConfig, net: MlpNetwork, running_scale: Option<f64>) -> Result<Self> {
        let n = config.channel_uses;
        if net.input_dim() != 1 || net.output_dim() != 2 * n {
            return Err(Error::config(format!("transmitter must map 1 -> {}", 2 * n)));
        }
        if let Some(s) = running_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config("running scale must be positive"));
            }
        }
        Ok(Self {
            learner: Learner::new(net, config.optimizer, config.learning_rate),
            symbols: n,
            running_scale,
            decay: config.scale_decay,
            floored: 0,
        })
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    /// Scale used at inference, if training has started.
    pub fn running_scale(&self) -> Option<f64> {
        self.running_scale
    }

    pub fn set_running_scale(&mut self, scale: f64) {
        self.running_scale = Some(scale);
    }

    /// Replaces the running scale with the calibration scale of the current
    /// weights. The moving average trails a transmitter whose output
    /// amplitude keeps growing; syncing after a training block removes that
    /// lag.
    pub fn sync_inference_scale(&mut self) -> Result<f64> {
        let s = self.calibration_scale()?;
        self.running_scale = Some(s);
        Ok(s)
    }

    /// Number of batches whose scale had to be floored.
    pub fn floored_batches(&self) -> u64 {
        self.floored
    }

    /// Training-mode pass: normalize by the batch scale and fold it into the
    /// running average.
    pub fn forward_train(&mut self, r: &[f64]) -> Result<TxPass> {
        check_unit_interval(r)?;
        let trace = self.learner.net.forward_trace(&Matrix::column(r))?;
        let mut scale = batch_scale(trace.output(), self.symbols);
        if !(scale >= SCALE_FLOOR) {
            scale = SCALE_FLOOR;
            self.floored += 1;
        }
        self.running_scale = Some(match self.running_scale {
            None => scale,
            Some(s) => self.decay * s + (1.0 - self.decay) * scale,
        });
        let x = trace.output().map(|v| v / scale);
        Ok(TxPass { trace, x, scale })
    }

    /// Inference-mode encoding with the frozen running scale.
    pub fn forward_inference(&self, r: &[f64]) -> Result<ComplexBlock> {
        check_unit_interval(r)?;
        let scale = self
            .running_scale
            .ok_or_else(|| Error::config("transmitter has no inference scale yet (train it first)"))?;
        let u = self.learner.net.forward(&Matrix::column(r))?;
        ComplexBlock::from_real_matrix(u.map(|v| v / scale))
    }

    /// Parameter gradient for an upstream gradient on the normalized output of
    /// a training-mode pass.
    pub fn backward(&self, pass: &TxPass, upstream: &Matrix) -> Result<Vec<f64>> {
        let g_u = normalize_batch_vjp(pass.trace.output(), pass.scale, self.symbols, upstream);
        Ok(self.learner.net.backward_trace(&pass.trace, &g_u, false)?.params)
    }
}

/// Builds the scalar-output receiver for `config`.
pub fn real_receiver<R: Rng + ?Sized>(config: &FeedbackConfig, rng: &mut R) -> Result<Receiver> {
    let n = config.channel_uses;
    let learner = |net| Learner::new(net, config.optimizer, config.learning_rate);
    let cls = MlpNetwork::glorot(&[2 * n, 10 * n, 1], &[Activation::Relu, Activation::Linear], rng)?;
    match config.receiver {
        ReceiverKind::Plain => Ok(Receiver::Plain(learner(cls))),
        ReceiverKind::Rtn => {
            let est = MlpNetwork::glorot(&[2 * n, 10 * n, 2], &[Activation::Relu, Activation::Linear], rng)?;
            Receiver::rtn(learner(est), learner(cls))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviceId {
    A,
    B,
}

impl DeviceId {
    pub fn peer(self) -> DeviceId {
        match self {
            DeviceId::A => DeviceId::B,
            DeviceId::B => DeviceId::A,
        }
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeviceId::A => "A",
            DeviceId::B => "B",
        })
    }
}

/// Transmission direction: from the sending device to its peer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    AToB,
    BToA,
}

impl Direction {
    pub fn sender(self) -> DeviceId {
        match self {
            Direction::AToB => DeviceId::A,
            Direction::BToA => DeviceId::B,
        }
    }

    pub fn receiver(self) -> DeviceId {
        self.sender().peer()
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::AToB => Direction::BToA,
            Direction::BToA => Direction::AToB,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AToB => "a_to_b",
            Direction::BToA => "b_to_a",
        })
    }
}

/// One device: a transmitter and a receiver.
#[derive(Debug, Clone)]
pub struct Device {
    pub tx: RealTransmitter,
    pub rx: Receiver,
}

impl Device {
    pub fn new<R: Rng + ?Sized>(config: &FeedbackConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            tx: RealTransmitter::new(config, rng)?,
            rx: real_receiver(config, rng)?,
        })
    }

    /// Decodes received blocks into unclipped real numbers.
    pub fn decode(&self, y: &ComplexBlock) -> Result<Vec<f64>> {
        Ok(self.rx.forward(y)?.into_vec())
    }
}
