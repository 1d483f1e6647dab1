use rand::Rng;

use crate::bler::MessageScheme;
use crate::channel::{sample_perturbation, Channel, ComplexBlock};
use crate::energy::{normalize_rows, normalize_rows_vjp};
use crate::matrix::Matrix;
use crate::nn::{Activation, Learner, MlpNetwork, OptimizerKind, Trace, DEFAULT_LEARNING_RATE};
use crate::policy::reinforce_upstream;
use crate::receiver::{Objective, Receiver};
use crate::{Error, Result};

use super::FeedbackTransport;

/// Smallest probability passed to `ln`.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverKind {
    Plain,
    /// Channel-estimating receiver for fading channels.
    Rtn,
}

/// Sizes and hyper-parameters of a message autoencoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommConfig {
    /// Number of messages `M`.
    pub messages: usize,
    /// Complex channel uses `N_c` per message.
    pub channel_uses: usize,
    /// Variance of the exploration perturbation.
    pub exploration_var: f64,
    pub receiver: ReceiverKind,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
}

impl CommConfig {
    /// 256 messages over 4 channel uses, plain receiver.
    pub fn awgn() -> Self {
        Self {
            messages: 256,
            channel_uses: 4,
            exploration_var: 0.02,
            receiver: ReceiverKind::Plain,
            optimizer: OptimizerKind::Adam,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }

    /// 256 messages over 5 channel uses, RTN receiver.
    pub fn rbf() -> Self {
        Self {
            channel_uses: 5,
            receiver: ReceiverKind::Rtn,
            ..Self::awgn()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.messages < 2 {
            return Err(Error::config("at least two messages are required"));
        }
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
        Ok(())
    }
}

/// Transmitter and receiver of a message autoencoder.
///
/// The transmitter maps a one-hot message through `M -> M (ELU) -> 2N_c
/// (linear)` and scales each row to `||x||^2 = N_c`. The receiver maps the
/// `2N_c` reals through `M (ReLU) -> M (softmax)`; the RTN variant first
/// equalizes with a channel estimate from a `2N_c -> 10 N_c (ReLU) -> 2`
/// network.
#[derive(Debug, Clone)]
pub struct CommSystem {
    config: CommConfig,
    tx: Learner,
    rx: Receiver,
}

/// Everything a transmitter update needs from one perturbed batch.
#[derive(Debug, Clone)]
pub struct PolicyBatch {
    pub messages: Vec<usize>,
    trace: Trace,
    norms: Vec<f64>,
    /// Normalized transmitter output.
    pub x: Matrix,
    /// Perturbed symbols that went over the channel.
    pub x_p: Matrix,
    /// Per-example cross-entropy computed by the receiver.
    pub losses: Vec<f64>,
}

/// Per-example cross-entropy values.
#[derive(Debug, Clone, PartialEq)]
pub struct CeLosses {
    pub losses: Vec<f64>,
    /// How many probabilities were below [`PROB_FLOOR`] and got clamped.
    pub clamped: usize,
}

impl CeLosses {
    pub fn mean(&self) -> f64 {
        self.losses.iter().sum::<f64>() / self.losses.len() as f64
    }
}

/// `l_i = -ln p_i[m_i]`, with probabilities clamped at [`PROB_FLOOR`].
pub fn ce_losses(probs: &Matrix, messages: &[usize]) -> Result<CeLosses> {
    if probs.rows() != messages.len() {
        return Err(Error::config(format!(
            "{} probability rows for {} messages",
            probs.rows(),
            messages.len()
        )));
    }
    let mut clamped = 0;
    let mut losses = Vec::with_capacity(messages.len());
    for (i, &m) in messages.iter().enumerate() {
        if m >= probs.cols() {
            return Err(Error::input(format!("message {m} out of range 0..{}", probs.cols())));
        }
        let mut p = probs[(i, m)];
        if p < PROB_FLOOR {
            p = PROB_FLOOR;
            clamped += 1;
        }
        losses.push(-p.ln());
    }
    Ok(CeLosses { losses, clamped })
}

/// Row-wise argmax; ties go to the lowest index.
pub fn argmax_rows(probs: &Matrix) -> Vec<usize> {
    probs
        .iter_rows()
        .map(|r| {
            let mut best = 0;
            for (j, &v) in r.iter().enumerate().skip(1) {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

impl CommSystem {
    /// Freshly initialized system (Glorot-uniform weights, zero biases).
    pub fn new<R: Rng + ?Sized>(config: CommConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (m, n) = (config.messages, config.channel_uses);
        let tx = MlpNetwork::glorot(&[m, m, 2 * n], &[Activation::Elu, Activation::Linear], rng)?;
        let cls = MlpNetwork::glorot(&[2 * n, m, m], &[Activation::Relu, Activation::Softmax], rng)?;
        let est = match config.receiver {
            ReceiverKind::Plain => None,
            ReceiverKind::Rtn => Some(MlpNetwork::glorot(
                &[2 * n, 10 * n, 2],
                &[Activation::Relu, Activation::Linear],
                rng,
            )?),
        };
        Self::from_networks(config, tx, cls, est)
    }

    /// Assembles a system from explicit networks.
    pub fn from_networks(
        config: CommConfig,
        tx: MlpNetwork,
        classifier: MlpNetwork,
        estimator: Option<MlpNetwork>,
    ) -> Result<Self> {
        config.validate()?;
        let (m, n) = (config.messages, config.channel_uses);
        if tx.input_dim() != m || tx.output_dim() != 2 * n {
            return Err(Error::config(format!(
                "transmitter must map {m} -> {}, got {} -> {}",
                2 * n,
                tx.input_dim(),
                tx.output_dim()
            )));
        }
        if classifier.input_dim() != 2 * n
            || classifier.output_dim() != m
            || classifier.activations().last() != Some(&Activation::Softmax)
        {
            return Err(Error::config(format!("receiver must map {} -> {m} with a softmax output", 2 * n)));
        }
        let learner = |net| Learner::new(net, config.optimizer, config.learning_rate);
        let rx = match (config.receiver, estimator) {
            (ReceiverKind::Plain, None) => Receiver::Plain(learner(classifier)),
            (ReceiverKind::Rtn, Some(est)) => Receiver::rtn(learner(est), learner(classifier))?,
            _ => return Err(Error::config("estimator network must be present exactly for RTN receivers")),
        };
        Ok(Self {
            config,
            tx: learner(tx),
            rx,
        })
    }

    pub fn config(&self) -> &CommConfig {
        &self.config
    }

    pub fn transmitter(&self) -> &Learner {
        &self.tx
    }

    pub fn transmitter_mut(&mut self) -> &mut Learner {
        &mut self.tx
    }

    pub fn receiver(&self) -> &Receiver {
        &self.rx
    }

    pub fn receiver_mut(&mut self) -> &mut Receiver {
        &mut self.rx
    }

    pub fn one_hot(&self, messages: &[usize]) -> Result<Matrix> {
        let m = self.config.messages;
        let mut out = Matrix::zeros(messages.len(), m);
        for (i, &msg) in messages.iter().enumerate() {
            if msg >= m {
                return Err(Error::input(format!("message {msg} out of range 0..{m}")));
            }
            out[(i, msg)] = 1.0;
        }
        Ok(out)
    }

    fn tx_trace(&self, messages: &[usize]) -> Result<(Trace, Matrix, Vec<f64>)> {
        let trace = self.tx.net.forward_trace(&self.one_hot(messages)?)?;
        let (x, norms) = normalize_rows(trace.output(), self.config.channel_uses);
        Ok((trace, x, norms))
    }

    /// Encodes messages into energy-normalized symbol rows (`||x||^2 = N_c`).
    pub fn tx_forward(&self, messages: &[usize]) -> Result<ComplexBlock> {
        let (_, x, _) = self.tx_trace(messages)?;
        ComplexBlock::from_real_matrix(x)
    }

    /// Receiver probabilities over messages, one row per received block.
    pub fn rx_forward(&self, y: &ComplexBlock) -> Result<Matrix> {
        self.rx.forward(y)
    }

    /// One supervised cross-entropy step on the receiver. Returns the batch
    /// loss before the step.
    pub fn train_receiver_step<R: Rng + ?Sized>(
        &mut self,
        channel: &Channel,
        batch: usize,
        msg_rng: &mut R,
        channel_rng: &mut R,
    ) -> Result<f64> {
        if batch == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        let messages = self.draw_messages(batch, msg_rng);
        let x = self.tx_forward(&messages)?;
        let y = channel.transmit(&x, channel_rng);
        let trace = self.rx.forward_trace(&y)?;
        let loss = ce_losses(trace.output(), &messages)?.mean();
        if !loss.is_finite() {
            return Err(Error::training(format!("receiver loss is not finite: {loss}")));
        }
        let grads = self.rx.gradients(&trace, Objective::CrossEntropy { targets: &messages })?;
        self.rx.apply(&grads)?;
        Ok(loss)
    }

    pub fn draw_messages<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        (0..batch).map(|_| rng.gen_range(0..self.config.messages)).collect()
    }

    /// Sends a perturbed batch and lets the receiver compute its losses.
    pub fn policy_batch<R: Rng + ?Sized>(
        &self,
        channel: &Channel,
        batch: usize,
        msg_rng: &mut R,
        perturb_rng: &mut R,
        channel_rng: &mut R,
    ) -> Result<PolicyBatch> {
        if batch == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        let messages = self.draw_messages(batch, msg_rng);
        let (trace, x, norms) = self.tx_trace(&messages)?;
        let w = sample_perturbation(batch, self.config.channel_uses, self.config.exploration_var, perturb_rng);
        let mut x_p = x.clone();
        for (a, b) in x_p.as_mut_slice().iter_mut().zip(w.as_real_matrix().as_slice()) {
            *a += b;
        }
        let y = channel.transmit(&ComplexBlock::from_real_matrix(x_p.clone())?, channel_rng);
        let probs = self.rx.forward(&y)?;
        let losses = ce_losses(&probs, &messages)?.losses;
        Ok(PolicyBatch {
            messages,
            trace,
            norms,
            x,
            x_p,
            losses,
        })
    }

    /// Policy-gradient estimate for the transmitter parameters, weighting
    /// each example of `batch` by `losses[i]`.
    ///
    /// Linear in `losses`.
    pub fn policy_gradient(&self, batch: &PolicyBatch, losses: &[f64]) -> Result<Vec<f64>> {
        let up = reinforce_upstream(&batch.x, &batch.x_p, losses, self.config.exploration_var, 1.0)?;
        let g_u = normalize_rows_vjp(batch.trace.output(), &batch.norms, self.config.channel_uses, &up);
        let grad = self.tx.net.backward_trace(&batch.trace, &g_u, false)?.params;
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::training(format!("non-finite transmitter gradient entry {i}")));
        }
        Ok(grad)
    }

    /// One policy-gradient step on the transmitter. Losses are optionally
    /// clipped to `[0, 1]`, then sent through `transport`; the transmitter
    /// learns from what arrives. Returns the mean received loss.
    #[allow(clippy::too_many_arguments)]
    pub fn train_transmitter_step<R: Rng + ?Sized>(
        &mut self,
        channel: &Channel,
        transport: &FeedbackTransport,
        batch: usize,
        clip_losses: bool,
        msg_rng: &mut R,
        perturb_rng: &mut R,
        channel_rng: &mut R,
        feedback_rng: &mut R,
    ) -> Result<f64> {
        let pb = self.policy_batch(channel, batch, msg_rng, perturb_rng, channel_rng)?;
        let mut losses = pb.losses.clone();
        if clip_losses {
            losses.iter_mut().for_each(|l| *l = l.clamp(0.0, 1.0));
        }
        let received = transport.deliver(&losses, feedback_rng)?;
        if received.len() != losses.len() {
            return Err(Error::training("feedback transport changed the number of losses"));
        }
        let grad = self.policy_gradient(&pb, &received)?;
        self.tx.apply(&grad)?;
        Ok(received.iter().sum::<f64>() / received.len() as f64)
    }

    /// `||d x / d theta_T||_F^2` per message, including the normalization.
    pub fn tx_jacobian_frobenius_sq(&self, messages: &[usize]) -> Result<Vec<f64>> {
        let n = self.config.channel_uses;
        let onehot = self.one_hot(messages)?;
        (0..messages.len())
            .map(|i| {
                let row = onehot.slice_rows(i, i + 1);
                self.tx.net.jacobian_frobenius_sq_with(&row, |u| {
                    let u = Matrix::from_vec(1, u.len(), u.to_vec()).expect("row");
                    let (_, norms) = normalize_rows(&u, n);
                    // Rows of the normalization Jacobian: J_norm^T e_j.
                    let mut dirs = Matrix::zeros(2 * n, 2 * n);
                    for j in 0..2 * n {
                        let mut e = Matrix::zeros(1, 2 * n);
                        e[(0, j)] = 1.0;
                        dirs.row_mut(j).copy_from_slice(normalize_rows_vjp(&u, &norms, n, &e).row(0));
                    }
                    dirs
                })
            })
            .collect()
    }
}

impl MessageScheme for CommSystem {
    fn messages(&self) -> usize {
        self.config.messages
    }

    fn symbols(&self) -> usize {
        self.config.channel_uses
    }

    fn encode(&self, messages: &[usize]) -> Result<ComplexBlock> {
        self.tx_forward(messages)
    }

    fn decode(&self, y: &ComplexBlock) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.rx_forward(y)?))
    }
}
