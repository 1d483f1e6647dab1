use rand::Rng;

use crate::channel::{Channel, ComplexBlock};
use crate::montecarlo::run_shards;
use crate::receiver::Receiver;
use crate::rng::SeedTree;
use crate::stats::MeanEstimate;
use crate::{Error, Result};

use super::RealTransmitter;

/// A scheme that carries real numbers in `[0, 1]` over `symbols()` channel
/// uses.
pub trait RealLink: Sync {
    fn symbols(&self) -> usize;
    fn encode(&self, r: &[f64]) -> Result<ComplexBlock>;
    /// Decoded values clipped to `[0, 1]`.
    fn decode(&self, y: &ComplexBlock) -> Result<Vec<f64>>;
}

/// One trained direction of a feedback system: the sender's transmitter in
/// inference mode and the peer's receiver.
#[derive(Debug, Clone)]
pub struct LearnedLink {
    pub tx: RealTransmitter,
    pub rx: Receiver,
}

impl LearnedLink {
    /// Decoded values without clipping.
    pub fn decode_raw(&self, y: &ComplexBlock) -> Result<Vec<f64>> {
        Ok(self.rx.forward(y)?.into_vec())
    }
}

impl RealLink for LearnedLink {
    fn symbols(&self) -> usize {
        self.tx.symbols()
    }

    fn encode(&self, r: &[f64]) -> Result<ComplexBlock> {
        self.tx.forward_inference(r)
    }

    fn decode(&self, y: &ComplexBlock) -> Result<Vec<f64>> {
        Ok(self.decode_raw(y)?.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }
}

/// Carries per-example losses over the channel with a trained link.
///
/// Each loss uses `N_f` channel uses; order is preserved. Decoded losses are
/// returned unclipped.
#[derive(Debug, Clone)]
pub struct LearnedTransport {
    pub link: LearnedLink,
    pub channel: Channel,
}

impl LearnedTransport {
    pub fn new(link: LearnedLink, channel: Channel) -> Self {
        Self { link, channel }
    }

    /// `losses` must already be clipped to `[0, 1]`.
    pub fn deliver<R: Rng + ?Sized>(&self, losses: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let x = self.link.encode(losses)?;
        let y = self.channel.transmit(&x, rng);
        let out = self.link.decode_raw(&y)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::training("learned transport decoded a non-finite loss"));
        }
        Ok(out)
    }
}

/// Monte-Carlo mean of `(r - r_hat)^2` with `r ~ U(0, 1)` and the clipped
/// decoder output.
pub fn evaluate_mse<L: RealLink + ?Sized>(link: &L, channel: Channel, n_samples: usize, seeds: &SeedTree) -> Result<MeanEstimate> {
    if n_samples < 2 {
        return Err(Error::config("MSE evaluation needs at least two samples"));
    }
    let shards = run_shards(n_samples, |shard, n| -> Result<(f64, f64, usize)> {
        let mut rng = seeds.shard("mse", shard);
        let r: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let x = link.encode(&r)?;
        let y = channel.transmit(&x, &mut rng);
        let r_hat = link.decode(&y)?;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for (a, b) in r.iter().zip(&r_hat) {
            let e = (a - b).powi(2);
            sum += e;
            sum_sq += e * e;
        }
        Ok((sum, sum_sq, n))
    });
    let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0usize);
    for s in shards {
        let (a, b, n) = s?;
        sum += a;
        sum_sq += b;
        count += n;
    }
    let n = count as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(MeanEstimate {
        mean,
        std_err: (var / n).sqrt(),
        n: count,
    })
}
