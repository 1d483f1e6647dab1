use rand::Rng;
use rand_distr::StandardNormal;

use crate::feedback::LearnedTransport;
use crate::Result;

/// How per-example losses travel from the receiver back to the transmitter.
#[derive(Debug, Clone)]
pub enum FeedbackTransport {
    /// Losses arrive unchanged.
    Perfect,
    /// `l~ = l + e`, `e ~ N(0, variance)` i.i.d. per example. Noisy losses are
    /// used as they arrive, including negative values.
    AdditiveGaussian { variance: f64 },
    /// Losses are sent over the channel by a trained real-number link.
    Learned(Box<LearnedTransport>),
}

impl FeedbackTransport {
    pub fn deliver<R: Rng + ?Sized>(&self, losses: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        match self {
            FeedbackTransport::Perfect => Ok(losses.to_vec()),
            FeedbackTransport::AdditiveGaussian { variance } => {
                let sd = variance.sqrt();
                Ok(losses
                    .iter()
                    .map(|l| {
                        let e: f64 = rng.sample(StandardNormal);
                        l + sd * e
                    })
                    .collect())
            }
            FeedbackTransport::Learned(link) => link.deliver(losses, rng),
        }
    }

    pub fn label(&self) -> String {
        match self {
            FeedbackTransport::Perfect => "perfect".into(),
            FeedbackTransport::AdditiveGaussian { variance } => format!("gaussian:{variance}"),
            FeedbackTransport::Learned(_) => "learned".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use crate::stats::MeanEstimate;

    #[test]
    fn perfect_is_identity() {
        let l = [0.0, 0.25, 1.0, 3.5];
        let out = FeedbackTransport::Perfect.deliver(&l, &mut SeedTree::new(0).stream("f")).unwrap();
        assert_eq!(out, l);
    }

    #[test]
    fn gaussian_error_moments() {
        let l = vec![0.5; 200_000];
        let out = FeedbackTransport::AdditiveGaussian { variance: 0.01 }
            .deliver(&l, &mut SeedTree::new(1).stream("f"))
            .unwrap();
        assert_eq!(out.len(), l.len());
        let err: Vec<f64> = out.iter().map(|v| v - 0.5).collect();
        let m = MeanEstimate::from_samples(&err);
        assert!(m.mean.abs() < 3.0 * m.std_err);
        let mse = err.iter().map(|e| e * e).sum::<f64>() / err.len() as f64;
        assert!((mse / 0.01 - 1.0).abs() < 0.02);
    }
}
