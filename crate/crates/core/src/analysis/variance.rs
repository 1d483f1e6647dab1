//! Variance of the policy-gradient estimator when the losses it is built from
//! arrive with additive Gaussian noise.
//!
//! With noisy losses `l~_i = l_i + sigma_l e_i`, `e_i ~ N(0, 1)`, the batch
//! estimator is linear in the losses:
//!
//! ```text
//! g~ = g(l) + sigma_l g(e)
//! ```
//!
//! so one replication (one batch of messages, perturbations and channel
//! noise) needs only two backward passes, `c = g(l)` and `n = g(e)`, to cover
//! every point of a `sigma_l^2` grid. Over `R` replications with clean mean
//! `c_bar`,
//!
//! ```text
//! V(sigma_l^2) = sum_r |c_r - c_bar|^2 / (R - 1)
//!              + sum_r (2 sigma_l <c_r - c_bar, n_r> + sigma_l^2 |n_r|^2) / R
//! ```
//!
//! The first term is the clean variance `A / S`. The noise term has
//! expectation `sigma_l^2 E|D|^2 / S`, where `D` is the per-example score
//! vector `(2 / sigma_c^2) J^T (x_p - x)`. Since every real component of
//! `x_p - x` has variance `sigma_c^2 / 2`,
//!
//! ```text
//! E|D|^2 = (2 / sigma_c^2) E|J|_F^2
//! ```
//!
//! with `J` the Jacobian of the normalized transmitter output.

use crate::channel::Channel;
use crate::comm::CommSystem;
use crate::montecarlo::par_map;
use crate::rng::SeedTree;
use crate::stats::MeanEstimate;
use crate::{Error, Result};
use rand_distr::{Distribution, StandardNormal};

/// `V` at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariancePoint {
    pub sigma_l2: f64,
    pub v: f64,
    /// Standard error of `v` across replications.
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    /// Training stage the system was in, e.g. `untrained` or `1000`.
    pub stage: String,
    pub batch_size: usize,
    pub replications: usize,
    pub points: Vec<VariancePoint>,
    /// Clean variance `A / S` (the `sigma_l^2 = 0` value).
    pub clean_variance: f64,
    /// `E|D|^2` measured from the replications: `S` times the mean of
    /// `|n_r|^2`.
    pub d_norm_sq: f64,
}

impl VarianceReport {
    /// `A / S + sigma_l^2 E|D|^2 / S`.
    pub fn predicted(&self, sigma_l2: f64) -> f64 {
        self.clean_variance + sigma_l2 * self.d_norm_sq / self.batch_size as f64
    }

    /// Noise term `B = sigma_l^2 E|D|^2`.
    pub fn predicted_b(&self, sigma_l2: f64) -> f64 {
        sigma_l2 * self.d_norm_sq
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::config("the sigma_l^2 grid is empty"));
    }
    if let Some(v) = grid.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::config(format!("loss noise variance must be finite and >= 0, got {v}")));
    }
    Ok(())
}

/// Clean and unit-noise gradients of one replication.
fn replication(sys: &CommSystem, channel: &Channel, batch: usize, seeds: &SeedTree) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut msg = seeds.stream("messages");
    let mut perturb = seeds.stream("perturbation");
    let mut ch = seeds.stream("channel");
    let mut noise = seeds.stream("loss-noise");
    let pb = sys.policy_batch(channel, batch, &mut msg, &mut perturb, &mut ch)?;
    let clean = sys.policy_gradient(&pb, &pb.losses)?;
    let e: Vec<f64> = (0..batch).map(|_| StandardNormal.sample(&mut noise)).collect();
    let unit = sys.policy_gradient(&pb, &e)?;
    Ok((clean, unit))
}

/// Estimates `V` on every point of `grid` from `replications` independent
/// batches of `batch_size` examples.
pub fn estimate_variance(
    sys: &CommSystem,
    channel: &Channel,
    grid: &[f64],
    batch_size: usize,
    replications: usize,
    stage: &str,
    seeds: &SeedTree,
) -> Result<VarianceReport> {
    validate_grid(grid)?;
    if replications < 2 {
        return Err(Error::config("variance estimation needs at least two replications"));
    }
    if batch_size == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    let reps = par_map(replications, |r| replication(sys, channel, batch_size, &seeds.child(&format!("rep/{r}"))))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let p = reps[0].0.len();
    let mut c_bar = vec![0.0; p];
    for (c, _) in &reps {
        for (m, v) in c_bar.iter_mut().zip(c) {
            *m += v;
        }
    }
    let rf = replications as f64;
    c_bar.iter_mut().for_each(|m| *m /= rf);

    // Per replication: |c - c_bar|^2, <c - c_bar, n>, |n|^2.
    let stats: Vec<(f64, f64, f64)> = reps
        .iter()
        .map(|(c, n)| {
            let d: Vec<f64> = c.iter().zip(&c_bar).map(|(a, b)| a - b).collect();
            (dot(&d, &d), dot(&d, n), dot(n, n))
        })
        .collect();

    let points = grid
        .iter()
        .map(|&s2| {
            let s = s2.sqrt();
            let samples: Vec<f64> = stats
                .iter()
                .map(|&(cc, cn, nn)| cc * rf / (rf - 1.0) + 2.0 * s * cn + s2 * nn)
                .collect();
            let est = MeanEstimate::from_samples(&samples);
            VariancePoint {
                sigma_l2: s2,
                v: est.mean,
                std_err: est.std_err,
            }
        })
        .collect();

    let clean_variance = stats.iter().map(|s| s.0).sum::<f64>() / (rf - 1.0);
    let d_norm_sq = batch_size as f64 * stats.iter().map(|s| s.2).sum::<f64>() / rf;
    Ok(VarianceReport {
        stage: stage.to_string(),
        batch_size,
        replications,
        points,
        clean_variance,
        d_norm_sq,
    })
}

/// `V` at a single loss-noise variance.
pub fn estimate_v(
    sys: &CommSystem,
    channel: &Channel,
    sigma_l2: f64,
    batch_size: usize,
    replications: usize,
    seeds: &SeedTree,
) -> Result<f64> {
    Ok(estimate_variance(sys, channel, &[sigma_l2], batch_size, replications, "", seeds)?.points[0].v)
}

/// `E|D|^2` from explicit per-example score vectors: every example is its own
/// batch of one, so `D` is the gradient for a unit loss.
pub fn estimate_d_norm_sq(sys: &CommSystem, channel: &Channel, examples: usize, seeds: &SeedTree) -> Result<MeanEstimate> {
    if examples < 2 {
        return Err(Error::config("need at least two examples"));
    }
    let norms = par_map(examples, |i| -> Result<f64> {
        let s = seeds.child(&format!("example/{i}"));
        let pb = sys.policy_batch(channel, 1, &mut s.stream("messages"), &mut s.stream("perturbation"), &mut s.stream("channel"))?;
        let d = sys.policy_gradient(&pb, &[1.0])?;
        Ok(dot(&d, &d))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(MeanEstimate::from_samples(&norms))
}

/// Closed-form noise term `B = sigma_l^2 (2 / sigma_c^2) E|J|_F^2`, averaged
/// over `messages`. Divide by the batch size to compare with `V`.
pub fn closed_form_b(sys: &CommSystem, sigma_l2: f64, messages: &[usize]) -> Result<f64> {
    validate_grid(&[sigma_l2])?;
    if messages.is_empty() {
        return Err(Error::config("need at least one message"));
    }
    let j = sys.tx_jacobian_frobenius_sq(messages)?;
    let mean_j = j.iter().sum::<f64>() / j.len() as f64;
    Ok(sigma_l2 * 2.0 / sys.config().exploration_var * mean_j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelKind;
    use crate::comm::CommConfig;

    fn small() -> (CommSystem, Channel) {
        let cfg = CommConfig {
            messages: 16,
            channel_uses: 2,
            ..CommConfig::awgn()
        };
        let sys = CommSystem::new(cfg, &mut SeedTree::new(2).stream("init")).unwrap();
        (sys, Channel::at_snr(ChannelKind::Awgn, 10.0).unwrap())
    }

    #[test]
    fn grid_point_zero_is_clean_variance() {
        let (sys, ch) = small();
        let r = estimate_variance(&sys, &ch, &[0.0, 1.0], 64, 20, "untrained", &SeedTree::new(3)).unwrap();
        assert!((r.points[0].v - r.clean_variance).abs() <= 1e-12 * r.clean_variance);
        assert!(r.points[1].v > r.points[0].v);
    }

    #[test]
    fn closed_form_is_linear_and_zero_at_origin() {
        let (sys, _) = small();
        let msgs: Vec<usize> = (0..16).collect();
        assert_eq!(closed_form_b(&sys, 0.0, &msgs).unwrap(), 0.0);
        let b1 = closed_form_b(&sys, 0.3, &msgs).unwrap();
        let b2 = closed_form_b(&sys, 0.6, &msgs).unwrap();
        assert!((b2 - 2.0 * b1).abs() <= 1e-12 * b2);
    }

    #[test]
    fn closed_form_matches_explicit_scores() {
        let (sys, ch) = small();
        let msgs: Vec<usize> = (0..16).collect();
        let b = closed_form_b(&sys, 1.0, &msgs).unwrap();
        let d = estimate_d_norm_sq(&sys, &ch, 4000, &SeedTree::new(5)).unwrap();
        assert!((d.mean - b).abs() < 4.0 * d.std_err, "{} +- {} vs {b}", d.mean, d.std_err);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (sys, ch) = small();
        let s = SeedTree::new(1);
        assert!(estimate_variance(&sys, &ch, &[0.0], 8, 1, "", &s).is_err());
        assert!(estimate_variance(&sys, &ch, &[-1.0], 8, 4, "", &s).is_err());
        assert!(estimate_variance(&sys, &ch, &[], 8, 4, "", &s).is_err());
    }
}
