//! Uncoded analog transmission of a scalar: the centered, scaled value is
//! repeated on every channel use and averaged at the receiver.

use num_complex::Complex64;

use crate::channel::ComplexBlock;
use crate::feedback::RealLink;
use crate::{Error, Result};

use super::pilot::{pilot_equalize, PILOT};

/// First two moments of the scalar source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceMoments {
    pub mean: f64,
    pub var: f64,
}

impl SourceMoments {
    /// `U(0, 1)`.
    pub const UNIFORM: Self = Self {
        mean: 0.5,
        var: 1.0 / 12.0,
    };

    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !mean.is_finite() || !(var > 0.0 && var.is_finite()) {
            return Err(Error::config(format!("invalid source moments: mean {mean}, variance {var}")));
        }
        Ok(Self { mean, var })
    }

    fn symbol(&self, r: f64) -> Complex64 {
        Complex64::new(1.0, 1.0) * ((r - self.mean) / (2.0 * self.var).sqrt())
    }

    /// Inverse of [`Self::symbol`] averaged over `reps` equalized symbols.
    fn estimate(&self, symbols: impl Iterator<Item = Complex64>, reps: usize) -> f64 {
        let s: f64 = symbols.map(|z| z.re + z.im).sum();
        let r = s * (2.0 * self.var).sqrt() / (2.0 * reps as f64) + self.mean;
        r.clamp(0.0, 1.0)
    }
}

impl Default for SourceMoments {
    fn default() -> Self {
        Self::UNIFORM
    }
}

/// Repetition over AWGN: all `N_f` uses carry the value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogAwgn {
    pub symbols: usize,
    pub moments: SourceMoments,
}

impl AnalogAwgn {
    pub fn new(symbols: usize, moments: SourceMoments) -> Result<Self> {
        if symbols == 0 {
            return Err(Error::config("analog transmission needs at least one channel use"));
        }
        Ok(Self { symbols, moments })
    }
}

impl RealLink for AnalogAwgn {
    fn symbols(&self) -> usize {
        self.symbols
    }

    fn encode(&self, r: &[f64]) -> Result<ComplexBlock> {
        Ok(analog_tx_awgn(r, self.symbols, &self.moments))
    }

    fn decode(&self, y: &ComplexBlock) -> Result<Vec<f64>> {
        Ok(analog_rx_awgn(y, &self.moments))
    }
}

/// Pilot plus repetition over block fading: the first use is the pilot and
/// the remaining `N_f - 1` carry the value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogRbf {
    pub symbols: usize,
    pub moments: SourceMoments,
}

impl AnalogRbf {
    pub fn new(symbols: usize, moments: SourceMoments) -> Result<Self> {
        if symbols < 2 {
            return Err(Error::config("piloted analog transmission needs at least two channel uses"));
        }
        Ok(Self { symbols, moments })
    }
}

impl RealLink for AnalogRbf {
    fn symbols(&self) -> usize {
        self.symbols
    }

    fn encode(&self, r: &[f64]) -> Result<ComplexBlock> {
        Ok(analog_tx_rbf(r, self.symbols, &self.moments))
    }

    fn decode(&self, y: &ComplexBlock) -> Result<Vec<f64>> {
        analog_rx_rbf(y, &self.moments)
    }
}

pub fn analog_tx_awgn(r: &[f64], symbols: usize, moments: &SourceMoments) -> ComplexBlock {
    let mut x = ComplexBlock::zeros(r.len(), symbols);
    for (i, &v) in r.iter().enumerate() {
        let z = moments.symbol(v);
        for k in 0..symbols {
            x.set(i, k, z);
        }
    }
    x
}

pub fn analog_rx_awgn(y: &ComplexBlock, moments: &SourceMoments) -> Vec<f64> {
    (0..y.rows())
        .map(|i| moments.estimate(y.row(i).into_iter(), y.symbols()))
        .collect()
}

pub fn analog_tx_rbf(r: &[f64], symbols: usize, moments: &SourceMoments) -> ComplexBlock {
    let mut x = ComplexBlock::zeros(r.len(), symbols);
    for (i, &v) in r.iter().enumerate() {
        let z = moments.symbol(v);
        x.set(i, 0, PILOT);
        for k in 1..symbols {
            x.set(i, k, z);
        }
    }
    x
}

pub fn analog_rx_rbf(y: &ComplexBlock, moments: &SourceMoments) -> Result<Vec<f64>> {
    let (data, _) = pilot_equalize(y, PILOT)?;
    Ok((0..data.rows())
        .map(|i| moments.estimate(data.row(i).into_iter(), data.symbols()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Channel, ChannelKind};
    use crate::feedback::evaluate_mse;
    use crate::rng::SeedTree;
    use rand::Rng;

    fn grid() -> Vec<f64> {
        (0..=1000).map(|k| k as f64 / 1000.0).collect()
    }

    #[test]
    fn noiseless_round_trips() {
        let m = SourceMoments::UNIFORM;
        let r = grid();
        let back = analog_rx_awgn(&analog_tx_awgn(&r, 4, &m), &m);
        for (a, b) in r.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut y = analog_tx_rbf(&r, 5, &m);
        let h = Complex64::new(-0.3, 1.7);
        for i in 0..y.rows() {
            for k in 0..5 {
                let v = y.get(i, k) * h;
                y.set(i, k, v);
            }
        }
        let back = analog_rx_rbf(&y, &m).unwrap();
        for (a, b) in r.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_average_energy() {
        let m = SourceMoments::UNIFORM;
        let mut rng = SeedTree::new(3).stream("r");
        let r: Vec<f64> = (0..200_000).map(|_| rng.gen()).collect();
        let e = analog_tx_awgn(&r, 4, &m).mean_symbol_energy();
        assert!((e - 1.0).abs() < 0.01, "{e}");
        let e = analog_tx_rbf(&r, 5, &m).mean_symbol_energy();
        assert!((e - 1.0).abs() < 0.01, "{e}");
    }

    #[test]
    fn awgn_mse_matches_scalar_oracle() {
        // Scalar model of the same receiver: the average of N_f noisy copies
        // of s = (r - 1/2)(1 + j)/sqrt(2 var) reduces to r + e with
        // e ~ N(0, var * sigma^2 / (2 N_f)), then clipped.
        let snr_db = 10.0;
        let sigma2 = 10f64.powf(-snr_db / 10.0);
        let link = AnalogAwgn::new(4, SourceMoments::UNIFORM).unwrap();
        let ch = Channel::at_snr(ChannelKind::Awgn, snr_db).unwrap();
        let got = evaluate_mse(&link, ch, 1_000_000, &SeedTree::new(4)).unwrap();

        let mut rng = SeedTree::new(5).stream("oracle");
        let sd = (sigma2 / 12.0 / 8.0).sqrt();
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let r: f64 = rng.gen();
            let e: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * sd;
            sum += (r - (r + e).clamp(0.0, 1.0)).powi(2);
        }
        let want = sum / n as f64;
        assert!((got.mean - want).abs() / want < 0.02, "{} vs {want}", got.mean);
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(AnalogAwgn::new(0, SourceMoments::UNIFORM).is_err());
        assert!(AnalogRbf::new(1, SourceMoments::UNIFORM).is_err());
        assert!(SourceMoments::new(0.5, 0.0).is_err());
    }
}
