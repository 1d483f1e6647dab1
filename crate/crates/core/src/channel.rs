//! Channel models and the complex symbol container they act on.
//!
//! A channel is a black box `P(y | x)`: learners hand it a block of symbols
//! and get a block back, nothing else. The fading coefficients drawn by the
//! Rayleigh block-fading model are only observable through [`rbf_apply`],
//! which exists for test harnesses and baselines' oracles.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::matrix::Matrix;
use crate::{Error, Result};

/// `S` rows of `N` complex symbols.
///
/// Stored as one `S x 2N` real matrix whose rows are laid out as
/// `[re_0, .., re_{N-1}, im_0, .., im_{N-1}]`. Networks consume and produce
/// exactly this layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBlock {
    symbols: usize,
    data: Matrix,
}

impl ComplexBlock {
    pub fn zeros(rows: usize, symbols: usize) -> Self {
        Self {
            symbols,
            data: Matrix::zeros(rows, 2 * symbols),
        }
    }

    /// Wraps an `S x 2N` matrix in the `[re | im]` layout.
    pub fn from_real_matrix(data: Matrix) -> Result<Self> {
        if data.cols() % 2 != 0 {
            return Err(Error::config(format!(
                "a complex block needs an even number of real columns, got {}",
                data.cols()
            )));
        }
        Ok(Self {
            symbols: data.cols() / 2,
            data,
        })
    }

    pub fn from_parts(re: &Matrix, im: &Matrix) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::config("real and imaginary parts differ in shape"));
        }
        let (s, n) = re.shape();
        let mut block = Self::zeros(s, n);
        for i in 0..s {
            let row = block.data.row_mut(i);
            row[..n].copy_from_slice(re.row(i));
            row[n..].copy_from_slice(im.row(i));
        }
        Ok(block)
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut block = Self::zeros(rows.len(), n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::config(format!("row {i} has {} symbols, expected {n}", r.len())));
            }
            for (j, z) in r.iter().enumerate() {
                block.set(i, j, *z);
            }
        }
        Ok(block)
    }

    /// Splits back into separate real and imaginary matrices.
    pub fn to_parts(&self) -> (Matrix, Matrix) {
        let (s, n) = (self.rows(), self.symbols);
        let mut re = Matrix::zeros(s, n);
        let mut im = Matrix::zeros(s, n);
        for i in 0..s {
            let row = self.data.row(i);
            re.row_mut(i).copy_from_slice(&row[..n]);
            im.row_mut(i).copy_from_slice(&row[n..]);
        }
        (re, im)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    #[inline]
    pub fn symbols(&self) -> usize {
        self.symbols
    }

    #[inline]
    pub fn get(&self, row: usize, sym: usize) -> Complex64 {
        let r = self.data.row(row);
        Complex64::new(r[sym], r[self.symbols + sym])
    }

    #[inline]
    pub fn set(&mut self, row: usize, sym: usize, z: Complex64) {
        let n = self.symbols;
        let r = self.data.row_mut(row);
        r[sym] = z.re;
        r[n + sym] = z.im;
    }

    pub fn row(&self, row: usize) -> Vec<Complex64> {
        (0..self.symbols).map(|j| self.get(row, j)).collect()
    }

    /// `||x_i||^2` of row `i`.
    pub fn row_energy(&self, row: usize) -> f64 {
        self.data.row(row).iter().map(|v| v * v).sum()
    }

    /// Mean energy per complex symbol over the whole block.
    pub fn mean_symbol_energy(&self) -> f64 {
        let total: f64 = self.data.as_slice().iter().map(|v| v * v).sum();
        total / (self.rows() * self.symbols) as f64
    }

    pub fn as_real_matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn as_real_matrix_mut(&mut self) -> &mut Matrix {
        &mut self.data
    }

    pub fn into_real_matrix(self) -> Matrix {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.is_finite()
    }

    /// Rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> ComplexBlock {
        ComplexBlock {
            symbols: self.symbols,
            data: self.data.slice_rows(start, end),
        }
    }

    /// Columns `start..end` of symbols, keeping the layout.
    pub fn slice_symbols(&self, start: usize, end: usize) -> ComplexBlock {
        let mut out = ComplexBlock::zeros(self.rows(), end - start);
        for i in 0..self.rows() {
            for j in start..end {
                out.set(i, j - start, self.get(i, j));
            }
        }
        out
    }
}

/// Which stochastic channel model to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    /// Additive white Gaussian noise.
    Awgn,
    /// Rayleigh block fading: one `h ~ CN(0, 1)` per row, plus AWGN.
    Rbf,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Rbf => "rbf",
        })
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "awgn" => Ok(ChannelKind::Awgn),
            "rbf" => Ok(ChannelKind::Rbf),
            other => Err(Error::config(format!("unknown channel `{other}` (expected awgn or rbf)"))),
        }
    }
}

/// Noise variance per complex symbol for a given SNR, assuming unit average
/// symbol energy.
pub fn snr_to_noise_var(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// A channel as seen by learners: symbols in, symbols out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    kind: ChannelKind,
    noise_var: f64,
}

impl Channel {
    pub fn new(kind: ChannelKind, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::config(format!("noise variance must be positive, got {noise_var}")));
        }
        Ok(Self { kind, noise_var })
    }

    pub fn at_snr(kind: ChannelKind, snr_db: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::config(format!("SNR must be finite, got {snr_db}")));
        }
        Self::new(kind, snr_to_noise_var(snr_db))
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Sends every row of `x` through the channel.
    pub fn transmit<R: Rng + ?Sized>(&self, x: &ComplexBlock, rng: &mut R) -> ComplexBlock {
        match self.kind {
            ChannelKind::Awgn => awgn_apply(x, self.noise_var, rng),
            ChannelKind::Rbf => rbf_apply(x, self.noise_var, rng).0,
        }
    }
}

/// Circular complex Gaussian sample with total variance `var`.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(var: f64, rng: &mut R) -> Complex64 {
    let sd = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

/// `y = x + n`, `n ~ CN(0, noise_var)` i.i.d. per symbol.
pub fn awgn_apply<R: Rng + ?Sized>(x: &ComplexBlock, noise_var: f64, rng: &mut R) -> ComplexBlock {
    let mut y = x.clone();
    let sd = (noise_var / 2.0).sqrt();
    for v in y.data.as_mut_slice() {
        let n: f64 = rng.sample(StandardNormal);
        *v += sd * n;
    }
    y
}

/// `y_i = h_i x_i + n_i` with one `h_i ~ CN(0, 1)` per row.
///
/// Returns the fading coefficients alongside the output.
pub fn rbf_apply<R: Rng + ?Sized>(x: &ComplexBlock, noise_var: f64, rng: &mut R) -> (ComplexBlock, Vec<Complex64>) {
    let mut y = ComplexBlock::zeros(x.rows(), x.symbols());
    let mut hs = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let h = complex_normal(1.0, rng);
        for j in 0..x.symbols() {
            y.set(i, j, h * x.get(i, j) + complex_normal(noise_var, rng));
        }
        hs.push(h);
    }
    (y, hs)
}

/// Exploration perturbation: `S x N` i.i.d. `CN(0, var)` entries.
pub fn sample_perturbation<R: Rng + ?Sized>(rows: usize, symbols: usize, var: f64, rng: &mut R) -> ComplexBlock {
    let mut w = ComplexBlock::zeros(rows, symbols);
    let sd = (var / 2.0).sqrt();
    for v in w.data.as_mut_slice() {
        let n: f64 = rng.sample(StandardNormal);
        *v = sd * n;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn block(rows: usize, n: usize, seed: u64) -> ComplexBlock {
        let mut rng = SeedTree::new(seed).stream("x");
        sample_perturbation(rows, n, 1.0, &mut rng)
    }

    #[test]
    fn snr_conversion() {
        assert_eq!(snr_to_noise_var(0.0), 1.0);
        assert!((snr_to_noise_var(10.0) - 0.1).abs() < 1e-15);
        assert!((snr_to_noise_var(20.0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn layout_round_trip() {
        let x = block(3, 4, 1);
        let (re, im) = x.to_parts();
        assert_eq!(ComplexBlock::from_parts(&re, &im).unwrap(), x);
        assert_eq!(x.get(2, 1).re, x.as_real_matrix()[(2, 1)]);
        assert_eq!(x.get(2, 1).im, x.as_real_matrix()[(2, 5)]);
    }

    #[test]
    fn noiseless_awgn_is_identity() {
        let x = block(5, 4, 2);
        let mut rng = SeedTree::new(0).stream("noise");
        let y = awgn_apply(&x, 1e-30, &mut rng);
        for (a, b) in x.as_real_matrix().as_slice().iter().zip(y.as_real_matrix().as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn awgn_deterministic_and_input_untouched() {
        let x = block(4, 2, 3);
        let before = x.clone();
        let y1 = awgn_apply(&x, 0.3, &mut SeedTree::new(9).stream("n"));
        let y2 = awgn_apply(&x, 0.3, &mut SeedTree::new(9).stream("n"));
        assert_eq!(y1, y2);
        assert_eq!(x, before);
        assert_eq!(y1.rows(), 4);
        assert_eq!(y1.symbols(), 2);
    }

    #[test]
    fn noiseless_rbf_equalizes() {
        let x = block(6, 3, 4);
        let (y, h) = rbf_apply(&x, 1e-30, &mut SeedTree::new(1).stream("n"));
        for i in 0..6 {
            for j in 0..3 {
                let d = y.get(i, j) / h[i] - x.get(i, j);
                assert!(d.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn channel_rejects_nonpositive_variance() {
        assert!(Channel::new(ChannelKind::Awgn, 0.0).is_err());
        assert!(Channel::new(ChannelKind::Rbf, -1.0).is_err());
        assert!(Channel::at_snr(ChannelKind::Awgn, f64::NAN).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("AWGN".parse::<ChannelKind>().unwrap(), ChannelKind::Awgn);
        assert_eq!("rbf".parse::<ChannelKind>().unwrap(), ChannelKind::Rbf);
        assert!("rayleigh".parse::<ChannelKind>().is_err());
    }
}
