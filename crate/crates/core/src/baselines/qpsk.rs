use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::bler::MessageScheme;
use crate::channel::{snr_to_noise_var, ComplexBlock};
use crate::stats::q_function;
use crate::{Error, Result};

/// Uncoded Gray-mapped QPSK: 2 bits per symbol, `M = 4^N`.
///
/// Bit `2k` of the message sets the sign of the real part of symbol `k`
/// (0 -> positive), bit `2k + 1` the sign of the imaginary part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Qpsk {
    symbols: usize,
}

impl Qpsk {
    pub fn new(symbols: usize) -> Result<Self> {
        if symbols == 0 || symbols > 16 {
            return Err(Error::config(format!("QPSK supports 1..=16 symbols, got {symbols}")));
        }
        Ok(Self { symbols })
    }

    /// 256 messages over 4 symbols.
    pub fn m256() -> Self {
        Self { symbols: 4 }
    }

    fn map_bits(bits: usize) -> Complex64 {
        let re = if bits & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
        let im = if bits & 2 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
        Complex64::new(re, im)
    }
}

impl MessageScheme for Qpsk {
    fn messages(&self) -> usize {
        1 << (2 * self.symbols)
    }

    fn symbols(&self) -> usize {
        self.symbols
    }

    fn encode(&self, messages: &[usize]) -> Result<ComplexBlock> {
        let m = self.messages();
        let mut x = ComplexBlock::zeros(messages.len(), self.symbols);
        for (i, &msg) in messages.iter().enumerate() {
            if msg >= m {
                return Err(Error::input(format!("message {msg} out of range 0..{m}")));
            }
            for k in 0..self.symbols {
                x.set(i, k, Self::map_bits((msg >> (2 * k)) & 3));
            }
        }
        Ok(x)
    }

    fn decode(&self, y: &ComplexBlock) -> Result<Vec<usize>> {
        if y.symbols() != self.symbols {
            return Err(Error::config(format!("QPSK expects {} symbols, got {}", self.symbols, y.symbols())));
        }
        Ok((0..y.rows())
            .map(|i| {
                (0..self.symbols).fold(0usize, |acc, k| {
                    let z = y.get(i, k);
                    let bits = usize::from(z.re < 0.0) | (usize::from(z.im < 0.0) << 1);
                    acc | (bits << (2 * k))
                })
            })
            .collect())
    }
}

/// Closed-form QPSK block error rate on AWGN with coherent detection:
/// `1 - (1 - Q(sqrt(SNR)))^(2 n_symbols)`.
pub fn qpsk_bler_closed_form(snr_db: f64, n_symbols: usize) -> f64 {
    let snr = 1.0 / snr_to_noise_var(snr_db);
    let q = q_function(snr.sqrt());
    1.0 - (1.0 - q).powi(2 * n_symbols as i32)
}
