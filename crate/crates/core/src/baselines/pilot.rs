use num_complex::Complex64;

use crate::bler::MessageScheme;
use crate::channel::ComplexBlock;
use crate::receiver::{equalize, guard_estimate};
use crate::{Error, Result};

/// Known unit-energy pilot symbol.
pub const PILOT: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Estimates `h` from a leading pilot in every row and returns the remaining
/// symbols divided by it, together with the estimates.
///
/// Estimates with magnitude below the floor are pushed away from zero, which
/// happens exactly when `|y_pilot| < 1e-6 |pilot|`.
pub fn pilot_equalize(y: &ComplexBlock, pilot: Complex64) -> Result<(ComplexBlock, Vec<Complex64>)> {
    if y.symbols() < 2 {
        return Err(Error::config("a piloted block needs at least two symbols"));
    }
    let h: Vec<Complex64> = (0..y.rows()).map(|i| guard_estimate(y.get(i, 0) / pilot)).collect();
    let data = equalize(&y.slice_symbols(1, y.symbols()), &h);
    Ok((data, h))
}

/// Prepends [`PILOT`] to every row of a block.
pub fn with_pilot(x: &ComplexBlock) -> ComplexBlock {
    let mut out = ComplexBlock::zeros(x.rows(), x.symbols() + 1);
    for i in 0..x.rows() {
        out.set(i, 0, PILOT);
        for j in 0..x.symbols() {
            out.set(i, j + 1, x.get(i, j));
        }
    }
    out
}

/// A message scheme extended with one leading pilot symbol for coherent
/// detection over fading channels.
#[derive(Debug, Clone)]
pub struct Piloted<S> {
    pub inner: S,
}

impl<S> Piloted<S> {
    pub fn new(inner: S) -> Self {
        Self { inner }
    }
}

impl<S: MessageScheme> MessageScheme for Piloted<S> {
    fn messages(&self) -> usize {
        self.inner.messages()
    }

    fn symbols(&self) -> usize {
        self.inner.symbols() + 1
    }

    fn encode(&self, messages: &[usize]) -> Result<ComplexBlock> {
        Ok(with_pilot(&self.inner.encode(messages)?))
    }

    fn decode(&self, y: &ComplexBlock) -> Result<Vec<usize>> {
        let (data, _) = pilot_equalize(y, PILOT)?;
        self.inner.decode(&data)
    }
}
