//! Receivers: a plain dense network, or a radio transformer network (RTN)
//! that first estimates a complex channel gain `h`, divides the received
//! symbols by it, and only then classifies or regresses.

use num_complex::Complex64;

use crate::channel::ComplexBlock;
use crate::matrix::Matrix;
use crate::nn::{Learner, Trace};
use crate::{Error, Result};

/// Channel estimates smaller than this in magnitude are pushed away from zero
/// before dividing.
pub const ESTIMATE_FLOOR: f64 = 1e-6;

/// Returns `h` with `ESTIMATE_FLOOR` added to its magnitude when it is
/// smaller than the floor.
pub fn guard_estimate(h: Complex64) -> Complex64 {
    let mag = h.norm();
    if mag >= ESTIMATE_FLOOR {
        h
    } else if mag == 0.0 {
        Complex64::new(ESTIMATE_FLOOR, 0.0)
    } else {
        h * ((mag + ESTIMATE_FLOOR) / mag)
    }
}

/// Divides every row of `y` by its (guarded) channel estimate.
pub fn equalize(y: &ComplexBlock, h: &[Complex64]) -> ComplexBlock {
    let mut out = ComplexBlock::zeros(y.rows(), y.symbols());
    for (i, &hi) in h.iter().enumerate() {
        let hi = guard_estimate(hi);
        for j in 0..y.symbols() {
            out.set(i, j, y.get(i, j) / hi);
        }
    }
    out
}

/// What the receiver output is trained against.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// Mean cross-entropy over the batch; the output must be a softmax.
    CrossEntropy { targets: &'a [usize] },
    /// Mean squared error between a single-column output and the targets.
    MeanSquaredError { targets: &'a [f64] },
}

#[derive(Debug, Clone)]
pub enum Receiver {
    Plain(Learner),
    Rtn { estimator: Learner, classifier: Learner },
}

/// A recorded receiver forward pass.
#[derive(Debug, Clone)]
pub struct ReceiverTrace {
    estimator: Option<(Trace, Vec<Complex64>, ComplexBlock)>,
    classifier: Trace,
}

impl ReceiverTrace {
    pub fn output(&self) -> &Matrix {
        self.classifier.output()
    }

    /// Channel estimates used for equalization (RTN only).
    pub fn estimates(&self) -> Option<&[Complex64]> {
        self.estimator.as_ref().map(|(_, h, _)| h.as_slice())
    }
}

/// Parameter gradients of a receiver.
#[derive(Debug, Clone)]
pub struct ReceiverGrads {
    pub classifier: Vec<f64>,
    pub estimator: Option<Vec<f64>>,
}

impl Receiver {
    pub fn rtn(estimator: Learner, classifier: Learner) -> Result<Self> {
        if estimator.net.output_dim() != 2 {
            return Err(Error::config("the channel estimator must output 2 reals"));
        }
        if estimator.net.input_dim() != classifier.net.input_dim() {
            return Err(Error::config("estimator and classifier must read the same symbols"));
        }
        Ok(Receiver::Rtn {
            estimator,
            classifier,
        })
    }

    pub fn classifier(&self) -> &Learner {
        match self {
            Receiver::Plain(c) | Receiver::Rtn { classifier: c, .. } => c,
        }
    }

    pub fn classifier_mut(&mut self) -> &mut Learner {
        match self {
            Receiver::Plain(c) | Receiver::Rtn { classifier: c, .. } => c,
        }
    }

    pub fn estimator(&self) -> Option<&Learner> {
        match self {
            Receiver::Plain(_) => None,
            Receiver::Rtn { estimator, .. } => Some(estimator),
        }
    }

    pub fn estimator_mut(&mut self) -> Option<&mut Learner> {
        match self {
            Receiver::Plain(_) => None,
            Receiver::Rtn { estimator, .. } => Some(estimator),
        }
    }

    pub fn is_rtn(&self) -> bool {
        matches!(self, Receiver::Rtn { .. })
    }

    pub fn input_symbols(&self) -> usize {
        self.classifier().net.input_dim() / 2
    }

    fn check(&self, y: &ComplexBlock) -> Result<()> {
        if y.symbols() != self.input_symbols() {
            return Err(Error::config(format!(
                "receiver expects {} symbols per row, got {}",
                self.input_symbols(),
                y.symbols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, y: &ComplexBlock) -> Result<Matrix> {
        Ok(self.forward_trace(y)?.classifier.into_output())
    }

    pub fn forward_trace(&self, y: &ComplexBlock) -> Result<ReceiverTrace> {
        self.check(y)?;
        match self {
            Receiver::Plain(c) => Ok(ReceiverTrace {
                estimator: None,
                classifier: c.net.forward_trace(y.as_real_matrix())?,
            }),
            Receiver::Rtn {
                estimator,
                classifier,
            } => {
                let est = estimator.net.forward_trace(y.as_real_matrix())?;
                let h: Vec<Complex64> = est
                    .output()
                    .iter_rows()
                    .map(|r| Complex64::new(r[0], r[1]))
                    .collect();
                let z = equalize(y, &h);
                let cls = classifier.net.forward_trace(z.as_real_matrix())?;
                Ok(ReceiverTrace {
                    estimator: Some((est, h, z)),
                    classifier: cls,
                })
            }
        }
    }

    /// RTN forward pass with the channel estimates supplied by the caller
    /// instead of the estimation network.
    pub fn forward_with_estimates(&self, y: &ComplexBlock, h: &[Complex64]) -> Result<Matrix> {
        self.check(y)?;
        if h.len() != y.rows() {
            return Err(Error::config("one channel estimate per row is required"));
        }
        let z = equalize(y, h);
        self.classifier().net.forward(z.as_real_matrix())
    }

    /// Gradients of the batch-mean objective.
    pub fn gradients(&self, trace: &ReceiverTrace, objective: Objective<'_>) -> Result<ReceiverGrads> {
        let out = trace.output();
        let s = out.rows() as f64;
        let want_input = self.is_rtn();
        let cls_net = &self.classifier().net;
        let cls = match objective {
            Objective::CrossEntropy { targets } => {
                cls_net.backward_cross_entropy(&trace.classifier, targets, 1.0 / s, want_input)?
            }
            Objective::MeanSquaredError { targets } => {
                if out.cols() != 1 || targets.len() != out.rows() {
                    return Err(Error::config("squared error needs one scalar output per target"));
                }
                let up: Vec<f64> = out
                    .as_slice()
                    .iter()
                    .zip(targets)
                    .map(|(o, t)| 2.0 * (o - t) / s)
                    .collect();
                cls_net.backward_trace(&trace.classifier, &Matrix::column(&up), want_input)?
            }
        };
        let estimator = match (self, &trace.estimator) {
            (Receiver::Rtn { estimator, .. }, Some((est_trace, h, z))) => {
                let gz = cls.input.as_ref().expect("input gradient requested");
                let n = z.symbols();
                let mut gh = Matrix::zeros(h.len(), 2);
                for (i, &hi) in h.iter().enumerate() {
                    // z = y / h  =>  dz/dh = -z / h; complex chain rule uses
                    // the conjugate derivative.
                    let hi = guard_estimate(hi);
                    let row = gz.row(i);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        let g = Complex64::new(row[j], row[n + j]);
                        acc += (-z.get(i, j) / hi).conj() * g;
                    }
                    gh[(i, 0)] = acc.re;
                    gh[(i, 1)] = acc.im;
                }
                Some(estimator.net.backward_trace(est_trace, &gh, false)?.params)
            }
            _ => None,
        };
        Ok(ReceiverGrads {
            classifier: cls.params,
            estimator,
        })
    }

    pub fn apply(&mut self, grads: &ReceiverGrads) -> Result<()> {
        self.classifier_mut().apply(&grads.classifier)?;
        if let (Some(est), Some(g)) = (self.estimator_mut(), grads.estimator.as_ref()) {
            est.apply(g)?;
        }
        Ok(())
    }

    /// One optimizer step on the batch-mean objective.
    pub fn train_step(&mut self, y: &ComplexBlock, objective: Objective<'_>) -> Result<()> {
        let trace = self.forward_trace(y)?;
        let grads = self.gradients(&trace, objective)?;
        self.apply(&grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_perturbation;
    use crate::nn::{Activation, MlpNetwork, OptimizerKind};
    use crate::rng::SeedTree;

    fn rtn(seed: u64, out: usize, last: Activation) -> Receiver {
        let mut rng = SeedTree::new(seed).stream("init");
        let est = MlpNetwork::glorot(&[4, 6, 2], &[Activation::Relu, Activation::Linear], &mut rng).unwrap();
        let cls = MlpNetwork::glorot(&[4, 5, out], &[Activation::Relu, last], &mut rng).unwrap();
        Receiver::rtn(
            Learner::new(est, OptimizerKind::Adam, 1e-3),
            Learner::new(cls, OptimizerKind::Adam, 1e-3),
        )
        .unwrap()
    }

    fn params(rx: &mut Receiver, which: usize) -> &mut [f64] {
        if which == 0 {
            rx.classifier_mut().net.params_mut()
        } else {
            rx.estimator_mut().unwrap().net.params_mut()
        }
    }

    fn loss(rx: &Receiver, y: &ComplexBlock, targets: &[usize]) -> f64 {
        let p = rx.forward(y).unwrap();
        targets.iter().enumerate().map(|(i, &t)| -p[(i, t)].ln()).sum::<f64>() / targets.len() as f64
    }

    #[test]
    fn guard_only_below_floor() {
        assert_eq!(guard_estimate(Complex64::new(0.3, 0.4)), Complex64::new(0.3, 0.4));
        let g = guard_estimate(Complex64::new(3e-7, 0.0));
        assert!((g.re - 1.3e-6).abs() < 1e-18);
        assert_eq!(guard_estimate(Complex64::new(0.0, 0.0)).re, ESTIMATE_FLOOR);
    }

    #[test]
    fn rtn_gradient_matches_finite_differences() {
        let mut rx = rtn(11, 3, Activation::Softmax);
        let y = sample_perturbation(5, 2, 1.0, &mut SeedTree::new(2).stream("y"));
        let targets = [0, 2, 1, 1, 0];
        let trace = rx.forward_trace(&y).unwrap();
        let grads = rx.gradients(&trace, Objective::CrossEntropy { targets: &targets }).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for which in 0..2 {
            let n = if which == 0 { rx.classifier().net.params().len() } else { rx.estimator().unwrap().net.params().len() };
            for k in 0..n {
                let orig = params(&mut rx, which)[k];
                params(&mut rx, which)[k] = orig + h;
                let lp = loss(&rx, &y, &targets);
                params(&mut rx, which)[k] = orig - h;
                let lm = loss(&rx, &y, &targets);
                params(&mut rx, which)[k] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let an = if which == 0 { grads.classifier[k] } else { grads.estimator.as_ref().unwrap()[k] };
                let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                if fd.abs().max(an.abs()) > 1e-7 {
                    worst = worst.max(err);
                }
            }
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn unit_estimate_reduces_to_plain_receiver() {
        let mut rx = rtn(3, 3, Activation::Softmax);
        {
            let est = rx.estimator_mut().unwrap();
            est.net.params_mut().iter_mut().for_each(|p| *p = 0.0);
            let (_, b) = est.net.layer_range(1);
            est.net.params_mut()[b.start] = 1.0;
        }
        let y = sample_perturbation(4, 2, 1.0, &mut SeedTree::new(4).stream("y"));
        let direct = rx.classifier().net.forward(y.as_real_matrix()).unwrap();
        assert_eq!(rx.forward(&y).unwrap(), direct);
    }

    #[test]
    fn scaled_input_with_matching_estimate_is_invariant() {
        let rx = rtn(5, 1, Activation::Linear);
        let y = sample_perturbation(3, 2, 1.0, &mut SeedTree::new(6).stream("y"));
        let c = Complex64::new(0.4, -1.3);
        let mut scaled = y.clone();
        for i in 0..3 {
            for j in 0..2 {
                scaled.set(i, j, c * y.get(i, j));
            }
        }
        let a = rx.forward_with_estimates(&y, &[Complex64::new(1.0, 0.0); 3]).unwrap();
        let b = rx.forward_with_estimates(&scaled, &[c; 3]).unwrap();
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
