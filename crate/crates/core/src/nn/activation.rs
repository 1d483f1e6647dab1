use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Non-linearity applied after a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    /// Exponential linear unit with `alpha = 1`.
    Elu,
    Relu,
    Linear,
    /// Row-wise softmax. Only valid on the final layer.
    Softmax,
}

impl Activation {
    pub fn is_elementwise(self) -> bool {
        !matches!(self, Activation::Softmax)
    }

    /// Scalar value of an element-wise activation.
    ///
    /// Softmax is not element-wise; use [`Activation::apply_row`].
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
            Activation::Softmax => panic!("softmax is not element-wise"),
        }
    }

    /// Derivative of an element-wise activation at pre-activation `z`.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
            Activation::Softmax => panic!("softmax is not element-wise"),
        }
    }

    /// Applies the activation in place to one row of pre-activations.
    pub fn apply_row(self, row: &mut [f64]) {
        match self {
            Activation::Softmax => softmax_in_place(row),
            Activation::Linear => {}
            kind => row.iter_mut().for_each(|z| *z = kind.value(*z)),
        }
    }

    /// Turns `upstream` (gradient w.r.t. the activation output) into the
    /// gradient w.r.t. the pre-activation, in place.
    pub fn backprop_row(self, pre: &[f64], post: &[f64], upstream: &mut [f64]) {
        match self {
            Activation::Linear => {}
            Activation::Softmax => {
                let dot: f64 = upstream.iter().zip(post).map(|(g, p)| g * p).sum();
                for (g, p) in upstream.iter_mut().zip(post) {
                    *g = p * (*g - dot);
                }
            }
            kind => {
                for (g, &z) in upstream.iter_mut().zip(pre) {
                    *g *= kind.derivative(z);
                }
            }
        }
    }
}

/// Applies `kind` to a single row and returns the result.
pub fn activation_apply(kind: Activation, x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    kind.apply_row(&mut out);
    out
}

/// Element-wise derivative of `kind` at `x`.
///
/// For softmax this is the diagonal of the Jacobian, `p_i (1 - p_i)`.
pub fn activation_grad(kind: Activation, x: &[f64]) -> Vec<f64> {
    match kind {
        Activation::Softmax => activation_apply(kind, x)
            .into_iter()
            .map(|p| p * (1.0 - p))
            .collect(),
        kind => x.iter().map(|&z| kind.derivative(z)).collect(),
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in row.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in row.iter_mut() {
        *z /= sum;
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Elu => "elu",
            Activation::Relu => "relu",
            Activation::Linear => "linear",
            Activation::Softmax => "softmax",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elu" => Ok(Activation::Elu),
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            "softmax" => Ok(Activation::Softmax),
            other => Err(Error::config(format!("unknown activation `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elu_values() {
        assert_eq!(Activation::Elu.value(0.0), 0.0);
        assert_eq!(Activation::Elu.value(1.0), 1.0);
        assert!((Activation::Elu.value(-50.0) + 1.0).abs() < 1e-15);
        assert!(Activation::Elu.value(-5.0) > -1.0);
    }

    #[test]
    fn relu_values_and_grads() {
        assert_eq!(Activation::Relu.value(-3.0), 0.0);
        assert_eq!(Activation::Relu.derivative(-3.0), 0.0);
        assert_eq!(Activation::Relu.value(2.0), 2.0);
        assert_eq!(Activation::Relu.derivative(2.0), 1.0);
    }

    #[test]
    fn softmax_analytic() {
        let p = activation_apply(Activation::Softmax, &[2f64.ln(), 1f64.ln()]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_survives_large_logits() {
        let p = activation_apply(Activation::Softmax, &[1000.0, 0.0, -1000.0]);
        assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for kind in [Activation::Elu, Activation::Relu, Activation::Linear] {
            for &z in &[-2.3, -0.4, 0.7, 1.9] {
                let fd = (kind.value(z + h) - kind.value(z - h)) / (2.0 * h);
                assert!((fd - kind.derivative(z)).abs() < 1e-8, "{kind} at {z}");
            }
        }
    }

    #[test]
    fn softmax_vjp_matches_finite_differences() {
        let z = [0.3, -1.2, 0.8, 0.05];
        let g = [0.7, -0.1, 0.4, 1.3];
        let post = activation_apply(Activation::Softmax, &z);
        let mut delta = g.to_vec();
        Activation::Softmax.backprop_row(&z, &post, &mut delta);
        let h = 1e-6;
        for i in 0..z.len() {
            let mut zp = z;
            let mut zm = z;
            zp[i] += h;
            zm[i] -= h;
            let fp: f64 = activation_apply(Activation::Softmax, &zp).iter().zip(&g).map(|(a, b)| a * b).sum();
            let fm: f64 = activation_apply(Activation::Softmax, &zm).iter().zip(&g).map(|(a, b)| a * b).sum();
            assert!(((fp - fm) / (2.0 * h) - delta[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in [Activation::Elu, Activation::Relu, Activation::Linear, Activation::Softmax] {
            assert_eq!(kind.to_string().parse::<Activation>().unwrap(), kind);
        }
        assert!("tanh".parse::<Activation>().is_err());
    }
}
