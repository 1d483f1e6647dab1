//! Score-function (REINFORCE) gradients for Gaussian-perturbed transmitters.
//!
//! A transmitter emits `x`; the symbols actually sent are
//! `x_p = a x + w` with `w ~ CN(0, var I)` and a fixed gain `a`
//! (`a = 1` for the message transmitter, `a = sqrt(1 - var)` for the
//! real-number transmitters). Writing the complex symbols in the `[re | im]`
//! layout, every real component of `w` has variance `var / 2`, so
//!
//! ```text
//! grad_x log pi(x_p | x) = (2 a / var) (x_p - a x)
//! ```
//!
//! and the policy gradient of the expected loss is estimated by
//! `1/S sum_i l_i J_i^T (2 a / var) (x_p_i - a x_i)` where `J_i` is the
//! Jacobian of the transmitter output w.r.t. its parameters.

use crate::matrix::Matrix;
use crate::{Error, Result};

/// Upstream gradient rows `(2 a l_i / (var S)) (x_p_i - a x_i)` to feed into a
/// transmitter backward pass. Backpropagating them yields the batch policy
/// gradient.
pub fn reinforce_upstream(x: &Matrix, x_p: &Matrix, losses: &[f64], var: f64, gain: f64) -> Result<Matrix> {
    if x.shape() != x_p.shape() || losses.len() != x.rows() {
        return Err(Error::config(format!(
            "policy gradient: x {:?}, x_p {:?}, {} losses",
            x.shape(),
            x_p.shape(),
            losses.len()
        )));
    }
    if !(var > 0.0) {
        return Err(Error::config(format!("exploration variance must be positive, got {var}")));
    }
    let s = x.rows() as f64;
    let mut up = Matrix::zeros(x.rows(), x.cols());
    for (i, &l) in losses.iter().enumerate() {
        let c = 2.0 * gain * l / (var * s);
        for ((u, &xp), &xv) in up.row_mut(i).iter_mut().zip(x_p.row(i)).zip(x.row(i)) {
            *u = c * (xp - gain * xv);
        }
    }
    Ok(up)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_losses_zero_upstream() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let xp = Matrix::from_rows(&[[1.2, -0.1], [0.3, 0.9]]).unwrap();
        let up = reinforce_upstream(&x, &xp, &[0.0, 0.0], 0.02, 1.0).unwrap();
        assert!(up.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scaled_policy_rows() {
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let xp = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let a = 0.5;
        let up = reinforce_upstream(&x, &xp, &[3.0], 0.1, a).unwrap();
        // (2 * 0.5 * 3 / 0.1) * ([1, 1] - 0.5 [1, 2]) = 30 * [0.5, 0]
        assert!((up[(0, 0)] - 15.0).abs() < 1e-12);
        assert!(up[(0, 1)].abs() < 1e-12);
    }
}
